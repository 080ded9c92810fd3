#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bcr/backbone.hpp"
#include "bcr/losses.hpp"

using namespace bcr;

namespace {

Tensor random_image(int h, int w, uint64_t seed) {
  Rng rng(seed);
  Tensor img({4, h, w});
  for (int64_t i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("zero input with zero biases yields exactly 0.5 segmentation") {
  ParamStore ps;
  Rng rng(1);
  Backbone net(ps, "backbone", 8, 3, rng);
  Pass pass;
  BackboneOut out = net.forward(pass, Tensor({4, 64, 64}));
  for (int l = 1; l <= 4; ++l) {
    const Tensor& f = out.pyramid.level(l);
    for (int64_t i = 0; i < f.size(); ++i) CHECK(std::isfinite(f.data()[i]));
  }
  for (const Tensor& s : out.seg.s)
    for (int64_t i = 0; i < s.size(); ++i) CHECK(s.data()[i] == 0.5);
}

TEST_CASE("pyramid and segmentation shape contract") {
  ParamStore ps;
  Rng rng(2);
  Backbone net(ps, "backbone", 32, 3, rng);
  Pass pass;
  BackboneOut out = net.forward(pass, random_image(128, 128, 7));
  CHECK(out.pyramid.level(1).shape() == Shape{32, 32, 32});
  CHECK(out.pyramid.level(2).shape() == Shape{32, 16, 16});
  CHECK(out.pyramid.level(3).shape() == Shape{32, 8, 8});
  CHECK(out.pyramid.level(4).shape() == Shape{32, 4, 4});
  for (const Tensor& s : out.seg.s) {
    CHECK(s.shape() == Shape{3, 128, 128});
    for (int64_t i = 0; i < s.size(); ++i) {
      CHECK(s.data()[i] >= 0.0);
      CHECK(s.data()[i] <= 1.0);
    }
  }
  // rectangular input
  ParamStore ps2;
  Rng rng2(2);
  Backbone net2(ps2, "backbone", 8, 3, rng2);
  Pass p2;
  BackboneOut o2 = net2.forward(p2, random_image(64, 96, 8));
  CHECK(o2.pyramid.level(1).shape() == Shape{8, 16, 24});
  CHECK(o2.pyramid.level(4).shape() == Shape{8, 2, 3});

  CHECK_THROWS_AS(net2.forward(p2, random_image(60, 64, 9)), Error);
}

TEST_CASE("forward is bit-identical across runs for a fixed seed") {
  auto run = [] {
    ParamStore ps;
    Rng rng(42);
    Backbone net(ps, "backbone", 8, 3, rng);
    Pass pass;
    return net.forward(pass, random_image(64, 64, 3));
  };
  BackboneOut a = run(), b = run();
  for (int l = 1; l <= 4; ++l) {
    const Tensor& fa = a.pyramid.level(l);
    const Tensor& fb = b.pyramid.level(l);
    REQUIRE(fa.size() == fb.size());
    for (int64_t i = 0; i < fa.size(); ++i) CHECK(fa.data()[i] == fb.data()[i]);
  }
}

TEST_CASE("every encoder parameter receives gradient from each level's dice loss") {
  ParamStore ps;
  Rng rng(5);
  Backbone net(ps, "backbone", 6, 2, rng);
  Tensor img = random_image(64, 64, 11);
  Rng mr(12);
  Tensor gt({2, 64, 64});
  for (int64_t i = 0; i < gt.size(); ++i) gt.data()[i] = mr.uniform() < 0.2 ? 1.0 : 0.0;

  for (int level = 0; level < 4; ++level) {
    Tape tape;
    Pass pass(&tape);
    BackboneOut out = net.forward(pass, img);
    // single-level dice term
    const Tensor& s = out.seg.s[static_cast<size_t>(level)];
    Tensor inter = sum(mul(s, gt.detached()));
    Tensor dice = div(add_c(scale(inter, 2.0), 1.0), add_c(add(sum(s), sum(gt.detached())), 1.0));
    Tensor loss = add_c(neg(dice), 1.0);
    tape.backward(loss);
    for (const auto& p : ps.all()) {
      if (p->name.rfind("backbone.enc", 0) != 0 && p->name.rfind("backbone.stem", 0) != 0)
        continue;
      auto g = pass.grad(p.get());
      double norm = 0;
      for (double v : g) norm += v * v;
      INFO("level ", level + 1, " param ", p->name);
      CHECK(norm > 0.0);
    }
  }
}

namespace {
class ConstantAux : public AuxFeatureProvider {
 public:
  int channels() const override { return 2; }
  Tensor features(int, int h, int w) const override { return Tensor::full({2, h, w}, 0.25); }
};
}  // namespace

TEST_CASE("auxiliary feature provider participates in fusion") {
  ConstantAux aux;
  ParamStore ps;
  Rng rng(6);
  Backbone net(ps, "backbone", 8, 3, rng, &aux);
  CHECK(ps.find("backbone.fuse1.w")->value.dim(1) == 18);  // 2C + aux channels
  Pass pass;
  BackboneOut out = net.forward(pass, random_image(64, 64, 4));
  CHECK(out.pyramid.level(1).shape() == Shape{8, 16, 16});
}
