#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bcr/metrics.hpp"
#include "bcr/synth.hpp"

using namespace bcr;

namespace {

Mask rect_mask(int h, int w, int r0, int c0, int r1, int c1) {
  Mask m(h, w);
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) m.at(r, c) = 1;
  return m;
}

ProposalSet make_set(const std::vector<double>& scores) {
  ProposalSet s;
  s.origin = 3;
  s.curves.resize(1);
  s.scores.resize(1);
  Rng rng(3);
  for (double sc : scores) {
    BezierCurve c;
    for (auto& p : c.control) p = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
    s.curves[0].push_back(c);
    s.scores[0].push_back(sc);
  }
  return s;
}

}  // namespace

TEST_CASE("score thresholding is inclusive") {
  ProposalSet s = make_set({0.29, 0.30, 0.95});
  CHECK(finalize_predictions(s, 0.3)[0].size() == 2);
  CHECK(finalize_predictions(make_set({0.1, 0.2}), 0.3)[0].empty());
  CHECK(finalize_predictions(s, 0.0)[0].size() == 3);
}

TEST_CASE("mask metrics on rectangles") {
  Mask a = rect_mask(32, 32, 0, 0, 10, 10);
  auto [iou_same, dsc_same] = mask_metrics(a, a);
  CHECK(iou_same == 100.0);
  CHECK(dsc_same == 100.0);

  Mask b = rect_mask(32, 32, 20, 20, 30, 30);
  auto [iou_disj, dsc_disj] = mask_metrics(a, b);
  CHECK(iou_disj == 0.0);
  CHECK(dsc_disj == 0.0);

  // two 10x10 rectangles overlapping in a 10x5 strip
  Mask c = rect_mask(32, 32, 0, 5, 10, 15);
  auto [iou, dsc] = mask_metrics(a, c);
  CHECK(iou == doctest::Approx(100.0 * 50 / 150).epsilon(1e-12));
  CHECK(dsc == doctest::Approx(100.0 * 2 * 50 / 200).epsilon(1e-12));

  // conventions for empty masks
  Mask e(32, 32);
  auto [iou_e, dsc_e] = mask_metrics(e, e);
  CHECK(iou_e == 100.0);
  CHECK(dsc_e == 100.0);
  auto [iou_h, dsc_h] = mask_metrics(a, e);
  CHECK(iou_h == 0.0);
  CHECK(dsc_h == 0.0);
  CHECK_THROWS_AS(mask_metrics(a, Mask(16, 16)), Error);
}

TEST_CASE("mask metric symmetry and dsc-iou identity") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Mask a(16, 16), b(16, 16);
    for (size_t i = 0; i < a.data.size(); ++i) {
      a.data[i] = rng.uniform() < 0.4;
      b.data[i] = rng.uniform() < 0.4;
    }
    auto [iou_ab, dsc_ab] = mask_metrics(a, b);
    auto [iou_ba, dsc_ba] = mask_metrics(b, a);
    CHECK(iou_ab == iou_ba);
    CHECK(dsc_ab == dsc_ba);
    const double i = iou_ab / 100.0;
    CHECK(std::fabs(dsc_ab / 100.0 - 2 * i / (1 + i)) < 1e-9);
    CHECK(dsc_ab >= iou_ab - 1e-12);
  }
}

TEST_CASE("frequency weighted iou") {
  bool defined = true;
  CHECK(fwiou({40, 60}, {1, 1}, &defined) == doctest::Approx(50.0));
  CHECK(defined);
  CHECK(fwiou({40, 60}, {0, 7}, &defined) == doctest::Approx(60.0));
  CHECK(fwiou({30, 60, 90}, {1, 2, 1}, &defined) == doctest::Approx(60.0).epsilon(1e-12));
  CHECK(fwiou({40, 60}, {0, 0}, &defined) == 0.0);
  CHECK_FALSE(defined);
}

TEST_CASE("assd cases and the n-squared oracle") {
  CHECK(assd({{0, 0}}, {{0, 0}}, 100) == 0.0);
  CHECK(assd({{0, 0}}, {{3, 4}}, 100) == doctest::Approx(5.0));
  bool hit = false;
  CHECK(assd({}, {{1, 1}}, 42.5, &hit) == 42.5);
  CHECK(hit);
  CHECK(assd({}, {}, 42.5, &hit) == 0.0);
  CHECK_FALSE(hit);

  Rng rng(6);
  std::vector<Pixel> a, b;
  for (int i = 0; i < 20; ++i) {
    a.push_back({static_cast<int>(rng.below(50)), static_cast<int>(rng.below(50))});
    b.push_back({static_cast<int>(rng.below(50)), static_cast<int>(rng.below(50))});
  }
  // independent recomputation of the symmetric mean nearest-neighbor distance
  double total = 0;
  for (const Pixel& p : a) {
    double best = 1e300;
    for (const Pixel& q : b)
      best = std::min(best, std::hypot(double(p.r - q.r), double(p.c - q.c)));
    total += best;
  }
  for (const Pixel& q : b) {
    double best = 1e300;
    for (const Pixel& p : a)
      best = std::min(best, std::hypot(double(p.r - q.r), double(p.c - q.c)));
    total += best;
  }
  const double expect = total / static_cast<double>(a.size() + b.size());
  CHECK(std::fabs(assd(a, b, 0) - expect) < 1e-9);
  CHECK(std::fabs(assd(a, b, 0) - assd(b, a, 0)) < 1e-12);
}

namespace {
std::vector<Sample> targeted_dataset(uint64_t seed, int count) {
  auto data = generate_synthetic(seed, count, 64, 64);
  for (Sample& s : data)
    s.targets = prepare_targets(s.annotation, 2, 2, scaled_dilation_radius(64, 64));
  return data;
}
}  // namespace

TEST_CASE("oracle predictions score perfectly, empty predictions score zero") {
  auto data = targeted_dataset(3, 3);
  EvalConfig cfg;
  const std::vector<std::string> cats = {"ridge", "ligament", "silhouette"};
  MetricReport oracle = evaluate_with(
      [](const Sample& s) { return s.targets.gt_curves; }, data, cats, cfg);
  CHECK(oracle.mean_dsc == 100.0);
  CHECK(oracle.mean_iou == 100.0);
  CHECK(oracle.mean_assd == 0.0);
  CHECK(oracle.fwiou == 100.0);
  CHECK(oracle.assd_penalty_count == 0);

  MetricReport empty = evaluate_with(
      [&cats](const Sample&) {
        return std::vector<std::vector<BezierCurve>>(cats.size());
      },
      data, cats, cfg);
  CHECK(empty.mean_dsc == 0.0);
  CHECK(empty.mean_iou == 0.0);
  CHECK(empty.mean_assd == doctest::Approx(std::hypot(64.0, 64.0)));
  CHECK(empty.assd_penalty_count > 0);
}

TEST_CASE("report text and key values agree") {
  auto data = targeted_dataset(4, 2);
  EvalConfig cfg;
  const std::vector<std::string> cats = {"ridge", "ligament", "silhouette"};
  MetricReport rep = evaluate_with(
      [](const Sample& s) { return s.targets.gt_curves; }, data, cats, cfg);
  const std::string kv = rep.key_values();
  CHECK(kv.find("dsc.mean=100") != std::string::npos);
  CHECK(kv.find("images=2") != std::string::npos);
  const std::string table = rep.table();
  CHECK(table.find("ridge") != std::string::npos);
  CHECK(table.find("100.00") != std::string::npos);
}

TEST_CASE("metrics are invariant to polyline vertex reversal") {
  auto data = targeted_dataset(5, 2);
  EvalConfig cfg;
  const std::vector<std::string> cats = {"ridge", "ligament", "silhouette"};

  auto forward_pred = [](const Sample& s) { return s.targets.gt_curves; };
  auto reversed_pred = [](const Sample& s) {
    auto curves = s.targets.gt_curves;
    for (auto& cat : curves)
      for (auto& c : cat) std::reverse(c.control.begin(), c.control.end());
    return curves;
  };
  MetricReport a = evaluate_with(forward_pred, data, cats, cfg);
  MetricReport b = evaluate_with(reversed_pred, data, cats, cfg);
  // a reversed curve traces the same point set
  CHECK(a.mean_dsc == doctest::Approx(b.mean_dsc).epsilon(1e-12));
  CHECK(a.mean_iou == doctest::Approx(b.mean_iou).epsilon(1e-12));
  CHECK(a.mean_assd == doctest::Approx(b.mean_assd).epsilon(1e-12));
}

TEST_CASE("evaluate runs the model end to end") {
  ModelConfig mc;
  mc.categories = 3;
  mc.channels = 4;
  mc.hidden_dim = 8;
  mc.heads = 2;
  mc.sampling_points = 2;
  mc.num_proposals = 2;
  mc.ref_points = 8;
  mc.pool_size = 4;
  BcrModel model(mc, 1);
  auto data = generate_synthetic(6, 2, 64, 64);
  EvalConfig cfg;
  cfg.threshold = 0.0;  // untrained scores hover near 0.5
  MetricReport rep = evaluate(model, data, cfg);
  CHECK(rep.images == 2);
  CHECK(rep.mean_dsc >= 0.0);
  CHECK(rep.mean_dsc <= 100.0);
  CHECK(rep.mean_assd >= 0.0);
}
