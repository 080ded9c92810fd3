#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <memory>

#include "bcr/model.hpp"
#include "bcr/refinement.hpp"

using namespace bcr;

namespace {

Tensor random_control(int m, int k, uint64_t seed) {
  Rng rng(seed);
  Tensor c({m, k, 12});
  for (int64_t i = 0; i < c.size(); ++i) c.data()[i] = rng.uniform(0.15, 0.85);
  return c;
}

Tensor diagonal_control() {
  Tensor c({1, 1, 12});
  for (int j = 0; j < 6; ++j) {
    c.data()[2 * j] = j / 5.0;
    c.data()[2 * j + 1] = j / 5.0;
  }
  return c;
}

void zero_param(ParamStore& ps, const std::string& name) {
  Parameter* p = ps.find(name);
  REQUIRE(p != nullptr);
  for (int64_t i = 0; i < p->value.size(); ++i) p->value.data()[i] = 0.0;
}

FeaturePyramid random_pyramid(int c, int h, int w, uint64_t seed) {
  Rng rng(seed);
  FeaturePyramid pyr;
  for (int l = 0; l < 4; ++l) {
    Tensor f({c, h >> l, w >> l});
    for (int64_t i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform(-1, 1);
    pyr.f[static_cast<size_t>(l)] = f;
  }
  return pyr;
}

}  // namespace

TEST_CASE("reference point layout") {
  // unit diagonal, N=5: t in {0,1/3,2/3,1} plus the midpoint
  Tensor p = sample_reference_points(diagonal_control(), 5);
  CHECK(p.shape() == Shape{1, 1, 5, 2});
  const double expect[5] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 0.5};
  for (int i = 0; i < 5; ++i) {
    CHECK(p.at({0, 0, i, 0}) == doctest::Approx(expect[i]).epsilon(1e-12));
    CHECK(p.at({0, 0, i, 1}) == doctest::Approx(expect[i]).epsilon(1e-12));
  }
}

TEST_CASE("reference points match evaluation oracle and end with the midpoint") {
  Tensor control = random_control(2, 3, 5);
  const int n = 26;
  Tensor p = sample_reference_points(control, n);
  for (int m = 0; m < 2; ++m) {
    for (int k = 0; k < 3; ++k) {
      BezierCurve c = curve_from_row(control.data() + (static_cast<int64_t>(m) * 3 + k) * 12);
      for (int i = 0; i < n - 1; ++i) {
        Point2 ref = eval_bezier(c, static_cast<double>(i) / (n - 2));
        CHECK(std::fabs(p.at({m, k, i, 0}) - ref.x) < 1e-12);
        CHECK(std::fabs(p.at({m, k, i, 1}) - ref.y) < 1e-12);
      }
      Point2 mid = eval_bezier(c, 0.5);
      CHECK(std::fabs(p.at({m, k, n - 1, 0}) - mid.x) < 1e-12);
      CHECK(std::fabs(p.at({m, k, n - 1, 1}) - mid.y) < 1e-12);
    }
  }
}

TEST_CASE("deformable attention over constant features collapses to a projection") {
  ParamStore ps;
  Rng rng(7);
  const int d = 8;
  DeformableCrossAttention attn(ps, "dca", d, 3, 2, 2, 2, rng);
  // equal weight logits plus constant feature maps: every sample sees the
  // same value and the softmax weights sum to one per head
  zero_param(ps, "dca.weight.w");
  zero_param(ps, "dca.weight.b");
  std::vector<Tensor> feats = {Tensor::full({3, 6, 6}, 0.7), Tensor::full({3, 3, 3}, 0.7)};
  Tensor q({1, 2, 3, d});
  Rng qr(8);
  for (int64_t i = 0; i < q.size(); ++i) q.data()[i] = qr.uniform(-1, 1);
  Tensor ref = Tensor::full({1, 2, 3, 2}, 0.5);
  Pass pass;
  Tensor out = attn.forward(pass, q, feats, ref);
  // queries differ, yet the aggregated value is the same for all of them
  for (int i = 1; i < 6; ++i)
    for (int j = 0; j < d; ++j)
      CHECK(out.data()[static_cast<int64_t>(i) * d + j] ==
            doctest::Approx(out.data()[j]).epsilon(1e-9));
}

TEST_CASE("deformable attention degenerate single head/point/level") {
  ParamStore ps;
  Rng rng(9);
  const int d = 4, c = 3;
  DeformableCrossAttention attn(ps, "dca", d, c, 1, 1, 1, rng);
  zero_param(ps, "dca.offset.w");
  zero_param(ps, "dca.offset.b");
  Rng fr(10);
  Tensor fmap({c, 5, 5});
  for (int64_t i = 0; i < fmap.size(); ++i) fmap.data()[i] = fr.uniform(-1, 1);
  Tensor q({1, 1, 2, d});
  for (int64_t i = 0; i < q.size(); ++i) q.data()[i] = fr.uniform(-1, 1);
  Tensor ref({1, 1, 2, 2}, {0.3, 0.4, 0.62, 0.55});
  Pass pass;
  Tensor out = attn.forward(pass, q, {fmap}, ref);

  // oracle: value-project the bilinear sample at the raw reference point,
  // then apply the output projection
  const Tensor& vw = ps.find("dca.value0.w")->value;   // [d,c,1,1]
  const Tensor& vb = ps.find("dca.value0.b")->value;   // [d]
  const Tensor& ow = ps.find("dca.out.w")->value;      // [d,d]
  const Tensor& ob = ps.find("dca.out.b")->value;      // [d]
  for (int t = 0; t < 2; ++t) {
    const double x = ref.at({0, 0, t, 0}), y = ref.at({0, 0, t, 1});
    const double fx = std::clamp(x * 5 - 0.5, 0.0, 4.0), fy = std::clamp(y * 5 - 0.5, 0.0, 4.0);
    const int c0 = static_cast<int>(fx), r0 = static_cast<int>(fy);
    const int c1 = std::min(c0 + 1, 4), r1 = std::min(r0 + 1, 4);
    const double wx = fx - c0, wy = fy - r0;
    double value[4];
    for (int dj = 0; dj < d; ++dj) {
      double acc = vb.at({dj});
      for (int ci = 0; ci < c; ++ci) {
        const double samp =
            (1 - wy) * ((1 - wx) * fmap.at({ci, r0, c0}) + wx * fmap.at({ci, r0, c1})) +
            wy * ((1 - wx) * fmap.at({ci, r1, c0}) + wx * fmap.at({ci, r1, c1}));
        acc += vw.at({dj, ci, 0, 0}) * samp;
      }
      value[dj] = acc;
    }
    for (int dj = 0; dj < d; ++dj) {
      double expect = ob.at({dj});
      for (int di = 0; di < d; ++di) expect += value[di] * ow.at({di, dj});
      CHECK(out.at({0, 0, t, dj}) == doctest::Approx(expect).epsilon(1e-10));
    }
  }
}

TEST_CASE("deformable attention matches a plain loop reference") {
  ParamStore ps;
  Rng rng(21);
  const int m = 1, k = 2, n = 4, d = 8, c = 5, heads = 2, points = 3, levels = 2;
  DeformableCrossAttention attn(ps, "dca", d, c, heads, points, levels, rng);
  Rng fr(22);
  std::vector<Tensor> feats;
  feats.push_back(Tensor({c, 7, 6}));
  feats.push_back(Tensor({c, 4, 3}));
  for (auto& f : feats)
    for (int64_t i = 0; i < f.size(); ++i) f.data()[i] = fr.uniform(-1, 1);
  Tensor q({m, k, n, d});
  for (int64_t i = 0; i < q.size(); ++i) q.data()[i] = fr.uniform(-1, 1);
  Tensor ref({m, k, n, 2});
  for (int64_t i = 0; i < ref.size(); ++i) ref.data()[i] = fr.uniform(0.1, 0.9);
  Pass pass;
  Tensor out = attn.forward(pass, q, feats, ref);

  const int dh = d / heads;
  const Tensor& offw = ps.find("dca.offset.w")->value;
  const Tensor& offb = ps.find("dca.offset.b")->value;
  const Tensor& ww = ps.find("dca.weight.w")->value;
  const Tensor& wb = ps.find("dca.weight.b")->value;
  const Tensor& ow = ps.find("dca.out.w")->value;
  const Tensor& ob = ps.find("dca.out.b")->value;

  auto bilin = [&](const Tensor& map, int ch, double x, double y) {
    const int hgt = map.dim(1), wid = map.dim(2);
    const double fx = std::clamp(x * wid - 0.5, 0.0, wid - 1.0);
    const double fy = std::clamp(y * hgt - 0.5, 0.0, hgt - 1.0);
    const int c0 = static_cast<int>(std::floor(fx)), r0 = static_cast<int>(std::floor(fy));
    const int c1 = std::min(c0 + 1, wid - 1), r1 = std::min(r0 + 1, hgt - 1);
    const double wx = fx - c0, wy = fy - r0;
    return (1 - wy) * ((1 - wx) * map.at({ch, r0, c0}) + wx * map.at({ch, r0, c1})) +
           wy * ((1 - wx) * map.at({ch, r1, c0}) + wx * map.at({ch, r1, c1}));
  };

  for (int qi = 0; qi < m * k * n; ++qi) {
    const double* qv = q.data() + static_cast<int64_t>(qi) * d;
    // linear heads
    std::vector<double> off(static_cast<size_t>(heads * levels * points * 2));
    for (size_t j = 0; j < off.size(); ++j) {
      double acc = offb.data()[j];
      for (int i = 0; i < d; ++i) acc += qv[i] * offw.at({i, static_cast<int>(j)});
      off[j] = acc;
    }
    std::vector<double> wl(static_cast<size_t>(heads * levels * points));
    for (size_t j = 0; j < wl.size(); ++j) {
      double acc = wb.data()[j];
      for (int i = 0; i < d; ++i) acc += qv[i] * ww.at({i, static_cast<int>(j)});
      wl[j] = acc;
    }
    // softmax over (level, point) per head
    for (int h = 0; h < heads; ++h) {
      double mx = -1e300, z = 0;
      for (int j = 0; j < levels * points; ++j) mx = std::max(mx, wl[static_cast<size_t>(h * levels * points + j)]);
      for (int j = 0; j < levels * points; ++j) {
        auto& v = wl[static_cast<size_t>(h * levels * points + j)];
        v = std::exp(v - mx);
        z += v;
      }
      for (int j = 0; j < levels * points; ++j) wl[static_cast<size_t>(h * levels * points + j)] /= z;
    }
    const double rx = ref.data()[2 * qi], ry = ref.data()[2 * qi + 1];
    std::vector<double> merged(static_cast<size_t>(d), 0.0);
    for (int h = 0; h < heads; ++h) {
      for (int l = 0; l < levels; ++l) {
        const Tensor& vw = ps.find("dca.value" + std::to_string(l) + ".w")->value;
        const Tensor& vb = ps.find("dca.value" + std::to_string(l) + ".b")->value;
        for (int p = 0; p < points; ++p) {
          const size_t base = static_cast<size_t>(((h * levels + l) * points + p) * 2);
          const double sx = rx + off[base], sy = ry + off[base + 1];
          const double weight = wl[static_cast<size_t>((h * levels + l) * points + p)];
          for (int dj = 0; dj < dh; ++dj) {
            const int ch_out = h * dh + dj;
            double val = vb.at({ch_out});
            for (int ci = 0; ci < c; ++ci)
              val += vw.at({ch_out, ci, 0, 0}) * bilin(feats[static_cast<size_t>(l)], ci, sx, sy);
            merged[static_cast<size_t>(ch_out)] += weight * val;
          }
        }
      }
    }
    for (int dj = 0; dj < d; ++dj) {
      double expect = ob.at({dj});
      for (int di = 0; di < d; ++di) expect += merged[static_cast<size_t>(di)] * ow.at({di, dj});
      CHECK(std::fabs(out.data()[static_cast<int64_t>(qi) * d + dj] - expect) < 1e-10);
    }
  }
}

TEST_CASE("structured self-attention single token reduces to the residual blocks") {
  ParamStore ps;
  Rng rng(31);
  const int d = 8;
  StructuredSelfAttention ssa(ps, "ssa", d, 2, rng);
  Tensor q({1, 1, 1, d});
  Rng qr(32);
  for (int64_t i = 0; i < q.size(); ++i) q.data()[i] = qr.uniform(-1, 1);
  Pass pass;
  Tensor out = ssa.forward(pass, q);
  CHECK(out.shape() == Shape{1, 1, 1, d});
  // single-token attention output is the value/output projection of the
  // token itself; just confirm finite, deterministic behavior here
  Tensor out2 = ssa.forward(pass, q);
  for (int64_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == out2.data()[i]);
}

TEST_CASE("structured self-attention is permutation-equivariant along K") {
  ParamStore ps;
  Rng rng(33);
  const int m = 2, k = 3, n = 4, d = 8;
  StructuredSelfAttention ssa(ps, "ssa", d, 2, rng);
  Tensor q({m, k, n, d});
  Rng qr(34);
  for (int64_t i = 0; i < q.size(); ++i) q.data()[i] = qr.uniform(-1, 1);
  Pass pass;
  Tensor base = ssa.forward(pass, q);
  const int perm[3] = {2, 0, 1};
  Tensor qp({m, k, n, d});
  for (int mi = 0; mi < m; ++mi)
    for (int ki = 0; ki < k; ++ki)
      for (int ni = 0; ni < n; ++ni)
        for (int di = 0; di < d; ++di)
          qp.data()[(((static_cast<int64_t>(mi) * k + ki) * n + ni) * d + di)] =
              q.at({mi, perm[ki], ni, di});
  Tensor out = ssa.forward(pass, qp);
  for (int mi = 0; mi < m; ++mi)
    for (int ki = 0; ki < k; ++ki)
      for (int ni = 0; ni < n; ++ni)
        for (int di = 0; di < d; ++di)
          CHECK(out.at({mi, ki, ni, di}) ==
                doctest::Approx(base.at({mi, perm[ki], ni, di})).epsilon(1e-11));
}

TEST_CASE("intra-curve block matches a per-slice attention oracle") {
  // with inter-curve and inter-category weights zeroed (and their layer
  // norms neutral), the output reduces to layernormed intra-curve attention
  ParamStore ps;
  Rng rng(35);
  const int m = 2, k = 3, n = 4, d = 8;
  StructuredSelfAttention ssa(ps, "ssa", d, 2, rng);
  for (const char* blk : {"inter_curve", "inter_category"})
    for (const char* lyr : {".q", ".k", ".v", ".o"})
      for (const char* wb : {".w", ".b"}) zero_param(ps, std::string("ssa.") + blk + lyr + wb);
  Tensor q({m, k, n, d});
  Rng qr(36);
  for (int64_t i = 0; i < q.size(); ++i) q.data()[i] = qr.uniform(-1, 1);
  Pass pass;
  Tensor full = ssa.forward(pass, q);

  // oracle: per (m,k) slice, the same block applied to the lone curve
  for (int mi = 0; mi < m; ++mi) {
    for (int ki = 0; ki < k; ++ki) {
      Tensor slice_in({1, n, d});
      for (int ni = 0; ni < n; ++ni)
        for (int di = 0; di < d; ++di)
          slice_in.data()[static_cast<int64_t>(ni) * d + di] = q.at({mi, ki, ni, di});
      // replicate: x = ln1(x + intra(x)); then two zeroed blocks apply
      // ln(x + o_bias-projection of zeros) = ln2(ln1_out + 0), etc.
      Tensor qq({1, 1, n, d}, slice_in.values());
      Tensor ref = ssa.forward(pass, qq);  // same weights, single slice
      for (int ni = 0; ni < n; ++ni)
        for (int di = 0; di < d; ++di)
          CHECK(full.at({mi, ki, ni, di}) ==
                doctest::Approx(ref.at({0, 0, ni, di})).epsilon(1e-11));
    }
  }
}

namespace {
struct StageFixture {
  ModelConfig cfg;
  std::unique_ptr<BcrModel> model;
  StageFixture() {
    cfg.categories = 2;
    cfg.channels = 6;
    cfg.hidden_dim = 8;
    cfg.heads = 2;
    cfg.sampling_points = 2;
    cfg.num_proposals = 3;
    cfg.ref_points = 8;
    cfg.pool_size = 4;
    cfg.category_names = {"a", "b"};
    model = std::make_unique<BcrModel>(cfg, 17);
  }
  void zero_stage_heads() {
    for (int s = 1; s <= 3; ++s) {
      for (int l = 0; l < 3; ++l) {
        zero_param(model->params(), "hcr.stage" + std::to_string(s) + ".offset.l" + std::to_string(l) + ".w");
        zero_param(model->params(), "hcr.stage" + std::to_string(s) + ".offset.l" + std::to_string(l) + ".b");
      }
    }
  }
};
}  // namespace

TEST_CASE("zero offset heads make stages fixed points") {
  StageFixture fx;
  fx.zero_stage_heads();
  FeaturePyramid pyr = random_pyramid(fx.cfg.channels, 16, 16, 41);
  Pass pass;
  ProposalBatch init;
  init.origin = 0;
  init.control = random_control(2, 3, 42);
  init.scores = Tensor::full({2, 3}, 0.5);

  RefineConfig rc;
  rc.categories = 2;
  rc.num_proposals = 3;
  rc.ref_points = 8;
  rc.hidden_dim = 8;
  rc.heads = 2;
  rc.sampling_points = 2;
  rc.feat_channels = 6;
  // single stage: refined points equal the sampled points, refit reproduces
  // the input curve
  ParamStore ps;
  Rng rng(43);
  RefineStage stage(ps, "st", rc, 1, rng);
  for (int l = 0; l < 3; ++l) {
    zero_param(ps, "st.offset.l" + std::to_string(l) + ".w");
    zero_param(ps, "st.offset.l" + std::to_string(l) + ".b");
  }
  StageOutput out = stage.forward(pass, init, pyr);
  Tensor p = sample_reference_points(init.control, 8);
  for (int mi = 0; mi < 2; ++mi)
    for (int ki = 0; ki < 3; ++ki)
      for (int i = 0; i < 7; ++i)
        for (int xy = 0; xy < 2; ++xy)
          CHECK(std::fabs(out.refined_points.at({mi, ki, i, xy}) - p.at({mi, ki, i, xy})) == 0.0);
  for (int64_t i = 0; i < init.control.size(); ++i)
    CHECK(std::fabs(out.proposals.control.data()[i] - init.control.data()[i]) < 1e-8);
}

TEST_CASE("zero score head gives exactly 0.5 stage scores") {
  StageFixture fx;
  ParamStore& ps = fx.model->params();
  for (int s = 1; s <= 3; ++s) {
    zero_param(ps, "hcr.stage" + std::to_string(s) + ".score.w");
    zero_param(ps, "hcr.stage" + std::to_string(s) + ".score.b");
  }
  Rng ir(44);
  Tensor img({4, 64, 64});
  for (int64_t i = 0; i < img.size(); ++i) img.data()[i] = ir.uniform();
  Pass pass;
  auto fwd = fx.model->forward(pass, img);
  for (const auto& st : fwd.stages)
    for (int64_t i = 0; i < st.proposals.scores.size(); ++i)
      CHECK(st.proposals.scores.data()[i] == 0.5);
}

TEST_CASE("hcr chains three stages with increasing origins and is deterministic") {
  StageFixture fx;
  Rng ir(45);
  Tensor img({4, 64, 64});
  for (int64_t i = 0; i < img.size(); ++i) img.data()[i] = ir.uniform();
  Pass pass;
  auto a = fx.model->forward(pass, img);
  CHECK(a.stages[0].proposals.origin == 1);
  CHECK(a.stages[1].proposals.origin == 2);
  CHECK(a.stages[2].proposals.origin == 3);

  StageFixture fx2;  // same seed -> same params
  Pass pass2;
  auto b = fx2.model->forward(pass2, img);
  for (int s = 0; s < 3; ++s)
    for (int64_t i = 0; i < a.stages[static_cast<size_t>(s)].proposals.control.size(); ++i)
      CHECK(a.stages[static_cast<size_t>(s)].proposals.control.data()[i] ==
            b.stages[static_cast<size_t>(s)].proposals.control.data()[i]);
}

TEST_CASE("zero offsets keep the acpi curves through the whole chain") {
  StageFixture fx;
  fx.zero_stage_heads();
  Rng ir(46);
  Tensor img({4, 64, 64});
  for (int64_t i = 0; i < img.size(); ++i) img.data()[i] = ir.uniform();
  Pass pass;
  auto fwd = fx.model->forward(pass, img);
  for (int s = 0; s < 3; ++s)
    for (int64_t i = 0; i < fwd.initial.control.size(); ++i)
      CHECK(std::fabs(fwd.stages[static_cast<size_t>(s)].proposals.control.data()[i] -
                      fwd.initial.control.data()[i]) < 1e-7);
}

TEST_CASE("each stage reads only its two designated pyramid levels") {
  StageFixture fx;
  FeaturePyramid pyr = random_pyramid(fx.cfg.channels, 16, 16, 47);
  ProposalBatch init;
  init.origin = 0;
  init.control = random_control(2, 3, 48);
  init.scores = Tensor::full({2, 3}, 0.5);

  RefineConfig rc;
  rc.categories = 2;
  rc.num_proposals = 3;
  rc.ref_points = 8;
  rc.hidden_dim = 8;
  rc.heads = 2;
  rc.sampling_points = 2;
  rc.feat_channels = 6;
  const int expected[3][2] = {{3, 4}, {2, 3}, {1, 2}};
  for (int s = 1; s <= 3; ++s) {
    ParamStore ps;
    Rng rng(50 + static_cast<uint64_t>(s));
    RefineStage stage(ps, "st", rc, s, rng);
    pyr.reset_reads();
    Pass pass;
    stage.forward(pass, init, pyr);
    for (int l = 1; l <= 4; ++l) {
      const bool should_read = l == expected[s - 1][0] || l == expected[s - 1][1];
      INFO("stage ", s, " level ", l);
      if (should_read)
        CHECK(pyr.reads[static_cast<size_t>(l - 1)] > 0);
      else
        CHECK(pyr.reads[static_cast<size_t>(l - 1)] == 0);
    }
  }
}

TEST_CASE("refined points stay inside the unit square") {
  StageFixture fx;
  Rng ir(51);
  Tensor img({4, 64, 64});
  for (int64_t i = 0; i < img.size(); ++i) img.data()[i] = ir.uniform();
  Pass pass;
  auto fwd = fx.model->forward(pass, img);
  for (const auto& st : fwd.stages)
    for (int64_t i = 0; i < st.refined_points.size(); ++i) {
      CHECK(st.refined_points.data()[i] >= 0.0);
      CHECK(st.refined_points.data()[i] <= 1.0);
    }
}

TEST_CASE("permuting proposals along K permutes stage outputs identically") {
  RefineConfig rc;
  rc.categories = 2;
  rc.num_proposals = 3;
  rc.ref_points = 8;
  rc.hidden_dim = 8;
  rc.heads = 2;
  rc.sampling_points = 2;
  rc.feat_channels = 6;
  ParamStore ps;
  Rng rng(61);
  RefineStage stage(ps, "st", rc, 2, rng);
  FeaturePyramid pyr = random_pyramid(6, 16, 16, 62);
  ProposalBatch init;
  init.origin = 0;
  init.control = random_control(2, 3, 63);
  init.scores = Tensor::full({2, 3}, 0.5);
  Pass pass;
  StageOutput base = stage.forward(pass, init, pyr);

  const int perm[3] = {1, 2, 0};
  ProposalBatch permuted = init;
  permuted.control = Tensor({2, 3, 12});
  for (int mi = 0; mi < 2; ++mi)
    for (int ki = 0; ki < 3; ++ki)
      for (int j = 0; j < 12; ++j)
        permuted.control.data()[(static_cast<int64_t>(mi) * 3 + ki) * 12 + j] =
            init.control.at({mi, perm[ki], j});
  StageOutput out = stage.forward(pass, permuted, pyr);
  for (int mi = 0; mi < 2; ++mi)
    for (int ki = 0; ki < 3; ++ki)
      for (int j = 0; j < 12; ++j)
        CHECK(out.proposals.control.at({mi, ki, j}) ==
              doctest::Approx(base.proposals.control.at({mi, perm[ki], j})).epsilon(1e-10));
}
