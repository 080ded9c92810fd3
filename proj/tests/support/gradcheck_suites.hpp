#pragma once

// Shared gradient-check sweeps used by the unit tests and the acceptance
// suite. Each item pairs a label with a finite-difference comparison report.

#include <functional>
#include <string>
#include <vector>

#include "bcr/gradcheck.hpp"
#include "bcr/losses.hpp"
#include "bcr/ops.hpp"
#include "bcr/rng.hpp"
#include "bcr/synth.hpp"
#include "bcr/trainer.hpp"

namespace bcr_tests {

struct CheckItem {
  std::string name;
  bcr::GradCheckReport rep;
};

inline bcr::Tensor rnd(bcr::Shape shape, bcr::Rng& rng, double lo = -1.0, double hi = 1.0) {
  bcr::Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

// Runs every differentiable primitive against central finite differences on
// at least three input shapes. Reduction to a scalar goes through a fixed
// random weighting so that output gradients are non-uniform.
inline std::vector<CheckItem> primitive_gradchecks(double tol = 1e-5) {
  using namespace bcr;
  std::vector<CheckItem> items;

  // Fixed weighting so the reduced scalar is a deterministic function of the
  // probed input; finite differences would be meaningless otherwise.
  auto weighted = [](const Tensor& t) {
    Tensor w(t.shape());
    Rng local(4242);
    for (int64_t i = 0; i < w.size(); ++i) w.data()[i] = local.uniform(-1, 1);
    return sum(mul(t, w));
  };

  auto check = [&](const std::string& name, const Tensor& x,
                   const std::function<Tensor(Tape&, const Tensor&)>& f) {
    items.push_back({name, grad_check(f, x, 1e-5, tol)});
  };

  const std::vector<Shape> shapes = {{3}, {2, 4}, {2, 3, 2}};
  Rng rng(777);
  int si = 0;
  for (const Shape& shape : shapes) {
    const std::string tag = "#" + std::to_string(si++);
    Tensor other = rnd(shape, rng, 0.5, 1.5);

    check("add lhs " + tag, rnd(shape, rng),
          [&, other](Tape&, const Tensor& x) { return weighted(add(x, other)); });
    check("add rhs-scalar " + tag, rnd(shape, rng),
          [&](Tape&, const Tensor& x) { return weighted(add(x, Tensor::scalar(0.7))); });
    check("sub " + tag, rnd(shape, rng),
          [&, other](Tape&, const Tensor& x) { return weighted(sub(other, x)); });
    check("mul " + tag, rnd(shape, rng),
          [&, other](Tape&, const Tensor& x) { return weighted(mul(x, other)); });
    check("div num " + tag, rnd(shape, rng),
          [&, other](Tape&, const Tensor& x) { return weighted(div(x, other)); });
    check("div den " + tag, rnd(shape, rng, 0.5, 2.0),
          [&, other](Tape&, const Tensor& x) { return weighted(div(other, x)); });
    check("scale " + tag, rnd(shape, rng),
          [&](Tape&, const Tensor& x) { return weighted(scale(x, -1.7)); });
    check("neg " + tag, rnd(shape, rng),
          [&](Tape&, const Tensor& x) { return weighted(neg(x)); });
    check("abs " + tag, rnd(shape, rng, 0.2, 1.0),
          [&](Tape&, const Tensor& x) { return weighted(bcr::abs(x)); });
    check("relu " + tag, rnd(shape, rng, 0.1, 1.0),
          [&](Tape&, const Tensor& x) { return weighted(relu(x)); });
    check("sigmoid " + tag, rnd(shape, rng, -3, 3),
          [&](Tape&, const Tensor& x) { return weighted(sigmoid(x)); });
    check("logit " + tag, rnd(shape, rng, 0.1, 0.9),
          [&](Tape&, const Tensor& x) { return weighted(logit(x)); });
    check("exp " + tag, rnd(shape, rng),
          [&](Tape&, const Tensor& x) { return weighted(bcr::exp(x)); });
    check("log " + tag, rnd(shape, rng, 0.3, 2.0),
          [&](Tape&, const Tensor& x) { return weighted(bcr::log(x)); });
    check("clamp " + tag, rnd(shape, rng, -2, 2),
          [&](Tape&, const Tensor& x) { return weighted(clamp(x, -0.5, 0.5)); });
    check("sum " + tag, rnd(shape, rng), [&](Tape&, const Tensor& x) { return sum(x); });
    check("mean-axis " + tag, rnd(shape, rng),
          [&](Tape&, const Tensor& x) { return weighted(mean(x, 0)); });
    check("softmax " + tag, rnd(shape, rng, -2, 2),
          [&](Tape&, const Tensor& x) { return weighted(softmax(x, -1)); });
    check("reshape " + tag, rnd(shape, rng), [&](Tape&, const Tensor& x) {
      return weighted(reshape(x, {static_cast<int>(x.size())}));
    });
    check("slice " + tag, rnd(shape, rng), [&](Tape&, const Tensor& x) {
      return weighted(slice(x, 0, 0, x.dim(0) > 1 ? x.dim(0) - 1 : 1));
    });
    check("concat " + tag, rnd(shape, rng),
          [&, other](Tape&, const Tensor& x) { return weighted(concat({x, other}, 0)); });
  }

  // transpose (needs rank >= 2)
  {
    check("transpose", rnd({2, 3, 4}, rng),
          [&](Tape&, const Tensor& x) { return weighted(transpose(x, {2, 0, 1})); });
    check("gather_rows", rnd({5, 3}, rng),
          [&](Tape&, const Tensor& x) { return weighted(gather_rows(x, {4, 0, 4, 2})); });
  }

  // matmul, all operand roles
  {
    Tensor a = rnd({3, 4}, rng), b = rnd({4, 2}, rng);
    check("matmul lhs", a, [&, b](Tape&, const Tensor& x) { return weighted(matmul(x, b)); });
    check("matmul rhs", b, [&, a](Tape&, const Tensor& x) { return weighted(matmul(a, x)); });
    Tensor ab = rnd({2, 3, 4}, rng);
    check("matmul batched-lhs", ab,
          [&, b](Tape&, const Tensor& x) { return weighted(matmul(x, b)); });
    check("matmul broadcast-rhs", b,
          [&, ab](Tape&, const Tensor& x) { return weighted(matmul(ab, x)); });
  }

  // layer_norm and add_bias
  {
    Tensor x = rnd({4, 6}, rng), gamma = rnd({6}, rng, 0.5, 1.5), beta = rnd({6}, rng);
    check("layer_norm x", x, [&, gamma, beta](Tape&, const Tensor& v) {
      return weighted(layer_norm(v, gamma, beta));
    });
    check("layer_norm gamma", gamma, [&, x, beta](Tape&, const Tensor& v) {
      return weighted(layer_norm(x, v, beta));
    });
    check("layer_norm beta", beta, [&, x, gamma](Tape&, const Tensor& v) {
      return weighted(layer_norm(x, gamma, v));
    });
    Tensor bias = rnd({6}, rng);
    check("add_bias x", x,
          [&, bias](Tape&, const Tensor& v) { return weighted(add_bias(v, bias)); });
    check("add_bias b", bias,
          [&, x](Tape&, const Tensor& v) { return weighted(add_bias(x, v)); });
  }

  // conv2d strides 1 and 2, all operand roles
  for (int stride : {1, 2}) {
    Tensor x = rnd({2, 6, 5}, rng), w = rnd({3, 2, 3, 3}, rng), b = rnd({3}, rng);
    const std::string tag = " s" + std::to_string(stride);
    check("conv2d x" + tag, x,
          [&, w, b, stride](Tape&, const Tensor& v) { return weighted(conv2d(v, w, b, stride)); });
    check("conv2d w" + tag, w,
          [&, x, b, stride](Tape&, const Tensor& v) { return weighted(conv2d(x, v, b, stride)); });
    check("conv2d b" + tag, b,
          [&, x, w, stride](Tape&, const Tensor& v) { return weighted(conv2d(x, w, v, stride)); });
  }

  // pooling / upsampling
  {
    check("max_pool2d", rnd({2, 4, 6}, rng),
          [&](Tape&, const Tensor& x) { return weighted(max_pool2d(x)); });
    check("upsample_nearest", rnd({2, 3, 2}, rng),
          [&](Tape&, const Tensor& x) { return weighted(upsample_nearest(x, 2)); });
  }

  // bilinear sampling, both operand roles
  {
    Tensor map = rnd({2, 5, 7}, rng);
    Tensor coords = rnd({6, 2}, rng, 0.15, 0.85);
    check("bilinear map", map, [&, coords](Tape&, const Tensor& v) {
      return weighted(bilinear_sample(v, coords));
    });
    check("bilinear coords", coords, [&, map](Tape&, const Tensor& v) {
      return weighted(bilinear_sample(map, v));
    });
  }

  // positional encoding w.r.t. coordinates
  {
    check("positional_encoding", rnd({5, 2}, rng, 0.1, 0.9),
          [&](Tape&, const Tensor& x) { return weighted(positional_encoding(x, 8)); });
  }

  return items;
}

// Finite-difference checks for every loss term plus the composed objective
// on a small fabricated instance.
inline std::vector<CheckItem> loss_gradchecks(double tol = 1e-4) {
  using namespace bcr;
  std::vector<CheckItem> items;
  Rng rng(909);

  auto logits = [&rng](Shape shape) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-1.5, 1.5);
    return t;
  };

  {
    Tensor targets({3, 4});
    for (int64_t i = 0; i < targets.size(); ++i) targets.data()[i] = rng.uniform() < 0.4;
    items.push_back({"focal_loss", grad_check(
        [&](Tape&, const Tensor& x) { return focal_loss(sigmoid(x), targets); },
        logits({3, 4}), 1e-5, tol)});
  }
  {
    Tensor gt({2, 6, 6});
    for (int64_t i = 0; i < gt.size(); ++i) gt.data()[i] = rng.uniform() < 0.3;
    Tensor probe = logits({2, 6, 6});
    items.push_back({"dice_loss", grad_check(
        [&](Tape&, const Tensor& x) {
          Tensor p = sigmoid(x);
          std::array<Tensor, 4> seg = {p, scale(p, 0.9), scale(p, 0.8), scale(p, 0.7)};
          return dice_loss(seg, gt);
        },
        probe, 1e-5, tol)});
  }
  {
    Tensor target({2, 3, 3});
    for (int64_t i = 0; i < target.size(); ++i) target.data()[i] = rng.uniform() < 0.2;
    items.push_back({"induction_bce", grad_check(
        [&](Tape&, const Tensor& x) { return bce_loss(sigmoid(x), target); },
        logits({2, 3, 3}), 1e-5, tol)});
  }
  {
    Tensor gt_row({12});
    for (int64_t i = 0; i < 12; ++i) gt_row.data()[i] = rng.uniform(0.2, 0.8);
    Tensor pred_row({12});
    for (int64_t i = 0; i < 12; ++i) pred_row.data()[i] = rng.uniform(0.2, 0.8);
    items.push_back({"curve_distance", grad_check(
        [&](Tape&, const Tensor& x) { return curve_distance_t(x, gt_row); },
        pred_row, 1e-6, tol)});
  }
  {
    // composed objective on a 2-category, 3-proposal instance
    const int m = 2, k = 3;
    LossTargets gt;
    gt.gt_curves.resize(m);
    for (int mi = 0; mi < m; ++mi) {
      BezierCurve c;
      for (auto& p : c.control) p = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
      gt.gt_curves[static_cast<size_t>(mi)].push_back(c);
    }
    gt.gt_masks = Tensor({m, 8, 8});
    for (int64_t i = 0; i < gt.gt_masks.size(); ++i) gt.gt_masks.data()[i] = rng.uniform() < 0.3;
    gt.induction_map = Tensor({m, 2, 2});
    gt.induction_map.data()[0] = 1;
    gt.induction_map.data()[6] = 1;

    std::vector<StagePrediction> stages;
    for (int h = 0; h < 4; ++h) {
      StagePrediction sp;
      sp.control = Tensor({m, k, 12});
      for (int64_t i = 0; i < sp.control.size(); ++i) sp.control.data()[i] = rng.uniform(0.2, 0.8);
      sp.scores = Tensor({m, k});
      for (int64_t i = 0; i < sp.scores.size(); ++i) sp.scores.data()[i] = rng.uniform(0.2, 0.8);
      stages.push_back(sp);
    }
    std::array<Tensor, 4> seg;
    Tensor base({m, 8, 8});
    for (int64_t i = 0; i < base.size(); ++i) base.data()[i] = rng.uniform(0.1, 0.9);
    for (auto& s : seg) s = base;
    Tensor s_init({m, 2, 2}, {0.4, 0.5, 0.6, 0.3, 0.2, 0.7, 0.5, 0.4});
    LossWeights w;
    items.push_back({"total_loss/control", grad_check(
        [&](Tape&, const Tensor& x) {
          auto st = stages;
          st[1].control = x;
          return total_loss(st, seg, s_init, gt, 6, w);
        },
        stages[1].control, 1e-6, tol)});
    items.push_back({"total_loss/seg", grad_check(
        [&](Tape&, const Tensor& x) {
          std::array<Tensor, 4> sg = {sigmoid(x), seg[1], seg[2], seg[3]};
          return total_loss(stages, sg, s_init, gt, 6, w);
        },
        logits({m, 8, 8}), 1e-5, tol)});
  }
  return items;
}

// End-to-end check: the full pipeline loss on one synthetic image,
// differentiated with respect to representative parameter tensors across all
// modules. Coordinates are subsampled to keep the runtime bounded.
inline std::vector<CheckItem> model_gradchecks(double tol = 1e-3, int coords_per_param = 6) {
  using namespace bcr;
  std::vector<CheckItem> items;

  TrainConfig cfg;
  cfg.model.categories = 3;
  cfg.model.channels = 4;
  cfg.model.hidden_dim = 8;
  cfg.model.heads = 2;
  cfg.model.sampling_points = 2;
  cfg.model.num_proposals = 2;
  cfg.model.ref_points = 8;
  cfg.model.pool_size = 4;
  cfg.seed = 11;
  auto session = Session::create(cfg);
  BcrModel& model = *session->model;

  auto data = generate_synthetic(23, 1, 64, 64);
  Sample& sample = data[0];
  sample.targets = prepare_targets(sample.annotation, 2, 2, 2);
  LossTargets gt;
  gt.gt_curves = sample.targets.gt_curves;
  gt.gt_masks = sample.targets.gt_masks;
  gt.induction_map = sample.targets.induction_map;
  const LossWeights w;

  const std::vector<std::string> probes = {
      "backbone.enc1.c1.w", "backbone.dec2.w",      "backbone.seg3.w", "backbone.fuse4.w",
      "acpi.off2.w",        "acpi.sc2.b",           "hcr.stage1.q_s",
      "hcr.stage2.cross.offset.w",                  "hcr.stage2.self.inter_curve.q.w",
      "hcr.stage3.offset.l2.w",                     "hcr.stage3.score.w"};
  int seed = 100;
  for (const std::string& name : probes) {
    Parameter* p = model.params().find(name);
    if (!p) {
      items.push_back({"model/" + name + " (missing)", GradCheckReport{}});
      continue;
    }
    auto f = [&](Tape& tape, const Tensor& x) {
      Pass pass(&tape);
      pass.inject(p, x);
      BcrModel::Forward fwd = model.forward(pass, sample.image);
      std::vector<StagePrediction> stages;
      stages.push_back({fwd.initial.control, fwd.initial.scores});
      for (const auto& st : fwd.stages)
        stages.push_back({st.proposals.control, st.proposals.scores});
      return total_loss(stages, fwd.backbone.seg.s, fwd.cpmap.s_init, gt, 6, w);
    };
    items.push_back({"model/" + name,
                     grad_check(f, p->value, 1e-5, tol, coords_per_param,
                                static_cast<uint64_t>(seed++))});
  }
  return items;
}

}  // namespace bcr_tests
