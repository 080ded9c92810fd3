#include "bcr/losses.hpp"

#include <cmath>

namespace bcr {

namespace {
constexpr double kClamp = 1e-7;

Tensor pow_t(const Tensor& base, double expo) {
  // base must be positive; used on clamped probabilities only
  if (expo == 2.0) return mul(base, base);
  return exp(scale(log(base), expo));
}
}  // namespace

Tensor focal_loss(const Tensor& scores, const Tensor& targets, double alpha, double gamma) {
  if (scores.shape() != targets.shape()) fail(ErrKind::Shape, "focal_loss: shape mismatch");
  Tensor p = clamp(scores, kClamp, 1.0 - kClamp);
  Tensor one_m_p = add_c(neg(p), 1.0);
  Tensor pos = scale(mul(pow_t(one_m_p, gamma), log(p)), -alpha);
  Tensor negt = scale(mul(pow_t(p, gamma), log(one_m_p)), -(1.0 - alpha));
  Tensor t = targets.detached();
  Tensor one_m_t = add_c(neg(t), 1.0);
  return mean(add(mul(t, pos), mul(one_m_t, negt)));
}

Tensor dice_loss(const std::array<Tensor, 4>& seg, const Tensor& gt_masks, double eps) {
  if (gt_masks.rank() != 3) fail(ErrKind::Shape, "dice_loss: gt_masks must be [M,H,W]");
  const int m = gt_masks.dim(0);
  Tensor total;
  for (int l = 0; l < 4; ++l) {
    const Tensor& s = seg[static_cast<size_t>(l)];
    if (s.shape() != gt_masks.shape())
      fail(ErrKind::Shape, "dice_loss: segmentation/mask shape mismatch");
    Tensor level;
    for (int mi = 0; mi < m; ++mi) {
      Tensor p = slice(s, 0, mi, 1);
      Tensor g = slice(gt_masks, 0, mi, 1).detached();
      Tensor inter = sum(mul(p, g));
      Tensor denom = add(sum(p), sum(g));
      Tensor dice = div(add_c(scale(inter, 2.0), eps), add_c(denom, eps));
      Tensor term = add_c(neg(dice), 1.0);
      level = (mi == 0) ? term : add(level, term);
    }
    level = scale(level, 1.0 / m);
    total = (l == 0) ? level : add(total, level);
  }
  return total;
}

Tensor bce_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) fail(ErrKind::Shape, "bce_loss: shape mismatch");
  Tensor p = clamp(pred, kClamp, 1.0 - kClamp);
  Tensor t = target.detached();
  Tensor pos = mul(t, log(p));
  Tensor negt = mul(add_c(neg(t), 1.0), log(add_c(neg(p), 1.0)));
  return neg(mean(add(pos, negt)));
}

Tensor curve_distance_t(const Tensor& pred_row, const Tensor& gt_row, int n_interp) {
  if (pred_row.size() != 12 || gt_row.size() != 12)
    fail(ErrKind::Shape, "curve_distance_t: expected [12] control rows");
  Tensor pc = reshape(pred_row, {6, 2});
  Tensor gc = reshape(gt_row, {6, 2}).detached();
  // per-point L1 mean equals twice the mean over flattened coordinates
  Tensor ctrl = scale(mean(abs(sub(pc, gc))), 2.0);
  Tensor design({n_interp, 6}, bezier_design_matrix(n_interp));
  Tensor ps = matmul(design, pc);
  Tensor gs = matmul(design, gc);
  Tensor interp = scale(mean(abs(sub(ps, gs))), 2.0);
  return add(scale(ctrl, 0.5), scale(interp, 0.5));
}

double decay_coefficient(int epoch) {
  const double z = (epoch - 10.0) / 2.0;
  const double sig = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return 1.0 - sig;
}

Tensor total_loss(const std::vector<StagePrediction>& stages, const std::array<Tensor, 4>& seg,
                  const Tensor& s_init, const LossTargets& gt, int epoch, const LossWeights& w,
                  LossBreakdown* breakdown) {
  if (stages.size() != 4) fail(ErrKind::Shape, "total_loss: expected 4 stage predictions");
  const int m = stages[0].scores.dim(0);
  const int k = stages[0].scores.dim(1);
  if (static_cast<int>(gt.gt_curves.size()) != m)
    fail(ErrKind::Shape, "total_loss: gt curve categories mismatch");

  Tensor l_s = dice_loss(seg, gt.gt_masks);
  Tensor l_ind = bce_loss(s_init, gt.induction_map);

  std::array<Tensor, 4> l_cs, l_crv;
  for (size_t h = 0; h < 4; ++h) {
    const StagePrediction& sp = stages[h];
    Tensor targets(Shape{m, k});
    Tensor crv_sum;
    int pair_count = 0;
    for (int mi = 0; mi < m; ++mi) {
      const auto& gts = gt.gt_curves[static_cast<size_t>(mi)];
      if (gts.empty()) continue;
      // matching runs on detached values; gradients flow through the
      // selected pairs only
      std::vector<BezierCurve> pred;
      std::vector<double> sc;
      for (int ki = 0; ki < k; ++ki) {
        pred.push_back(curve_from_row(sp.control.data() + (static_cast<int64_t>(mi) * k + ki) * 12));
        sc.push_back(sp.scores.data()[static_cast<int64_t>(mi) * k + ki]);
      }
      MatchResult match =
          hungarian(matching_cost(pred, sc, gts, w.match_cs, w.match_crv, w.n_interp));
      for (auto [ki, gi] : match.pairs) {
        targets.data()[static_cast<int64_t>(mi) * k + ki] = 1.0;
        Tensor prow = reshape(
            slice(reshape(sp.control, {m * k, 12}), 0, mi * k + ki, 1), {12});
        Tensor grow({12});
        for (int j = 0; j < 6; ++j) {
          grow.data()[2 * j] = gts[static_cast<size_t>(gi)].control[static_cast<size_t>(j)].x;
          grow.data()[2 * j + 1] = gts[static_cast<size_t>(gi)].control[static_cast<size_t>(j)].y;
        }
        Tensor d = curve_distance_t(prow, grow, w.n_interp);
        crv_sum = (pair_count == 0) ? d : add(crv_sum, d);
        ++pair_count;
      }
    }
    l_cs[h] = focal_loss(sp.scores, targets, w.focal_alpha, w.focal_gamma);
    l_crv[h] = pair_count > 0 ? scale(crv_sum, 1.0 / pair_count) : Tensor::scalar(0.0);
  }

  const double lambda_d = decay_coefficient(epoch);
  Tensor aux = add(scale(l_s, w.s), scale(l_ind, w.ind));
  Tensor matched;
  for (size_t h = 0; h < 4; ++h) {
    Tensor stage_term = add(scale(l_cs[h], w.cs), scale(l_crv[h], w.crv));
    matched = (h == 0) ? stage_term : add(matched, stage_term);
  }
  Tensor total = add(scale(aux, lambda_d), scale(matched, 1.0 - lambda_d));

  if (breakdown) {
    breakdown->l_s = l_s.item();
    breakdown->l_ind = l_ind.item();
    for (size_t h = 0; h < 4; ++h) {
      breakdown->l_cs[h] = l_cs[h].item();
      breakdown->l_crv[h] = l_crv[h].item();
    }
    breakdown->lambda_d = lambda_d;
    breakdown->total = total.item();
  }
  return total;
}

}  // namespace bcr
