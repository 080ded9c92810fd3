#pragma once

#include <array>

#include "bcr/matching.hpp"
#include "bcr/ops.hpp"
#include "bcr/proposals.hpp"

namespace bcr {

struct LossWeights {
  double s = 10.0;
  double ind = 1.0;
  double cs = 1.0;
  double crv = 1.0;
  double match_cs = 1.0;
  double match_crv = 1.0;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  int n_interp = 26;
};

// Ground-truth targets of one image.
struct LossTargets {
  std::vector<std::vector<BezierCurve>> gt_curves;  // [M][G_m]
  Tensor gt_masks;                                  // [M,H,W] binary
  Tensor induction_map;                             // [M,H4,W4] binary
};

struct LossBreakdown {
  double l_s = 0;
  double l_ind = 0;
  std::array<double, 4> l_cs{};
  std::array<double, 4> l_crv{};
  double lambda_d = 0;
  double total = 0;
};

// Mean over all elements of the focal terms: -a(1-p)^g log p on positives,
// -(1-a)p^g log(1-p) on negatives. Scores are clamped to [1e-7, 1-1e-7].
Tensor focal_loss(const Tensor& scores, const Tensor& targets, double alpha = 0.25,
                  double gamma = 2.0);

// Sum over the four decoder levels of (1 - (2*sum(pg)+eps)/(sum p + sum g + eps)),
// averaged over categories per level. eps = 1.
Tensor dice_loss(const std::array<Tensor, 4>& seg, const Tensor& gt_masks, double eps = 1.0);

// Mean binary cross-entropy with the focal clamping convention.
Tensor bce_loss(const Tensor& pred, const Tensor& target);

// Differentiable counterpart of curve_distance on a [12] control row pair.
Tensor curve_distance_t(const Tensor& pred_row, const Tensor& gt_row, int n_interp = 26);

// 1 - sigmoid((epoch - 10) / 2): down-weights the auxiliary losses as
// training progresses.
double decay_coefficient(int epoch);

// One stage's predictions entering the loss.
struct StagePrediction {
  Tensor control;  // [M,K,12]
  Tensor scores;   // [M,K]
};

// Full objective: lambda_d (ls*Ls + lind*Lind) + (1-lambda_d) sum_h (lcs*Lcs_h + lcrv*Lcrv_h),
// with each of the four stages independently matched to ground truth.
// Matched proposals take focal target 1, unmatched 0.
Tensor total_loss(const std::vector<StagePrediction>& stages, const std::array<Tensor, 4>& seg,
                  const Tensor& s_init, const LossTargets& gt, int epoch, const LossWeights& w,
                  LossBreakdown* breakdown = nullptr);

}  // namespace bcr
