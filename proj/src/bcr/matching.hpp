#pragma once

#include <utility>
#include <vector>

#include "bcr/geometry.hpp"

namespace bcr {

// Injective assignment between predictions and ground truth for one
// category: |pairs| = min(#rows, #cols), minimizing total cost.
struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
  double cost = 0.0;
};

// Kuhn-Munkres on a rectangular cost matrix (rows x cols). Deterministic:
// augmenting paths scan indices in ascending order, so equal-cost options
// resolve toward lexicographically smaller pairs.
MatchResult hungarian(const std::vector<std::vector<double>>& cost);

// 0.5 * mean L1 distance over control points + 0.5 * mean L1 distance over
// n_interp uniformly interpolated curve points. Symmetric, translation
// equivariant, zero iff the control polygons coincide.
double curve_distance(const BezierCurve& a, const BezierCurve& b, int n_interp = 26);

// cost(k,g) = w_cs * (-score_k) + w_crv * curve_distance(pred_k, gt_g).
std::vector<std::vector<double>> matching_cost(const std::vector<BezierCurve>& pred,
                                               const std::vector<double>& scores,
                                               const std::vector<BezierCurve>& gt, double w_cs,
                                               double w_crv, int n_interp = 26);

}  // namespace bcr
