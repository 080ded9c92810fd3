#include "bcr/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bcr {

MatchResult hungarian(const std::vector<std::vector<double>>& cost) {
  const int rows = static_cast<int>(cost.size());
  MatchResult result;
  if (rows == 0) return result;
  const int cols = static_cast<int>(cost[0].size());
  for (const auto& row : cost) {
    if (static_cast<int>(row.size()) != cols) fail(ErrKind::Shape, "hungarian: ragged cost matrix");
    for (double v : row)
      if (std::isnan(v)) fail(ErrKind::Numeric, "hungarian: NaN in cost matrix");
  }
  if (cols == 0) return result;

  const bool transposed = rows > cols;
  const int n = transposed ? cols : rows;  // n <= m
  const int m = transposed ? rows : cols;
  auto a = [&](int i, int j) {  // 1-indexed
    return transposed ? cost[static_cast<size_t>(j - 1)][static_cast<size_t>(i - 1)]
                      : cost[static_cast<size_t>(i - 1)][static_cast<size_t>(j - 1)];
  };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(m) + 1, 0), way(static_cast<size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(m) + 1, kInf);
    std::vector<char> used(static_cast<size_t>(m) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = a(i0, j) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  for (int j = 1; j <= m; ++j) {
    const int i = p[static_cast<size_t>(j)];
    if (i == 0) continue;
    const int row = transposed ? j - 1 : i - 1;
    const int col = transposed ? i - 1 : j - 1;
    result.pairs.emplace_back(row, col);
    result.cost += cost[static_cast<size_t>(row)][static_cast<size_t>(col)];
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  return result;
}

double curve_distance(const BezierCurve& a, const BezierCurve& b, int n_interp) {
  double ctrl = 0;
  for (int j = 0; j < 6; ++j) {
    ctrl += std::fabs(a.control[static_cast<size_t>(j)].x - b.control[static_cast<size_t>(j)].x) +
            std::fabs(a.control[static_cast<size_t>(j)].y - b.control[static_cast<size_t>(j)].y);
  }
  ctrl /= 6.0;
  const auto pa = sample_uniform(a, n_interp);
  const auto pb = sample_uniform(b, n_interp);
  double interp = 0;
  for (int i = 0; i < n_interp; ++i)
    interp += std::fabs(pa[static_cast<size_t>(i)].x - pb[static_cast<size_t>(i)].x) +
              std::fabs(pa[static_cast<size_t>(i)].y - pb[static_cast<size_t>(i)].y);
  interp /= n_interp;
  return 0.5 * ctrl + 0.5 * interp;
}

std::vector<std::vector<double>> matching_cost(const std::vector<BezierCurve>& pred,
                                               const std::vector<double>& scores,
                                               const std::vector<BezierCurve>& gt, double w_cs,
                                               double w_crv, int n_interp) {
  std::vector<std::vector<double>> cost(pred.size(), std::vector<double>(gt.size(), 0.0));
  for (size_t k = 0; k < pred.size(); ++k)
    for (size_t g = 0; g < gt.size(); ++g)
      cost[k][g] = w_cs * (-scores[k]) + w_crv * curve_distance(pred[k], gt[g], n_interp);
  return cost;
}

}  // namespace bcr
