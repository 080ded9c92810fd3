#include "bcr/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bcr {

BezierCurve curve_from_row(const double* row12) {
  BezierCurve c;
  for (int j = 0; j < 6; ++j) c.control[static_cast<size_t>(j)] = {row12[2 * j], row12[2 * j + 1]};
  return c;
}

ProposalSet to_proposal_set(const ProposalBatch& batch) {
  ProposalSet set;
  set.origin = batch.origin;
  const int m = batch.control.dim(0), k = batch.control.dim(1);
  set.curves.resize(static_cast<size_t>(m));
  set.scores.resize(static_cast<size_t>(m));
  for (int mi = 0; mi < m; ++mi) {
    for (int ki = 0; ki < k; ++ki) {
      set.curves[static_cast<size_t>(mi)].push_back(
          curve_from_row(batch.control.data() + (static_cast<int64_t>(mi) * k + ki) * 12));
      set.scores[static_cast<size_t>(mi)].push_back(
          batch.scores.data()[static_cast<int64_t>(mi) * k + ki]);
    }
  }
  return set;
}

Tensor build_coord_map(int h4, int w4) {
  if (h4 < 1 || w4 < 1) fail(ErrKind::Config, "coord map needs positive extents");
  Tensor out({h4, w4, 2});
  double* p = out.data();
  for (int r = 0; r < h4; ++r)
    for (int c = 0; c < w4; ++c) {
      p[(static_cast<int64_t>(r) * w4 + c) * 2] = (c + 0.5) / w4;
      p[(static_cast<int64_t>(r) * w4 + c) * 2 + 1] = (r + 0.5) / h4;
    }
  return out;
}

Tensor decode_control_points(const Tensor& offsets, const Tensor& coord_map) {
  if (offsets.rank() != 4 || offsets.dim(3) != 12)
    fail(ErrKind::Shape, "decode_control_points: offsets must be [M,H4,W4,12]");
  if (coord_map.rank() != 3 || coord_map.dim(0) != offsets.dim(1) ||
      coord_map.dim(1) != offsets.dim(2) || coord_map.dim(2) != 2)
    fail(ErrKind::Shape, "decode_control_points: coord map size mismatch");
  const int m = offsets.dim(0);
  Tensor lc = logit(coord_map.detached());  // domain-checks (0,1)
  // tile the logit map across the six control points and the categories
  Tensor lc6 = concat(std::vector<Tensor>(6, lc), 2);             // [H4,W4,12]
  Shape one = lc6.shape();
  one.insert(one.begin(), 1);
  Tensor tiled = concat(std::vector<Tensor>(static_cast<size_t>(m), reshape(lc6, one)), 0);
  return sigmoid(add(offsets, tiled));
}

ProposalBatch select_topk(const ControlPointMap& cpmap, int pool_size, int k) {
  const int m = cpmap.b.dim(0), h4 = cpmap.b.dim(1), w4 = cpmap.b.dim(2);
  const int cells = h4 * w4;
  if (k < 1 || pool_size < k) fail(ErrKind::Config, "select_topk: need pool_size >= K >= 1");
  if (k > cells) fail(ErrKind::Config, "select_topk: K exceeds the number of candidate pixels");
  const int pool = std::min(pool_size, cells);

  Tensor b_flat = reshape(cpmap.b, {m, cells, 12});
  Tensor s_flat = reshape(cpmap.s_init, {m, cells});

  std::vector<Tensor> ctrl_rows, score_rows;
  for (int mi = 0; mi < m; ++mi) {
    const double* sc = s_flat.data() + static_cast<int64_t>(mi) * cells;
    std::vector<int> order(static_cast<size_t>(cells));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [sc](int a, int b) {
      if (sc[a] != sc[b]) return sc[a] > sc[b];
      return a < b;
    });
    order.resize(static_cast<size_t>(pool));  // explicit candidate pool
    order.resize(static_cast<size_t>(k));     // top-K within the pool
    Tensor bm = reshape(slice(b_flat, 0, mi, 1), {cells, 12});
    Tensor sm = reshape(slice(s_flat, 0, mi, 1), {cells});
    ctrl_rows.push_back(reshape(gather_rows(bm, order), {1, k, 12}));
    score_rows.push_back(reshape(gather_rows(reshape(sm, {cells, 1}), order), {1, k}));
  }
  ProposalBatch out;
  out.origin = 0;
  out.control = concat(ctrl_rows, 0);
  out.scores = concat(score_rows, 0);
  return out;
}

Tensor build_induction_map(const std::vector<std::vector<Polyline>>& per_category, int h4,
                           int w4) {
  const int m = static_cast<int>(per_category.size());
  Tensor out({m, h4, w4});
  for (int mi = 0; mi < m; ++mi) {
    for (const auto& pl : per_category[static_cast<size_t>(mi)]) {
      if (pl.points.empty()) continue;
      const Point2 mid = point_at_arclength(pl, 0.5 * polyline_length(pl));
      const int c = std::clamp(static_cast<int>(std::floor(mid.x * w4)), 0, w4 - 1);
      const int r = std::clamp(static_cast<int>(std::floor(mid.y * h4)), 0, h4 - 1);
      out.data()[(static_cast<int64_t>(mi) * h4 + r) * w4 + c] = 1.0;
    }
  }
  return out;
}

AcpiHead::AcpiHead(ParamStore& ps, const std::string& prefix, int channels, int categories,
                   Rng& rng)
    : categories_(categories) {
  off1_ = Conv(ps, prefix + ".off1", channels, channels, 3, 1, rng);
  off2_ = Conv(ps, prefix + ".off2", channels, categories * 12, 3, 1, rng);
  sc1_ = Conv(ps, prefix + ".sc1", channels, channels, 3, 1, rng);
  sc2_ = Conv(ps, prefix + ".sc2", channels, categories, 3, 1, rng);
}

AcpiHead::Out AcpiHead::forward(Pass& pass, const Tensor& f4) const {
  const int h4 = f4.dim(1), w4 = f4.dim(2);
  Tensor off = off2_.forward(pass, relu(off1_.forward(pass, f4)));  // [M*12,H4,W4]
  Tensor offsets =
      transpose(reshape(off, {categories_, 12, h4, w4}), {0, 2, 3, 1});  // [M,H4,W4,12]
  Tensor sc = sigmoid(sc2_.forward(pass, relu(sc1_.forward(pass, f4))));  // [M,H4,W4]
  return {offsets, sc};
}

}  // namespace bcr
