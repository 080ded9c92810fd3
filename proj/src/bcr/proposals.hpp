#pragma once

#include "bcr/geometry.hpp"
#include "bcr/layers.hpp"

namespace bcr {

// Pixel-aligned curve decode: per category and per f4 pixel, six (x,y)
// control points plus a confidence score.
struct ControlPointMap {
  Tensor b;       // [M,H4,W4,12], coordinates in (0,1)
  Tensor s_init;  // [M,H4,W4] in [0,1]
};

// Differentiable per-stage predictions: control point rows and scores stay
// on the tape during training.
struct ProposalBatch {
  int origin = 0;  // 0 = initialization, 1..3 = refinement stages
  Tensor control;  // [M,K,12] as [x1,y1,...,x6,y6]
  Tensor scores;   // [M,K]
};

// Detached geometric view of the same predictions.
struct ProposalSet {
  int origin = 0;
  std::vector<std::vector<BezierCurve>> curves;   // [M][K]
  std::vector<std::vector<double>> scores;        // [M][K]
};

BezierCurve curve_from_row(const double* row12);
ProposalSet to_proposal_set(const ProposalBatch& batch);

// Normalized coordinate map of pixel centers: entry (r,c) = ((c+0.5)/W, (r+0.5)/H).
Tensor build_coord_map(int h4, int w4);  // -> [H4,W4,2]

// Applies b = sigmoid(offset + logit(pixel coordinate)) per control
// coordinate; differentiable through the offsets.
Tensor decode_control_points(const Tensor& offsets, const Tensor& coord_map);

// Per category, the pool_size highest-scoring pixels and then the K best of
// the pool. Ties break toward the smaller row-major pixel index; outputs are
// sorted by descending score. Gradients flow only through the gathered
// entries.
ProposalBatch select_topk(const ControlPointMap& cpmap, int pool_size, int k);

// Binary [M,H4,W4] map with a 1 in the pixel containing each ground-truth
// polyline's arc-length midpoint.
Tensor build_induction_map(const std::vector<std::vector<Polyline>>& per_category, int h4, int w4);

// Offset and score heads over f4: two independent conv3x3 stacks with
// per-category output planes.
class AcpiHead {
 public:
  AcpiHead() = default;
  AcpiHead(ParamStore& ps, const std::string& prefix, int channels, int categories, Rng& rng);

  // offsets [M,H4,W4,12], scores [M,H4,W4]
  struct Out {
    Tensor offsets;
    Tensor scores;
  };
  Out forward(Pass& pass, const Tensor& f4) const;

 private:
  int categories_ = 0;
  Conv off1_, off2_;
  Conv sc1_, sc2_;
};

}  // namespace bcr
