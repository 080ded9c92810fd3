#pragma once

#include <array>

#include "bcr/backbone.hpp"
#include "bcr/proposals.hpp"

namespace bcr {

struct RefineConfig {
  int categories = 3;      // M
  int num_proposals = 10;  // K
  int ref_points = 26;     // N
  int hidden_dim = 64;     // D
  int heads = 8;
  int sampling_points = 4;
  int feat_channels = 32;  // pyramid channel count
};

// Reference point layout per curve: N-1 uniform samples at t = k/(N-2)
// followed by the curve midpoint (t = 0.5) at index N-1.
Tensor sample_reference_points(const Tensor& control, int n);  // [M,K,12] -> [M,K,N,2]

// Deformable attention over two pyramid levels: per query, head, level and
// sampling point, a linear map of the query predicts an offset and a weight
// logit; values are bilinearly sampled at reference + offset and combined
// with softmax weights (normalized over level x point per head).
class DeformableCrossAttention {
 public:
  DeformableCrossAttention() = default;
  DeformableCrossAttention(ParamStore& ps, const std::string& prefix, int query_dim,
                           int feat_channels, int heads, int points, int levels, Rng& rng);

  // q [M,K,N,D], features: `levels` maps [C,Hl,Wl], ref [M,K,N,2]
  Tensor forward(Pass& pass, const Tensor& q, const std::vector<Tensor>& features,
                 const Tensor& ref) const;

 private:
  int dim_ = 0, heads_ = 0, points_ = 0, levels_ = 0;
  Linear offset_;             // D -> H*L*P*2
  Linear weight_;             // D -> H*L*P
  std::vector<Conv> value_;   // per level 1x1: C -> D
  Linear out_;                // D -> D
};

// Three sequential residual attention blocks, each restricted to one axis of
// [M,K,N,D]: intra-curve (N), inter-curve (K), inter-category (M).
class StructuredSelfAttention {
 public:
  StructuredSelfAttention() = default;
  StructuredSelfAttention(ParamStore& ps, const std::string& prefix, int dim, int heads, Rng& rng);
  Tensor forward(Pass& pass, const Tensor& x) const;

 private:
  MultiHeadAttention intra_, inter_curve_, inter_category_;
  LayerNorm ln1_, ln2_, ln3_;
};

struct StageOutput {
  ProposalBatch proposals;
  Tensor refined_points;  // [M,K,N-1,2]
};

class RefineStage {
 public:
  RefineStage() = default;
  RefineStage(ParamStore& ps, const std::string& prefix, const RefineConfig& cfg, int stage_idx,
              Rng& rng);

  // Consumes exactly the stage's two designated pyramid levels:
  // stage 1 -> {f3,f4}, stage 2 -> {f2,f3}, stage 3 -> {f1,f2}.
  StageOutput forward(Pass& pass, const ProposalBatch& in, const FeaturePyramid& pyramid) const;

  int stage_idx() const { return stage_idx_; }

 private:
  RefineConfig cfg_;
  int stage_idx_ = 0;
  Mlp qp_mlp_;
  Parameter* q_s_ = nullptr;  // [M,N,D], shared across proposals of a category
  DeformableCrossAttention cross_;
  LayerNorm cross_ln_;
  StructuredSelfAttention self_;
  Mlp offset_mlp_;
  Linear score_head_;
  Tensor fit_matrix_;  // [6, N-1], constant
};

class Hcr {
 public:
  Hcr() = default;
  Hcr(ParamStore& ps, const std::string& prefix, const RefineConfig& cfg, Rng& rng);

  std::array<StageOutput, 3> forward(Pass& pass, const ProposalBatch& initial,
                                     const FeaturePyramid& pyramid) const;

  const RefineStage& stage(int i) const { return stages_[static_cast<size_t>(i - 1)]; }

 private:
  std::array<RefineStage, 3> stages_;
};

}  // namespace bcr
