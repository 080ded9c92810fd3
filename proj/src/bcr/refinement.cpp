#include "bcr/refinement.hpp"

#include <cmath>

namespace bcr {

Tensor sample_reference_points(const Tensor& control, int n) {
  if (control.rank() != 3 || control.dim(2) != 12)
    fail(ErrKind::Shape, "sample_reference_points: control must be [M,K,12]");
  if (n < 3) fail(ErrKind::Config, "sample_reference_points: N must be >= 3");
  const int m = control.dim(0), k = control.dim(1);
  // rows 0..N-2 sample uniformly, the last row is the global midpoint
  Tensor s({n, 6});
  for (int i = 0; i < n - 1; ++i)
    for (int j = 0; j < 6; ++j)
      s.data()[static_cast<int64_t>(i) * 6 + j] = bernstein5(j, static_cast<double>(i) / (n - 2));
  for (int j = 0; j < 6; ++j) s.data()[static_cast<int64_t>(n - 1) * 6 + j] = bernstein5(j, 0.5);
  Tensor ctrl = reshape(control, {m, k, 6, 2});
  return matmul(s, ctrl);  // [M,K,N,2]
}

DeformableCrossAttention::DeformableCrossAttention(ParamStore& ps, const std::string& prefix,
                                                   int query_dim, int feat_channels, int heads,
                                                   int points, int levels, Rng& rng)
    : dim_(query_dim), heads_(heads), points_(points), levels_(levels) {
  if (query_dim % heads) fail(ErrKind::Config, "deformable attention dim not divisible by heads");
  offset_ = Linear(ps, prefix + ".offset", query_dim, heads * levels * points * 2, rng);
  weight_ = Linear(ps, prefix + ".weight", query_dim, heads * levels * points, rng);
  // start sampling exactly at the reference points with uniform attention;
  // offsets and weight preferences are learned from there
  for (int64_t i = 0; i < offset_.weight()->value.size(); ++i)
    offset_.weight()->value.data()[i] = 0.0;
  for (int64_t i = 0; i < weight_.weight()->value.size(); ++i)
    weight_.weight()->value.data()[i] = 0.0;
  for (int l = 0; l < levels; ++l)
    value_.emplace_back(ps, prefix + ".value" + std::to_string(l), feat_channels, query_dim, 1, 1,
                        rng);
  out_ = Linear(ps, prefix + ".out", query_dim, query_dim, rng);
}

Tensor DeformableCrossAttention::forward(Pass& pass, const Tensor& q,
                                         const std::vector<Tensor>& features,
                                         const Tensor& ref) const {
  if (static_cast<int>(features.size()) != levels_)
    fail(ErrKind::Shape, "deformable attention: wrong number of feature levels");
  if (q.rank() != 4 || q.dim(3) != dim_)
    fail(ErrKind::Shape, "deformable attention: queries must be [M,K,N,D]");
  const int m = q.dim(0), k = q.dim(1), n = q.dim(2);
  const int nq = m * k * n;
  const int dh = dim_ / heads_;

  Tensor qf = reshape(q, {nq, dim_});
  Tensor off = reshape(offset_.forward(pass, qf), {nq, heads_, levels_, points_, 2});
  Tensor wlog = reshape(weight_.forward(pass, qf), {nq, heads_, levels_ * points_});
  Tensor w = reshape(softmax(wlog, -1), {nq, heads_, levels_, points_});

  // reference points tiled across sampling points: [nq, P, 2]
  Tensor ref_q = reshape(ref, {nq, 1, 2});
  Tensor ref_tiled = concat(std::vector<Tensor>(static_cast<size_t>(points_), ref_q), 1);

  std::vector<Tensor> head_out(static_cast<size_t>(heads_));
  for (int l = 0; l < levels_; ++l) {
    Tensor vmap = value_[static_cast<size_t>(l)].forward(pass, features[static_cast<size_t>(l)]);
    for (int h = 0; h < heads_; ++h) {
      Tensor off_hl = reshape(slice(slice(off, 1, h, 1), 2, l, 1), {nq, points_, 2});
      Tensor coords = reshape(add(ref_tiled, off_hl), {nq * points_, 2});
      Tensor vh = slice(vmap, 0, h * dh, dh);  // head's channel slice
      Tensor sampled = reshape(bilinear_sample(vh, coords), {nq, points_, dh});
      Tensor w_hl = reshape(slice(slice(w, 1, h, 1), 2, l, 1), {nq, points_, 1});
      Tensor w_tiled = concat(std::vector<Tensor>(static_cast<size_t>(dh), w_hl), 2);
      Tensor contrib = sum(mul(sampled, w_tiled), 1);  // [nq, dh]
      auto& acc = head_out[static_cast<size_t>(h)];
      acc = (l == 0) ? contrib : add(acc, contrib);
    }
  }
  Tensor merged = concat(head_out, 1);  // [nq, D]
  return reshape(out_.forward(pass, merged), {m, k, n, dim_});
}

StructuredSelfAttention::StructuredSelfAttention(ParamStore& ps, const std::string& prefix,
                                                 int dim, int heads, Rng& rng) {
  intra_ = MultiHeadAttention(ps, prefix + ".intra", dim, heads, rng);
  inter_curve_ = MultiHeadAttention(ps, prefix + ".inter_curve", dim, heads, rng);
  inter_category_ = MultiHeadAttention(ps, prefix + ".inter_category", dim, heads, rng);
  ln1_ = LayerNorm(ps, prefix + ".ln1", dim);
  ln2_ = LayerNorm(ps, prefix + ".ln2", dim);
  ln3_ = LayerNorm(ps, prefix + ".ln3", dim);
}

Tensor StructuredSelfAttention::forward(Pass& pass, const Tensor& x) const {
  const int m = x.dim(0), k = x.dim(1), n = x.dim(2), d = x.dim(3);
  // (1) intra-curve: attend across N with (M,K) as batch
  Tensor h = x;
  {
    Tensor a = intra_.forward(pass, reshape(h, {m * k, n, d}));
    h = ln1_.forward(pass, add(h, reshape(a, {m, k, n, d})));
  }
  // (2) inter-curve: attend across K with (M,N) as batch
  {
    Tensor t = transpose(h, {0, 2, 1, 3});  // [M,N,K,D]
    Tensor a = inter_curve_.forward(pass, reshape(t, {m * n, k, d}));
    Tensor back = transpose(reshape(a, {m, n, k, d}), {0, 2, 1, 3});
    h = ln2_.forward(pass, add(h, back));
  }
  // (3) inter-category: attend across M with (K,N) as batch
  {
    Tensor t = transpose(h, {1, 2, 0, 3});  // [K,N,M,D]
    Tensor a = inter_category_.forward(pass, reshape(t, {k * n, m, d}));
    Tensor back = transpose(reshape(a, {k, n, m, d}), {2, 0, 1, 3});
    h = ln3_.forward(pass, add(h, back));
  }
  return h;
}

namespace {
constexpr int kStageLevels[3][2] = {{3, 4}, {2, 3}, {1, 2}};
}

RefineStage::RefineStage(ParamStore& ps, const std::string& prefix, const RefineConfig& cfg,
                         int stage_idx, Rng& rng)
    : cfg_(cfg), stage_idx_(stage_idx) {
  if (stage_idx < 1 || stage_idx > 3) fail(ErrKind::Config, "refine stage index must be 1..3");
  if (cfg.hidden_dim % 4) fail(ErrKind::Config, "hidden_dim must be divisible by 4");
  const int d = cfg.hidden_dim;
  qp_mlp_ = Mlp(ps, prefix + ".qp", {d, d, d}, rng);
  q_s_ = ps.create(prefix + ".q_s",
                   glorot_uniform({cfg.categories, cfg.ref_points, d}, d, d, rng));
  cross_ = DeformableCrossAttention(ps, prefix + ".cross", d, cfg.feat_channels, cfg.heads,
                                    cfg.sampling_points, 2, rng);
  cross_ln_ = LayerNorm(ps, prefix + ".cross_ln", d);
  self_ = StructuredSelfAttention(ps, prefix + ".self", d, cfg.heads, rng);
  offset_mlp_ = Mlp(ps, prefix + ".offset", {d, d, d, 2}, rng);
  // zero the final offset layer so the stage starts as the identity mapping
  Parameter* last = offset_mlp_.layers().back().weight();
  for (int64_t i = 0; i < last->value.size(); ++i) last->value.data()[i] = 0.0;
  score_head_ = Linear(ps, prefix + ".score", d, 1, rng);
  fit_matrix_ = Tensor({6, cfg.ref_points - 1}, bezier_fit_matrix(cfg.ref_points - 1));
}

StageOutput RefineStage::forward(Pass& pass, const ProposalBatch& in,
                                 const FeaturePyramid& pyramid) const {
  const int m = in.control.dim(0), k = in.control.dim(1);
  const int n = cfg_.ref_points, d = cfg_.hidden_dim;

  Tensor p = sample_reference_points(in.control, n);  // [M,K,N,2]
  Tensor pe = positional_encoding(reshape(p, {m * k * n, 2}), d);
  Tensor qp = reshape(qp_mlp_.forward(pass, pe), {m, k, n, d});

  // the semantic query is shared across proposals so the stage stays
  // permutation-equivariant along K
  Tensor qs = reshape(pass.use(q_s_), {m, 1, n, d});
  Tensor qs_tiled = concat(std::vector<Tensor>(static_cast<size_t>(k), qs), 1);
  Tensor q = add(qp, qs_tiled);

  const int* lv = kStageLevels[stage_idx_ - 1];
  std::vector<Tensor> feats = {pyramid.level(lv[0]), pyramid.level(lv[1])};
  Tensor x = cross_ln_.forward(pass, add(q, cross_.forward(pass, q, feats, p)));
  x = self_.forward(pass, x);

  Tensor x_pts = slice(x, 2, 0, n - 1);
  Tensor offsets = reshape(
      offset_mlp_.forward(pass, reshape(x_pts, {m * k * (n - 1), d})), {m, k, n - 1, 2});
  Tensor p_s = slice(p, 2, 0, n - 1);
  Tensor refined = clamp(add(p_s, offsets), 0.0, 1.0);

  Tensor logits = reshape(score_head_.forward(pass, reshape(x, {m * k * n, d})), {m, k, n});
  Tensor scores = mean(sigmoid(logits), 2);  // [M,K]

  Tensor new_control = reshape(matmul(fit_matrix_, refined), {m, k, 12});

  StageOutput out;
  out.proposals = {stage_idx_, new_control, scores};
  out.refined_points = refined;
  return out;
}

Hcr::Hcr(ParamStore& ps, const std::string& prefix, const RefineConfig& cfg, Rng& rng) {
  for (int i = 0; i < 3; ++i)
    stages_[static_cast<size_t>(i)] =
        RefineStage(ps, prefix + ".stage" + std::to_string(i + 1), cfg, i + 1, rng);
}

std::array<StageOutput, 3> Hcr::forward(Pass& pass, const ProposalBatch& initial,
                                        const FeaturePyramid& pyramid) const {
  std::array<StageOutput, 3> out;
  const ProposalBatch* cur = &initial;
  for (int i = 0; i < 3; ++i) {
    out[static_cast<size_t>(i)] = stages_[static_cast<size_t>(i)].forward(pass, *cur, pyramid);
    cur = &out[static_cast<size_t>(i)].proposals;
  }
  return out;
}

}  // namespace bcr
