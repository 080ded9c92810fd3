#include "bcr/layers.hpp"

#include <cmath>

namespace bcr {

Linear::Linear(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng) {
  w_ = ps.create(prefix + ".w", glorot_uniform({in, out}, in, out, rng));
  b_ = ps.create(prefix + ".b", Tensor({out}));
}

Tensor Linear::forward(Pass& pass, const Tensor& x) const {
  const int in = w_->value.dim(0);
  const int out = w_->value.dim(1);
  const int64_t rows = x.size() / in;
  Tensor flat = reshape(x, {static_cast<int>(rows), in});
  Tensor y = add_bias(matmul(flat, pass.use(w_)), pass.use(b_));
  Shape out_shape = x.shape();
  out_shape.back() = out;
  return reshape(y, out_shape);
}

Mlp::Mlp(ParamStore& ps, const std::string& prefix, const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2) fail(ErrKind::Config, "mlp needs at least input and output dims");
  for (size_t i = 0; i + 1 < dims.size(); ++i)
    layers_.emplace_back(ps, prefix + ".l" + std::to_string(i), dims[i], dims[i + 1], rng);
}

Tensor Mlp::forward(Pass& pass, const Tensor& x) const {
  Tensor h = x;
  for (size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(pass, h);
    if (i + 1 < layers_.size()) h = relu(h);
  }
  return h;
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& prefix, int dim) {
  gamma_ = ps.create(prefix + ".gamma", Tensor::full({dim}, 1.0));
  beta_ = ps.create(prefix + ".beta", Tensor({dim}));
}

Tensor LayerNorm::forward(Pass& pass, const Tensor& x) const {
  return layer_norm(x, pass.use(gamma_), pass.use(beta_));
}

Conv::Conv(ParamStore& ps, const std::string& prefix, int cin, int cout, int kernel, int stride,
           Rng& rng)
    : stride_(stride) {
  const int fan_in = cin * kernel * kernel;
  const int fan_out = cout * kernel * kernel;
  w_ = ps.create(prefix + ".w", glorot_uniform({cout, cin, kernel, kernel}, fan_in, fan_out, rng));
  b_ = ps.create(prefix + ".b", Tensor({cout}));
}

Tensor Conv::forward(Pass& pass, const Tensor& x) const {
  return conv2d(x, pass.use(w_), pass.use(b_), stride_);
}

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, const std::string& prefix, int dim,
                                       int heads, Rng& rng)
    : dim_(dim), heads_(heads) {
  if (dim % heads != 0) fail(ErrKind::Config, "attention dim not divisible by head count");
  q_ = Linear(ps, prefix + ".q", dim, dim, rng);
  k_ = Linear(ps, prefix + ".k", dim, dim, rng);
  v_ = Linear(ps, prefix + ".v", dim, dim, rng);
  o_ = Linear(ps, prefix + ".o", dim, dim, rng);
}

Tensor MultiHeadAttention::forward(Pass& pass, const Tensor& x) const {
  if (x.rank() != 3 || x.dim(2) != dim_)
    fail(ErrKind::Shape, "attention expects [B,T,D] with D=" + std::to_string(dim_));
  const int b = x.dim(0), t = x.dim(1);
  const int dh = dim_ / heads_;
  auto split = [&](const Tensor& y) {
    // [B,T,D] -> [B*H, T, dh]
    return reshape(transpose(reshape(y, {b, t, heads_, dh}), {0, 2, 1, 3}), {b * heads_, t, dh});
  };
  Tensor q = split(q_.forward(pass, x));
  Tensor k = split(k_.forward(pass, x));
  Tensor v = split(v_.forward(pass, x));
  Tensor scores = scale(matmul(q, transpose(k, {0, 2, 1})), 1.0 / std::sqrt(double(dh)));
  Tensor attn = softmax(scores, -1);
  Tensor ctx = matmul(attn, v);  // [B*H, T, dh]
  Tensor merged = reshape(transpose(reshape(ctx, {b, heads_, t, dh}), {0, 2, 1, 3}), {b, t, dim_});
  return o_.forward(pass, merged);
}

}  // namespace bcr
