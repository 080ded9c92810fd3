#pragma once

#include "bcr/ops.hpp"
#include "bcr/params.hpp"

namespace bcr {

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng);
  Tensor forward(Pass& pass, const Tensor& x) const;  // x [..., in] -> [..., out]
  Parameter* weight() const { return w_; }
  Parameter* bias() const { return b_; }

 private:
  Parameter* w_ = nullptr;  // [in, out]
  Parameter* b_ = nullptr;  // [out]
};

// linear -> relu -> ... -> linear over the last axis
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& ps, const std::string& prefix, const std::vector<int>& dims, Rng& rng);
  Tensor forward(Pass& pass, const Tensor& x) const;
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<Linear> layers_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& prefix, int dim);
  Tensor forward(Pass& pass, const Tensor& x) const;

 private:
  Parameter* gamma_ = nullptr;
  Parameter* beta_ = nullptr;
};

class Conv {
 public:
  Conv() = default;
  Conv(ParamStore& ps, const std::string& prefix, int cin, int cout, int kernel, int stride,
       Rng& rng);
  Tensor forward(Pass& pass, const Tensor& x) const;  // x [cin,H,W]

 private:
  Parameter* w_ = nullptr;  // [cout,cin,k,k]
  Parameter* b_ = nullptr;  // [cout]
  int stride_ = 1;
};

// Standard multi-head self-attention over the middle axis of [B,T,D].
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, const std::string& prefix, int dim, int heads, Rng& rng);
  Tensor forward(Pass& pass, const Tensor& x) const;

 private:
  Linear q_, k_, v_, o_;
  int dim_ = 0;
  int heads_ = 0;
};

}  // namespace bcr
