#pragma once

#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "bcr/rng.hpp"
#include "bcr/tensor.hpp"

namespace bcr {

// A named trainable tensor plus its optimizer moments. Moments are sized
// lazily by the optimizer and persisted in checkpoints.
struct Parameter {
  std::string name;
  Tensor value;
  std::vector<double> m;
  std::vector<double> v;
};

// Owns all parameters of a model in creation order. Creation order is the
// canonical serialization order, so checkpoints are byte-stable.
class ParamStore {
 public:
  Parameter* create(const std::string& name, Tensor init);
  Parameter* find(const std::string& name) const;
  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
  int64_t total_size() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, size_t> index_;
};

// Glorot uniform init: U(-a, a) with a = sqrt(6/(fan_in+fan_out)).
Tensor glorot_uniform(Shape shape, int fan_in, int fan_out, Rng& rng);

// One forward (and optional backward) execution context. Parameters are
// watched onto the tape on first use; with a null tape the raw values pass
// through, which is the no-grad inference path.
class Pass {
 public:
  explicit Pass(Tape* tape = nullptr) : tape_(tape) {}

  Tensor use(Parameter* p) {
    if (!tape_) return p->value;
    auto it = cache_.find(p);
    if (it != cache_.end()) return it->second;
    Tensor t = tape_->watch(p->value);
    cache_.emplace(p, t);
    return t;
  }

  Tape* tape() const { return tape_; }

  // Substitutes an already-attached tensor for a parameter (used by gradient
  // checks to probe a parameter without mutating the store).
  void inject(Parameter* p, const Tensor& probe) { cache_.emplace(p, probe); }

  // Gradient of a parameter after tape().backward(); zeros when the loss
  // never touched it.
  std::vector<double> grad(Parameter* p) const {
    auto it = cache_.find(p);
    if (it == cache_.end()) return std::vector<double>(static_cast<size_t>(p->value.size()), 0.0);
    return tape_->grad(it->second);
  }

 private:
  Tape* tape_;
  std::unordered_map<Parameter*, Tensor> cache_;
};

}  // namespace bcr
