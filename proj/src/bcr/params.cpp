#include "bcr/params.hpp"

#include <cmath>

namespace bcr {

Parameter* ParamStore::create(const std::string& name, Tensor init) {
  if (index_.count(name)) fail(ErrKind::Config, "duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = init.detached();
  Parameter* raw = p.get();
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return raw;
}

Parameter* ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

int64_t ParamStore::total_size() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

Tensor glorot_uniform(Shape shape, int fan_in, int fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-a, a);
  return t;
}

}  // namespace bcr
