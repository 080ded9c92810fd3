#include "bcr/tensor.hpp"

#include <cmath>
#include <sstream>

namespace bcr {

int64_t shape_size(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  for (int d : shape_)
    if (d <= 0) fail(ErrKind::Shape, "non-positive dimension in shape " + shape_str(shape_));
  data_ = std::make_shared<std::vector<double>>(static_cast<size_t>(shape_size(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (shape_size(shape_) != static_cast<int64_t>(values.size()))
    fail(ErrKind::Shape, "value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape_));
  data_ = std::make_shared<std::vector<double>>(std::move(values));
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  for (auto& v : *t.data_) v = value;
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

double Tensor::item() const {
  if (size() != 1) fail(ErrKind::Shape, "item() on non-scalar tensor " + shape_str(shape_));
  return (*data_)[0];
}

double Tensor::at(const std::vector<int>& idx) const {
  if (static_cast<int>(idx.size()) != rank())
    fail(ErrKind::Shape, "index rank mismatch");
  int64_t off = 0;
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= shape_[i]) fail(ErrKind::Shape, "index out of range");
    off = off * shape_[i] + idx[i];
  }
  return (*data_)[static_cast<size_t>(off)];
}

Tensor Tensor::detached() const {
  Tensor t = *this;
  t.tape_ = nullptr;
  t.node_ = -1;
  return t;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  t.data_ = std::make_shared<std::vector<double>>(*data_);
  return t;
}

Tensor Tape::watch(const Tensor& t) {
  if (t.attached()) fail(ErrKind::Shape, "watch() on an already attached tensor");
  Tensor out = t;
  out.tape_ = this;
  out.node_ = add_node(t.size(), BackFn{});
  return out;
}

int Tape::add_node(int64_t size, BackFn back) {
  nodes_.push_back(Node{size, std::move(back)});
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::attach(Tensor value, int node) {
  value.tape_ = this;
  value.node_ = node;
  return value;
}

std::vector<double>& Tape::grad_buf(int node) {
  auto& g = grads_[static_cast<size_t>(node)];
  if (g.empty()) g.assign(static_cast<size_t>(nodes_[static_cast<size_t>(node)].size), 0.0);
  return g;
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this || loss.node() < 0)
    fail(ErrKind::Shape, "backward() loss is not on this tape");
  if (loss.size() != 1) fail(ErrKind::Shape, "backward() loss must be scalar");
  grads_.assign(nodes_.size(), {});
  grad_buf(loss.node())[0] = 1.0;
  for (int i = loss.node(); i >= 0; --i) {
    auto& g = grads_[static_cast<size_t>(i)];
    if (g.empty()) continue;  // node did not contribute to the loss
    const auto& fn = nodes_[static_cast<size_t>(i)].back;
    if (fn) fn(*this, g.data());
  }
}

std::vector<double> Tape::grad(const Tensor& t) const {
  if (t.tape() != this || t.node() < 0) fail(ErrKind::Shape, "grad() tensor is not on this tape");
  const auto& g = grads_[static_cast<size_t>(t.node())];
  if (g.empty()) return std::vector<double>(static_cast<size_t>(t.size()), 0.0);
  return g;
}

namespace detail {

Tape* merge_tapes(const Tensor& a, const Tensor& b) {
  if (a.tape() && b.tape() && a.tape() != b.tape())
    fail(ErrKind::Shape, "operands live on different tapes");
  return a.tape() ? a.tape() : b.tape();
}

Tape* merge_tapes(const std::vector<Tensor>& ts) {
  Tape* tp = nullptr;
  for (const auto& t : ts) {
    if (!t.tape()) continue;
    if (tp && tp != t.tape()) fail(ErrKind::Shape, "operands live on different tapes");
    tp = t.tape();
  }
  return tp;
}

void check_finite(const Tensor& t, const char* op) {
  const double* p = t.data();
  const int64_t n = t.size();
  for (int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(p[i]))
      fail(ErrKind::Numeric, std::string("non-finite output in ") + op);
  }
}

void accumulate(std::vector<double>& dst, const double* src, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dst[static_cast<size_t>(i)] += src[i];
}

}  // namespace detail

}  // namespace bcr
