#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "bcr/error.hpp"

namespace bcr {

using Shape = std::vector<int>;

class Tape;

int64_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major tensor of 64-bit floats. Copies share the underlying
// buffer; operations never mutate their inputs. A tensor may carry a handle
// into a gradient tape, in which case operations consuming it record their
// backward closure onto that tape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

  double* data() { return data_->data(); }
  const double* data() const { return data_->data(); }
  const std::vector<double>& values() const { return *data_; }

  // Scalar extraction; shape must have exactly one element.
  double item() const;
  double at(const std::vector<int>& idx) const;

  bool attached() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

  // Same values, no tape handle.
  Tensor detached() const;

  // Deep copy of the buffer (detached).
  Tensor clone() const;

 private:
  friend class Tape;
  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

// Append-only record of differentiable operations. Nodes are stored in
// execution order, so the reverse sweep visits them in reverse topological
// order. A tape lives for one forward/backward pass and is then discarded.
class Tape {
 public:
  using BackFn = std::function<void(Tape&, const double* grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers `t` as a leaf and returns an attached view of it.
  Tensor watch(const Tensor& t);

  // Reverse sweep from a scalar loss. Gradients of all reached nodes are
  // populated; parameters themselves are untouched.
  void backward(const Tensor& loss);

  // Gradient of a tensor on this tape after backward(); zeros if the loss
  // did not depend on it.
  std::vector<double> grad(const Tensor& t) const;

  int node_count() const { return static_cast<int>(nodes_.size()); }

  // --- used by operation implementations ---
  int add_node(int64_t size, BackFn back);
  Tensor attach(Tensor value, int node);
  std::vector<double>& grad_buf(int node);

 private:
  struct Node {
    int64_t size;
    BackFn back;  // empty for leaves
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

namespace detail {

// Resolves the tape an op result lives on; raises on cross-tape mixing.
Tape* merge_tapes(const Tensor& a, const Tensor& b);
Tape* merge_tapes(const std::vector<Tensor>& ts);

// Raises ErrKind::Numeric naming `op` if any element is NaN/Inf.
void check_finite(const Tensor& t, const char* op);

void accumulate(std::vector<double>& dst, const double* src, int64_t n);

}  // namespace detail

}  // namespace bcr
