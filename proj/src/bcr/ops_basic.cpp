#include <algorithm>
#include <cmath>
#include <numeric>

#include "bcr/ops.hpp"

namespace bcr {

namespace {

// Broadcast classification for elementwise binary ops.
struct BinPlan {
  bool a_scalar = false;
  bool b_scalar = false;
  Shape out_shape;
};

BinPlan bin_plan(const Tensor& a, const Tensor& b, const char* op) {
  BinPlan p;
  if (a.shape() == b.shape()) {
    p.out_shape = a.shape();
    return p;
  }
  if (a.size() == 1) {
    p.a_scalar = true;
    p.out_shape = b.shape();
    return p;
  }
  if (b.size() == 1) {
    p.b_scalar = true;
    p.out_shape = a.shape();
    return p;
  }
  fail(ErrKind::Shape, std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                           " vs " + shape_str(b.shape()));
}

std::vector<int64_t> strides_of(const Shape& s) {
  std::vector<int64_t> st(s.size());
  int64_t acc = 1;
  for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
    st[static_cast<size_t>(i)] = acc;
    acc *= s[static_cast<size_t>(i)];
  }
  return st;
}

// Splits a shape into [outer, axis, inner] extents around `axis`.
void axis_split(const Shape& s, int axis, int64_t& outer, int64_t& n, int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
  n = s[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
}

int norm_axis(const Tensor& t, int axis, const char* op) {
  int r = t.rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) fail(ErrKind::Shape, std::string(op) + ": axis out of range");
  return axis;
}

// f(ga, gb, g): accumulate into whichever parent buffers exist.
template <typename Back>
Tensor record(Tensor out, const char* op, Tape* tp, Back&& back) {
  detail::check_finite(out, op);
  if (!tp) return out;
  int node = tp->add_node(out.size(), std::forward<Back>(back));
  return tp->attach(std::move(out), node);
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise binary

static Tensor binary_impl(const Tensor& a, const Tensor& b, const char* op, int which) {
  BinPlan p = bin_plan(a, b, op);
  const int64_t n = shape_size(p.out_shape);
  std::vector<double> vals(static_cast<size_t>(n));
  const double* pa = a.data();
  const double* pb = b.data();
  for (int64_t i = 0; i < n; ++i) {
    double x = pa[p.a_scalar ? 0 : i];
    double y = pb[p.b_scalar ? 0 : i];
    switch (which) {
      case 0: vals[static_cast<size_t>(i)] = x + y; break;
      case 1: vals[static_cast<size_t>(i)] = x - y; break;
      case 2: vals[static_cast<size_t>(i)] = x * y; break;
      default: vals[static_cast<size_t>(i)] = x / y; break;
    }
  }
  Tensor out(p.out_shape, std::move(vals));
  Tape* tp = detail::merge_tapes(a, b);
  if (!tp) {
    detail::check_finite(out, op);
    return out;
  }
  const int na = a.node(), nb = b.node();
  Tensor ac = a, bc = b;  // keep operand buffers alive for the backward pass
  return record(std::move(out), op, tp, [=](Tape& t, const double* g) {
    if (na >= 0) {
      auto& ga = t.grad_buf(na);
      for (int64_t i = 0; i < n; ++i) {
        double d;
        switch (which) {
          case 0: d = g[i]; break;
          case 1: d = g[i]; break;
          case 2: d = g[i] * bc.data()[p.b_scalar ? 0 : i]; break;
          default: d = g[i] / bc.data()[p.b_scalar ? 0 : i]; break;
        }
        ga[p.a_scalar ? 0 : static_cast<size_t>(i)] += d;
      }
    }
    if (nb >= 0) {
      auto& gb = t.grad_buf(nb);
      for (int64_t i = 0; i < n; ++i) {
        double x = ac.data()[p.a_scalar ? 0 : i];
        double y = bc.data()[p.b_scalar ? 0 : i];
        double d;
        switch (which) {
          case 0: d = g[i]; break;
          case 1: d = -g[i]; break;
          case 2: d = g[i] * x; break;
          default: d = -g[i] * x / (y * y); break;
        }
        gb[p.b_scalar ? 0 : static_cast<size_t>(i)] += d;
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary_impl(a, b, "add", 0); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_impl(a, b, "sub", 1); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_impl(a, b, "mul", 2); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_impl(a, b, "div", 3); }

// ---------------------------------------------------------------------------
// elementwise unary

template <typename Fwd, typename Dx>
static Tensor unary_impl(const Tensor& a, const char* op, Fwd fwd, Dx dx) {
  const int64_t n = a.size();
  std::vector<double> vals(static_cast<size_t>(n));
  const double* pa = a.data();
  for (int64_t i = 0; i < n; ++i) vals[static_cast<size_t>(i)] = fwd(pa[i]);
  Tensor out(a.shape(), std::move(vals));
  Tape* tp = a.tape();
  if (!tp) {
    detail::check_finite(out, op);
    return out;
  }
  const int na = a.node();
  Tensor ac = a, oc = out;
  return record(std::move(out), op, tp, [=](Tape& t, const double* g) {
    auto& ga = t.grad_buf(na);
    for (int64_t i = 0; i < n; ++i)
      ga[static_cast<size_t>(i)] += g[i] * dx(ac.data()[i], oc.data()[i]);
  });
}

Tensor scale(const Tensor& a, double c) {
  return unary_impl(a, "scale", [c](double x) { return x * c; },
                    [c](double, double) { return c; });
}

Tensor add_c(const Tensor& a, double c) {
  return unary_impl(a, "add_c", [c](double x) { return x + c; },
                    [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) {
  return unary_impl(a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor abs(const Tensor& a) {
  return unary_impl(a, "abs", [](double x) { return std::fabs(x); },
                    [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& a) {
  return unary_impl(a, "relu", [](double x) { return x > 0 ? x : 0.0; },
                    [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_impl(a, "sigmoid",
                    [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                                 : std::exp(x) / (1.0 + std::exp(x)); },
                    [](double, double y) { return y * (1.0 - y); });
}

Tensor logit(const Tensor& a) {
  const double* pa = a.data();
  for (int64_t i = 0; i < a.size(); ++i)
    if (!(pa[i] > 0.0 && pa[i] < 1.0))
      fail(ErrKind::Domain, "logit: value outside (0,1)");
  return unary_impl(a, "logit", [](double x) { return std::log(x / (1.0 - x)); },
                    [](double x, double) { return 1.0 / (x * (1.0 - x)); });
}

Tensor exp(const Tensor& a) {
  return unary_impl(a, "exp", [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_impl(a, "log", [](double x) { return std::log(x); },
                    [](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary_impl(a, "clamp",
                    [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
                    [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// shape ops

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    fail(ErrKind::Shape, "reshape: size mismatch " + shape_str(a.shape()) + " -> " + shape_str(shape));
  Tensor out(shape, a.values());
  Tape* tp = a.tape();
  if (!tp) return out;
  const int na = a.node();
  const int64_t n = a.size();
  return record(std::move(out), "reshape", tp, [na, n](Tape& t, const double* g) {
    detail::accumulate(t.grad_buf(na), g, n);
  });
}

namespace {
// Permutes data of `in_shape` by `perm` (out dim i = in dim perm[i]).
std::vector<double> permute_copy(const double* src, const Shape& in_shape,
                                 const std::vector<int>& perm) {
  const int r = static_cast<int>(in_shape.size());
  Shape out_shape(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) out_shape[static_cast<size_t>(i)] = in_shape[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  auto in_strides = strides_of(in_shape);
  const int64_t n = shape_size(in_shape);
  std::vector<double> out(static_cast<size_t>(n));
  std::vector<int> idx(static_cast<size_t>(r), 0);
  for (int64_t o = 0; o < n; ++o) {
    int64_t src_off = 0;
    for (int i = 0; i < r; ++i)
      src_off += static_cast<int64_t>(idx[static_cast<size_t>(i)]) *
                 in_strides[static_cast<size_t>(perm[static_cast<size_t>(i)])];
    out[static_cast<size_t>(o)] = src[src_off];
    for (int i = r - 1; i >= 0; --i) {
      if (++idx[static_cast<size_t>(i)] < out_shape[static_cast<size_t>(i)]) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return out;
}
}  // namespace

Tensor transpose(const Tensor& a, const std::vector<int>& perm) {
  const int r = a.rank();
  if (static_cast<int>(perm.size()) != r) fail(ErrKind::Shape, "transpose: bad permutation size");
  std::vector<bool> seen(static_cast<size_t>(r), false);
  for (int p : perm) {
    if (p < 0 || p >= r || seen[static_cast<size_t>(p)]) fail(ErrKind::Shape, "transpose: invalid permutation");
    seen[static_cast<size_t>(p)] = true;
  }
  Shape out_shape(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) out_shape[static_cast<size_t>(i)] = a.dim(perm[static_cast<size_t>(i)]);
  Tensor out(out_shape, permute_copy(a.data(), a.shape(), perm));
  Tape* tp = a.tape();
  if (!tp) return out;
  // gradient flows back through the inverse permutation
  std::vector<int> inv(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) inv[static_cast<size_t>(perm[static_cast<size_t>(i)])] = i;
  const int na = a.node();
  const int64_t n = a.size();
  return record(std::move(out), "transpose", tp, [na, n, inv, out_shape](Tape& t, const double* g) {
    auto back = permute_copy(g, out_shape, inv);
    detail::accumulate(t.grad_buf(na), back.data(), n);
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) fail(ErrKind::Shape, "concat: no operands");
  axis = norm_axis(parts[0], axis, "concat");
  Shape out_shape = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    if (p.rank() != parts[0].rank()) fail(ErrKind::Shape, "concat: rank mismatch");
    for (int i = 0; i < p.rank(); ++i)
      if (i != axis && p.dim(i) != parts[0].dim(i))
        fail(ErrKind::Shape, "concat: shape mismatch off the concat axis");
    total += p.dim(axis);
  }
  out_shape[static_cast<size_t>(axis)] = total;
  int64_t outer, n_unused, inner;
  axis_split(out_shape, axis, outer, n_unused, inner);
  Tensor out(out_shape);
  double* po = out.data();
  int64_t axis_off = 0;
  for (const auto& p : parts) {
    const int64_t len = p.dim(axis);
    const double* ps = p.data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(ps + o * len * inner, ps + (o + 1) * len * inner,
                po + (o * total + axis_off) * inner);
    axis_off += len;
  }
  Tape* tp = detail::merge_tapes(parts);
  if (!tp) return out;
  struct PartInfo { int node; int64_t len; };
  std::vector<PartInfo> info;
  for (const auto& p : parts) info.push_back({p.node(), p.dim(axis)});
  const int64_t tot = total;
  return record(std::move(out), "concat", tp, [info, outer, inner, tot](Tape& t, const double* g) {
    int64_t off = 0;
    for (const auto& pi : info) {
      if (pi.node >= 0) {
        auto& gp = t.grad_buf(pi.node);
        for (int64_t o = 0; o < outer; ++o) {
          const double* gs = g + (o * tot + off) * inner;
          double* gd = gp.data() + o * pi.len * inner;
          for (int64_t i = 0; i < pi.len * inner; ++i) gd[i] += gs[i];
        }
      }
      off += pi.len;
    }
  });
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
  axis = norm_axis(a, axis, "slice");
  if (start < 0 || len <= 0 || start + len > a.dim(axis))
    fail(ErrKind::Shape, "slice: range out of bounds");
  Shape out_shape = a.shape();
  out_shape[static_cast<size_t>(axis)] = len;
  int64_t outer, n, inner;
  axis_split(a.shape(), axis, outer, n, inner);
  Tensor out(out_shape);
  double* po = out.data();
  const double* ps = a.data();
  for (int64_t o = 0; o < outer; ++o)
    std::copy(ps + (o * n + start) * inner, ps + (o * n + start + len) * inner,
              po + o * len * inner);
  Tape* tp = a.tape();
  if (!tp) return out;
  const int na = a.node();
  return record(std::move(out), "slice", tp, [na, outer, n, inner, start, len](Tape& t, const double* g) {
    auto& ga = t.grad_buf(na);
    for (int64_t o = 0; o < outer; ++o) {
      double* gd = ga.data() + (o * n + start) * inner;
      const double* gs = g + o * len * inner;
      for (int64_t i = 0; i < len * inner; ++i) gd[i] += gs[i];
    }
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& rows) {
  if (a.rank() < 1) fail(ErrKind::Shape, "gather_rows: rank 0 input");
  const int64_t r = a.dim(0);
  const int64_t inner = a.size() / r;
  for (int i : rows)
    if (i < 0 || i >= r) fail(ErrKind::Shape, "gather_rows: row index out of range");
  Shape out_shape = a.shape();
  out_shape[0] = static_cast<int>(rows.size());
  Tensor out(out_shape);
  double* po = out.data();
  const double* ps = a.data();
  for (size_t k = 0; k < rows.size(); ++k)
    std::copy(ps + rows[k] * inner, ps + (rows[k] + 1) * inner, po + static_cast<int64_t>(k) * inner);
  Tape* tp = a.tape();
  if (!tp) return out;
  const int na = a.node();
  return record(std::move(out), "gather_rows", tp, [na, rows, inner](Tape& t, const double* g) {
    auto& ga = t.grad_buf(na);
    for (size_t k = 0; k < rows.size(); ++k) {
      double* gd = ga.data() + rows[k] * inner;
      const double* gs = g + static_cast<int64_t>(k) * inner;
      for (int64_t i = 0; i < inner; ++i) gd[i] += gs[i];
    }
  });
}

// ---------------------------------------------------------------------------
// reductions

Tensor sum(const Tensor& a) {
  double s = 0;
  const double* pa = a.data();
  for (int64_t i = 0; i < a.size(); ++i) s += pa[i];
  Tensor out = Tensor::scalar(s);
  Tape* tp = a.tape();
  if (!tp) {
    detail::check_finite(out, "sum");
    return out;
  }
  const int na = a.node();
  const int64_t n = a.size();
  return record(std::move(out), "sum", tp, [na, n](Tape& t, const double* g) {
    auto& ga = t.grad_buf(na);
    for (int64_t i = 0; i < n; ++i) ga[static_cast<size_t>(i)] += g[0];
  });
}

Tensor sum(const Tensor& a, int axis) {
  axis = norm_axis(a, axis, "sum");
  int64_t outer, n, inner;
  axis_split(a.shape(), axis, outer, n, inner);
  Shape out_shape;
  for (int i = 0; i < a.rank(); ++i)
    if (i != axis) out_shape.push_back(a.dim(i));
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out(out_shape);
  double* po = out.data();
  const double* ps = a.data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t j = 0; j < n; ++j)
      for (int64_t i = 0; i < inner; ++i) po[o * inner + i] += ps[(o * n + j) * inner + i];
  Tape* tp = a.tape();
  if (!tp) {
    detail::check_finite(out, "sum");
    return out;
  }
  const int na = a.node();
  return record(std::move(out), "sum", tp, [na, outer, n, inner](Tape& t, const double* g) {
    auto& ga = t.grad_buf(na);
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t j = 0; j < n; ++j)
        for (int64_t i = 0; i < inner; ++i) ga[(o * n + j) * inner + i] += g[o * inner + i];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor mean(const Tensor& a, int axis) {
  axis = norm_axis(a, axis, "mean");
  return scale(sum(a, axis), 1.0 / static_cast<double>(a.dim(axis)));
}

// ---------------------------------------------------------------------------
// matmul

namespace {

// C[m,n] += A[m,k] * B[k,n]
void mm_nn(const double* A, const double* B, double* C, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* a_row = A + i * k;
    double* c_row = C + i * n;
    for (int64_t l = 0; l < k; ++l) {
      const double av = a_row[l];
      const double* b_row = B + l * n;
      for (int64_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
    }
  }
}

// C[m,k] += G[m,n] * B[k,n]^T
void mm_nt(const double* G, const double* B, double* C, int64_t m, int64_t n, int64_t k) {
  for (int64_t i = 0; i < m; ++i) {
    const double* g_row = G + i * n;
    double* c_row = C + i * k;
    for (int64_t l = 0; l < k; ++l) {
      const double* b_row = B + l * n;
      double acc = 0;
      for (int64_t j = 0; j < n; ++j) acc += g_row[j] * b_row[j];
      c_row[l] += acc;
    }
  }
}

// C[k,n] += A[m,k]^T * G[m,n]
void mm_tn(const double* A, const double* G, double* C, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* a_row = A + i * k;
    const double* g_row = G + i * n;
    for (int64_t l = 0; l < k; ++l) {
      const double av = a_row[l];
      double* c_row = C + l * n;
      for (int64_t j = 0; j < n; ++j) c_row[j] += av * g_row[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) fail(ErrKind::Shape, "matmul: operands must have rank >= 2");
  const int64_t m = a.dim(a.rank() - 2);
  const int64_t ka = a.dim(a.rank() - 1);
  const int64_t kb = b.dim(b.rank() - 2);
  const int64_t n = b.dim(b.rank() - 1);
  if (ka != kb)
    fail(ErrKind::Shape, "matmul: inner dims differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  Shape b_batch(b.shape().begin(), b.shape().end() - 2);
  bool a_bcast = false, b_bcast = false;
  Shape batch;
  if (a_batch == b_batch) {
    batch = a_batch;
  } else if (a_batch.empty()) {
    batch = b_batch;
    a_bcast = true;
  } else if (b_batch.empty()) {
    batch = a_batch;
    b_bcast = true;
  } else {
    fail(ErrKind::Shape, "matmul: batch dims differ");
  }
  const int64_t nb = shape_size(batch);
  Shape out_shape = batch;
  out_shape.push_back(static_cast<int>(m));
  out_shape.push_back(static_cast<int>(n));
  Tensor out(out_shape);
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int64_t bi = 0; bi < nb; ++bi)
    mm_nn(pa + (a_bcast ? 0 : bi * m * ka), pb + (b_bcast ? 0 : bi * ka * n), po + bi * m * n,
          m, ka, n);
  Tape* tp = detail::merge_tapes(a, b);
  if (!tp) {
    detail::check_finite(out, "matmul");
    return out;
  }
  const int na = a.node(), nbn = b.node();
  const int64_t k = ka;
  Tensor ac = a, bc = b;
  return record(std::move(out), "matmul", tp,
                [=](Tape& t, const double* g) {
    if (na >= 0) {
      auto& ga = t.grad_buf(na);
      for (int64_t bi = 0; bi < nb; ++bi)
        mm_nt(g + bi * m * n, bc.data() + (b_bcast ? 0 : bi * k * n),
              ga.data() + (a_bcast ? 0 : bi * m * k), m, n, k);
    }
    if (nbn >= 0) {
      auto& gb = t.grad_buf(nbn);
      for (int64_t bi = 0; bi < nb; ++bi)
        mm_tn(ac.data() + (a_bcast ? 0 : bi * m * k), g + bi * m * n,
              gb.data() + (b_bcast ? 0 : bi * k * n), m, k, n);
    }
  });
}

// ---------------------------------------------------------------------------
// softmax / layer_norm / add_bias

Tensor softmax(const Tensor& a, int axis) {
  axis = norm_axis(a, axis, "softmax");
  int64_t outer, n, inner;
  axis_split(a.shape(), axis, outer, n, inner);
  Tensor out(a.shape());
  const double* ps = a.data();
  double* po = out.data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      const int64_t base = o * n * inner + i;
      double mx = ps[base];
      for (int64_t j = 1; j < n; ++j) mx = std::max(mx, ps[base + j * inner]);
      double z = 0;
      for (int64_t j = 0; j < n; ++j) {
        double e = std::exp(ps[base + j * inner] - mx);
        po[base + j * inner] = e;
        z += e;
      }
      for (int64_t j = 0; j < n; ++j) po[base + j * inner] /= z;
    }
  }
  Tape* tp = a.tape();
  if (!tp) {
    detail::check_finite(out, "softmax");
    return out;
  }
  const int na = a.node();
  Tensor oc = out;
  return record(std::move(out), "softmax", tp, [na, outer, n, inner, oc](Tape& t, const double* g) {
    auto& ga = t.grad_buf(na);
    const double* s = oc.data();
    for (int64_t o = 0; o < outer; ++o) {
      for (int64_t i = 0; i < inner; ++i) {
        const int64_t base = o * n * inner + i;
        double dot = 0;
        for (int64_t j = 0; j < n; ++j) dot += g[base + j * inner] * s[base + j * inner];
        for (int64_t j = 0; j < n; ++j)
          ga[base + j * inner] += s[base + j * inner] * (g[base + j * inner] - dot);
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const int d = x.dim(x.rank() - 1);
  if (gamma.size() != d || beta.size() != d)
    fail(ErrKind::Shape, "layer_norm: gamma/beta length must equal last axis");
  const int64_t rows = x.size() / d;
  Tensor out(x.shape());
  std::vector<double> xhat(static_cast<size_t>(x.size()));
  std::vector<double> inv_std(static_cast<size_t>(rows));
  const double* px = x.data();
  const double* pg = gamma.data();
  const double* pb = beta.data();
  double* po = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = px + r * d;
    double mu = 0;
    for (int i = 0; i < d; ++i) mu += xr[i];
    mu /= d;
    double var = 0;
    for (int i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(r)] = inv;
    for (int i = 0; i < d; ++i) {
      double xh = (xr[i] - mu) * inv;
      xhat[static_cast<size_t>(r * d + i)] = xh;
      po[r * d + i] = xh * pg[i] + pb[i];
    }
  }
  Tape* tp = detail::merge_tapes({x, gamma, beta});
  if (!tp) {
    detail::check_finite(out, "layer_norm");
    return out;
  }
  const int nx = x.node(), ng = gamma.node(), nbt = beta.node();
  Tensor gc = gamma;
  auto xh = std::make_shared<std::vector<double>>(std::move(xhat));
  auto istd = std::make_shared<std::vector<double>>(std::move(inv_std));
  return record(std::move(out), "layer_norm", tp, [=](Tape& t, const double* g) {
    const double* pgm = gc.data();
    for (int64_t r = 0; r < rows; ++r) {
      const double* gr = g + r * d;
      const double* xhr = xh->data() + r * d;
      const double inv = (*istd)[static_cast<size_t>(r)];
      if (ng >= 0) {
        auto& gg = t.grad_buf(ng);
        for (int i = 0; i < d; ++i) gg[static_cast<size_t>(i)] += gr[i] * xhr[i];
      }
      if (nbt >= 0) {
        auto& gb = t.grad_buf(nbt);
        for (int i = 0; i < d; ++i) gb[static_cast<size_t>(i)] += gr[i];
      }
      if (nx >= 0) {
        auto& gx = t.grad_buf(nx);
        double mean_dy = 0, mean_dy_xh = 0;
        for (int i = 0; i < d; ++i) {
          double dy = gr[i] * pgm[i];
          mean_dy += dy;
          mean_dy_xh += dy * xhr[i];
        }
        mean_dy /= d;
        mean_dy_xh /= d;
        for (int i = 0; i < d; ++i) {
          double dy = gr[i] * pgm[i];
          gx[static_cast<size_t>(r * d + i)] += inv * (dy - mean_dy - xhr[i] * mean_dy_xh);
        }
      }
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  const int d = x.dim(x.rank() - 1);
  if (b.size() != d) fail(ErrKind::Shape, "add_bias: bias length must equal last axis");
  const int64_t rows = x.size() / d;
  Tensor out(x.shape(), x.values());
  double* po = out.data();
  const double* pb = b.data();
  for (int64_t r = 0; r < rows; ++r)
    for (int i = 0; i < d; ++i) po[r * d + i] += pb[i];
  Tape* tp = detail::merge_tapes(x, b);
  if (!tp) {
    detail::check_finite(out, "add_bias");
    return out;
  }
  const int nx = x.node(), nb = b.node();
  return record(std::move(out), "add_bias", tp, [nx, nb, rows, d](Tape& t, const double* g) {
    if (nx >= 0) detail::accumulate(t.grad_buf(nx), g, rows * d);
    if (nb >= 0) {
      auto& gb = t.grad_buf(nb);
      for (int64_t r = 0; r < rows; ++r)
        for (int i = 0; i < d; ++i) gb[static_cast<size_t>(i)] += g[r * d + i];
    }
  });
}

}  // namespace bcr
