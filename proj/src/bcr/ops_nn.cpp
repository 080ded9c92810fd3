#include <algorithm>
#include <cmath>

#include "bcr/ops.hpp"

namespace bcr {

namespace {

struct ConvDims {
  int cin, h, w, cout, kh, kw, oh, ow, pad_t, pad_l, stride;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
  if (x.rank() != 3 || w.rank() != 4 || b.rank() != 1)
    fail(ErrKind::Shape, "conv2d: expected x[Cin,H,W], w[Cout,Cin,kh,kw], b[Cout]");
  if (stride != 1 && stride != 2) fail(ErrKind::Shape, "conv2d: stride must be 1 or 2");
  ConvDims d;
  d.cin = x.dim(0);
  d.h = x.dim(1);
  d.w = x.dim(2);
  d.cout = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  d.stride = stride;
  if (w.dim(1) != d.cin) fail(ErrKind::Shape, "conv2d: weight Cin mismatch");
  if (b.dim(0) != d.cout) fail(ErrKind::Shape, "conv2d: bias Cout mismatch");
  d.oh = (d.h + stride - 1) / stride;
  d.ow = (d.w + stride - 1) / stride;
  const int pad_h = std::max((d.oh - 1) * stride + d.kh - d.h, 0);
  const int pad_w = std::max((d.ow - 1) * stride + d.kw - d.w, 0);
  d.pad_t = pad_h / 2;
  d.pad_l = pad_w / 2;
  return d;
}

// Valid output-column range for a given kernel column: indices ox with
// 0 <= ox*stride + kx - pad_l < W.
inline void ox_range(int kx, int pad_l, int stride, int w, int ow, int& lo, int& hi) {
  int shift = pad_l - kx;  // ix = ox*stride - shift
  lo = shift <= 0 ? 0 : (shift + stride - 1) / stride;
  int max_ix = w - 1 + shift;
  hi = max_ix < 0 ? 0 : std::min(ow, max_ix / stride + 1);
  if (hi < lo) hi = lo;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
  const ConvDims d = conv_dims(x, w, b, stride);
  Tensor out({d.cout, d.oh, d.ow});
  const double* px = x.data();
  const double* pw = w.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int co = 0; co < d.cout; ++co) {
    double* out_c = po + static_cast<int64_t>(co) * d.oh * d.ow;
    std::fill(out_c, out_c + static_cast<int64_t>(d.oh) * d.ow, pb[co]);
    for (int ci = 0; ci < d.cin; ++ci) {
      const double* x_c = px + static_cast<int64_t>(ci) * d.h * d.w;
      const double* w_c = pw + (static_cast<int64_t>(co) * d.cin + ci) * d.kh * d.kw;
      for (int ky = 0; ky < d.kh; ++ky) {
        for (int kx = 0; kx < d.kw; ++kx) {
          const double wv = w_c[ky * d.kw + kx];
          if (wv == 0.0) continue;
          int lo, hi;
          ox_range(kx, d.pad_l, d.stride, d.w, d.ow, lo, hi);
          for (int oy = 0; oy < d.oh; ++oy) {
            const int iy = oy * d.stride + ky - d.pad_t;
            if (iy < 0 || iy >= d.h) continue;
            const double* xrow = x_c + static_cast<int64_t>(iy) * d.w + kx - d.pad_l;
            double* orow = out_c + static_cast<int64_t>(oy) * d.ow;
            if (d.stride == 1) {
              for (int ox = lo; ox < hi; ++ox) orow[ox] += wv * xrow[ox];
            } else {
              for (int ox = lo; ox < hi; ++ox) orow[ox] += wv * xrow[2 * ox];
            }
          }
        }
      }
    }
  }
  Tape* tp = detail::merge_tapes({x, w, b});
  if (!tp) {
    detail::check_finite(out, "conv2d");
    return out;
  }
  const int nx = x.node(), nw = w.node(), nb = b.node();
  Tensor xc = x, wc = w;
  detail::check_finite(out, "conv2d");
  int node = tp->add_node(out.size(), [=](Tape& t, const double* g) {
    if (nb >= 0) {
      auto& gb = t.grad_buf(nb);
      for (int co = 0; co < d.cout; ++co) {
        const double* gc = g + static_cast<int64_t>(co) * d.oh * d.ow;
        double s = 0;
        for (int64_t i = 0; i < static_cast<int64_t>(d.oh) * d.ow; ++i) s += gc[i];
        gb[static_cast<size_t>(co)] += s;
      }
    }
    const bool want_x = nx >= 0, want_w = nw >= 0;
    if (!want_x && !want_w) return;
    auto* gxp = want_x ? &t.grad_buf(nx) : nullptr;
    auto* gwp = want_w ? &t.grad_buf(nw) : nullptr;
    const double* pxv = xc.data();
    const double* pwv = wc.data();
    for (int co = 0; co < d.cout; ++co) {
      const double* g_c = g + static_cast<int64_t>(co) * d.oh * d.ow;
      for (int ci = 0; ci < d.cin; ++ci) {
        const double* x_c = pxv + static_cast<int64_t>(ci) * d.h * d.w;
        const int64_t wbase = (static_cast<int64_t>(co) * d.cin + ci) * d.kh * d.kw;
        for (int ky = 0; ky < d.kh; ++ky) {
          for (int kx = 0; kx < d.kw; ++kx) {
            int lo, hi;
            ox_range(kx, d.pad_l, d.stride, d.w, d.ow, lo, hi);
            const double wv = pwv[wbase + ky * d.kw + kx];
            double wg = 0;
            for (int oy = 0; oy < d.oh; ++oy) {
              const int iy = oy * d.stride + ky - d.pad_t;
              if (iy < 0 || iy >= d.h) continue;
              const int64_t xoff = static_cast<int64_t>(iy) * d.w + kx - d.pad_l;
              const double* grow = g_c + static_cast<int64_t>(oy) * d.ow;
              if (want_x) {
                double* gxrow = gxp->data() + static_cast<int64_t>(ci) * d.h * d.w + xoff;
                for (int ox = lo; ox < hi; ++ox) gxrow[ox * d.stride] += wv * grow[ox];
              }
              if (want_w) {
                const double* xrow = x_c + xoff;
                for (int ox = lo; ox < hi; ++ox) wg += xrow[ox * d.stride] * grow[ox];
              }
            }
            if (want_w) (*gwp)[static_cast<size_t>(wbase + ky * d.kw + kx)] += wg;
          }
        }
      }
    }
  });
  return tp->attach(std::move(out), node);
}

Tensor max_pool2d(const Tensor& x) {
  if (x.rank() != 3) fail(ErrKind::Shape, "max_pool2d: expected [C,H,W]");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2) fail(ErrKind::Shape, "max_pool2d: spatial dims must be even");
  const int oh = h / 2, ow = w / 2;
  Tensor out({c, oh, ow});
  std::vector<int64_t> arg(static_cast<size_t>(out.size()));
  const double* px = x.data();
  double* po = out.data();
  for (int ci = 0; ci < c; ++ci) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double best = -1e300;
        int64_t best_i = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int64_t idx = (static_cast<int64_t>(ci) * h + (2 * oy + dy)) * w + 2 * ox + dx;
            if (px[idx] > best) {
              best = px[idx];
              best_i = idx;
            }
          }
        }
        const int64_t oidx = (static_cast<int64_t>(ci) * oh + oy) * ow + ox;
        po[oidx] = best;
        arg[static_cast<size_t>(oidx)] = best_i;
      }
    }
  }
  Tape* tp = x.tape();
  detail::check_finite(out, "max_pool2d");
  if (!tp) return out;
  const int nx = x.node();
  auto argp = std::make_shared<std::vector<int64_t>>(std::move(arg));
  const int64_t n = out.size();
  int node = tp->add_node(n, [nx, argp, n](Tape& t, const double* g) {
    auto& gx = t.grad_buf(nx);
    for (int64_t i = 0; i < n; ++i) gx[static_cast<size_t>((*argp)[static_cast<size_t>(i)])] += g[i];
  });
  return tp->attach(std::move(out), node);
}

Tensor upsample_nearest(const Tensor& x, int factor) {
  if (x.rank() != 3) fail(ErrKind::Shape, "upsample_nearest: expected [C,H,W]");
  if (factor < 1) fail(ErrKind::Shape, "upsample_nearest: factor must be >= 1");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = h * factor, ow = w * factor;
  Tensor out({c, oh, ow});
  const double* px = x.data();
  double* po = out.data();
  for (int ci = 0; ci < c; ++ci)
    for (int oy = 0; oy < oh; ++oy) {
      const double* xrow = px + (static_cast<int64_t>(ci) * h + oy / factor) * w;
      double* orow = po + (static_cast<int64_t>(ci) * oh + oy) * ow;
      for (int ox = 0; ox < ow; ++ox) orow[ox] = xrow[ox / factor];
    }
  Tape* tp = x.tape();
  detail::check_finite(out, "upsample_nearest");
  if (!tp) return out;
  const int nx = x.node();
  int node = tp->add_node(out.size(), [nx, c, h, w, oh, ow, factor](Tape& t, const double* g) {
    auto& gx = t.grad_buf(nx);
    for (int ci = 0; ci < c; ++ci)
      for (int oy = 0; oy < oh; ++oy) {
        double* gxrow = gx.data() + (static_cast<int64_t>(ci) * h + oy / factor) * w;
        const double* grow = g + (static_cast<int64_t>(ci) * oh + oy) * ow;
        for (int ox = 0; ox < ow; ++ox) gxrow[ox / factor] += grow[ox];
      }
  });
  return tp->attach(std::move(out), node);
}

Tensor bilinear_sample(const Tensor& map, const Tensor& coords) {
  if (map.rank() != 3) fail(ErrKind::Shape, "bilinear_sample: map must be [C,H,W]");
  if (coords.rank() != 2 || coords.dim(1) != 2)
    fail(ErrKind::Shape, "bilinear_sample: coords must be [P,2]");
  const int c = map.dim(0), h = map.dim(1), w = map.dim(2);
  const int p = coords.dim(0);
  Tensor out({p, c});
  // per point: texel corners, lerp weights, and whether each axis clamped
  std::vector<int> r0v(static_cast<size_t>(p)), r1v(static_cast<size_t>(p));
  std::vector<int> c0v(static_cast<size_t>(p)), c1v(static_cast<size_t>(p));
  std::vector<double> wxv(static_cast<size_t>(p)), wyv(static_cast<size_t>(p));
  std::vector<unsigned char> freex(static_cast<size_t>(p)), freey(static_cast<size_t>(p));
  const double* pc = coords.data();
  const double* pm = map.data();
  double* po = out.data();
  for (int i = 0; i < p; ++i) {
    const double fx_raw = pc[2 * i] * w - 0.5;
    const double fy_raw = pc[2 * i + 1] * h - 0.5;
    const double fx = std::min(std::max(fx_raw, 0.0), static_cast<double>(w - 1));
    const double fy = std::min(std::max(fy_raw, 0.0), static_cast<double>(h - 1));
    freex[static_cast<size_t>(i)] = fx_raw > 0.0 && fx_raw < w - 1;
    freey[static_cast<size_t>(i)] = fy_raw > 0.0 && fy_raw < h - 1;
    const int c0 = static_cast<int>(std::floor(fx));
    const int r0 = static_cast<int>(std::floor(fy));
    const int c1 = std::min(c0 + 1, w - 1);
    const int r1 = std::min(r0 + 1, h - 1);
    const double wx = fx - c0;
    const double wy = fy - r0;
    c0v[static_cast<size_t>(i)] = c0;
    c1v[static_cast<size_t>(i)] = c1;
    r0v[static_cast<size_t>(i)] = r0;
    r1v[static_cast<size_t>(i)] = r1;
    wxv[static_cast<size_t>(i)] = wx;
    wyv[static_cast<size_t>(i)] = wy;
    for (int ch = 0; ch < c; ++ch) {
      const double* m = pm + static_cast<int64_t>(ch) * h * w;
      const double v00 = m[r0 * w + c0], v01 = m[r0 * w + c1];
      const double v10 = m[r1 * w + c0], v11 = m[r1 * w + c1];
      po[static_cast<int64_t>(i) * c + ch] =
          (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
    }
  }
  Tape* tp = detail::merge_tapes(map, coords);
  detail::check_finite(out, "bilinear_sample");
  if (!tp) return out;
  const int nm = map.node(), nc = coords.node();
  Tensor mc = map;
  int node = tp->add_node(out.size(), [=](Tape& t, const double* g) {
    auto* gm = nm >= 0 ? &t.grad_buf(nm) : nullptr;
    auto* gc = nc >= 0 ? &t.grad_buf(nc) : nullptr;
    const double* m = mc.data();
    for (int i = 0; i < p; ++i) {
      const int r0 = r0v[static_cast<size_t>(i)], r1 = r1v[static_cast<size_t>(i)];
      const int c0 = c0v[static_cast<size_t>(i)], c1 = c1v[static_cast<size_t>(i)];
      const double wx = wxv[static_cast<size_t>(i)], wy = wyv[static_cast<size_t>(i)];
      double dfx = 0, dfy = 0;
      for (int ch = 0; ch < c; ++ch) {
        const double go = g[static_cast<int64_t>(i) * c + ch];
        if (go == 0.0 && !gc) continue;
        const int64_t base = static_cast<int64_t>(ch) * h * w;
        if (gm) {
          (*gm)[static_cast<size_t>(base + r0 * w + c0)] += go * (1 - wy) * (1 - wx);
          (*gm)[static_cast<size_t>(base + r0 * w + c1)] += go * (1 - wy) * wx;
          (*gm)[static_cast<size_t>(base + r1 * w + c0)] += go * wy * (1 - wx);
          (*gm)[static_cast<size_t>(base + r1 * w + c1)] += go * wy * wx;
        }
        if (gc) {
          const double v00 = m[base + r0 * w + c0], v01 = m[base + r0 * w + c1];
          const double v10 = m[base + r1 * w + c0], v11 = m[base + r1 * w + c1];
          dfx += go * ((1 - wy) * (v01 - v00) + wy * (v11 - v10));
          dfy += go * ((1 - wx) * (v10 - v00) + wx * (v11 - v01));
        }
      }
      if (gc) {
        if (freex[static_cast<size_t>(i)]) (*gc)[static_cast<size_t>(2 * i)] += dfx * w;
        if (freey[static_cast<size_t>(i)]) (*gc)[static_cast<size_t>(2 * i + 1)] += dfy * h;
      }
    }
  });
  return tp->attach(std::move(out), node);
}

Tensor positional_encoding(const Tensor& coords, int dim, double temperature) {
  if (coords.rank() < 1 || coords.dim(coords.rank() - 1) != 2)
    fail(ErrKind::Shape, "positional_encoding: coords must end in a dimension of 2");
  if (dim <= 0 || dim % 4 != 0)
    fail(ErrKind::Config, "positional_encoding: dim must be positive and divisible by 4");
  const int64_t pts = coords.size() / 2;
  const int half = dim / 2;
  const int pairs = half / 2;
  constexpr double two_pi = 6.283185307179586476925286766559;
  std::vector<double> omega(static_cast<size_t>(pairs));
  for (int j = 0; j < pairs; ++j)
    omega[static_cast<size_t>(j)] = std::pow(temperature, -2.0 * j / half);
  Shape out_shape(coords.shape().begin(), coords.shape().end() - 1);
  out_shape.push_back(dim);
  Tensor out(out_shape);
  const double* pc = coords.data();
  double* po = out.data();
  for (int64_t i = 0; i < pts; ++i) {
    for (int axis = 0; axis < 2; ++axis) {
      const double v = pc[2 * i + axis];
      double* o = po + i * dim + axis * half;
      for (int j = 0; j < pairs; ++j) {
        const double ang = two_pi * v * omega[static_cast<size_t>(j)];
        o[2 * j] = std::sin(ang);
        o[2 * j + 1] = std::cos(ang);
      }
    }
  }
  Tape* tp = coords.tape();
  detail::check_finite(out, "positional_encoding");
  if (!tp) return out;
  const int nc = coords.node();
  Tensor cc = coords;
  int node = tp->add_node(out.size(), [=](Tape& t, const double* g) {
    auto& gc = t.grad_buf(nc);
    for (int64_t i = 0; i < pts; ++i) {
      for (int axis = 0; axis < 2; ++axis) {
        const double v = cc.data()[2 * i + axis];
        const double* go = g + i * dim + axis * half;
        double acc = 0;
        for (int j = 0; j < pairs; ++j) {
          const double f = two_pi * omega[static_cast<size_t>(j)];
          const double ang = f * v;
          acc += go[2 * j] * std::cos(ang) * f - go[2 * j + 1] * std::sin(ang) * f;
        }
        gc[static_cast<size_t>(2 * i + axis)] += acc;
      }
    }
  });
  return tp->attach(std::move(out), node);
}

}  // namespace bcr
