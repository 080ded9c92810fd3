#include "bcr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bcr {

int64_t Mask::count() const {
  int64_t n = 0;
  for (uint8_t v : data) n += v;
  return n;
}

double bernstein5(int j, double t) {
  static constexpr double binom[6] = {1, 5, 10, 10, 5, 1};
  return binom[j] * std::pow(t, j) * std::pow(1.0 - t, 5 - j);
}

Point2 eval_bezier(const BezierCurve& curve, double t) {
  if (!(t >= 0.0 && t <= 1.0)) fail(ErrKind::Domain, "eval_bezier: t outside [0,1]");
  const double u = 1.0 - t;
  // Horner-style expansion of the Bernstein weights keeps endpoint
  // evaluation exact: at t=0 or t=1 all but one weight vanish.
  double w[6];
  w[0] = u * u * u * u * u;
  w[1] = 5.0 * t * u * u * u * u;
  w[2] = 10.0 * t * t * u * u * u;
  w[3] = 10.0 * t * t * t * u * u;
  w[4] = 5.0 * t * t * t * t * u;
  w[5] = t * t * t * t * t;
  Point2 p;
  for (int j = 0; j < 6; ++j) {
    p.x += w[j] * curve.control[static_cast<size_t>(j)].x;
    p.y += w[j] * curve.control[static_cast<size_t>(j)].y;
  }
  return p;
}

std::vector<Point2> sample_uniform(const BezierCurve& curve, int n) {
  if (n < 2) fail(ErrKind::Domain, "sample_uniform: need at least 2 samples");
  std::vector<Point2> out(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k)
    out[static_cast<size_t>(k)] = eval_bezier(curve, static_cast<double>(k) / (n - 1));
  out[0] = curve.control[0];
  out[static_cast<size_t>(n - 1)] = curve.control[5];
  return out;
}

namespace {

// Householder QR least squares for the m x 6 Bernstein design matrix with two
// right-hand sides (the x and y coordinate columns).
void qr_solve6(std::vector<double>& a, int m, std::array<std::vector<double>, 2>& rhs,
               std::array<std::array<double, 6>, 2>& out) {
  constexpr int kCols = 6;
  for (int k = 0; k < kCols; ++k) {
    double norm = 0;
    for (int i = k; i < m; ++i) norm += a[static_cast<size_t>(i) * kCols + k] * a[static_cast<size_t>(i) * kCols + k];
    norm = std::sqrt(norm);
    if (norm < 1e-12) fail(ErrKind::Fit, "fit_bezier: rank-deficient design matrix");
    double akk = a[static_cast<size_t>(k) * kCols + k];
    const double alpha = akk >= 0 ? -norm : norm;
    // Householder vector v stored in-place below the diagonal; v_k implicit.
    const double vk = akk - alpha;
    a[static_cast<size_t>(k) * kCols + k] = alpha;
    double vtv = vk * vk;
    for (int i = k + 1; i < m; ++i) {
      const double vi = a[static_cast<size_t>(i) * kCols + k];
      vtv += vi * vi;
    }
    if (vtv < 1e-300) continue;
    auto apply = [&](auto get, auto set) {
      double dot = vk * get(k);
      for (int i = k + 1; i < m; ++i) dot += a[static_cast<size_t>(i) * kCols + k] * get(i);
      const double beta = 2.0 * dot / vtv;
      set(k, get(k) - beta * vk);
      for (int i = k + 1; i < m; ++i)
        set(i, get(i) - beta * a[static_cast<size_t>(i) * kCols + k]);
    };
    for (int j = k + 1; j < kCols; ++j)
      apply([&](int i) { return a[static_cast<size_t>(i) * kCols + j]; },
            [&](int i, double v) { a[static_cast<size_t>(i) * kCols + j] = v; });
    for (auto& b : rhs)
      apply([&](int i) { return b[static_cast<size_t>(i)]; },
            [&](int i, double v) { b[static_cast<size_t>(i)] = v; });
  }
  for (int s = 0; s < 2; ++s) {
    for (int k = kCols - 1; k >= 0; --k) {
      double v = rhs[static_cast<size_t>(s)][static_cast<size_t>(k)];
      for (int j = k + 1; j < kCols; ++j)
        v -= a[static_cast<size_t>(k) * kCols + j] * out[static_cast<size_t>(s)][static_cast<size_t>(j)];
      const double rkk = a[static_cast<size_t>(k) * kCols + k];
      if (std::fabs(rkk) < 1e-12) fail(ErrKind::Fit, "fit_bezier: rank-deficient design matrix");
      out[static_cast<size_t>(s)][static_cast<size_t>(k)] = v / rkk;
    }
  }
}

}  // namespace

BezierCurve fit_bezier(const std::vector<Point2>& points, const std::vector<double>* params) {
  const int m = static_cast<int>(points.size());
  if (m < 6) fail(ErrKind::Fit, "fit_bezier: need at least 6 points");
  std::vector<double> ts(static_cast<size_t>(m));
  if (params) {
    if (static_cast<int>(params->size()) != m)
      fail(ErrKind::Fit, "fit_bezier: params length must match points");
    for (int i = 0; i < m; ++i) {
      const double t = (*params)[static_cast<size_t>(i)];
      if (!(t >= 0.0 && t <= 1.0)) fail(ErrKind::Fit, "fit_bezier: params must lie in [0,1]");
      if (i > 0 && t < (*params)[static_cast<size_t>(i - 1)])
        fail(ErrKind::Fit, "fit_bezier: params must be sorted");
      ts[static_cast<size_t>(i)] = t;
    }
  } else {
    for (int i = 0; i < m; ++i) ts[static_cast<size_t>(i)] = static_cast<double>(i) / (m - 1);
  }
  std::vector<double> a(static_cast<size_t>(m) * 6);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < 6; ++j) a[static_cast<size_t>(i) * 6 + j] = bernstein5(j, ts[static_cast<size_t>(i)]);
  std::array<std::vector<double>, 2> rhs;
  rhs[0].resize(static_cast<size_t>(m));
  rhs[1].resize(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    rhs[0][static_cast<size_t>(i)] = points[static_cast<size_t>(i)].x;
    rhs[1][static_cast<size_t>(i)] = points[static_cast<size_t>(i)].y;
  }
  std::array<std::array<double, 6>, 2> sol{};
  qr_solve6(a, m, rhs, sol);
  BezierCurve curve;
  for (int j = 0; j < 6; ++j)
    curve.control[static_cast<size_t>(j)] = {sol[0][static_cast<size_t>(j)], sol[1][static_cast<size_t>(j)]};
  return curve;
}

std::vector<double> bezier_design_matrix(int m) {
  if (m < 2) fail(ErrKind::Domain, "bezier_design_matrix: need at least 2 rows");
  std::vector<double> a(static_cast<size_t>(m) * 6);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < 6; ++j)
      a[static_cast<size_t>(i) * 6 + j] = bernstein5(j, static_cast<double>(i) / (m - 1));
  return a;
}

std::vector<double> bezier_fit_matrix(int m) {
  if (m < 6) fail(ErrKind::Fit, "bezier_fit_matrix: need at least 6 sample rows");
  const std::vector<double> a = bezier_design_matrix(m);
  double ata[6][6] = {};
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < 6; ++j)
      for (int k = 0; k < 6; ++k)
        ata[j][k] += a[static_cast<size_t>(i) * 6 + j] * a[static_cast<size_t>(i) * 6 + k];
  // invert A^T A by Gauss-Jordan with partial pivoting (6x6, well conditioned
  // for uniformly spaced parameters)
  double inv[6][6] = {};
  for (int j = 0; j < 6; ++j) inv[j][j] = 1.0;
  for (int col = 0; col < 6; ++col) {
    int piv = col;
    for (int r = col + 1; r < 6; ++r)
      if (std::fabs(ata[r][col]) > std::fabs(ata[piv][col])) piv = r;
    if (std::fabs(ata[piv][col]) < 1e-12) fail(ErrKind::Fit, "bezier_fit_matrix: singular system");
    std::swap(ata[col], ata[piv]);
    std::swap(inv[col], inv[piv]);
    const double d = ata[col][col];
    for (int k = 0; k < 6; ++k) {
      ata[col][k] /= d;
      inv[col][k] /= d;
    }
    for (int r = 0; r < 6; ++r) {
      if (r == col) continue;
      const double f = ata[r][col];
      for (int k = 0; k < 6; ++k) {
        ata[r][k] -= f * ata[col][k];
        inv[r][k] -= f * inv[col][k];
      }
    }
  }
  std::vector<double> fit(static_cast<size_t>(6) * m, 0.0);
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < m; ++i) {
      double v = 0;
      for (int k = 0; k < 6; ++k) v += inv[j][k] * a[static_cast<size_t>(i) * 6 + k];
      fit[static_cast<size_t>(j) * m + i] = v;
    }
  return fit;
}

namespace {

inline int iround(double v) { return static_cast<int>(std::lround(v)); }

// Grid traversal visiting every pixel the segment passes through. Pixel
// (r,c) covers [c-0.5,c+0.5) x [r-0.5,r+0.5) in continuous pixel-center
// coordinates.
void trace_segment(double x0, double y0, double x1, double y1, int height, int width,
                   std::vector<uint8_t>& hit, std::vector<Pixel>& out) {
  auto emit = [&](int r, int c) {
    r = std::clamp(r, 0, height - 1);
    c = std::clamp(c, 0, width - 1);
    auto& h = hit[static_cast<size_t>(r) * width + c];
    if (!h) {
      h = 1;
      out.push_back({r, c});
    }
  };
  int c = iround(x0), r = iround(y0);
  const int c1 = iround(x1), r1 = iround(y1);
  emit(r, c);
  const double dx = x1 - x0, dy = y1 - y0;
  const int step_c = dx > 0 ? 1 : -1;
  const int step_r = dy > 0 ? 1 : -1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double t_max_x = kInf, t_max_y = kInf, t_dx = kInf, t_dy = kInf;
  if (dx != 0) {
    t_max_x = ((c + 0.5 * step_c) - x0) / dx;
    t_dx = step_c / dx;
  }
  if (dy != 0) {
    t_max_y = ((r + 0.5 * step_r) - y0) / dy;
    t_dy = step_r / dy;
  }
  const int max_steps = std::abs(c1 - c) + std::abs(r1 - r) + 4;
  for (int i = 0; i < max_steps && (c != c1 || r != r1); ++i) {
    if (t_max_x <= t_max_y) {
      c += step_c;
      t_max_x += t_dx;
    } else {
      r += step_r;
      t_max_y += t_dy;
    }
    emit(r, c);
  }
}

}  // namespace

std::vector<Pixel> trace_polylines(const std::vector<Polyline>& polylines, int height, int width) {
  if (height < 1 || width < 1) fail(ErrKind::Domain, "trace_polylines: empty image");
  std::vector<uint8_t> hit(static_cast<size_t>(height) * width, 0);
  std::vector<Pixel> out;
  for (const auto& pl : polylines) {
    if (pl.points.size() < 2) continue;
    auto to_px = [&](Point2 p) {
      const double px = std::clamp(p.x * width - 0.5, 0.0, width - 1.0);
      const double py = std::clamp(p.y * height - 0.5, 0.0, height - 1.0);
      return std::pair<double, double>{px, py};
    };
    for (size_t i = 1; i < pl.points.size(); ++i) {
      auto [x0, y0] = to_px(pl.points[i - 1]);
      auto [x1, y1] = to_px(pl.points[i]);
      trace_segment(x0, y0, x1, y1, height, width, hit, out);
    }
  }
  return out;
}

Mask dilate(const Mask& m, int radius_px) {
  if (radius_px < 0) fail(ErrKind::Domain, "dilate: negative radius");
  if (radius_px == 0) return m;
  std::vector<std::pair<int, int>> disk;
  for (int dy = -radius_px; dy <= radius_px; ++dy)
    for (int dx = -radius_px; dx <= radius_px; ++dx)
      if (dy * dy + dx * dx <= radius_px * radius_px) disk.emplace_back(dy, dx);
  Mask out(m.height, m.width);
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      for (auto [dy, dx] : disk) {
        const int rr = r + dy, cc = c + dx;
        if (rr >= 0 && rr < m.height && cc >= 0 && cc < m.width) out.at(rr, cc) = 1;
      }
    }
  }
  return out;
}

Mask rasterize(const std::vector<Polyline>& polylines, int height, int width, int dilation_px) {
  if (height < 1 || width < 1) fail(ErrKind::Domain, "rasterize: empty image");
  if (dilation_px < 0) fail(ErrKind::Domain, "rasterize: negative dilation");
  Mask m(height, width);
  for (const Pixel& p : trace_polylines(polylines, height, width)) m.at(p.r, p.c) = 1;
  return dilation_px == 0 ? m : dilate(m, dilation_px);
}

double polyline_length(const Polyline& p) {
  double len = 0;
  for (size_t i = 1; i < p.points.size(); ++i)
    len += std::hypot(p.points[i].x - p.points[i - 1].x, p.points[i].y - p.points[i - 1].y);
  return len;
}

Point2 point_at_arclength(const Polyline& p, double s) {
  if (p.points.empty()) fail(ErrKind::Domain, "point_at_arclength: empty polyline");
  if (s <= 0) return p.points.front();
  double acc = 0;
  for (size_t i = 1; i < p.points.size(); ++i) {
    const Point2 a = p.points[i - 1], b = p.points[i];
    const double seg = std::hypot(b.x - a.x, b.y - a.y);
    if (acc + seg >= s && seg > 0) {
      const double f = (s - acc) / seg;
      return {a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)};
    }
    acc += seg;
  }
  return p.points.back();
}

std::vector<Point2> resample_arclength(const Polyline& p, int n) {
  if (n < 2) fail(ErrKind::Domain, "resample_arclength: need at least 2 samples");
  const double total = polyline_length(p);
  if (!(total > 0)) fail(ErrKind::Fit, "resample_arclength: polyline has zero length");
  std::vector<Point2> out(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k)
    out[static_cast<size_t>(k)] = point_at_arclength(p, total * k / (n - 1));
  out[0] = p.points.front();
  out[static_cast<size_t>(n - 1)] = p.points.back();
  return out;
}

std::vector<double> chord_length_params(const std::vector<Point2>& points) {
  std::vector<double> t(points.size(), 0.0);
  double total = 0;
  for (size_t i = 1; i < points.size(); ++i) {
    total += std::hypot(points[i].x - points[i - 1].x, points[i].y - points[i - 1].y);
    t[i] = total;
  }
  if (total > 0)
    for (auto& v : t) v /= total;
  return t;
}

}  // namespace bcr
