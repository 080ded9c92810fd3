#include "bcr/synth.hpp"

#include <cmath>

namespace bcr {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Blob {
  double cx, cy, r0;
  double amp[3], phase[3];  // radial harmonics j = 2,3,4

  double radius(double theta) const {
    double r = 1.0;
    for (int j = 0; j < 3; ++j) r += amp[j] * std::cos((j + 2) * theta + phase[j]);
    return r0 * r;
  }

  Point2 boundary(double theta) const {
    const double r = radius(theta);
    return {cx + r * std::cos(theta), cy + r * std::sin(theta)};
  }

  // 1 at the dome top, 0 at and outside the boundary
  double height_at(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double d = std::hypot(dx, dy);
    if (d < 1e-9) return 1.0;
    const double rim = radius(std::atan2(dy, dx));
    const double q = d / rim;
    return q >= 1.0 ? 0.0 : std::sqrt(std::max(0.0, 1.0 - q * q));
  }
};

Point2 cubic_point(const Point2 (&p)[4], double t) {
  const double u = 1 - t;
  const double w0 = u * u * u, w1 = 3 * t * u * u, w2 = 3 * t * t * u, w3 = t * t * t;
  return {w0 * p[0].x + w1 * p[1].x + w2 * p[2].x + w3 * p[3].x,
          w0 * p[0].y + w1 * p[1].y + w2 * p[2].y + w3 * p[3].y};
}

void paint_polyline(Tensor& img, const Polyline& pl, double r_col, double g_col, double b_col,
                    double strength, int radius) {
  const int h = img.dim(1), w = img.dim(2);
  Mask m = rasterize({pl}, h, w, radius);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!m.at(r, c)) continue;
      double* px = img.data();
      const int64_t off = static_cast<int64_t>(r) * w + c;
      const double tgt[3] = {r_col, g_col, b_col};
      for (int ch = 0; ch < 3; ++ch) {
        double& v = px[static_cast<int64_t>(ch) * h * w + off];
        v = v * (1 - strength) + tgt[ch] * strength;
      }
    }
}

// Drops polyline vertices inside the occluder box; keeps the pieces that
// still have at least two vertices.
std::vector<Polyline> split_by_box(const Polyline& pl, double x0, double y0, double x1,
                                   double y1) {
  std::vector<Polyline> out;
  Polyline cur;
  for (const Point2& p : pl.points) {
    const bool inside = p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
    if (inside) {
      if (cur.points.size() >= 2) out.push_back(cur);
      cur.points.clear();
    } else {
      cur.points.push_back(p);
    }
  }
  if (cur.points.size() >= 2) out.push_back(cur);
  return out;
}

}  // namespace

std::vector<Sample> generate_synthetic(uint64_t seed, int count, int height, int width) {
  if (count < 1) fail(ErrKind::Config, "generate_synthetic: count must be >= 1");
  if (height % 32 || width % 32)
    fail(ErrKind::Config, "generate_synthetic: height/width must be divisible by 32");
  Rng rng(seed);
  std::vector<Sample> samples;
  samples.reserve(static_cast<size_t>(count));

  for (int idx = 0; idx < count; ++idx) {
    Blob blob;
    blob.cx = rng.uniform(0.44, 0.56);
    blob.cy = rng.uniform(0.46, 0.58);
    blob.r0 = rng.uniform(0.26, 0.34);
    for (int j = 0; j < 3; ++j) {
      blob.amp[j] = rng.uniform(0.0, 0.07);
      blob.phase[j] = rng.uniform(0.0, 2 * kPi);
    }

    Sample s;
    s.image = Tensor({4, height, width});
    s.annotation.height = height;
    s.annotation.width = width;
    s.annotation.polylines.resize(3);

    // light direction for shading
    const double lx = rng.uniform(-0.6, 0.6), ly = rng.uniform(-0.8, -0.2);
    const double base_r = rng.uniform(0.5, 0.62), base_g = rng.uniform(0.2, 0.3),
                 base_b = rng.uniform(0.18, 0.26);

    double* px = s.image.data();
    const double eps = 1.0 / std::max(height, width);
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        const double x = (c + 0.5) / width, y = (r + 0.5) / height;
        const double hgt = blob.height_at(x, y);
        const int64_t off = static_cast<int64_t>(r) * width + c;
        const double noise = rng.uniform(-0.03, 0.03);
        if (hgt > 0.0) {
          // lambertian-ish shade from the height-field gradient
          const double gx = (blob.height_at(x + eps, y) - blob.height_at(x - eps, y)) / (2 * eps);
          const double gy = (blob.height_at(x, y + eps) - blob.height_at(x, y - eps)) / (2 * eps);
          double shade = 0.55 + 0.35 * hgt + 0.12 * (gx * lx + gy * ly);
          shade = std::clamp(shade, 0.15, 1.0);
          px[off] = std::clamp(base_r * shade + noise, 0.0, 1.0);
          px[static_cast<int64_t>(height) * width + off] =
              std::clamp(base_g * shade + noise, 0.0, 1.0);
          px[2 * static_cast<int64_t>(height) * width + off] =
              std::clamp(base_b * shade + noise, 0.0, 1.0);
        } else {
          const double bg = 0.10 + 0.08 * y;
          px[off] = std::clamp(bg + noise, 0.0, 1.0);
          px[static_cast<int64_t>(height) * width + off] = std::clamp(bg + 0.02 + noise, 0.0, 1.0);
          px[2 * static_cast<int64_t>(height) * width + off] =
              std::clamp(bg + 0.05 + noise, 0.0, 1.0);
        }
        px[3 * static_cast<int64_t>(height) * width + off] = hgt;
      }
    }

    // ridge: interior crease from one side of the blob to the other
    {
      const double ta = rng.uniform(0.6 * kPi, 0.9 * kPi);
      const double tb = rng.uniform(-0.25 * kPi, 0.15 * kPi);
      Point2 a = blob.boundary(ta), b = blob.boundary(tb);
      a = {blob.cx + (a.x - blob.cx) * 0.92, blob.cy + (a.y - blob.cy) * 0.92};
      b = {blob.cx + (b.x - blob.cx) * 0.92, blob.cy + (b.y - blob.cy) * 0.92};
      const double bulge = rng.uniform(-0.12, 0.12);
      const double nx = -(b.y - a.y), ny = b.x - a.x;
      Point2 ctrl[4] = {
          a,
          {a.x + (b.x - a.x) / 3 + bulge * nx, a.y + (b.y - a.y) / 3 + bulge * ny},
          {a.x + 2 * (b.x - a.x) / 3 + bulge * nx, a.y + 2 * (b.y - a.y) / 3 + bulge * ny},
          b};
      Polyline ridge;
      for (int i = 0; i < 40; ++i) ridge.points.push_back(clamp01(cubic_point(ctrl, i / 39.0)));
      paint_polyline(s.image, ridge, 0.25, 0.08, 0.08, 0.65, std::max(1, height / 128));
      s.annotation.polylines[0].push_back(std::move(ridge));
    }

    // ligament: short curve dropping from the top of the organ
    {
      const double t0 = -kPi / 2 + rng.uniform(-0.25, 0.25);
      Point2 top = blob.boundary(t0);
      const double len = rng.uniform(0.3, 0.5) * blob.r0;
      const double drift = rng.uniform(-0.12, 0.12);
      Point2 ctrl[4] = {top,
                        {top.x + drift * 0.3, top.y + len * 0.4},
                        {top.x + drift * 0.8, top.y + len * 0.75},
                        {top.x + drift, top.y + len}};
      Polyline lig;
      for (int i = 0; i < 24; ++i) lig.points.push_back(clamp01(cubic_point(ctrl, i / 23.0)));
      paint_polyline(s.image, lig, 0.85, 0.8, 0.6, 0.55, std::max(1, height / 160));
      s.annotation.polylines[1].push_back(std::move(lig));
    }

    // silhouette: contiguous arc of the boundary
    {
      const double t0 = rng.uniform(0.0, 2 * kPi);
      const double span = rng.uniform(0.5 * kPi, 0.85 * kPi);
      Polyline sil;
      for (int i = 0; i < 48; ++i)
        sil.points.push_back(clamp01(blob.boundary(t0 + span * i / 47.0)));
      paint_polyline(s.image, sil, 0.9, 0.75, 0.65, 0.35, std::max(1, height / 160));
      s.annotation.polylines[2].push_back(std::move(sil));
    }

    // occluders: each category may get one box through its landmark's middle
    for (int m = 0; m < 3; ++m) {
      if (rng.uniform() >= 0.2) continue;
      const Polyline& pl = s.annotation.polylines[static_cast<size_t>(m)][0];
      const Point2 mid = point_at_arclength(pl, 0.5 * polyline_length(pl));
      const double bw = rng.uniform(0.05, 0.11), bh = rng.uniform(0.05, 0.11);
      const double x0 = mid.x - bw / 2, x1 = mid.x + bw / 2;
      const double y0 = mid.y - bh / 2, y1 = mid.y + bh / 2;
      auto pieces = split_by_box(pl, x0, y0, x1, y1);
      if (pieces.empty()) continue;  // the landmark stays whole
      s.annotation.polylines[static_cast<size_t>(m)] = std::move(pieces);
      // draw the occluder: a dark instrument-like box sitting in front
      for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
          const double x = (c + 0.5) / width, y = (r + 0.5) / height;
          if (x < x0 || x > x1 || y < y0 || y > y1) continue;
          const int64_t off = static_cast<int64_t>(r) * width + c;
          px[off] = 0.35;
          px[static_cast<int64_t>(height) * width + off] = 0.37;
          px[2 * static_cast<int64_t>(height) * width + off] = 0.4;
          px[3 * static_cast<int64_t>(height) * width + off] = 1.0;
        }
    }

    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace bcr
