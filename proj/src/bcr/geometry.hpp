#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bcr/error.hpp"

namespace bcr {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline Point2 clamp01(Point2 p) {
  auto c = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };
  return {c(p.x), c(p.y)};
}

// Fifth-order Bezier curve: six ordered control points in normalized [0,1]^2
// image coordinates. The curve interpolates control[0] and control[5].
struct BezierCurve {
  std::array<Point2, 6> control{};
};

struct Polyline {
  std::vector<Point2> points;

  bool consecutive_duplicates() const {
    for (size_t i = 1; i < points.size(); ++i)
      if (points[i].x == points[i - 1].x && points[i].y == points[i - 1].y) return true;
    return false;
  }
};

// Row-major binary raster.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w, 0) {}
  uint8_t& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
  uint8_t at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
  int64_t count() const;
};

// Integer pixel location, row/column order.
struct Pixel {
  int r = 0;
  int c = 0;
};

double bernstein5(int j, double t);

// Evaluates the degree-5 Bernstein sum at t in [0,1].
Point2 eval_bezier(const BezierCurve& curve, double t);

// n >= 2 points at t_k = k/(n-1); endpoints coincide with the boundary
// control points.
std::vector<Point2> sample_uniform(const BezierCurve& curve, int n);

// Least-squares degree-5 fit (QR of the Bernstein design matrix). params, if
// given, must match points in length, be sorted, and lie in [0,1]; the
// default is uniform t_k = k/(n-1). Requires >= 6 points and a full-rank
// design (at least 6 distinct parameter values).
BezierCurve fit_bezier(const std::vector<Point2>& points,
                       const std::vector<double>* params = nullptr);

// Row-major m x 6 Bernstein design matrix at uniform parameters t_k = k/(m-1).
std::vector<double> bezier_design_matrix(int m);

// Row-major 6 x m pseudo-inverse of the uniform design matrix: multiplying m
// sampled points by it gives the least-squares control points. The map is
// linear, which keeps curve refitting differentiable.
std::vector<double> bezier_fit_matrix(int m);

// Centerline pixels covered by the polylines (supercover traversal, vertices
// clamped to the image), without dilation and without duplicates.
std::vector<Pixel> trace_polylines(const std::vector<Polyline>& polylines, int height, int width);

// Rasterizes polylines and dilates by a Euclidean disk: a pixel is set iff
// its center lies within dilation_px of some centerline pixel center.
Mask rasterize(const std::vector<Polyline>& polylines, int height, int width, int dilation_px);

Mask dilate(const Mask& m, int radius_px);

// --- polyline parameterization helpers ---

double polyline_length(const Polyline& p);

// Point at the given arc length along the polyline (clamped to [0, total]).
Point2 point_at_arclength(const Polyline& p, double s);

// n points equally spaced in arc length, including both endpoints. Requires
// positive total length.
std::vector<Point2> resample_arclength(const Polyline& p, int n);

// Normalized cumulative chord lengths in [0,1]; all zeros collapse to a fit
// error downstream.
std::vector<double> chord_length_params(const std::vector<Point2>& points);

}  // namespace bcr
