#include "bcr/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "bcr/ops.hpp"
#include "bcr/png_io.hpp"
#include "bcr/proposals.hpp"

namespace bcr {

namespace fs = std::filesystem;
using nlohmann::json;

int scaled_dilation_radius(int height, int width) {
  return static_cast<int>(std::lround(30.0 * std::min(height, width) / 1024.0));
}

Targets prepare_targets(const LandmarkAnnotation& ann, int h4, int w4, int dilation_px) {
  Targets t;
  t.gt_curves.resize(ann.polylines.size());
  for (size_t m = 0; m < ann.polylines.size(); ++m) {
    for (const Polyline& pl : ann.polylines[m]) {
      const std::vector<Point2> pts = resample_arclength(pl, 26);
      const std::vector<double> params = chord_length_params(pts);
      t.gt_curves[m].push_back(fit_bezier(pts, &params));
    }
  }
  t.gt_masks = Tensor({static_cast<int>(ann.polylines.size()), ann.height, ann.width});
  for (size_t m = 0; m < ann.polylines.size(); ++m) {
    Mask mask = rasterize(ann.polylines[m], ann.height, ann.width, dilation_px);
    double* dst = t.gt_masks.data() +
                  static_cast<int64_t>(m) * ann.height * ann.width;
    for (size_t i = 0; i < mask.data.size(); ++i) dst[i] = mask.data[i];
  }
  t.induction_map = build_induction_map(ann.polylines, h4, w4);
  return t;
}

namespace {

std::string depth_file_for(const std::string& image_file) {
  const size_t dot = image_file.rfind('.');
  const std::string stem = dot == std::string::npos ? image_file : image_file.substr(0, dot);
  return stem + "_depth.png";
}

}  // namespace

void save_annotations(const std::string& dir, const std::vector<Sample>& samples,
                      const std::vector<std::string>& categories) {
  fs::create_directories(dir);
  json images = json::array();
  int index = 0;
  for (const Sample& s : samples) {
    const int h = s.image.dim(1), w = s.image.dim(2);
    char name[32];
    std::snprintf(name, sizeof(name), "img_%03d.png", index);
    const std::string file = s.image_file.empty() ? name : s.image_file;

    ImageU8 rgb;
    rgb.height = h;
    rgb.width = w;
    rgb.channels = 3;
    rgb.pixels.resize(static_cast<size_t>(h) * w * 3);
    ImageU8 depth;
    depth.height = h;
    depth.width = w;
    depth.channels = 1;
    depth.pixels.resize(static_cast<size_t>(h) * w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        for (int ch = 0; ch < 3; ++ch) {
          const double v = std::clamp(
              s.image.data()[(static_cast<int64_t>(ch) * h + r) * w + c], 0.0, 1.0);
          rgb.pixels[(static_cast<size_t>(r) * w + c) * 3 + ch] =
              static_cast<uint8_t>(std::lround(v * 255));
        }
        const double d =
            std::clamp(s.image.data()[(static_cast<int64_t>(3) * h + r) * w + c], 0.0, 1.0);
        depth.pixels[static_cast<size_t>(r) * w + c] = static_cast<uint8_t>(std::lround(d * 255));
      }
    write_png((fs::path(dir) / file).string(), rgb);
    write_png((fs::path(dir) / depth_file_for(file)).string(), depth);

    json landmarks = json::object();
    for (size_t m = 0; m < categories.size(); ++m) {
      json polys = json::array();
      if (m < s.annotation.polylines.size()) {
        for (const Polyline& pl : s.annotation.polylines[m]) {
          json pts = json::array();
          for (const Point2& p : pl.points) pts.push_back({p.x, p.y});
          polys.push_back(pts);
        }
      }
      landmarks[categories[m]] = polys;
    }
    images.push_back({{"file", file}, {"height", h}, {"width", w}, {"landmarks", landmarks}});
    ++index;
  }
  json root = {{"images", images}};
  std::ofstream f(fs::path(dir) / "annotations.json");
  if (!f) fail(ErrKind::Io, "cannot write annotations.json in " + dir);
  f << root.dump(2) << "\n";
}

std::vector<Sample> load_annotations(const std::string& json_path,
                                     const std::vector<std::string>& categories) {
  std::ifstream f(json_path);
  if (!f) fail(ErrKind::Io, "cannot open annotations file: " + json_path);
  json root;
  try {
    root = json::parse(f);
  } catch (const json::exception& e) {
    fail(ErrKind::Parse, std::string("annotations: ") + e.what());
  }
  if (!root.contains("images") || !root["images"].is_array())
    fail(ErrKind::Parse, "annotations: missing \"images\" array");

  const fs::path base = fs::path(json_path).parent_path();
  std::vector<Sample> samples;
  int img_idx = 0;
  for (const auto& entry : root["images"]) {
    Sample s;
    try {
      s.image_file = entry.at("file").get<std::string>();
      s.annotation.height = entry.at("height").get<int>();
      s.annotation.width = entry.at("width").get<int>();
    } catch (const json::exception& e) {
      fail(ErrKind::Parse,
           "annotations: image " + std::to_string(img_idx) + ": " + e.what());
    }
    s.annotation.polylines.resize(categories.size());
    const auto& lm = entry.contains("landmarks") ? entry["landmarks"] : json::object();
    for (size_t m = 0; m < categories.size(); ++m) {
      if (!lm.contains(categories[m])) continue;
      int poly_idx = 0;
      for (const auto& poly : lm[categories[m]]) {
        Polyline pl;
        for (const auto& pt : poly) {
          if (!pt.is_array() || pt.size() != 2)
            fail(ErrKind::Parse, "annotations: " + categories[m] + " polyline " +
                                     std::to_string(poly_idx) + ": points must be [x,y]");
          pl.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
        }
        if (pl.points.size() < 2)
          fail(ErrKind::Parse, "annotations: " + categories[m] + " polyline " +
                                   std::to_string(poly_idx) + " in image " +
                                   std::to_string(img_idx) + " has fewer than 2 points");
        if (pl.consecutive_duplicates())
          std::cerr << "warning: " << categories[m] << " polyline " << poly_idx << " in image "
                    << img_idx << " has consecutive duplicate points\n";
        s.annotation.polylines[m].push_back(std::move(pl));
        ++poly_idx;
      }
    }

    const fs::path img_path = base / s.image_file;
    ImageU8 rgb = read_png(img_path.string());
    if (rgb.channels != 3)
      fail(ErrKind::Parse, "annotations: expected an RGB image: " + img_path.string());
    if (rgb.height != s.annotation.height || rgb.width != s.annotation.width)
      fail(ErrKind::Parse, "annotations: image size mismatch for " + img_path.string());
    const int h = rgb.height, w = rgb.width;
    s.image = Tensor({4, h, w});
    for (int ch = 0; ch < 3; ++ch)
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
          s.image.data()[(static_cast<int64_t>(ch) * h + r) * w + c] =
              rgb.pixels[(static_cast<size_t>(r) * w + c) * 3 + ch] / 255.0;
    const fs::path depth_path = base / depth_file_for(s.image_file);
    if (fs::exists(depth_path)) {
      ImageU8 depth = read_png(depth_path.string());
      if (depth.channels != 1 || depth.height != h || depth.width != w)
        fail(ErrKind::Parse, "annotations: bad depth image: " + depth_path.string());
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
          s.image.data()[(static_cast<int64_t>(3) * h + r) * w + c] =
              depth.pixels[static_cast<size_t>(r) * w + c] / 255.0;
    } else {
      std::cerr << "warning: no depth file for " << s.image_file << ", zero-filling channel 4\n";
    }
    samples.push_back(std::move(s));
    ++img_idx;
  }
  return samples;
}

}  // namespace bcr
