#pragma once

#include <string>
#include <vector>

#include "bcr/geometry.hpp"
#include "bcr/tensor.hpp"

namespace bcr {

// Per-category ordered polylines in normalized coordinates plus the image
// size they refer to. Categories are positional (index into the configured
// category name list); occlusion may split a landmark into several
// polylines.
struct LandmarkAnnotation {
  std::vector<std::vector<Polyline>> polylines;  // [M]
  int height = 0;
  int width = 0;
};

// Derived supervision targets of one image.
struct Targets {
  std::vector<std::vector<BezierCurve>> gt_curves;  // [M][G]
  Tensor gt_masks;                                  // [M,H,W]
  Tensor induction_map;                             // [M,H4,W4]
};

struct Sample {
  std::string image_file;  // file stem inside the dataset directory ("" = in-memory)
  Tensor image;            // [4,H,W]: RGB plus depth
  LandmarkAnnotation annotation;
  Targets targets;         // filled by prepare_targets
};

// Evaluation protocol dilation, proportional to image size so that full-size
// (1024 px) images use the literal 30 px radius.
int scaled_dilation_radius(int height, int width);

// Ground-truth conversion: each polyline is arc-length resampled to 26
// points and fitted with chord-length parameters; masks rasterize the raw
// polylines at the given dilation; the induction map marks arc-length
// midpoints on the f4 grid.
Targets prepare_targets(const LandmarkAnnotation& ann, int h4, int w4, int dilation_px);

// Dataset directory layout: one annotations.json plus one RGB PNG per image
// and an optional "<stem>_depth.png" sibling (zero-filled with a warning on
// stderr when absent).
void save_annotations(const std::string& dir, const std::vector<Sample>& samples,
                      const std::vector<std::string>& categories);
std::vector<Sample> load_annotations(const std::string& json_path,
                                     const std::vector<std::string>& categories);

}  // namespace bcr
