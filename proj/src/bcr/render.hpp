#pragma once

#include <optional>
#include <string>

#include "bcr/dataset.hpp"
#include "bcr/proposals.hpp"

namespace bcr {

// Inputs for one overlay image. Curves are drawn as sampled paths; masks as
// thick round-capped strokes (the vector analogue of disk dilation).
struct RenderInput {
  int height = 0;
  int width = 0;
  std::string background_png;  // raw PNG bytes, embedded base64; may be empty
  const LandmarkAnnotation* gt = nullptr;                      // optional
  std::vector<std::vector<BezierCurve>> initial;               // stage 0, thresholded
  std::vector<std::vector<BezierCurve>> final;                 // stage 3, thresholded
  std::vector<std::string> categories;
  int dilation_px = 0;
};

std::string render_svg(const RenderInput& in);

}  // namespace bcr
