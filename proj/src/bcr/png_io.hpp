#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcr/tensor.hpp"

namespace bcr {

// Row-major interleaved 8-bit image (HWC). channels: 1 = gray, 3 = RGB,
// 4 = RGBA.
struct ImageU8 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;
};

// Minimal PNG container over zlib: fixed compression level, filter type 0 on
// every scanline, no interlacing. Output bytes are deterministic for a given
// input.
void write_png(const std::string& path, const ImageU8& img);

// Reads 8-bit gray/RGB/RGBA PNGs (all five scanline filters, no Adam7).
ImageU8 read_png(const std::string& path);

// [C,H,W] tensor in [0,1].
Tensor image_to_tensor(const ImageU8& img);
ImageU8 tensor_to_image(const Tensor& t);  // clamps to [0,1] and quantizes

}  // namespace bcr
