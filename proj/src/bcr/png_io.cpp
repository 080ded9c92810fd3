#include "bcr/png_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace bcr {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

void write_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
  put_u32(out, static_cast<uint32_t>(data.size()));
  const size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
  put_u32(out, crc);
}

int color_type_for(int channels) {
  switch (channels) {
    case 1: return 0;
    case 3: return 2;
    case 4: return 6;
    default: fail(ErrKind::Domain, "png: unsupported channel count");
  }
}

int channels_for(int color_type) {
  switch (color_type) {
    case 0: return 1;
    case 2: return 3;
    case 6: return 4;
    default: fail(ErrKind::Parse, "png: unsupported color type");
  }
}

}  // namespace

void write_png(const std::string& path, const ImageU8& img) {
  if (img.height < 1 || img.width < 1)
    fail(ErrKind::Domain, "png: empty image");
  if (img.pixels.size() != static_cast<size_t>(img.height) * img.width * img.channels)
    fail(ErrKind::Domain, "png: pixel buffer size mismatch");

  const size_t row = static_cast<size_t>(img.width) * img.channels;
  std::vector<uint8_t> raw((row + 1) * static_cast<size_t>(img.height));
  for (int r = 0; r < img.height; ++r) {
    raw[static_cast<size_t>(r) * (row + 1)] = 0;  // filter: none
    std::memcpy(raw.data() + static_cast<size_t>(r) * (row + 1) + 1,
                img.pixels.data() + static_cast<size_t>(r) * row, row);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    fail(ErrKind::Io, "png: compression failed");
  compressed.resize(bound);

  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(img.width));
  put_u32(ihdr, static_cast<uint32_t>(img.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(static_cast<uint8_t>(color_type_for(img.channels)));
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // no interlace
  write_chunk(out, "IHDR", ihdr);
  write_chunk(out, "IDAT", compressed);
  write_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrKind::Io, "png: cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) fail(ErrKind::Io, "png: write failed: " + path);
}

ImageU8 read_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrKind::Io, "png: cannot open: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
    fail(ErrKind::Parse, "png: bad signature: " + path);

  ImageU8 img;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  int bit_depth = 0, color_type = 0;
  bool ihdr_seen = false, iend_seen = false;
  while (pos + 8 <= bytes.size() && !iend_seen) {
    const uint32_t len = get_u32(bytes.data() + pos);
    if (pos + 12 + len > bytes.size()) fail(ErrKind::Parse, "png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const uint8_t* data = bytes.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) fail(ErrKind::Parse, "png: bad IHDR");
      img.width = static_cast<int>(get_u32(data));
      img.height = static_cast<int>(get_u32(data + 4));
      bit_depth = data[8];
      color_type = data[9];
      if (bit_depth != 8) fail(ErrKind::Parse, "png: only 8-bit depth supported");
      if (data[12] != 0) fail(ErrKind::Parse, "png: interlaced files not supported");
      img.channels = channels_for(color_type);
      ihdr_seen = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      iend_seen = true;
    }
    pos += 12 + len;
  }
  if (!ihdr_seen || !iend_seen || idat.empty()) fail(ErrKind::Parse, "png: missing chunks");

  const size_t row = static_cast<size_t>(img.width) * img.channels;
  std::vector<uint8_t> raw((row + 1) * static_cast<size_t>(img.height));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    fail(ErrKind::Parse, "png: decompression failed");

  img.pixels.assign(static_cast<size_t>(img.height) * row, 0);
  const int bpp = img.channels;  // bytes per pixel at depth 8
  for (int r = 0; r < img.height; ++r) {
    const uint8_t filter = raw[static_cast<size_t>(r) * (row + 1)];
    const uint8_t* src = raw.data() + static_cast<size_t>(r) * (row + 1) + 1;
    uint8_t* dst = img.pixels.data() + static_cast<size_t>(r) * row;
    const uint8_t* prev = r > 0 ? img.pixels.data() + static_cast<size_t>(r - 1) * row : nullptr;
    for (size_t i = 0; i < row; ++i) {
      const int a = i >= static_cast<size_t>(bpp) ? dst[i - static_cast<size_t>(bpp)] : 0;
      const int b = prev ? prev[i] : 0;
      const int c = (prev && i >= static_cast<size_t>(bpp)) ? prev[i - static_cast<size_t>(bpp)] : 0;
      int x = src[i];
      switch (filter) {
        case 0: break;
        case 1: x += a; break;
        case 2: x += b; break;
        case 3: x += (a + b) / 2; break;
        case 4: {
          const int p = a + b - c;
          const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
          x += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
          break;
        }
        default: fail(ErrKind::Parse, "png: unknown filter type");
      }
      dst[i] = static_cast<uint8_t>(x & 0xff);
    }
  }
  return img;
}

Tensor image_to_tensor(const ImageU8& img) {
  Tensor t({img.channels, img.height, img.width});
  for (int c = 0; c < img.channels; ++c)
    for (int r = 0; r < img.height; ++r)
      for (int x = 0; x < img.width; ++x)
        t.data()[(static_cast<int64_t>(c) * img.height + r) * img.width + x] =
            img.pixels[(static_cast<size_t>(r) * img.width + x) * img.channels + c] / 255.0;
  return t;
}

ImageU8 tensor_to_image(const Tensor& t) {
  if (t.rank() != 3) fail(ErrKind::Shape, "tensor_to_image: expected [C,H,W]");
  ImageU8 img;
  img.channels = t.dim(0);
  img.height = t.dim(1);
  img.width = t.dim(2);
  img.pixels.resize(static_cast<size_t>(img.height) * img.width * img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int r = 0; r < img.height; ++r)
      for (int x = 0; x < img.width; ++x) {
        const double v = std::clamp(
            t.data()[(static_cast<int64_t>(c) * img.height + r) * img.width + x], 0.0, 1.0);
        img.pixels[(static_cast<size_t>(r) * img.width + x) * img.channels + c] =
            static_cast<uint8_t>(std::lround(v * 255.0));
      }
  return img;
}

}  // namespace bcr
