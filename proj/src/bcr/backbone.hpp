#pragma once

#include <array>
#include <optional>

#include "bcr/layers.hpp"

namespace bcr {

// Multi-scale features f1..f4 at strides 4/8/16/32 with a shared channel
// count. Reads go through level() so tests can assert which levels a
// consumer actually touched.
struct FeaturePyramid {
  std::array<Tensor, 4> f;
  mutable std::array<int, 4> reads{};

  const Tensor& level(int i) const {  // i in 1..4
    if (i < 1 || i > 4) fail(ErrKind::Config, "pyramid level out of range");
    ++reads[static_cast<size_t>(i - 1)];
    return f[static_cast<size_t>(i - 1)];
  }
  void reset_reads() const { reads = {}; }
};

// Per-level foreground probabilities, each [M,H,W] at the input resolution.
struct SegmentationOutputs {
  std::array<Tensor, 4> s;
};

struct BackboneOut {
  FeaturePyramid pyramid;
  SegmentationOutputs seg;
};

// Hook for injecting externally computed per-level feature maps (a stand-in
// for a frozen foundation-model branch). channels() extra channels are
// concatenated into the per-level fusion.
class AuxFeatureProvider {
 public:
  virtual ~AuxFeatureProvider() = default;
  virtual int channels() const = 0;
  // level in 1..4, expected output [channels(), h, w]
  virtual Tensor features(int level, int h, int w) const = 0;
};

// CNN encoder/decoder over 4-channel RGB-D input. The encoder is a stride-2
// stem plus four blocks of [conv3x3, relu, conv3x3, relu, stride-2 conv];
// the decoder mirrors it with skip connections. Fused per-level features are
// conv1x1(concat(encoder_i, decoder_i [, aux_i])).
class Backbone {
 public:
  Backbone() = default;
  Backbone(ParamStore& ps, const std::string& prefix, int channels, int categories, Rng& rng,
           const AuxFeatureProvider* aux = nullptr);

  BackboneOut forward(Pass& pass, const Tensor& image) const;  // image [4,H,W]

  int channels() const { return channels_; }

 private:
  int channels_ = 0;
  int categories_ = 0;
  const AuxFeatureProvider* aux_ = nullptr;
  Conv stem_;
  struct Block {
    Conv c1, c2, down;
  };
  std::array<Block, 4> enc_;
  Conv dec4_;
  std::array<Conv, 3> dec_;               // d3, d2, d1
  std::array<Conv, 4> seg_heads_;         // per level
  std::array<Conv, 4> fuse_;              // per level
};

}  // namespace bcr
