#include "bcr/backbone.hpp"

namespace bcr {

Backbone::Backbone(ParamStore& ps, const std::string& prefix, int channels, int categories,
                   Rng& rng, const AuxFeatureProvider* aux)
    : channels_(channels), categories_(categories), aux_(aux) {
  stem_ = Conv(ps, prefix + ".stem", 4, channels, 3, 2, rng);
  for (int i = 0; i < 4; ++i) {
    const std::string bp = prefix + ".enc" + std::to_string(i + 1);
    enc_[static_cast<size_t>(i)] = {Conv(ps, bp + ".c1", channels, channels, 3, 1, rng),
                                    Conv(ps, bp + ".c2", channels, channels, 3, 1, rng),
                                    Conv(ps, bp + ".down", channels, channels, 3, 2, rng)};
  }
  dec4_ = Conv(ps, prefix + ".dec4", channels, channels, 3, 1, rng);
  for (int i = 0; i < 3; ++i)
    dec_[static_cast<size_t>(i)] =
        Conv(ps, prefix + ".dec" + std::to_string(3 - i), 2 * channels, channels, 3, 1, rng);
  const int aux_c = aux_ ? aux_->channels() : 0;
  for (int l = 0; l < 4; ++l) {
    seg_heads_[static_cast<size_t>(l)] =
        Conv(ps, prefix + ".seg" + std::to_string(l + 1), channels, categories, 1, 1, rng);
    fuse_[static_cast<size_t>(l)] =
        Conv(ps, prefix + ".fuse" + std::to_string(l + 1), 2 * channels + aux_c, channels, 1, 1, rng);
  }
}

BackboneOut Backbone::forward(Pass& pass, const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != 4)
    fail(ErrKind::Shape, "backbone expects a [4,H,W] image");
  const int h = image.dim(1), w = image.dim(2);
  if (h % 32 || w % 32) fail(ErrKind::Config, "image height/width must be divisible by 32");

  Tensor x = relu(stem_.forward(pass, image));  // /2
  std::array<Tensor, 4> e;
  for (int i = 0; i < 4; ++i) {
    const auto& blk = enc_[static_cast<size_t>(i)];
    x = relu(blk.c1.forward(pass, x));
    x = relu(blk.c2.forward(pass, x));
    x = blk.down.forward(pass, x);  // /4 /8 /16 /32
    e[static_cast<size_t>(i)] = x;
  }

  std::array<Tensor, 4> d;
  d[3] = relu(dec4_.forward(pass, e[3]));
  for (int l = 2; l >= 0; --l) {
    Tensor up = upsample_nearest(d[static_cast<size_t>(l + 1)], 2);
    Tensor cat = concat({up, e[static_cast<size_t>(l)]}, 0);
    d[static_cast<size_t>(l)] = relu(dec_[static_cast<size_t>(2 - l)].forward(pass, cat));
  }

  BackboneOut out;
  for (int l = 0; l < 4; ++l) {
    std::vector<Tensor> parts = {e[static_cast<size_t>(l)], d[static_cast<size_t>(l)]};
    if (aux_ && aux_->channels() > 0) {
      const int lh = e[static_cast<size_t>(l)].dim(1), lw = e[static_cast<size_t>(l)].dim(2);
      Tensor a = aux_->features(l + 1, lh, lw);
      if (a.rank() != 3 || a.dim(0) != aux_->channels() || a.dim(1) != lh || a.dim(2) != lw)
        fail(ErrKind::Shape, "auxiliary feature provider returned a wrong shape");
      parts.push_back(a);
    }
    out.pyramid.f[static_cast<size_t>(l)] = fuse_[static_cast<size_t>(l)].forward(pass, concat(parts, 0));
    Tensor logits = seg_heads_[static_cast<size_t>(l)].forward(pass, d[static_cast<size_t>(l)]);
    const int factor = 4 << l;  // level l is at stride 4*2^l
    out.seg.s[static_cast<size_t>(l)] = upsample_nearest(sigmoid(logits), factor);
  }
  return out;
}

}  // namespace bcr
