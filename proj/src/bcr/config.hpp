#pragma once

#include <string>

#include "bcr/losses.hpp"
#include "bcr/model.hpp"

namespace bcr {

// Full run configuration. Defaults follow the reference protocol: loss
// weights 10/1/1/1, Adam lr 1e-5 with weight decay 1e-4, batch size 4,
// K=10 proposals from a 256-candidate pool, N=26 reference points, 8 heads
// and 4 sampling points, score threshold 0.3.
struct TrainConfig {
  ModelConfig model;
  int epochs = 60;
  int batch_size = 4;
  double learning_rate = 1e-5;
  double weight_decay = 1e-4;
  LossWeights weights;
  int mask_dilation = -1;  // -1: radius scaled from the 30 px protocol value
  double score_threshold = 0.3;
  uint64_t seed = 0;

  void validate() const;
};

// key=value per line; '#' starts a comment. Unknown keys are rejected by
// name. Later assignments win, so file-then-overrides concatenation gives
// override semantics.
TrainConfig parse_config(const std::string& text);

// Canonical serialization (fixed key order); parse(serialize(c)) == c.
std::string serialize_config(const TrainConfig& cfg);

int mask_dilation_for(const TrainConfig& cfg, int height, int width);

}  // namespace bcr
