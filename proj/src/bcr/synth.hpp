#pragma once

#include "bcr/dataset.hpp"
#include "bcr/rng.hpp"

namespace bcr {

// Procedural liver-like scenes with three curvilinear landmark categories:
// ridge (a smooth interior crease), ligament (a short curve from the top of
// the organ), silhouette (a contiguous arc of the organ boundary). The
// fourth image channel carries the organ's synthetic height field. With
// probability 0.2 per landmark a rectangular occluder splits it into two
// polylines. Fully determined by the seed; derived targets are not filled.
std::vector<Sample> generate_synthetic(uint64_t seed, int count, int height, int width);

}  // namespace bcr
