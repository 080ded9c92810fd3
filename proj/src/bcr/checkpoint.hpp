#pragma once

#include <array>
#include <string>

#include "bcr/params.hpp"

namespace bcr {

// Training state that rides along with the parameter tensors.
struct CheckpointMeta {
  std::string config_text;  // canonical key=value serialization
  int64_t step = 0;         // optimizer step counter
  int epoch = 0;            // completed epochs
  std::array<uint64_t, 4> rng_state{};
};

// Little-endian binary container: magic, version, config echo, named
// parameter tensors with shapes, Adam moments, step/epoch, RNG state, CRC32
// trailer. save(load(x)) is byte-identical.
void save_checkpoint(const std::string& path, const ParamStore& params,
                     const CheckpointMeta& meta);

// Reads only the metadata (for model reconstruction before parameters can be
// loaded).
CheckpointMeta peek_checkpoint(const std::string& path);

// Verifies integrity first and fails without touching `params` on any
// mismatch; parameter names and shapes must match the store exactly.
CheckpointMeta load_checkpoint(const std::string& path, ParamStore& params);

}  // namespace bcr
