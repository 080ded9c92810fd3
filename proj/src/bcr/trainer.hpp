#pragma once

#include <functional>
#include <memory>

#include "bcr/checkpoint.hpp"
#include "bcr/config.hpp"
#include "bcr/dataset.hpp"

namespace bcr {

// A model plus everything needed to continue training it: optimizer step
// count, completed epochs, and the RNG stream (which also seeded parameter
// initialization). Checkpoints round-trip this state bit-for-bit.
struct Session {
  TrainConfig cfg;
  std::unique_ptr<BcrModel> model;
  int64_t step = 0;
  int epoch = 0;  // completed epochs
  Rng rng;

  static std::unique_ptr<Session> create(const TrainConfig& cfg);
  static std::unique_ptr<Session> load(const std::string& checkpoint_path);
  void save(const std::string& path) const;
};

// AdamW training loop: per epoch, shuffle with the session RNG, iterate
// batches (one tape per batch, loss averaged over the batch images), update
// parameters, write the checkpoint and one log line. Losses are aborted with
// a diagnostic naming the first non-finite term.
class Trainer {
 public:
  using EpochFn = std::function<void(int epoch, const LossBreakdown& mean)>;

  explicit Trainer(Session& session) : s_(session) {}

  // Runs epochs [session.epoch, cfg.epochs). Samples must carry images and
  // annotations; targets are derived here. checkpoint_path/log_path may be
  // empty to skip persistence.
  void run(std::vector<Sample>& data, const std::string& checkpoint_path,
           const std::string& log_path, const EpochFn& on_epoch = {});

  // Single optimization step over the given batch; exposed for tests.
  LossBreakdown train_step(const std::vector<const Sample*>& batch, int epoch);

 private:
  Session& s_;
};

// Formats one metric-log line: epoch, lambda_d, l_s, l_ind, l_cs[0..3],
// l_crv[0..3], total; tab-separated.
std::string format_log_line(int epoch, const LossBreakdown& b);

}  // namespace bcr
