#include "bcr/trainer.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace bcr {

std::unique_ptr<Session> Session::create(const TrainConfig& cfg) {
  cfg.validate();
  auto s = std::make_unique<Session>();
  s->cfg = cfg;
  s->rng.reseed(cfg.seed);
  s->model = std::make_unique<BcrModel>(cfg.model, s->rng);
  return s;
}

std::unique_ptr<Session> Session::load(const std::string& checkpoint_path) {
  const CheckpointMeta meta = peek_checkpoint(checkpoint_path);
  auto s = std::make_unique<Session>();
  s->cfg = parse_config(meta.config_text);
  // construction order fixes parameter names/shapes; values come from the file
  Rng scratch(s->cfg.seed);
  s->model = std::make_unique<BcrModel>(s->cfg.model, scratch);
  const CheckpointMeta loaded = load_checkpoint(checkpoint_path, s->model->params());
  s->step = loaded.step;
  s->epoch = loaded.epoch;
  s->rng.set_state(loaded.rng_state);
  return s;
}

void Session::save(const std::string& path) const {
  CheckpointMeta meta;
  meta.config_text = serialize_config(cfg);
  meta.step = step;
  meta.epoch = epoch;
  meta.rng_state = rng.state();
  save_checkpoint(path, model->params(), meta);
}

namespace {

void check_breakdown_finite(const LossBreakdown& b, int epoch) {
  auto bad = [epoch](const char* term, double v) {
    if (!std::isfinite(v))
      fail(ErrKind::Numeric, std::string("training aborted: non-finite loss term ") + term +
                                 " at epoch " + std::to_string(epoch));
  };
  bad("l_s", b.l_s);
  bad("l_ind", b.l_ind);
  for (size_t h = 0; h < 4; ++h) {
    bad("l_cs", b.l_cs[h]);
    bad("l_crv", b.l_crv[h]);
  }
  bad("total", b.total);
}

}  // namespace

LossBreakdown Trainer::train_step(const std::vector<const Sample*>& batch, int epoch) {
  BcrModel& model = *s_.model;
  Tape tape;
  Pass pass(&tape);
  Tensor loss;
  LossBreakdown mean_bd;
  for (size_t i = 0; i < batch.size(); ++i) {
    const Sample& sample = *batch[i];
    BcrModel::Forward fwd = model.forward(pass, sample.image);
    std::vector<StagePrediction> stages;
    stages.push_back({fwd.initial.control, fwd.initial.scores});
    for (const auto& st : fwd.stages) stages.push_back({st.proposals.control, st.proposals.scores});
    LossTargets gt;
    gt.gt_curves = sample.targets.gt_curves;
    gt.gt_masks = sample.targets.gt_masks;
    gt.induction_map = sample.targets.induction_map;
    LossBreakdown bd;
    Tensor li = total_loss(stages, fwd.backbone.seg.s, fwd.cpmap.s_init, gt, epoch, s_.cfg.weights,
                           &bd);
    check_breakdown_finite(bd, epoch);
    loss = (i == 0) ? li : add(loss, li);
    mean_bd.l_s += bd.l_s;
    mean_bd.l_ind += bd.l_ind;
    for (size_t h = 0; h < 4; ++h) {
      mean_bd.l_cs[h] += bd.l_cs[h];
      mean_bd.l_crv[h] += bd.l_crv[h];
    }
    mean_bd.lambda_d = bd.lambda_d;
    mean_bd.total += bd.total;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  loss = scale(loss, inv);
  mean_bd.l_s *= inv;
  mean_bd.l_ind *= inv;
  for (size_t h = 0; h < 4; ++h) {
    mean_bd.l_cs[h] *= inv;
    mean_bd.l_crv[h] *= inv;
  }
  mean_bd.total *= inv;

  tape.backward(loss);

  // AdamW: decoupled weight decay
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++s_.step;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(s_.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(s_.step));
  const double lr = s_.cfg.learning_rate, wd = s_.cfg.weight_decay;
  for (const auto& p : model.params().all()) {
    const std::vector<double> g = pass.grad(p.get());
    const size_t n = static_cast<size_t>(p->value.size());
    if (p->m.size() != n) p->m.assign(n, 0.0);
    if (p->v.size() != n) p->v.assign(n, 0.0);
    double* w = p->value.data();
    for (size_t i = 0; i < n; ++i) {
      p->m[i] = b1 * p->m[i] + (1 - b1) * g[i];
      p->v[i] = b2 * p->v[i] + (1 - b2) * g[i] * g[i];
      const double mhat = p->m[i] / bc1;
      const double vhat = p->v[i] / bc2;
      w[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * w[i]);
    }
  }
  return mean_bd;
}

void Trainer::run(std::vector<Sample>& data, const std::string& checkpoint_path,
                  const std::string& log_path, const EpochFn& on_epoch) {
  if (data.empty()) fail(ErrKind::Config, "training requires a non-empty dataset");
#if defined(__GLIBC__)
  // keep large tape buffers on the free list instead of returning them to
  // the kernel every step; roughly halves the step time
  mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
#endif
  for (Sample& s : data) {
    if (!s.targets.gt_masks.size()) {
      const int h = s.image.dim(1), w = s.image.dim(2);
      s.targets = prepare_targets(s.annotation, h / 32, w / 32,
                                  mask_dilation_for(s_.cfg, h, w));
    }
  }

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, s_.epoch > 0 ? std::ios::app : std::ios::out);
    if (!log) fail(ErrKind::Io, "cannot open metric log: " + log_path);
  }

  const int batch = s_.cfg.batch_size;
  for (int epoch = s_.epoch; epoch < s_.cfg.epochs; ++epoch) {
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(s_.rng.below(i));
      std::swap(order[i - 1], order[j]);
    }
    LossBreakdown epoch_bd;
    int steps = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch)) {
      std::vector<const Sample*> chunk;
      for (size_t i = start; i < std::min(order.size(), start + static_cast<size_t>(batch)); ++i)
        chunk.push_back(&data[static_cast<size_t>(order[i])]);
      const LossBreakdown bd = train_step(chunk, epoch);
      epoch_bd.l_s += bd.l_s;
      epoch_bd.l_ind += bd.l_ind;
      for (size_t h = 0; h < 4; ++h) {
        epoch_bd.l_cs[h] += bd.l_cs[h];
        epoch_bd.l_crv[h] += bd.l_crv[h];
      }
      epoch_bd.total += bd.total;
      epoch_bd.lambda_d = bd.lambda_d;
      ++steps;
    }
    const double inv = 1.0 / steps;
    epoch_bd.l_s *= inv;
    epoch_bd.l_ind *= inv;
    for (size_t h = 0; h < 4; ++h) {
      epoch_bd.l_cs[h] *= inv;
      epoch_bd.l_crv[h] *= inv;
    }
    epoch_bd.total *= inv;

    s_.epoch = epoch + 1;
    if (!checkpoint_path.empty()) s_.save(checkpoint_path);
    if (log) log << format_log_line(epoch, epoch_bd) << "\n" << std::flush;
    if (on_epoch) on_epoch(epoch, epoch_bd);
  }
}

std::string format_log_line(int epoch, const LossBreakdown& b) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%d\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g"
                "\t%.10g",
                epoch, b.lambda_d, b.l_s, b.l_ind, b.l_cs[0], b.l_cs[1], b.l_cs[2], b.l_cs[3],
                b.l_crv[0], b.l_crv[1], b.l_crv[2], b.l_crv[3], b.total);
  return buf;
}

}  // namespace bcr
