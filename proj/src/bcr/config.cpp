#include "bcr/config.hpp"

#include <charconv>
#include <sstream>

#include "bcr/dataset.hpp"

namespace bcr {

namespace {

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail(ErrKind::Config, "config: bad numeric value for " + key + ": '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  const int i = static_cast<int>(d);
  if (d != i) fail(ErrKind::Config, "config: expected integer for " + key + ": '" + v + "'");
  return i;
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const uint64_t u = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    fail(ErrKind::Config, "config: bad unsigned value for " + key + ": '" + v + "'");
  }
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

void apply(TrainConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "categories") {
    cfg.model.categories = to_int(key, value);
  } else if (key == "category_names") {
    std::vector<std::string> names;
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) {
      part = trim(part);
      if (!part.empty()) names.push_back(part);
    }
    if (names.empty()) fail(ErrKind::Config, "config: category_names must not be empty");
    cfg.model.category_names = names;
    cfg.model.categories = static_cast<int>(names.size());
  } else if (key == "channels") {
    cfg.model.channels = to_int(key, value);
  } else if (key == "hidden_dim") {
    cfg.model.hidden_dim = to_int(key, value);
  } else if (key == "heads") {
    cfg.model.heads = to_int(key, value);
  } else if (key == "sampling_points") {
    cfg.model.sampling_points = to_int(key, value);
  } else if (key == "num_proposals") {
    cfg.model.num_proposals = to_int(key, value);
  } else if (key == "ref_points") {
    cfg.model.ref_points = to_int(key, value);
  } else if (key == "pool_size") {
    cfg.model.pool_size = to_int(key, value);
  } else if (key == "epochs") {
    cfg.epochs = to_int(key, value);
  } else if (key == "batch_size") {
    cfg.batch_size = to_int(key, value);
  } else if (key == "learning_rate") {
    cfg.learning_rate = to_double(key, value);
  } else if (key == "weight_decay") {
    cfg.weight_decay = to_double(key, value);
  } else if (key == "lambda_s") {
    cfg.weights.s = to_double(key, value);
  } else if (key == "lambda_ind") {
    cfg.weights.ind = to_double(key, value);
  } else if (key == "lambda_cs") {
    cfg.weights.cs = to_double(key, value);
  } else if (key == "lambda_crv") {
    cfg.weights.crv = to_double(key, value);
  } else if (key == "match_cost_cs") {
    cfg.weights.match_cs = to_double(key, value);
  } else if (key == "match_cost_crv") {
    cfg.weights.match_crv = to_double(key, value);
  } else if (key == "focal_alpha") {
    cfg.weights.focal_alpha = to_double(key, value);
  } else if (key == "focal_gamma") {
    cfg.weights.focal_gamma = to_double(key, value);
  } else if (key == "curve_interp") {
    cfg.weights.n_interp = to_int(key, value);
  } else if (key == "mask_dilation") {
    cfg.mask_dilation = to_int(key, value);
  } else if (key == "score_threshold") {
    cfg.score_threshold = to_double(key, value);
  } else if (key == "seed") {
    cfg.seed = to_u64(key, value);
  } else {
    fail(ErrKind::Config, "config: unknown key '" + key + "'");
  }
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 0) fail(ErrKind::Config, "config: epochs must be >= 0");
  if (batch_size < 1) fail(ErrKind::Config, "config: batch_size must be >= 1");
  if (!(learning_rate > 0)) fail(ErrKind::Config, "config: learning_rate must be positive");
  if (weight_decay < 0) fail(ErrKind::Config, "config: weight_decay must be >= 0");
  if (weights.n_interp < 2) fail(ErrKind::Config, "config: curve_interp must be >= 2");
  if (!(weights.focal_gamma >= 0)) fail(ErrKind::Config, "config: focal_gamma must be >= 0");
  if (!(score_threshold >= 0 && score_threshold <= 1))
    fail(ErrKind::Config, "config: score_threshold must lie in [0,1]");
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrKind::Config, "config: line " + std::to_string(lineno) + " is not key=value");
    apply(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

std::string serialize_config(const TrainConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "categories=" << cfg.model.categories << "\n";
  os << "category_names=";
  for (size_t i = 0; i < cfg.model.category_names.size(); ++i)
    os << (i ? "," : "") << cfg.model.category_names[i];
  os << "\n";
  os << "channels=" << cfg.model.channels << "\n";
  os << "hidden_dim=" << cfg.model.hidden_dim << "\n";
  os << "heads=" << cfg.model.heads << "\n";
  os << "sampling_points=" << cfg.model.sampling_points << "\n";
  os << "num_proposals=" << cfg.model.num_proposals << "\n";
  os << "ref_points=" << cfg.model.ref_points << "\n";
  os << "pool_size=" << cfg.model.pool_size << "\n";
  os << "epochs=" << cfg.epochs << "\n";
  os << "batch_size=" << cfg.batch_size << "\n";
  os << "learning_rate=" << cfg.learning_rate << "\n";
  os << "weight_decay=" << cfg.weight_decay << "\n";
  os << "lambda_s=" << cfg.weights.s << "\n";
  os << "lambda_ind=" << cfg.weights.ind << "\n";
  os << "lambda_cs=" << cfg.weights.cs << "\n";
  os << "lambda_crv=" << cfg.weights.crv << "\n";
  os << "match_cost_cs=" << cfg.weights.match_cs << "\n";
  os << "match_cost_crv=" << cfg.weights.match_crv << "\n";
  os << "focal_alpha=" << cfg.weights.focal_alpha << "\n";
  os << "focal_gamma=" << cfg.weights.focal_gamma << "\n";
  os << "curve_interp=" << cfg.weights.n_interp << "\n";
  os << "mask_dilation=" << cfg.mask_dilation << "\n";
  os << "score_threshold=" << cfg.score_threshold << "\n";
  os << "seed=" << cfg.seed << "\n";
  return os.str();
}

int mask_dilation_for(const TrainConfig& cfg, int height, int width) {
  return cfg.mask_dilation >= 0 ? cfg.mask_dilation : scaled_dilation_radius(height, width);
}

}  // namespace bcr
