// Command-line front end. Links the C API only; all pipeline logic lives
// behind the shared library boundary.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "bcrnet.h"

namespace fs = std::filesystem;

namespace {

struct StringGuard {
  char* s = nullptr;
  ~StringGuard() { bcr_string_free(s); }
};

struct DatasetGuard {
  bcr_dataset* d = nullptr;
  ~DatasetGuard() { bcr_dataset_free(d); }
};

struct ModelGuard {
  bcr_model* m = nullptr;
  ~ModelGuard() { bcr_model_free(m); }
};

int report(int rc, const char* what) {
  if (rc != BCR_OK) std::cerr << "error: " << what << ": " << bcr_last_error() << "\n";
  return rc;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    std::cerr << "error: cannot open config file: " << path << "\n";
    std::exit(BCR_ERR_USAGE);
  }
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// config file first, then command-line overrides (later keys win)
std::string merge_config(const std::string& config_file,
                         const std::vector<std::string>& overrides) {
  std::string text;
  if (!config_file.empty()) text = read_text_file(config_file) + "\n";
  for (const std::string& kv : overrides) {
    if (kv.find('=') == std::string::npos) {
      std::cerr << "error: override '" << kv << "' is not key=value\n";
      std::exit(BCR_ERR_USAGE);
    }
    text += kv + "\n";
  }
  return text;
}

bool write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) return false;
  f << content;
  return f.good();
}

// resolves --data to the annotations.json inside it when a directory is given
std::string annotations_path(const std::string& data) {
  if (fs::is_directory(data)) return (fs::path(data) / "annotations.json").string();
  return data;
}

int write_effective_config(bcr_model* model, const std::string& out_dir) {
  StringGuard cfg;
  if (int rc = report(bcr_model_config(model, &cfg.s), "config")) return rc;
  if (!write_file((fs::path(out_dir) / "config.effective").string(), cfg.s)) {
    std::cerr << "error: cannot write config.effective in " << out_dir << "\n";
    return BCR_ERR_USAGE;
  }
  return BCR_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bcrnet: Bezier-curve landmark detection pipeline"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  uint64_t synth_seed = 0;
  int synth_count = 8, synth_size = 128;
  std::string synth_out;
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--count", synth_count, "number of images");
  synth->add_option("--size", synth_size, "square image size (divisible by 32)");
  synth->add_option("--out", synth_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::string train_config, train_data, train_out, train_ckpt;
  std::vector<std::string> train_overrides;
  train->add_option("--config", train_config, "key=value config file");
  train->add_option("--data", train_data, "dataset directory or annotations.json")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--checkpoint", train_ckpt, "resume from this checkpoint");
  train->add_option("overrides", train_overrides, "key=value overrides");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_out;
  double eval_threshold = -1;
  eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval->add_option("--data", eval_data, "dataset directory or annotations.json")->required();
  eval->add_option("--out", eval_out, "output directory for report files");
  eval->add_option("--threshold", eval_threshold, "score threshold (default: from config)");

  // infer
  auto* infer = app.add_subcommand("infer", "run single-image inference");
  std::string infer_ckpt, infer_image, infer_depth, infer_out;
  double infer_threshold = -1;
  infer->add_option("--checkpoint", infer_ckpt, "model checkpoint")->required();
  infer->add_option("--image", infer_image, "input RGB PNG")->required();
  infer->add_option("--depth", infer_depth, "depth PNG (default: <image>_depth.png)");
  infer->add_option("--out", infer_out, "output directory")->required();
  infer->add_option("--threshold", infer_threshold, "score threshold");

  // render
  auto* render = app.add_subcommand("render", "render an SVG overlay of the predictions");
  std::string render_ckpt, render_image, render_depth, render_data, render_out;
  int render_index = 0;
  double render_threshold = -1;
  render->add_option("--checkpoint", render_ckpt, "model checkpoint")->required();
  render->add_option("--image", render_image, "input RGB PNG")->required();
  render->add_option("--depth", render_depth, "depth PNG (default: <image>_depth.png)");
  render->add_option("--data", render_data, "annotations file for the ground-truth overlay");
  render->add_option("--index", render_index, "annotation entry for --data");
  render->add_option("--out", render_out, "output directory")->required();
  render->add_option("--threshold", render_threshold, "score threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : BCR_ERR_USAGE;
  }

  if (synth->parsed()) {
    DatasetGuard ds;
    if (int rc = report(bcr_dataset_synth(synth_seed, synth_count, synth_size, synth_size, &ds.d),
                        "synth"))
      return rc;
    if (int rc = report(bcr_dataset_save(ds.d, synth_out.c_str()), "save dataset")) return rc;
    int n = 0;
    bcr_dataset_count(ds.d, &n);
    std::cout << "wrote " << n << " images + annotations.json to " << synth_out << "\n";
    return 0;
  }

  if (train->parsed()) {
    std::error_code ec;
    fs::create_directories(train_out, ec);
    const std::string merged = merge_config(train_config, train_overrides);
    ModelGuard model;
    if (!train_ckpt.empty()) {
      if (int rc = report(bcr_model_load(train_ckpt.c_str(), &model.m), "load checkpoint"))
        return rc;
      if (!merged.empty())
        if (int rc = report(bcr_model_set_config(model.m, merged.c_str()), "apply config"))
          return rc;
    } else {
      if (int rc = report(bcr_model_create(merged.c_str(), &model.m), "create model")) return rc;
    }
    if (int rc = write_effective_config(model.m, train_out)) return rc;

    DatasetGuard ds;
    if (int rc = report(
            bcr_dataset_load(annotations_path(train_data).c_str(), nullptr, &ds.d), "load data"))
      return rc;

    const std::string ckpt = (fs::path(train_out) / "checkpoint.bin").string();
    const std::string log = (fs::path(train_out) / "train_log.tsv").string();
    auto cb = [](int epoch, double lambda_d, double total, void*) {
      std::printf("epoch %d  lambda_d %.4f  total %.6f\n", epoch, lambda_d, total);
      std::fflush(stdout);
    };
    if (int rc = report(bcr_train(model.m, ds.d, ckpt.c_str(), log.c_str(), cb, nullptr),
                        "train"))
      return rc;
    std::cout << "checkpoint: " << ckpt << "\nlog: " << log << "\n";
    return 0;
  }

  if (eval->parsed()) {
    ModelGuard model;
    if (int rc = report(bcr_model_load(eval_ckpt.c_str(), &model.m), "load checkpoint")) return rc;
    DatasetGuard ds;
    if (int rc = report(bcr_dataset_load(annotations_path(eval_data).c_str(), nullptr, &ds.d),
                        "load data"))
      return rc;
    StringGuard table, kv;
    if (int rc = report(bcr_evaluate(model.m, ds.d, eval_threshold, &table.s, &kv.s), "evaluate"))
      return rc;
    std::cout << table.s;
    if (!eval_out.empty()) {
      std::error_code ec;
      fs::create_directories(eval_out, ec);
      if (!write_file((fs::path(eval_out) / "report.txt").string(), table.s) ||
          !write_file((fs::path(eval_out) / "report.kv").string(), kv.s)) {
        std::cerr << "error: cannot write report files in " << eval_out << "\n";
        return BCR_ERR_USAGE;
      }
    }
    return 0;
  }

  if (infer->parsed()) {
    ModelGuard model;
    if (int rc = report(bcr_model_load(infer_ckpt.c_str(), &model.m), "load checkpoint"))
      return rc;
    StringGuard curves;
    if (int rc = report(bcr_infer(model.m, infer_image.c_str(),
                                  infer_depth.empty() ? nullptr : infer_depth.c_str(),
                                  infer_threshold, &curves.s),
                        "infer"))
      return rc;
    std::error_code ec;
    fs::create_directories(infer_out, ec);
    const std::string path = (fs::path(infer_out) / "curves.json").string();
    if (!write_file(path, curves.s)) {
      std::cerr << "error: cannot write " << path << "\n";
      return BCR_ERR_USAGE;
    }
    std::cout << "curves: " << path << "\n";
    return 0;
  }

  if (render->parsed()) {
    ModelGuard model;
    if (int rc = report(bcr_model_load(render_ckpt.c_str(), &model.m), "load checkpoint"))
      return rc;
    std::error_code ec;
    fs::create_directories(render_out, ec);
    const std::string path = (fs::path(render_out) / "overlay.svg").string();
    if (int rc = report(bcr_render(model.m, render_image.c_str(),
                                   render_depth.empty() ? nullptr : render_depth.c_str(),
                                   render_data.empty() ? nullptr : render_data.c_str(),
                                   render_index, render_threshold, path.c_str()),
                        "render"))
      return rc;
    std::cout << "overlay: " << path << "\n";
    return 0;
  }

  return BCR_ERR_USAGE;
}
