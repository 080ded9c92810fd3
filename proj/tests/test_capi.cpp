#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "bcrnet.h"

namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("bcr_capi_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kTinyConfig =
    "channels=4\nhidden_dim=8\nheads=2\nsampling_points=2\nnum_proposals=2\n"
    "ref_points=8\npool_size=4\nepochs=1\nbatch_size=2\nlearning_rate=0.001\nseed=5\n";

}  // namespace

TEST_CASE("version and error-state basics") {
  CHECK(std::strlen(bcr_version()) > 0);
  bcr_model* m = nullptr;
  CHECK(bcr_model_create("granularity=5\n", &m) == BCR_ERR_USAGE);
  CHECK(std::string(bcr_last_error()).find("granularity") != std::string::npos);
  CHECK(m == nullptr);
  // success clears the error
  CHECK(bcr_model_create(kTinyConfig, &m) == BCR_OK);
  CHECK(std::string(bcr_last_error()).empty());
  bcr_model_free(m);
}

TEST_CASE("dataset synth, save, load, count") {
  const fs::path dir = temp_dir("ds");
  bcr_dataset* ds = nullptr;
  REQUIRE(bcr_dataset_synth(7, 3, 64, 64, &ds) == BCR_OK);
  int n = 0;
  CHECK(bcr_dataset_count(ds, &n) == BCR_OK);
  CHECK(n == 3);
  CHECK(bcr_dataset_save(ds, dir.string().c_str()) == BCR_OK);
  bcr_dataset_free(ds);

  bcr_dataset* back = nullptr;
  REQUIRE(bcr_dataset_load((dir / "annotations.json").string().c_str(), nullptr, &back) == BCR_OK);
  CHECK(bcr_dataset_count(back, &n) == BCR_OK);
  CHECK(n == 3);
  bcr_dataset_free(back);

  CHECK(bcr_dataset_synth(7, 0, 64, 64, &ds) == BCR_ERR_USAGE);
  CHECK(bcr_dataset_load("/nonexistent/annotations.json", nullptr, &back) == BCR_ERR_USAGE);
  CHECK(bcr_dataset_synth(7, 1, 64, 64, nullptr) == BCR_ERR_USAGE);
}

TEST_CASE("model save/load keeps the config echo") {
  const fs::path dir = temp_dir("model");
  bcr_model* m = nullptr;
  REQUIRE(bcr_model_create(kTinyConfig, &m) == BCR_OK);
  char* cfg1 = nullptr;
  REQUIRE(bcr_model_config(m, &cfg1) == BCR_OK);
  const std::string ckpt = (dir / "m.ckpt").string();
  REQUIRE(bcr_model_save(m, ckpt.c_str()) == BCR_OK);
  bcr_model_free(m);

  bcr_model* loaded = nullptr;
  REQUIRE(bcr_model_load(ckpt.c_str(), &loaded) == BCR_OK);
  char* cfg2 = nullptr;
  REQUIRE(bcr_model_config(loaded, &cfg2) == BCR_OK);
  CHECK(std::string(cfg1) == std::string(cfg2));
  bcr_string_free(cfg1);
  bcr_string_free(cfg2);

  // run settings may change, architecture keys may not
  CHECK(bcr_model_set_config(loaded, "epochs=9\n") == BCR_OK);
  CHECK(bcr_model_set_config(loaded, "hidden_dim=16\n") == BCR_ERR_USAGE);
  bcr_model_free(loaded);

  CHECK(bcr_model_load((dir / "missing.ckpt").string().c_str(), &loaded) == BCR_ERR_USAGE);
}

TEST_CASE("train, evaluate, infer, render through the C surface") {
  const fs::path dir = temp_dir("flow");
  bcr_dataset* ds = nullptr;
  REQUIRE(bcr_dataset_synth(9, 2, 64, 64, &ds) == BCR_OK);
  REQUIRE(bcr_dataset_save(ds, (dir / "data").string().c_str()) == BCR_OK);

  bcr_model* m = nullptr;
  REQUIRE(bcr_model_create(kTinyConfig, &m) == BCR_OK);

  int epochs_seen = 0;
  auto cb = [](int, double, double, void* user) { ++*static_cast<int*>(user); };
  const std::string ckpt = (dir / "t.ckpt").string();
  const std::string log = (dir / "t.log").string();
  REQUIRE(bcr_train(m, ds, ckpt.c_str(), log.c_str(), cb, &epochs_seen) == BCR_OK);
  CHECK(epochs_seen == 1);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(log));

  // continuing with the same target epoch count is a no-op
  REQUIRE(bcr_train(m, ds, nullptr, nullptr, cb, &epochs_seen) == BCR_OK);
  CHECK(epochs_seen == 1);

  char* table = nullptr;
  char* kv = nullptr;
  REQUIRE(bcr_evaluate(m, ds, 0.0, &table, &kv) == BCR_OK);
  CHECK(std::string(table).find("ridge") != std::string::npos);
  CHECK(std::string(kv).find("images=2") != std::string::npos);
  bcr_string_free(table);
  bcr_string_free(kv);

  char* curves = nullptr;
  const std::string img = (dir / "data" / "img_000.png").string();
  REQUIRE(bcr_infer(m, img.c_str(), nullptr, 0.0, &curves) == BCR_OK);
  const std::string curves_str = curves;
  CHECK(curves_str.find("\"stages\"") != std::string::npos);
  CHECK(curves_str.find("\"final\"") != std::string::npos);
  CHECK(curves_str.find("\"control\"") != std::string::npos);
  bcr_string_free(curves);

  const std::string svg = (dir / "overlay.svg").string();
  REQUIRE(bcr_render(m, img.c_str(), nullptr,
                     (dir / "data" / "annotations.json").string().c_str(), 0, 0.0,
                     svg.c_str()) == BCR_OK);
  std::ifstream f(svg);
  std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  CHECK(content.find("<svg") != std::string::npos);
  CHECK(content.find("data:image/png;base64,") != std::string::npos);
  CHECK(content.find("<path") != std::string::npos);

  CHECK(bcr_render(m, img.c_str(), nullptr,
                   (dir / "data" / "annotations.json").string().c_str(), 5, 0.0,
                   svg.c_str()) == BCR_ERR_USAGE);  // index out of range

  bcr_model_free(m);
  bcr_dataset_free(ds);
}

TEST_CASE("category mismatch between dataset and model is a usage error") {
  bcr_dataset* ds = nullptr;
  REQUIRE(bcr_dataset_synth(3, 1, 64, 64, &ds) == BCR_OK);
  bcr_model* m = nullptr;
  const std::string cfg = std::string(kTinyConfig) + "category_names=a,b\n";
  REQUIRE(bcr_model_create(cfg.c_str(), &m) == BCR_OK);
  CHECK(bcr_train(m, ds, nullptr, nullptr, nullptr, nullptr) == BCR_ERR_USAGE);
  bcr_model_free(m);
  bcr_dataset_free(ds);
}
