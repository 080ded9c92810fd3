#include "bcrnet.h"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "bcr/metrics.hpp"
#include "bcr/png_io.hpp"
#include "bcr/render.hpp"
#include "bcr/synth.hpp"
#include "bcr/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

extern "C" {

struct bcr_dataset {
  std::vector<bcr::Sample> samples;
  std::vector<std::string> categories;
};

struct bcr_model {
  std::unique_ptr<bcr::Session> session;
};

}  // extern "C"

namespace {

thread_local std::string g_last_error;

int set_error(const bcr::Error& e) {
  g_last_error = e.what();
  return bcr::is_usage_error(e.kind()) ? BCR_ERR_USAGE : BCR_ERR_RUNTIME;
}

int set_error(const std::exception& e) {
  g_last_error = e.what();
  return BCR_ERR_RUNTIME;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return BCR_OK;
  } catch (const bcr::Error& e) {
    return set_error(e);
  } catch (const std::exception& e) {
    return set_error(e);
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> split_categories(const char* csv) {
  if (!csv || !*csv) return {"ridge", "ligament", "silhouette"};
  std::vector<std::string> out;
  std::string cur;
  for (const char* p = csv;; ++p) {
    if (*p == ',' || *p == '\0') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
      if (*p == '\0') break;
    } else {
      cur.push_back(*p);
    }
  }
  if (out.empty()) bcr::fail(bcr::ErrKind::Config, "empty category list");
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) bcr::fail(bcr::ErrKind::Config, std::string("null argument: ") + what);
}

// Loads RGB + depth into a [4,H,W] tensor following the dataset convention.
bcr::Tensor load_rgbd(const std::string& image_png, const char* depth_png) {
  bcr::ImageU8 rgb = bcr::read_png(image_png);
  if (rgb.channels != 3)
    bcr::fail(bcr::ErrKind::Parse, "expected an RGB image: " + image_png);
  const int h = rgb.height, w = rgb.width;
  bcr::Tensor img({4, h, w});
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        img.data()[(static_cast<int64_t>(ch) * h + r) * w + c] =
            rgb.pixels[(static_cast<size_t>(r) * w + c) * 3 + ch] / 255.0;
  std::string depth_path;
  if (depth_png && *depth_png) {
    depth_path = depth_png;
  } else {
    const size_t dot = image_png.rfind('.');
    depth_path = (dot == std::string::npos ? image_png : image_png.substr(0, dot)) + "_depth.png";
    if (!fs::exists(depth_path)) depth_path.clear();
  }
  if (!depth_path.empty()) {
    bcr::ImageU8 depth = bcr::read_png(depth_path);
    if (depth.channels != 1 || depth.height != h || depth.width != w)
      bcr::fail(bcr::ErrKind::Parse, "bad depth image: " + depth_path);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        img.data()[(static_cast<int64_t>(3) * h + r) * w + c] =
            depth.pixels[static_cast<size_t>(r) * w + c] / 255.0;
  }
  return img;
}

json curve_to_json(const bcr::BezierCurve& c, double score) {
  json control = json::array();
  for (const bcr::Point2& p : c.control) control.push_back({p.x, p.y});
  return {{"score", score}, {"control", control}};
}

}  // namespace

extern "C" {

const char* bcr_version(void) { return "1.0.0"; }

const char* bcr_last_error(void) { return g_last_error.c_str(); }

void bcr_string_free(char* s) { std::free(s); }

int bcr_dataset_synth(uint64_t seed, int count, int height, int width, bcr_dataset** out) {
  return guarded([&] {
    require(out, "out");
    auto ds = std::make_unique<bcr_dataset>();
    ds->samples = bcr::generate_synthetic(seed, count, height, width);
    ds->categories = {"ridge", "ligament", "silhouette"};
    *out = ds.release();
  });
}

int bcr_dataset_load(const char* annotations_json, const char* categories_csv,
                     bcr_dataset** out) {
  return guarded([&] {
    require(annotations_json, "annotations_json");
    require(out, "out");
    auto ds = std::make_unique<bcr_dataset>();
    ds->categories = split_categories(categories_csv);
    ds->samples = bcr::load_annotations(annotations_json, ds->categories);
    *out = ds.release();
  });
}

int bcr_dataset_save(const bcr_dataset* ds, const char* dir) {
  return guarded([&] {
    require(ds, "ds");
    require(dir, "dir");
    bcr::save_annotations(dir, ds->samples, ds->categories);
  });
}

int bcr_dataset_count(const bcr_dataset* ds, int* out_count) {
  return guarded([&] {
    require(ds, "ds");
    require(out_count, "out_count");
    *out_count = static_cast<int>(ds->samples.size());
  });
}

void bcr_dataset_free(bcr_dataset* ds) { delete ds; }

int bcr_model_create(const char* config_text, bcr_model** out) {
  return guarded([&] {
    require(out, "out");
    const bcr::TrainConfig cfg = bcr::parse_config(config_text ? config_text : "");
    auto m = std::make_unique<bcr_model>();
    m->session = bcr::Session::create(cfg);
    *out = m.release();
  });
}

int bcr_model_load(const char* checkpoint_path, bcr_model** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out, "out");
    auto m = std::make_unique<bcr_model>();
    m->session = bcr::Session::load(checkpoint_path);
    *out = m.release();
  });
}

int bcr_model_save(const bcr_model* model, const char* checkpoint_path) {
  return guarded([&] {
    require(model, "model");
    require(checkpoint_path, "checkpoint_path");
    model->session->save(checkpoint_path);
  });
}

int bcr_model_config(const bcr_model* model, char** out_config_text) {
  return guarded([&] {
    require(model, "model");
    require(out_config_text, "out_config_text");
    *out_config_text = dup_string(bcr::serialize_config(model->session->cfg));
  });
}

int bcr_model_set_config(bcr_model* model, const char* config_text) {
  return guarded([&] {
    require(model, "model");
    require(config_text, "config_text");
    const bcr::TrainConfig merged =
        bcr::parse_config(bcr::serialize_config(model->session->cfg) + "\n" + config_text);
    const bcr::ModelConfig& a = model->session->cfg.model;
    const bcr::ModelConfig& b = merged.model;
    if (a.categories != b.categories || a.channels != b.channels ||
        a.hidden_dim != b.hidden_dim || a.heads != b.heads ||
        a.sampling_points != b.sampling_points || a.num_proposals != b.num_proposals ||
        a.ref_points != b.ref_points)
      bcr::fail(bcr::ErrKind::Config,
                "cannot change model architecture keys on an existing model");
    model->session->cfg = merged;
  });
}

void bcr_model_free(bcr_model* model) { delete model; }

int bcr_train(bcr_model* model, bcr_dataset* ds, const char* checkpoint_path,
              const char* log_path, bcr_epoch_callback cb, void* user) {
  return guarded([&] {
    require(model, "model");
    require(ds, "ds");
    if (ds->samples.empty()) bcr::fail(bcr::ErrKind::Config, "training dataset is empty");
    if (static_cast<int>(ds->categories.size()) != model->session->cfg.model.categories)
      bcr::fail(bcr::ErrKind::Config, "dataset/model category count mismatch");
    bcr::Trainer trainer(*model->session);
    trainer.run(ds->samples, checkpoint_path ? checkpoint_path : "",
                log_path ? log_path : "",
                [&](int epoch, const bcr::LossBreakdown& bd) {
                  if (cb) cb(epoch, bd.lambda_d, bd.total, user);
                });
  });
}

int bcr_evaluate(bcr_model* model, bcr_dataset* ds, double threshold, char** out_table,
                 char** out_key_values) {
  return guarded([&] {
    require(model, "model");
    require(ds, "ds");
    if (ds->samples.empty()) bcr::fail(bcr::ErrKind::Config, "evaluation dataset is empty");
    bcr::EvalConfig ec;
    ec.threshold = threshold >= 0 ? threshold : model->session->cfg.score_threshold;
    ec.dilation = model->session->cfg.mask_dilation;
    const bcr::MetricReport rep = bcr::evaluate(*model->session->model, ds->samples, ec);
    if (out_table) *out_table = dup_string(rep.table());
    if (out_key_values) *out_key_values = dup_string(rep.key_values());
  });
}

int bcr_infer(bcr_model* model, const char* image_png, const char* depth_png, double threshold,
              char** out_curves_json) {
  return guarded([&] {
    require(model, "model");
    require(image_png, "image_png");
    require(out_curves_json, "out_curves_json");
    const bcr::Tensor img = load_rgbd(image_png, depth_png);
    bcr::Pass pass;
    const bcr::BcrModel::Forward fwd = model->session->model->forward(pass, img);
    const double thr =
        threshold >= 0 ? threshold : model->session->cfg.score_threshold;

    std::vector<bcr::ProposalSet> stages;
    stages.push_back(bcr::to_proposal_set(fwd.initial));
    for (const auto& st : fwd.stages) stages.push_back(bcr::to_proposal_set(st.proposals));

    const auto& names = model->session->cfg.model.category_names;
    json out;
    out["image"] = image_png;
    out["threshold"] = thr;
    out["categories"] = names;
    json jstages = json::array();
    for (const auto& st : stages) {
      json per_cat = json::array();
      for (size_t m = 0; m < st.curves.size(); ++m) {
        json list = json::array();
        for (size_t k = 0; k < st.curves[m].size(); ++k)
          list.push_back(curve_to_json(st.curves[m][k], st.scores[m][k]));
        per_cat.push_back(list);
      }
      jstages.push_back(per_cat);
    }
    out["stages"] = jstages;
    json jfinal = json::array();
    for (size_t m = 0; m < stages.back().curves.size(); ++m) {
      json list = json::array();
      for (size_t k = 0; k < stages.back().curves[m].size(); ++k)
        if (stages.back().scores[m][k] >= thr)
          list.push_back(curve_to_json(stages.back().curves[m][k], stages.back().scores[m][k]));
      jfinal.push_back(list);
    }
    out["final"] = jfinal;
    *out_curves_json = dup_string(out.dump(2));
  });
}

int bcr_render(bcr_model* model, const char* image_png, const char* depth_png,
               const char* annotations_json, int annotation_index, double threshold,
               const char* svg_out_path) {
  return guarded([&] {
    require(model, "model");
    require(image_png, "image_png");
    require(svg_out_path, "svg_out_path");
    const bcr::Tensor img = load_rgbd(image_png, depth_png);
    bcr::Pass pass;
    const bcr::BcrModel::Forward fwd = model->session->model->forward(pass, img);
    const double thr =
        threshold >= 0 ? threshold : model->session->cfg.score_threshold;

    bcr::RenderInput rin;
    rin.height = img.dim(1);
    rin.width = img.dim(2);
    rin.categories = model->session->cfg.model.category_names;
    rin.initial = bcr::finalize_predictions(bcr::to_proposal_set(fwd.initial), thr);
    rin.final = bcr::finalize_predictions(bcr::to_proposal_set(fwd.stages[2].proposals), thr);
    rin.dilation_px = bcr::mask_dilation_for(model->session->cfg, rin.height, rin.width);

    std::ifstream bg(image_png, std::ios::binary);
    rin.background_png.assign((std::istreambuf_iterator<char>(bg)),
                              std::istreambuf_iterator<char>());

    bcr::LandmarkAnnotation gt;
    if (annotations_json && *annotations_json) {
      auto samples = bcr::load_annotations(annotations_json, rin.categories);
      if (annotation_index < 0 || annotation_index >= static_cast<int>(samples.size()))
        bcr::fail(bcr::ErrKind::Config, "annotation index out of range");
      gt = samples[static_cast<size_t>(annotation_index)].annotation;
      rin.gt = &gt;
    }

    std::ofstream out(svg_out_path);
    if (!out) bcr::fail(bcr::ErrKind::Io, std::string("cannot write: ") + svg_out_path);
    out << bcr::render_svg(rin);
  });
}

}  // extern "C"
