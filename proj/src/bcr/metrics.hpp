#pragma once

#include <functional>
#include <string>

#include "bcr/config.hpp"
#include "bcr/dataset.hpp"
#include "bcr/proposals.hpp"

namespace bcr {

struct EvalConfig {
  double threshold = 0.3;   // inclusive: curves with score >= threshold survive
  int dilation = -1;        // -1: scaled protocol radius
  int curve_samples = 100;  // polyline density when rasterizing curves
};

struct MetricReport {
  std::vector<std::string> categories;
  std::vector<double> iou;   // per-category mean, percent
  std::vector<double> dsc;   // per-category mean, percent
  std::vector<double> assd;  // per-category mean, pixels
  double mean_iou = 0;       // per-image category means, then over images
  double mean_dsc = 0;
  double mean_assd = 0;
  double fwiou = 0;
  bool fwiou_defined = true;
  int images = 0;
  int assd_penalty_count = 0;  // category evaluations that hit the empty-side penalty

  std::string table() const;
  std::string key_values() const;
};

// Score thresholding of the final stage, empty categories allowed.
std::vector<std::vector<BezierCurve>> finalize_predictions(const ProposalSet& final_stage,
                                                           double threshold = 0.3);

// IoU and DSC in percent. Both 100 when both masks are empty, both 0 when
// exactly one is empty.
std::pair<double, double> mask_metrics(const Mask& pred, const Mask& gt);

// Frequency-weighted mean of category IoUs; *defined=false (and 0 returned)
// when every frequency is zero.
double fwiou(const std::vector<double>& ious, const std::vector<double>& freqs,
             bool* defined = nullptr);

// Average symmetric surface distance between two pixel sets (Euclidean,
// pixel centers). One side empty yields `penalty` (flag via penalty_hit);
// both empty yields 0.
double assd(const std::vector<Pixel>& a, const std::vector<Pixel>& b, double penalty,
            bool* penalty_hit = nullptr);

// Per image: per-category curves -> polylines at curve_samples density ->
// centerline pixels and dilated masks; metrics against the ground-truth
// curves rasterized identically. Categories absent from the ground truth are
// skipped. Deterministic.
using PredictFn =
    std::function<std::vector<std::vector<BezierCurve>>(const Sample&)>;
MetricReport evaluate_with(const PredictFn& predict, const std::vector<Sample>& data,
                           const std::vector<std::string>& categories, const EvalConfig& cfg);

// Runs the model (final refinement stage + threshold) over the dataset.
MetricReport evaluate(const BcrModel& model, std::vector<Sample>& data, const EvalConfig& cfg);

}  // namespace bcr
