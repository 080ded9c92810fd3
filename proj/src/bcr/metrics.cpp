#include "bcr/metrics.hpp"

#include <cmath>
#include <sstream>

namespace bcr {

std::vector<std::vector<BezierCurve>> finalize_predictions(const ProposalSet& final_stage,
                                                           double threshold) {
  std::vector<std::vector<BezierCurve>> out(final_stage.curves.size());
  for (size_t m = 0; m < final_stage.curves.size(); ++m)
    for (size_t k = 0; k < final_stage.curves[m].size(); ++k)
      if (final_stage.scores[m][k] >= threshold) out[m].push_back(final_stage.curves[m][k]);
  return out;
}

std::pair<double, double> mask_metrics(const Mask& pred, const Mask& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    fail(ErrKind::Shape, "mask_metrics: shape mismatch");
  int64_t inter = 0, p_count = 0, g_count = 0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
    inter += p && g;
    p_count += p;
    g_count += g;
  }
  if (p_count == 0 && g_count == 0) return {100.0, 100.0};
  if (p_count == 0 || g_count == 0) return {0.0, 0.0};
  const int64_t uni = p_count + g_count - inter;
  const double iou = 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
  const double dsc = 100.0 * 2.0 * static_cast<double>(inter) /
                     static_cast<double>(p_count + g_count);
  return {iou, dsc};
}

double fwiou(const std::vector<double>& ious, const std::vector<double>& freqs, bool* defined) {
  if (ious.size() != freqs.size()) fail(ErrKind::Shape, "fwiou: length mismatch");
  double total = 0;
  for (double f : freqs) {
    if (f < 0) fail(ErrKind::Domain, "fwiou: negative frequency");
    total += f;
  }
  if (total == 0) {
    if (defined) *defined = false;
    return 0.0;
  }
  if (defined) *defined = true;
  double acc = 0;
  for (size_t i = 0; i < ious.size(); ++i) acc += freqs[i] / total * ious[i];
  return acc;
}

double assd(const std::vector<Pixel>& a, const std::vector<Pixel>& b, double penalty,
            bool* penalty_hit) {
  if (penalty_hit) *penalty_hit = false;
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) {
    if (penalty_hit) *penalty_hit = true;
    return penalty;
  }
  auto sum_min = [](const std::vector<Pixel>& from, const std::vector<Pixel>& to) {
    double acc = 0;
    for (const Pixel& p : from) {
      double best = 1e300;
      for (const Pixel& q : to) {
        const double d2 = static_cast<double>(p.r - q.r) * (p.r - q.r) +
                          static_cast<double>(p.c - q.c) * (p.c - q.c);
        if (d2 < best) best = d2;
      }
      acc += std::sqrt(best);
    }
    return acc;
  };
  return (sum_min(a, b) + sum_min(b, a)) / static_cast<double>(a.size() + b.size());
}

namespace {

std::vector<Polyline> curves_to_polylines(const std::vector<BezierCurve>& curves, int samples) {
  std::vector<Polyline> out;
  for (const BezierCurve& c : curves) out.push_back(Polyline{sample_uniform(c, samples)});
  return out;
}

}  // namespace

MetricReport evaluate_with(const PredictFn& predict, const std::vector<Sample>& data,
                           const std::vector<std::string>& categories, const EvalConfig& cfg) {
  if (data.empty()) fail(ErrKind::Config, "evaluate: empty dataset");
  const size_t m = categories.size();
  MetricReport rep;
  rep.categories = categories;
  rep.iou.assign(m, 0.0);
  rep.dsc.assign(m, 0.0);
  rep.assd.assign(m, 0.0);
  std::vector<int> cat_images(m, 0);
  double fw_sum = 0;
  int fw_images = 0;

  for (const Sample& sample : data) {
    const int h = sample.annotation.height, w = sample.annotation.width;
    const int radius = cfg.dilation >= 0 ? cfg.dilation : scaled_dilation_radius(h, w);
    const double penalty = std::hypot(h, w);
    const auto pred = predict(sample);
    if (pred.size() != m) fail(ErrKind::Shape, "evaluate: prediction category count mismatch");

    double img_iou = 0, img_dsc = 0, img_assd = 0;
    int present = 0;
    std::vector<double> img_ious, img_freqs;
    for (size_t mi = 0; mi < m; ++mi) {
      const auto& gt_curves = sample.targets.gt_curves[mi];
      if (gt_curves.empty()) continue;  // aggregate only categories present in GT
      const auto gt_polys = curves_to_polylines(gt_curves, cfg.curve_samples);
      const auto pred_polys = curves_to_polylines(pred[mi], cfg.curve_samples);
      const Mask gt_mask = rasterize(gt_polys, h, w, radius);
      const Mask pred_mask = rasterize(pred_polys, h, w, radius);
      auto [iou_v, dsc_v] = mask_metrics(pred_mask, gt_mask);
      bool hit = false;
      const double assd_v = assd(trace_polylines(pred_polys, h, w),
                                 trace_polylines(gt_polys, h, w), penalty, &hit);
      if (hit) ++rep.assd_penalty_count;
      rep.iou[mi] += iou_v;
      rep.dsc[mi] += dsc_v;
      rep.assd[mi] += assd_v;
      ++cat_images[mi];
      img_iou += iou_v;
      img_dsc += dsc_v;
      img_assd += assd_v;
      ++present;
      img_ious.push_back(iou_v);
      img_freqs.push_back(static_cast<double>(gt_mask.count()));
    }
    if (present > 0) {
      rep.mean_iou += img_iou / present;
      rep.mean_dsc += img_dsc / present;
      rep.mean_assd += img_assd / present;
      bool defined = true;
      const double fw = fwiou(img_ious, img_freqs, &defined);
      if (defined) {
        fw_sum += fw;
        ++fw_images;
      }
    }
    ++rep.images;
  }

  for (size_t mi = 0; mi < m; ++mi) {
    if (cat_images[mi] > 0) {
      rep.iou[mi] /= cat_images[mi];
      rep.dsc[mi] /= cat_images[mi];
      rep.assd[mi] /= cat_images[mi];
    }
  }
  rep.mean_iou /= rep.images;
  rep.mean_dsc /= rep.images;
  rep.mean_assd /= rep.images;
  rep.fwiou_defined = fw_images > 0;
  rep.fwiou = fw_images > 0 ? fw_sum / fw_images : 0.0;
  return rep;
}

MetricReport evaluate(const BcrModel& model, std::vector<Sample>& data, const EvalConfig& cfg) {
  for (Sample& s : data) {
    if (!s.targets.gt_masks.size()) {
      const int h = s.image.dim(1), w = s.image.dim(2);
      const int radius = cfg.dilation >= 0 ? cfg.dilation : scaled_dilation_radius(h, w);
      s.targets = prepare_targets(s.annotation, h / 32, w / 32, radius);
    }
  }
  auto predict = [&](const Sample& sample) {
    Pass pass;  // no tape: inference
    BcrModel::Forward fwd = model.forward(pass, sample.image);
    return finalize_predictions(to_proposal_set(fwd.stages[2].proposals), cfg.threshold);
  };
  return evaluate_with(predict, data, model.config().category_names, cfg);
}

std::string MetricReport::table() const {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %8s %8s %8s\n", "category", "DSC", "IoU", "ASSD");
  os << buf;
  for (size_t i = 0; i < categories.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%-12s %8.2f %8.2f %8.2f\n", categories[i].c_str(), dsc[i],
                  iou[i], assd[i]);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-12s %8.2f %8.2f %8.2f\n", "mean", mean_dsc, mean_iou,
                mean_assd);
  os << buf;
  if (fwiou_defined)
    std::snprintf(buf, sizeof(buf), "FWIoU %.2f  (%d images)\n", fwiou, images);
  else
    std::snprintf(buf, sizeof(buf), "FWIoU undefined (no foreground)  (%d images)\n", images);
  os << buf;
  return os.str();
}

std::string MetricReport::key_values() const {
  std::ostringstream os;
  os.precision(10);
  for (size_t i = 0; i < categories.size(); ++i) {
    os << "dsc." << categories[i] << "=" << dsc[i] << "\n";
    os << "iou." << categories[i] << "=" << iou[i] << "\n";
    os << "assd." << categories[i] << "=" << assd[i] << "\n";
  }
  os << "dsc.mean=" << mean_dsc << "\n";
  os << "iou.mean=" << mean_iou << "\n";
  os << "assd.mean=" << mean_assd << "\n";
  os << "fwiou=" << fwiou << "\n";
  os << "fwiou.defined=" << (fwiou_defined ? 1 : 0) << "\n";
  os << "images=" << images << "\n";
  os << "assd.penalty_count=" << assd_penalty_count << "\n";
  return os.str();
}

}  // namespace bcr
