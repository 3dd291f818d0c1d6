#include "qcuts3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

namespace qcuts3d {

namespace {

void check_same_dims(const Dims& a, const Dims& b, const char* what) {
  if (!(a == b)) {
    throw ArgumentError(std::string(what) + ": dims differ (" + to_string(a) + " vs " + to_string(b) + ")");
  }
}

// Largest k with k / (n - 1) <= s, or -1 when no threshold is reached.
long threshold_bin(double s, std::size_t n) {
  const double steps = static_cast<double>(n - 1);
  if (!(s >= 0.0)) return -1;
  long k = static_cast<long>(std::min(std::floor(s * steps), steps));
  while (k + 1 <= static_cast<long>(n - 1) && static_cast<double>(k + 1) / steps <= s) ++k;
  while (k >= 0 && static_cast<double>(k) / steps > s) --k;
  return k;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

ConfusionCounts confusion_counts(const SegmentationMask& pred, const SegmentationMask& truth) {
  check_same_dims(pred.dims(), truth.dims(), "confusion counts");
  ConfusionCounts c;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    const bool p = pred[v] == SegmentationMask::solid;
    const bool t = truth[v] == SegmentationMask::solid;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double jaccard(const ConfusionCounts& c) noexcept {
  const std::size_t uni = c.tp + c.fp + c.fn;
  return uni == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(uni);
}

double jaccard(const SegmentationMask& pred, const SegmentationMask& truth) {
  return jaccard(confusion_counts(pred, truth));
}

double misclassification_error(const ConfusionCounts& c) noexcept {
  const std::size_t total = c.total();
  return total == 0 ? 0.0 : static_cast<double>(c.fp + c.fn) / static_cast<double>(total);
}

double misclassification_error(const SegmentationMask& pred, const SegmentationMask& truth) {
  return misclassification_error(confusion_counts(pred, truth));
}

std::vector<RocPoint> roc_curve(const SaliencyField& score, const SegmentationMask& truth,
                                std::size_t thresholds) {
  check_same_dims(score.dims(), truth.dims(), "roc curve");
  if (thresholds < 2) throw ArgumentError("roc curve needs at least 2 thresholds");

  std::vector<std::size_t> pos(thresholds, 0), neg(thresholds, 0);
  std::size_t below_pos = 0, below_neg = 0;
  for (std::size_t v = 0; v < score.size(); ++v) {
    const long k = threshold_bin(score[v], thresholds);
    const bool solid = truth[v] == SegmentationMask::solid;
    if (k < 0) {
      ++(solid ? below_pos : below_neg);
    } else {
      ++(solid ? pos : neg)[static_cast<std::size_t>(k)];
    }
  }
  std::size_t n_pos = below_pos, n_neg = below_neg;
  for (std::size_t k = 0; k < thresholds; ++k) {
    n_pos += pos[k];
    n_neg += neg[k];
  }
  if (n_pos == 0 || n_neg == 0) {
    throw DataError("roc curve is undefined when the truth holds a single class");
  }

  std::vector<RocPoint> points;
  points.reserve(thresholds + 2);
  points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = thresholds; k-- > 0;) {
    tp += pos[k];
    fp += neg[k];
    points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                      static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  if (points.back().fpr < 1.0 || points.back().tpr < 1.0) points.push_back({1.0, 1.0});
  return points;
}

double auroc(const std::vector<RocPoint>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * 0.5 * (points[i].tpr + points[i - 1].tpr);
  }
  return area;
}

MetricsReport evaluate(const SegmentationMask& pred, const SaliencyField& field,
                       const SegmentationMask& truth, std::size_t thresholds) {
  MetricsReport r;
  r.counts = confusion_counts(pred, truth);
  r.iou = jaccard(r.counts);
  r.me = misclassification_error(r.counts);
  r.roc = roc_curve(field, truth, thresholds);
  r.auroc = auroc(r.roc);
  return r;
}

std::string report_json(const MetricsReport& report, const std::string& id, std::size_t scales,
                        double runtime_seconds, int indent) {
  nlohmann::json j;
  if (!id.empty()) j["id"] = id;
  if (scales) j["scales"] = scales;
  j["iou"] = report.iou;
  j["me"] = report.me;
  j["auroc"] = report.auroc;
  j["runtime_seconds"] = runtime_seconds;
  j["counts"] = {{"tp", report.counts.tp}, {"fp", report.counts.fp},
                 {"tn", report.counts.tn}, {"fn", report.counts.fn}};
  auto roc = nlohmann::json::array();
  for (const auto& p : report.roc) roc.push_back({p.fpr, p.tpr});
  j["roc"] = std::move(roc);
  return j.dump(indent);
}

std::string report_csv_row(const MetricsReport& report, const std::string& id, std::size_t scales,
                           double runtime_seconds) {
  return id + "," + std::to_string(scales) + "," + format_real(report.iou) + "," +
         format_real(report.auroc) + "," + format_real(report.me) + "," + format_real(runtime_seconds);
}

}  // namespace qcuts3d
