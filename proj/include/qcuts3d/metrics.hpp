#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "qcuts3d/volume.hpp"

namespace qcuts3d {

/// Solid is the positive class.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
};

ConfusionCounts confusion_counts(const SegmentationMask& pred, const SegmentationMask& truth);

/// TP / (TP + FP + FN); 1 when neither mask has a solid voxel.
double jaccard(const SegmentationMask& pred, const SegmentationMask& truth);
double jaccard(const ConfusionCounts& counts) noexcept;

/// (FP + FN) / total
double misclassification_error(const SegmentationMask& pred, const SegmentationMask& truth);
double misclassification_error(const ConfusionCounts& counts) noexcept;

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

inline constexpr std::size_t kDefaultRocThresholds = 256;

/// Thresholds t_k = k / (n - 1). A voxel is predicted solid iff score >= t.
/// Points run from (0,0) through descending thresholds to (1,1) at t = 0.
/// Throws DataError when the truth holds only one class.
std::vector<RocPoint> roc_curve(const SaliencyField& score, const SegmentationMask& truth,
                                std::size_t thresholds = kDefaultRocThresholds);

/// Trapezoidal area under the curve.
double auroc(const std::vector<RocPoint>& points);

struct MetricsReport {
  double iou = 0.0;
  double me = 0.0;
  double auroc = 0.0;
  std::vector<RocPoint> roc;
  ConfusionCounts counts;
};

MetricsReport evaluate(const SegmentationMask& pred, const SaliencyField& field,
                       const SegmentationMask& truth,
                       std::size_t thresholds = kDefaultRocThresholds);

/// Full report as JSON text.
std::string report_json(const MetricsReport& report, const std::string& id = {},
                        std::size_t scales = 0, double runtime_seconds = 0.0, int indent = 2);

inline constexpr const char* kReportCsvHeader = "id,scales,iou,auroc,me,runtime_seconds";

/// One CSV row matching kReportCsvHeader.
std::string report_csv_row(const MetricsReport& report, const std::string& id, std::size_t scales,
                           double runtime_seconds);

}  // namespace qcuts3d
