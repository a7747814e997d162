#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "det3d/geom.hpp"
#include "det3d/types.hpp"

namespace det3d::evalmetrics {

struct MatchConfig {
  /// Minimum IoU for a prediction to match a ground truth, per class.
  /// Classes not listed fall back to default_iou_threshold.
  std::map<int, double> iou_thresholds = {{0, 0.7}};
  double default_iou_threshold = 0.5;
  geom::IouKind iou_kind = geom::IouKind::k3D;

  double threshold_for(int class_id) const;
};

/// One scored prediction after matching: whether it hit a ground truth,
/// which one, at what IoU, and its heading accuracy
/// h = 1 - |wrap(yaw_pred - yaw_gt)| / pi.
struct MatchRecord {
  double score = 0.0;
  int class_id = 0;
  bool matched = false;
  int gt_index = -1;
  double iou = 0.0;
  double heading_accuracy = 0.0;
};

/// Greedy per-class matching within one frame: predictions in descending
/// score order each take the unmatched ground truth of their class with
/// the highest IoU at or above the class threshold (IoU ties broken by gt
/// index). Records are returned in the order predictions were given.
std::vector<MatchRecord> match_detections(
    const std::vector<Detection>& dets,
    const std::vector<GroundTruthObject>& gts, const MatchConfig& config = {});

struct PrPoint {
  double score = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

/// Area under the max-interpolated precision-recall curve, computed
/// exactly (no fixed-point sampling). Matched predictions contribute a TP
/// credit of 1, or their heading accuracy when heading_weighted is set;
/// precision_i = credit_i / i and recall_i = credit_i / num_gt. Returns
/// nullopt when num_gt is 0 (recall undefined). The raw PR points are
/// appended to *curve when provided.
std::optional<double> average_precision(const std::vector<MatchRecord>& records,
                                        std::size_t num_gt,
                                        bool heading_weighted,
                                        std::vector<PrPoint>* curve = nullptr);

struct EvalResult {
  std::map<int, double> ap;   // classes with >= 1 gt
  std::map<int, double> aph;  // same keys as ap
  double mean_ap = 0.0;
  double mean_aph = 0.0;
  std::map<int, std::vector<PrPoint>> pr_curves;
};

/// Pools per-frame matches per class over the dataset and reports AP, APH,
/// and their unweighted means over classes with at least one ground truth.
/// Frames are aligned by key; a frame missing from one side counts as
/// empty there.
EvalResult evaluate(
    const std::map<std::string, std::vector<Detection>>& dets_per_frame,
    const std::map<std::string, std::vector<GroundTruthObject>>& gts_per_frame,
    const MatchConfig& config = {});

}  // namespace det3d::evalmetrics
