#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "det3d/geom.hpp"
#include "det3d/types.hpp"

namespace det3d::fusion {

/// Greedy non-maximum suppression over detections of a single class:
/// highest score first (ties by input index), suppressing every remaining
/// box whose BEV IoU strictly exceeds the threshold. Output is sorted by
/// descending score.
std::vector<Detection> nms(const std::vector<Detection>& dets,
                           double iou_threshold);

struct WbfConfig {
  double iou_match_threshold = 0.55;
  std::size_t max_boxes = 500;
  geom::IouKind match_iou = geom::IouKind::kBev;
  /// Treat yaw as orientation-only (pi-ambiguous) when fusing angles.
  bool pi_ambiguous_yaw = false;
};

/// Weighted box fusion over a single class. Detections are clustered in
/// descending score order; each joins the first cluster whose running
/// fused box overlaps it above the threshold, else opens a new cluster.
/// Fused center and dims are score-weighted means, yaw is the
/// score-weighted circular mean, and the fused score is the plain mean of
/// member scores. At most max_boxes survive, by descending fused score.
std::vector<Detection> wbf(const std::vector<Detection>& dets,
                           const WbfConfig& config = {});

inline std::vector<Detection> wbf(const std::vector<Detection>& dets,
                                  double iou_match_threshold,
                                  std::size_t max_boxes = 500) {
  WbfConfig config;
  config.iou_match_threshold = iou_match_threshold;
  config.max_boxes = max_boxes;
  return wbf(dets, config);
}

struct EnsembleConfig {
  /// class_id -> (model_id -> score weight >= 0). A weight of 0 drops that
  /// model's detections for the class.
  std::map<int, std::map<std::string, double>> class_model_weights;
  double iou_match_threshold = 0.55;
  std::size_t max_boxes = 500;

  void validate() const;
};

/// Per class: scales each model's scores by its class weight (clamped to
/// [0, 1]), pools all models, and fuses with wbf. Throws
/// std::invalid_argument for a (class, model) pair present in the input
/// but absent from the config. Output is ordered by class, then score.
std::vector<Detection> ensemble_fuse(
    const std::map<std::string, std::vector<Detection>>& per_model,
    const EnsembleConfig& config);

/// Splits a mixed-class list into per-class lists, input order preserved.
std::map<int, std::vector<Detection>> partition_by_class(
    const std::vector<Detection>& dets);

}  // namespace det3d::fusion
