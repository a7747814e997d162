#include "det3d/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace det3d::evalmetrics {

namespace {

constexpr double kPi = 3.14159265358979323846;

double heading_accuracy(double yaw_pred, double yaw_gt) {
  return 1.0 - std::abs(geom::wrap_angle(yaw_pred - yaw_gt)) / kPi;
}

}  // namespace

double MatchConfig::threshold_for(int class_id) const {
  const auto it = iou_thresholds.find(class_id);
  return it != iou_thresholds.end() ? it->second : default_iou_threshold;
}

std::vector<MatchRecord> match_detections(
    const std::vector<Detection>& dets,
    const std::vector<GroundTruthObject>& gts, const MatchConfig& config) {
  std::vector<MatchRecord> records(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    records[i].score = dets[i].score;
    records[i].class_id = dets[i].class_id;
  }

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });

  std::vector<bool> gt_taken(gts.size(), false);
  for (std::size_t idx : order) {
    const Detection& det = dets[idx];
    const double threshold = config.threshold_for(det.class_id);
    int best_gt = -1;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_taken[g] || gts[g].class_id != det.class_id) continue;
      const double overlap = geom::iou(det.box, gts[g].box, config.iou_kind);
      if (overlap < threshold) continue;
      if (overlap > best_iou || best_gt < 0) {
        best_iou = overlap;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) {
      gt_taken[best_gt] = true;
      MatchRecord& rec = records[idx];
      rec.matched = true;
      rec.gt_index = best_gt;
      rec.iou = best_iou;
      rec.heading_accuracy =
          heading_accuracy(det.box.yaw, gts[best_gt].box.yaw);
    }
  }
  return records;
}

std::optional<double> average_precision(const std::vector<MatchRecord>& records,
                                        std::size_t num_gt,
                                        bool heading_weighted,
                                        std::vector<PrPoint>* curve) {
  if (num_gt == 0) return std::nullopt;

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].score > records[b].score;
  });

  const std::size_t n = order.size();
  std::vector<double> precision(n), recall(n);
  double credit = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const MatchRecord& rec = records[order[i]];
    if (rec.matched) {
      credit += heading_weighted ? rec.heading_accuracy : 1.0;
    }
    precision[i] = credit / static_cast<double>(i + 1);
    recall[i] = credit / static_cast<double>(num_gt);
    if (curve != nullptr) {
      curve->push_back(PrPoint{rec.score, recall[i], precision[i]});
    }
  }

  // Exact area under the monotone (max-interpolated) envelope.
  double ap = 0.0;
  double max_precision = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    max_precision = std::max(max_precision, precision[i]);
    const double prev_recall = i > 0 ? recall[i - 1] : 0.0;
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * max_precision;
    }
  }
  return ap;
}

EvalResult evaluate(
    const std::map<std::string, std::vector<Detection>>& dets_per_frame,
    const std::map<std::string, std::vector<GroundTruthObject>>& gts_per_frame,
    const MatchConfig& config) {
  std::set<std::string> frames;
  for (const auto& [frame, dets] : dets_per_frame) frames.insert(frame);
  for (const auto& [frame, gts] : gts_per_frame) frames.insert(frame);

  std::map<int, std::vector<MatchRecord>> records_per_class;
  std::map<int, std::size_t> gt_count_per_class;
  static const std::vector<Detection> kNoDets;
  static const std::vector<GroundTruthObject> kNoGts;
  for (const std::string& frame : frames) {
    const auto det_it = dets_per_frame.find(frame);
    const auto gt_it = gts_per_frame.find(frame);
    const auto& dets = det_it != dets_per_frame.end() ? det_it->second : kNoDets;
    const auto& gts = gt_it != gts_per_frame.end() ? gt_it->second : kNoGts;
    for (const auto& gt : gts) ++gt_count_per_class[gt.class_id];
    for (const MatchRecord& rec : match_detections(dets, gts, config)) {
      records_per_class[rec.class_id].push_back(rec);
    }
  }

  EvalResult result;
  double ap_sum = 0.0, aph_sum = 0.0;
  std::size_t classes = 0;
  for (const auto& [class_id, num_gt] : gt_count_per_class) {
    if (num_gt == 0) continue;
    const auto rec_it = records_per_class.find(class_id);
    static const std::vector<MatchRecord> kNoRecords;
    const auto& records =
        rec_it != records_per_class.end() ? rec_it->second : kNoRecords;
    std::vector<PrPoint> curve;
    const auto ap = average_precision(records, num_gt, false, &curve);
    const auto aph = average_precision(records, num_gt, true);
    result.ap[class_id] = ap.value();
    result.aph[class_id] = aph.value();
    result.pr_curves[class_id] = std::move(curve);
    ap_sum += ap.value();
    aph_sum += aph.value();
    ++classes;
  }
  if (classes > 0) {
    result.mean_ap = ap_sum / static_cast<double>(classes);
    result.mean_aph = aph_sum / static_cast<double>(classes);
  }
  return result;
}

}  // namespace det3d::evalmetrics
