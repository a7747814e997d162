#include "det3d/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace det3d::fusion {

namespace {

std::vector<std::size_t> order_by_score_desc(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

struct Cluster {
  // Score-weighted running sums over members.
  double w_sum = 0.0;
  double cx = 0.0, cy = 0.0, cz = 0.0;
  double length = 0.0, width = 0.0, height = 0.0;
  double yaw_sin = 0.0, yaw_cos = 0.0;
  double score_sum = 0.0;
  std::size_t members = 0;
  int class_id = 0;
  Detection fused{geom::Box3D(0, 0, 0, 1, 1, 1, 0), 0, 0.0, {}};

  void add(const Detection& det, bool pi_ambiguous) {
    const double w = det.score;
    w_sum += w;
    cx += w * det.box.cx;
    cy += w * det.box.cy;
    cz += w * det.box.cz;
    length += w * det.box.length;
    width += w * det.box.width;
    height += w * det.box.height;
    const double angle = pi_ambiguous ? 2.0 * det.box.yaw : det.box.yaw;
    yaw_sin += w * std::sin(angle);
    yaw_cos += w * std::cos(angle);
    score_sum += det.score;
    ++members;
    class_id = det.class_id;
    refresh(det, pi_ambiguous);
  }

  void refresh(const Detection& last, bool pi_ambiguous) {
    if (w_sum <= 0.0) {
      // All-zero scores: weighted means are undefined, keep the first box.
      if (members == 1) fused = last;
      fused.score = 0.0;
      fused.class_id = class_id;
      fused.model_id.clear();
      return;
    }
    double yaw = std::atan2(yaw_sin, yaw_cos);
    if (pi_ambiguous) yaw *= 0.5;
    fused.box = geom::Box3D(cx / w_sum, cy / w_sum, cz / w_sum, length / w_sum,
                            width / w_sum, height / w_sum, yaw);
    fused.score = score_sum / static_cast<double>(members);
    fused.class_id = class_id;
    fused.model_id.clear();
  }
};

}  // namespace

std::vector<Detection> nms(const std::vector<Detection>& dets,
                           double iou_threshold) {
  const auto order = order_by_score_desc(dets);
  std::vector<bool> suppressed(dets.size(), false);
  std::vector<Detection> kept;
  for (std::size_t a = 0; a < order.size(); ++a) {
    if (suppressed[order[a]]) continue;
    const Detection& keep = dets[order[a]];
    kept.push_back(keep);
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      if (suppressed[order[b]]) continue;
      if (geom::bev_iou(keep.box, dets[order[b]].box) > iou_threshold) {
        suppressed[order[b]] = true;
      }
    }
  }
  return kept;
}

std::vector<Detection> wbf(const std::vector<Detection>& dets,
                           const WbfConfig& config) {
  std::vector<Cluster> clusters;
  for (std::size_t idx : order_by_score_desc(dets)) {
    const Detection& det = dets[idx];
    Cluster* home = nullptr;
    for (Cluster& cluster : clusters) {
      if (geom::iou(det.box, cluster.fused.box, config.match_iou) >
          config.iou_match_threshold) {
        home = &cluster;
        break;
      }
    }
    if (home == nullptr) {
      clusters.emplace_back();
      home = &clusters.back();
    }
    home->add(det, config.pi_ambiguous_yaw);
  }

  std::vector<std::size_t> order(clusters.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return clusters[a].fused.score > clusters[b].fused.score;
  });
  std::vector<Detection> out;
  out.reserve(std::min(order.size(), config.max_boxes));
  for (std::size_t i = 0; i < order.size() && out.size() < config.max_boxes; ++i) {
    out.push_back(clusters[order[i]].fused);
  }
  return out;
}

void EnsembleConfig::validate() const {
  for (const auto& [class_id, weights] : class_model_weights) {
    bool any_positive = false;
    for (const auto& [model, w] : weights) {
      if (w < 0.0 || !std::isfinite(w)) {
        throw std::invalid_argument("EnsembleConfig: weights must be >= 0");
      }
      any_positive = any_positive || w > 0.0;
    }
    if (!any_positive) {
      throw std::invalid_argument(
          "EnsembleConfig: class " + std::to_string(class_id) +
          " has no positive model weight");
    }
  }
}

std::vector<Detection> ensemble_fuse(
    const std::map<std::string, std::vector<Detection>>& per_model,
    const EnsembleConfig& config) {
  config.validate();

  // class -> pooled detections, model order then input order within model.
  std::map<int, std::vector<Detection>> pooled;
  for (const auto& [model_id, dets] : per_model) {
    for (const Detection& det : dets) {
      const auto class_it = config.class_model_weights.find(det.class_id);
      if (class_it == config.class_model_weights.end()) {
        throw std::invalid_argument(
            "ensemble_fuse: no weights configured for class " +
            std::to_string(det.class_id));
      }
      const auto weight_it = class_it->second.find(model_id);
      if (weight_it == class_it->second.end()) {
        throw std::invalid_argument("ensemble_fuse: unknown model '" +
                                    model_id + "' for class " +
                                    std::to_string(det.class_id));
      }
      const double weight = weight_it->second;
      if (weight == 0.0) continue;
      Detection scaled = det;
      scaled.model_id = model_id;
      scaled.score = std::clamp(det.score * weight, 0.0, 1.0);
      pooled[det.class_id].push_back(std::move(scaled));
    }
  }

  WbfConfig wbf_config;
  wbf_config.iou_match_threshold = config.iou_match_threshold;
  wbf_config.max_boxes = config.max_boxes;

  std::vector<Detection> out;
  for (const auto& [class_id, dets] : pooled) {
    for (Detection& det : wbf(dets, wbf_config)) {
      out.push_back(std::move(det));
    }
  }
  return out;
}

std::map<int, std::vector<Detection>> partition_by_class(
    const std::vector<Detection>& dets) {
  std::map<int, std::vector<Detection>> parts;
  for (const Detection& det : dets) parts[det.class_id].push_back(det);
  return parts;
}

}  // namespace det3d::fusion
