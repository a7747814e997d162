#include "det3d/assign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace det3d::assign {

namespace {

constexpr double kProbEps = 1e-7;

struct ScoredLocation {
  int cell = 0;
  double score = 0.0;
  int best_class = 0;
};

// Max class probability per cell, sorted descending with the cell index as
// the tiebreak.
std::vector<ScoredLocation> rank_locations(const PredictionGrid& grid) {
  const int cells = grid.layout.num_cells();
  const int k = grid.layout.num_classes;
  std::vector<ScoredLocation> ranked(cells);
  for (int cell = 0; cell < cells; ++cell) {
    double best = -1.0;
    int best_class = 0;
    for (int c = 0; c < k; ++c) {
      const double p = grid.class_probs[static_cast<std::size_t>(cell) * k + c];
      if (p > best) {
        best = p;
        best_class = c;
      }
    }
    ranked[cell] = {cell, best, best_class};
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const ScoredLocation& a, const ScoredLocation& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.cell < b.cell;
                   });
  return ranked;
}

geom::Box3D decode_cell(const PredictionGrid& grid, int cell) {
  const GridLayout& l = grid.layout;
  const int row = cell / l.width;
  const int col = cell % l.width;
  const double off_x = grid.xy_offset[static_cast<std::size_t>(cell) * 2];
  const double off_y = grid.xy_offset[static_cast<std::size_t>(cell) * 2 + 1];
  const double cx = l.origin_x + (col + off_x) * l.stride_x;
  const double cy = l.origin_y + (row + off_y) * l.stride_y;
  const double cz = grid.z_coord[cell];
  const double* dims = &grid.size[static_cast<std::size_t>(cell) * 3];
  const double sin_yaw = grid.orientation[static_cast<std::size_t>(cell) * 2];
  const double cos_yaw =
      grid.orientation[static_cast<std::size_t>(cell) * 2 + 1];
  return geom::Box3D(cx, cy, cz, dims[0], dims[1], dims[2],
                     std::atan2(sin_yaw, cos_yaw));
}

}  // namespace

void GridLayout::validate() const {
  if (height < 1 || width < 1 || num_classes < 1) {
    throw std::invalid_argument("GridLayout: dims and classes must be >= 1");
  }
  if (!(stride_x > 0.0) || !(stride_y > 0.0)) {
    throw std::invalid_argument("GridLayout: strides must be positive");
  }
  if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) {
    throw std::invalid_argument("GridLayout: non-finite origin");
  }
}

PredictionGrid PredictionGrid::zeros(const GridLayout& layout) {
  layout.validate();
  PredictionGrid grid;
  grid.layout = layout;
  const std::size_t cells = static_cast<std::size_t>(layout.num_cells());
  grid.class_probs.assign(cells * layout.num_classes, 0.0);
  grid.xy_offset.assign(cells * 2, 0.0);
  grid.z_coord.assign(cells, 0.0);
  grid.size.assign(cells * 3, 1.0);
  grid.orientation.assign(cells * 2, 0.0);
  for (std::size_t i = 0; i < cells; ++i) grid.orientation[i * 2 + 1] = 1.0;
  grid.iou_pred.assign(cells, 0.0);
  return grid;
}

void PredictionGrid::validate() const {
  layout.validate();
  const std::size_t cells = static_cast<std::size_t>(layout.num_cells());
  if (class_probs.size() != cells * layout.num_classes ||
      xy_offset.size() != cells * 2 || z_coord.size() != cells ||
      size.size() != cells * 3 || orientation.size() != cells * 2 ||
      iou_pred.size() != cells) {
    throw std::invalid_argument("PredictionGrid: channel size mismatch");
  }
  for (double p : class_probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("PredictionGrid: class prob outside [0,1]");
    }
  }
}

double bce(double prob, int label) {
  if (label != 0 && label != 1) {
    throw std::invalid_argument("bce: label must be 0 or 1");
  }
  const double p = std::clamp(prob, kProbEps, 1.0 - kProbEps);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

double bce_onehot(std::span<const double> probs, int gt_class) {
  if (gt_class < 0 || gt_class >= static_cast<int>(probs.size())) {
    throw std::invalid_argument("bce_onehot: gt_class outside prob vector");
  }
  double total = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    total += bce(probs[c], static_cast<int>(c) == gt_class ? 1 : 0);
  }
  return total;
}

std::array<double, 8> encode_box(const geom::Box3D& box) {
  return {box.cx,       box.cy,    box.cz,           box.length,
          box.width,    box.height, std::sin(box.yaw), std::cos(box.yaw)};
}

double l1_reg(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("l1_reg: encoding length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    total += std::abs(pred[i] - gt[i]);
  }
  return total;
}

void CostMatrix::validate() const {
  for (double c : entries) {
    if (!std::isfinite(c) || c < 0.0) {
      throw std::invalid_argument("CostMatrix: entries must be finite and >= 0");
    }
  }
}

CostMatrix build_cost_matrix(const std::vector<GroundTruthObject>& gts,
                             const std::vector<Candidate>& candidates) {
  if (gts.empty() || candidates.empty()) {
    throw EmptyInputError("build_cost_matrix: empty ground truths or candidates");
  }
  const std::size_t k = candidates.front().class_probs.size();
  for (const auto& cand : candidates) {
    if (cand.class_probs.size() != k) {
      throw std::invalid_argument(
          "build_cost_matrix: inconsistent class_probs length");
    }
  }

  CostMatrix cost;
  cost.num_gt = static_cast<int>(gts.size());
  cost.num_candidates = static_cast<int>(candidates.size());
  cost.entries.resize(gts.size() * candidates.size());

  std::vector<std::array<double, 8>> cand_enc(candidates.size());
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    cand_enc[j] = encode_box(candidates[j].box);
  }
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const auto gt_enc = encode_box(gts[i].box);
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      const double cls = bce_onehot(candidates[j].class_probs, gts[i].class_id);
      const double reg = l1_reg(cand_enc[j], gt_enc);
      cost.entries[i * candidates.size() + j] = cls + reg;
    }
  }
  cost.validate();
  return cost;
}

int dynamic_k(std::span<const double> ious) {
  double sum = 0.0;
  for (double v : ious) sum += v;
  const auto m = static_cast<std::int64_t>(ious.size());
  const std::int64_t k = static_cast<std::int64_t>(std::floor(sum));
  return static_cast<int>(std::clamp<std::int64_t>(k, 1, m > 0 ? m : 1));
}

std::vector<int> dynamic_budgets(const std::vector<GroundTruthObject>& gts,
                                 const std::vector<geom::Box3D>& candidates,
                                 geom::IouKind kind) {
  std::vector<int> budgets;
  budgets.reserve(gts.size());
  std::vector<double> row(candidates.size());
  for (const auto& gt : gts) {
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      row[j] = geom::iou(gt.box, candidates[j], kind);
    }
    budgets.push_back(dynamic_k(row));
  }
  return budgets;
}

AssignmentResult ota_assign(const CostMatrix& cost,
                            std::span<const int> budgets) {
  if (static_cast<int>(budgets.size()) != cost.num_gt) {
    throw std::invalid_argument("ota_assign: one budget per gt required");
  }
  cost.validate();

  AssignmentResult result;
  result.candidate_to_gt.assign(cost.num_candidates, kBackground);
  result.budget.assign(budgets.begin(), budgets.end());
  result.used.assign(cost.num_gt, 0);

  // Candidate processing order: ascending row-minimum cost, candidate
  // index breaking ties.
  std::vector<double> row_min(cost.num_candidates,
                              std::numeric_limits<double>::infinity());
  for (int j = 0; j < cost.num_candidates; ++j) {
    for (int i = 0; i < cost.num_gt; ++i) {
      row_min[j] = std::min(row_min[j], cost.at(i, j));
    }
  }
  std::vector<int> order(cost.num_candidates);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (row_min[a] != row_min[b]) return row_min[a] < row_min[b];
    return a < b;
  });

  for (int j : order) {
    int best_gt = kBackground;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cost.num_gt; ++i) {
      if (result.used[i] >= result.budget[i]) continue;
      const double c = cost.at(i, j);
      if (c < best_cost) {
        best_cost = c;
        best_gt = i;
      }
    }
    if (best_gt != kBackground) {
      result.candidate_to_gt[j] = best_gt;
      ++result.used[best_gt];
    }
  }
  return result;
}

TargetGrid center_assign(const std::vector<GroundTruthObject>& gts,
                         const GridLayout& layout,
                         const CenterAssignConfig& config) {
  layout.validate();
  TargetGrid target;
  target.layout = layout;
  const std::size_t cells = static_cast<std::size_t>(layout.num_cells());
  target.heatmap.assign(cells * layout.num_classes, 0.0);
  target.reg_targets.assign(cells * 8, 0.0);
  target.gt_index.assign(cells, kBackground);

  for (std::size_t gi = 0; gi < gts.size(); ++gi) {
    const auto& gt = gts[gi];
    const double fx = (gt.box.cx - layout.origin_x) / layout.stride_x;
    const double fy = (gt.box.cy - layout.origin_y) / layout.stride_y;
    const int col = static_cast<int>(std::floor(fx));
    const int row = static_cast<int>(std::floor(fy));
    if (col < 0 || col >= layout.width || row < 0 || row >= layout.height ||
        gt.class_id < 0 || gt.class_id >= layout.num_classes) {
      ++target.skipped_gts;
      continue;
    }
    const int cell = row * layout.width + col;

    auto enc = encode_box(gt.box);
    enc[0] = fx - col;  // corner-origin cell offsets replace raw cx, cy
    enc[1] = fy - row;
    std::copy(enc.begin(), enc.end(),
              target.reg_targets.begin() + static_cast<std::size_t>(cell) * 8);
    target.gt_index[cell] = static_cast<int>(gi);

    const double diag_cells = std::hypot(gt.box.length / layout.stride_x,
                                         gt.box.width / layout.stride_y);
    const double radius = std::max(config.min_radius, 0.5 * diag_cells);
    const double sigma = radius / 3.0;
    const int reach = static_cast<int>(std::ceil(radius));
    for (int dr = -reach; dr <= reach; ++dr) {
      for (int dc = -reach; dc <= reach; ++dc) {
        const int r = row + dr;
        const int c = col + dc;
        if (r < 0 || r >= layout.height || c < 0 || c >= layout.width) continue;
        const double d2 = static_cast<double>(dr) * dr +
                          static_cast<double>(dc) * dc;
        const double value = std::exp(-d2 / (2.0 * sigma * sigma));
        double& slot =
            target.heatmap[static_cast<std::size_t>(r * layout.width + c) *
                               layout.num_classes +
                           gt.class_id];
        slot = std::max(slot, value);
      }
    }
  }
  return target;
}

std::vector<Detection> decode(const PredictionGrid& grid,
                              double score_threshold,
                              std::size_t max_outputs) {
  grid.validate();
  std::vector<Detection> out;
  for (const auto& loc : rank_locations(grid)) {
    if (!(loc.score > score_threshold)) break;  // ranked descending
    if (out.size() >= max_outputs) break;
    Detection det;
    det.box = decode_cell(grid, loc.cell);
    det.class_id = loc.best_class;
    det.score = loc.score;
    out.push_back(std::move(det));
  }
  return out;
}

std::vector<Candidate> decode_candidates(const PredictionGrid& grid,
                                         std::size_t top_m) {
  grid.validate();
  const int k = grid.layout.num_classes;
  std::vector<Candidate> out;
  for (const auto& loc : rank_locations(grid)) {
    if (out.size() >= top_m) break;
    Candidate cand;
    cand.box = decode_cell(grid, loc.cell);
    const double* probs =
        &grid.class_probs[static_cast<std::size_t>(loc.cell) * k];
    cand.class_probs.assign(probs, probs + k);
    out.push_back(std::move(cand));
  }
  return out;
}

double score_rectify(double score, double iou_pred, double alpha) {
  if (!(score >= 0.0 && score <= 1.0) || !(iou_pred >= 0.0 && iou_pred <= 1.0) ||
      !(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("score_rectify: inputs must be in [0, 1]");
  }
  if (alpha == 0.0) return score;
  if (alpha == 1.0) return iou_pred;
  return std::pow(score, 1.0 - alpha) * std::pow(iou_pred, alpha);
}

}  // namespace det3d::assign
