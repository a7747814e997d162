#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

#include "det3d/geom.hpp"
#include "det3d/types.hpp"

namespace det3d::assign {

inline constexpr int kBackground = -1;

/// Geometry of a dense BEV output map. Columns index x, rows index y;
/// cell (row, col) covers [origin + index * stride, origin + (index + 1) *
/// stride) per axis.
struct GridLayout {
  int height = 0;
  int width = 0;
  int num_classes = 1;
  double stride_x = 1.0;
  double stride_y = 1.0;
  double origin_x = 0.0;
  double origin_y = 0.0;

  void validate() const;
  int num_cells() const { return height * width; }
};

/// Dense per-location outputs of the six detection sub-heads: class
/// probabilities, xy offset (cell units), z coordinate, size, orientation
/// as (sin, cos), and predicted IoU. Plain data, row-major by (row, col).
struct PredictionGrid {
  GridLayout layout;
  std::vector<double> class_probs;  // cells * num_classes
  std::vector<double> xy_offset;    // cells * 2
  std::vector<double> z_coord;      // cells
  std::vector<double> size;         // cells * 3, (length, width, height)
  std::vector<double> orientation;  // cells * 2, (sin, cos)
  std::vector<double> iou_pred;     // cells

  static PredictionGrid zeros(const GridLayout& layout);
  void validate() const;
};

/// One decoded location kept for cost computation: full class probability
/// vector alongside the decoded box.
struct Candidate {
  geom::Box3D box{0, 0, 0, 1, 1, 1, 0};
  std::vector<double> class_probs;
};

/// Binary cross entropy with the probability clamped to [1e-7, 1 - 1e-7].
/// label must be 0 or 1.
double bce(double prob, int label);

/// Sum of per-class BCE terms against a one-hot target at gt_class.
double bce_onehot(std::span<const double> probs, int gt_class);

/// The 8-slot regression encoding: (cx, cy, cz, l, w, h, sin yaw, cos yaw).
std::array<double, 8> encode_box(const geom::Box3D& box);

/// L1 distance between two 8-slot encodings. Throws on a length mismatch.
double l1_reg(std::span<const double> pred, std::span<const double> gt);

/// Thrown by build_cost_matrix when either side is empty, so callers can
/// tell "nothing to assign" apart from an all-background result.
struct EmptyInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CostMatrix {
  int num_gt = 0;
  int num_candidates = 0;
  std::vector<double> entries;  // row-major, num_gt x num_candidates

  double at(int gt, int candidate) const {
    return entries[static_cast<std::size_t>(gt) * num_candidates + candidate];
  }
  double& at(int gt, int candidate) {
    return entries[static_cast<std::size_t>(gt) * num_candidates + candidate];
  }
  void validate() const;
};

/// C[i][j] = classification BCE (one-hot at the gt class) + L1 over the
/// 8-slot encodings. Throws EmptyInputError when gts or candidates are
/// empty.
CostMatrix build_cost_matrix(const std::vector<GroundTruthObject>& gts,
                             const std::vector<Candidate>& candidates);

/// Per-gt assignment budget: clamp(floor(sum of IoUs), 1, M).
int dynamic_k(std::span<const double> ious);

/// Budgets for every gt from IoUs against all candidate boxes.
std::vector<int> dynamic_budgets(const std::vector<GroundTruthObject>& gts,
                                 const std::vector<geom::Box3D>& candidates,
                                 geom::IouKind kind = geom::IouKind::k3D);

struct AssignmentResult {
  std::vector<int> candidate_to_gt;  // kBackground when unassigned
  std::vector<int> budget;           // k_i per gt
  std::vector<int> used;             // assignments consumed per gt
};

/// Greedy transport-style assignment. Candidates are processed in
/// ascending order of their row-minimum cost (ties by candidate index);
/// each takes the gt with remaining budget and minimum cost (ties by gt
/// index), or background when every budget is spent. Sequential by
/// definition; the processing order is part of the contract.
AssignmentResult ota_assign(const CostMatrix& cost,
                            std::span<const int> budgets);

/// Center-assignment targets: one positive cell per gt plus a Gaussian
/// class heatmap around it.
struct TargetGrid {
  GridLayout layout;
  std::vector<double> heatmap;      // cells * num_classes, in [0, 1]
  std::vector<double> reg_targets;  // cells * 8, valid where gt_index >= 0
  std::vector<int> gt_index;        // cells, kBackground when negative
  int skipped_gts = 0;              // gts whose center fell outside the grid
};

struct CenterAssignConfig {
  double min_radius = 2.0;  // cells
};

/// Baseline assignment: the cell containing each gt center becomes the one
/// positive location, with the 8-slot encoding as its regression target
/// and offsets under the corner-origin convention (a center exactly on a
/// cell corner has offset 0). Gts with centers outside the grid are
/// counted in skipped_gts.
TargetGrid center_assign(const std::vector<GroundTruthObject>& gts,
                         const GridLayout& layout,
                         const CenterAssignConfig& config = {});

/// Locations whose max class probability strictly exceeds the threshold,
/// decoded to boxes: cx = origin_x + (col + offset_x) * stride_x (same for
/// y), cz from the z channel, dims from size, yaw = atan2(sin, cos). Score
/// is the max class probability; the top max_outputs by score are kept.
std::vector<Detection> decode(const PredictionGrid& grid,
                              double score_threshold,
                              std::size_t max_outputs);

/// The top_m highest-scoring locations with their full probability
/// vectors, unthresholded, for cost computation.
std::vector<Candidate> decode_candidates(const PredictionGrid& grid,
                                         std::size_t top_m = 512);

/// Blends the classification score with the predicted IoU:
/// score^(1-alpha) * iou_pred^alpha. alpha = 0 returns the score unchanged.
double score_rectify(double score, double iou_pred, double alpha);

}  // namespace det3d::assign
