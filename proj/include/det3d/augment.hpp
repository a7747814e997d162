#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "det3d/pointcloud.hpp"
#include "det3d/rng.hpp"
#include "det3d/types.hpp"

namespace det3d::augment {

using pointcloud::PointCloud;

/// Invertible test-time transform. Application order is fixed: rotate the
/// xy plane by yaw about the origin, scale (x, y, z) uniformly, then shift
/// z by z_offset. The inverse of (yaw, s, dz) under that order is
/// (-yaw, 1/s, -dz/s).
struct TtaTransform {
  double yaw = 0.0;
  double scale = 1.0;
  double z_offset = 0.0;

  TtaTransform() = default;
  TtaTransform(double yaw, double scale, double z_offset);

  TtaTransform inverse() const;
};

/// Cross product of the parameter lists in lexicographic order: yaw is the
/// outer loop, then scale, then z_offset. Throws on any empty list.
std::vector<TtaTransform> tta_set(std::span<const double> yaws,
                                  std::span<const double> scales,
                                  std::span<const double> z_offsets);

/// The default 16-variant set: yaws {0, -0.13pi, -0.07pi, 0.07pi},
/// scales {0.95, 1.05}, z offsets {-0.2, 0.2}.
std::vector<TtaTransform> default_tta_set();

PointCloud apply_to_cloud(const TtaTransform& t, const PointCloud& cloud);

/// Center transformed as a point, extents multiplied by scale, yaw
/// incremented and re-wrapped.
geom::Box3D apply_to_box(const TtaTransform& t, const geom::Box3D& box);

/// Exact inverse of apply_to_box for the same transform.
geom::Box3D inverse_to_box(const TtaTransform& t, const geom::Box3D& box);

struct AugmentParams {
  bool allow_flip_x = true;  // flip over the x axis: y -> -y
  bool allow_flip_y = true;  // flip over the y axis: x -> -x
  double scale_lo = 0.95, scale_hi = 1.05;
  double rotation_lo = -0.7853981633974483, rotation_hi = 0.7853981633974483;
  double translation_lo = -0.5, translation_hi = 0.5;  // per axis
  std::uint64_t seed = 0;

  void validate() const;
};

/// Flips a scene over the x axis: point y -> -y, box cy -> -cy,
/// yaw -> -yaw. Applying it twice is the identity.
void flip_over_x(PointCloud& cloud, std::vector<GroundTruthObject>& boxes);

/// Flips a scene over the y axis: point x -> -x, box cx -> -cx,
/// yaw -> pi - yaw (wrapped).
void flip_over_y(PointCloud& cloud, std::vector<GroundTruthObject>& boxes);

/// Random global flip / rotation / scaling / translation, the identical
/// transform applied to points and boxes. Deterministic given the seed.
/// Draw order is fixed: flip x, flip y, rotation, scale, then translation
/// x, y, z.
std::pair<PointCloud, std::vector<GroundTruthObject>> random_augment(
    const PointCloud& cloud, const std::vector<GroundTruthObject>& boxes,
    const AugmentParams& params);

/// One stored object: its box, label, and the interior points expressed in
/// the box frame (center at the origin, rotated by -yaw).
struct ObjectDbEntry {
  geom::Box3D box{0, 0, 0, 1, 1, 1, 0};
  int class_id = 0;
  PointCloud points;
};

/// One entry per ground-truth object across all frames; entry clouds hold
/// the frame points strictly inside each box, in box-local coordinates.
/// Objects with no interior points still produce (empty) entries.
std::vector<ObjectDbEntry> build_object_db(
    const std::vector<std::pair<PointCloud, std::vector<GroundTruthObject>>>&
        frames);

/// Pasting runs for the first total_epochs - fade_last epochs and is
/// disabled for the final fade_last (0-indexed: off iff
/// epoch >= total_epochs - fade_last).
struct FadingSchedule {
  int total_epochs = 20;
  int fade_last = 5;

  FadingSchedule() = default;
  FadingSchedule(int total_epochs, int fade_last);

  bool paste_active(int epoch) const;
};

struct PasteOptions {
  /// When set, sampled objects are re-posed uniformly within the given xy
  /// bounds with a fresh yaw instead of keeping their stored pose.
  bool resample_pose = false;
  double x_lo = -50.0, x_hi = 50.0;
  double y_lo = -50.0, y_hi = 50.0;
  int placement_attempts = 10;  // tries per candidate when resampling
};

/// Samples up to per_class_counts[c] database objects per class and pastes
/// each whose box has zero BEV overlap with every existing and already
/// pasted box, appending points and boxes to the scene. Returns the scene
/// unchanged when the schedule has faded pasting out. Unsatisfiable counts
/// paste fewer objects, never an error. Deterministic given the seed.
std::pair<PointCloud, std::vector<GroundTruthObject>> paste_objects(
    const PointCloud& cloud, const std::vector<GroundTruthObject>& boxes,
    const std::vector<ObjectDbEntry>& db,
    const std::map<int, int>& per_class_counts, int epoch,
    const FadingSchedule& schedule, std::uint64_t seed,
    const PasteOptions& options = {});

}  // namespace det3d::augment
