#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "det3d/geom.hpp"

namespace det3d::pointcloud {

struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  std::vector<double> extra;  // reflectance etc.; count fixed per cloud
};

struct PointCloud {
  std::vector<Point> points;
  int feature_dim = 0;  // extra channels beyond x, y, z
  std::string frame_id;
  std::optional<geom::RigidTransform> pose;  // sensor-to-world, when known

  /// Checks coordinate finiteness and per-point channel counts.
  void validate() const;
};

/// Axis-aligned grid extents. Intervals are half-open [min, max) per axis;
/// a point exactly at max is outside.
struct VoxelGridSpec {
  double x_min = -75.2, x_max = 75.2;
  double y_min = -75.2, y_max = 75.2;
  double z_min = -2.0, z_max = 4.0;
  double size_x = 0.1, size_y = 0.1, size_z = 0.15;

  void validate() const;

  /// Cell counts per axis, floor((max - min) / size), each >= 1.
  std::array<std::int64_t, 3> dims() const;

  bool contains(double x, double y, double z) const;

  /// Cell index of a point, or nullopt when any axis index falls outside
  /// [0, dims).
  std::optional<std::array<std::int64_t, 3>> index_of(double x, double y,
                                                      double z) const;
};

struct VoxelCell {
  std::vector<double> mean;  // [x, y, z, extra...]
  std::uint64_t count = 0;
};

struct VoxelGrid {
  VoxelGridSpec spec;
  int feature_dim = 0;
  std::unordered_map<std::uint64_t, VoxelCell> cells;  // key = packed index

  std::uint64_t pack(std::int64_t ix, std::int64_t iy, std::int64_t iz) const;
  std::array<std::int64_t, 3> unpack(std::uint64_t key) const;
};

/// Keeps exactly the points with min <= coord < max on all three axes,
/// preserving order.
PointCloud crop_range(const PointCloud& cloud, const VoxelGridSpec& spec);

/// Buckets points into cells and averages [x, y, z, extra...] per occupied
/// cell. Points indexing outside the grid are silently excluded. Sums are
/// compensated so the result is independent of input order within 1e-12.
VoxelGrid voxelize(const PointCloud& cloud, const VoxelGridSpec& spec);

/// Densifies `current` with earlier sweeps mapped through their relative
/// poses, concatenated after the current points in the order given. With
/// add_time_channel set, one extra channel holding the frame lag (0 for
/// current, then 1, 2, ...) is appended last and feature_dim grows by one.
/// Throws std::invalid_argument on mismatched feature_dim.
PointCloud fuse_frames(
    const PointCloud& current,
    const std::vector<std::pair<PointCloud, geom::RigidTransform>>& previous,
    bool add_time_channel);

}  // namespace det3d::pointcloud
