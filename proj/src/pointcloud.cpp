#include "det3d/pointcloud.hpp"

#include <cmath>
#include <stdexcept>

namespace det3d::pointcloud {

namespace {

// Neumaier-compensated accumulator; keeps per-cell means order-independent
// to well below the 1e-12 contract.
struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }

  double value() const { return sum + comp; }
};

std::int64_t axis_dim(double lo, double hi, double size) {
  // floor((hi - lo) / size) with a relative guard so that ranges that are an
  // exact multiple of the cell size (150.4 / 0.1, 6 / 0.15, ...) do not lose
  // a cell to rounding.
  const double ratio = (hi - lo) / size;
  return static_cast<std::int64_t>(std::floor(ratio + ratio * 1e-12 + 1e-12));
}

}  // namespace

void PointCloud::validate() const {
  for (const Point& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw std::invalid_argument("PointCloud: non-finite coordinate");
    }
    if (static_cast<int>(p.extra.size()) != feature_dim) {
      throw std::invalid_argument(
          "PointCloud: point channel count != feature_dim");
    }
  }
}

void VoxelGridSpec::validate() const {
  const double lows[3] = {x_min, y_min, z_min};
  const double highs[3] = {x_max, y_max, z_max};
  const double sizes[3] = {size_x, size_y, size_z};
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(lows[a]) || !std::isfinite(highs[a]) ||
        !std::isfinite(sizes[a])) {
      throw std::invalid_argument("VoxelGridSpec: non-finite field");
    }
    if (highs[a] <= lows[a]) {
      throw std::invalid_argument("VoxelGridSpec: max must exceed min");
    }
    if (sizes[a] <= 0.0) {
      throw std::invalid_argument("VoxelGridSpec: voxel size must be positive");
    }
    if (axis_dim(lows[a], highs[a], sizes[a]) < 1) {
      throw std::invalid_argument("VoxelGridSpec: grid dim below 1");
    }
  }
}

std::array<std::int64_t, 3> VoxelGridSpec::dims() const {
  return {axis_dim(x_min, x_max, size_x), axis_dim(y_min, y_max, size_y),
          axis_dim(z_min, z_max, size_z)};
}

bool VoxelGridSpec::contains(double x, double y, double z) const {
  return x >= x_min && x < x_max && y >= y_min && y < y_max && z >= z_min &&
         z < z_max;
}

std::optional<std::array<std::int64_t, 3>> VoxelGridSpec::index_of(
    double x, double y, double z) const {
  const auto d = dims();
  const std::int64_t ix =
      static_cast<std::int64_t>(std::floor((x - x_min) / size_x));
  const std::int64_t iy =
      static_cast<std::int64_t>(std::floor((y - y_min) / size_y));
  const std::int64_t iz =
      static_cast<std::int64_t>(std::floor((z - z_min) / size_z));
  if (ix < 0 || ix >= d[0] || iy < 0 || iy >= d[1] || iz < 0 || iz >= d[2]) {
    return std::nullopt;
  }
  return std::array<std::int64_t, 3>{ix, iy, iz};
}

std::uint64_t VoxelGrid::pack(std::int64_t ix, std::int64_t iy,
                              std::int64_t iz) const {
  const auto d = spec.dims();
  return static_cast<std::uint64_t>(ix) +
         static_cast<std::uint64_t>(d[0]) *
             (static_cast<std::uint64_t>(iy) +
              static_cast<std::uint64_t>(d[1]) * static_cast<std::uint64_t>(iz));
}

std::array<std::int64_t, 3> VoxelGrid::unpack(std::uint64_t key) const {
  const auto d = spec.dims();
  const std::int64_t ix = static_cast<std::int64_t>(key % d[0]);
  key /= d[0];
  const std::int64_t iy = static_cast<std::int64_t>(key % d[1]);
  const std::int64_t iz = static_cast<std::int64_t>(key / d[1]);
  return {ix, iy, iz};
}

PointCloud crop_range(const PointCloud& cloud, const VoxelGridSpec& spec) {
  spec.validate();
  PointCloud out;
  out.feature_dim = cloud.feature_dim;
  out.frame_id = cloud.frame_id;
  out.pose = cloud.pose;
  out.points.reserve(cloud.points.size());
  for (const Point& p : cloud.points) {
    if (spec.contains(p.x, p.y, p.z)) out.points.push_back(p);
  }
  return out;
}

VoxelGrid voxelize(const PointCloud& cloud, const VoxelGridSpec& spec) {
  spec.validate();
  cloud.validate();

  const int n_channels = 3 + cloud.feature_dim;
  struct Accum {
    std::vector<KahanSum> sums;
    std::uint64_t count = 0;
  };
  std::unordered_map<std::uint64_t, Accum> accums;

  VoxelGrid grid;
  grid.spec = spec;
  grid.feature_dim = cloud.feature_dim;

  for (const Point& p : cloud.points) {
    const auto idx = spec.index_of(p.x, p.y, p.z);
    if (!idx) continue;
    const std::uint64_t key = grid.pack((*idx)[0], (*idx)[1], (*idx)[2]);
    Accum& acc = accums[key];
    if (acc.sums.empty()) acc.sums.resize(n_channels);
    acc.sums[0].add(p.x);
    acc.sums[1].add(p.y);
    acc.sums[2].add(p.z);
    for (int c = 0; c < cloud.feature_dim; ++c) acc.sums[3 + c].add(p.extra[c]);
    ++acc.count;
  }

  grid.cells.reserve(accums.size());
  for (const auto& [key, acc] : accums) {
    VoxelCell cell;
    cell.count = acc.count;
    cell.mean.resize(n_channels);
    for (int c = 0; c < n_channels; ++c) {
      cell.mean[c] = acc.sums[c].value() / static_cast<double>(acc.count);
    }
    grid.cells.emplace(key, std::move(cell));
  }
  return grid;
}

PointCloud fuse_frames(
    const PointCloud& current,
    const std::vector<std::pair<PointCloud, geom::RigidTransform>>& previous,
    bool add_time_channel) {
  current.validate();
  for (const auto& [cloud, transform] : previous) {
    if (cloud.feature_dim != current.feature_dim) {
      throw std::invalid_argument("fuse_frames: mismatched feature_dim");
    }
    cloud.validate();
  }

  PointCloud fused;
  fused.frame_id = current.frame_id;
  fused.pose = current.pose;
  fused.feature_dim = current.feature_dim + (add_time_channel ? 1 : 0);

  std::size_t total = current.points.size();
  for (const auto& [cloud, transform] : previous) total += cloud.points.size();
  fused.points.reserve(total);

  for (const Point& p : current.points) {
    Point q = p;
    if (add_time_channel) q.extra.push_back(0.0);
    fused.points.push_back(std::move(q));
  }
  double lag = 1.0;
  for (const auto& [cloud, transform] : previous) {
    for (const Point& p : cloud.points) {
      const geom::Vec3 mapped = transform.apply({p.x, p.y, p.z});
      Point q;
      q.x = mapped.x;
      q.y = mapped.y;
      q.z = mapped.z;
      q.extra = p.extra;
      if (add_time_channel) q.extra.push_back(lag);
      fused.points.push_back(std::move(q));
    }
    lag += 1.0;
  }
  return fused;
}

}  // namespace det3d::pointcloud
