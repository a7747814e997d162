#include "det3d/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace det3d::augment {

namespace {

constexpr double kPi = 3.14159265358979323846;

geom::Vec3 rotate_z(double yaw, const geom::Vec3& p) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

bool point_strictly_inside(const geom::Box3D& box, double lx, double ly,
                           double lz) {
  return std::abs(lx) < 0.5 * box.length && std::abs(ly) < 0.5 * box.width &&
         std::abs(lz) < 0.5 * box.height;
}

geom::Vec3 to_box_frame(const geom::Box3D& box, const pointcloud::Point& p) {
  return rotate_z(-box.yaw,
                  {p.x - box.cx, p.y - box.cy, p.z - box.cz});
}

geom::Vec3 from_box_frame(const geom::Box3D& box, const geom::Vec3& local) {
  const geom::Vec3 r = rotate_z(box.yaw, local);
  return {r.x + box.cx, r.y + box.cy, r.z + box.cz};
}

bool collides(const geom::Box3D& candidate,
              const std::vector<GroundTruthObject>& existing,
              const std::vector<GroundTruthObject>& pasted) {
  for (const auto& g : existing) {
    if (geom::bev_iou(candidate, g.box) > 0.0) return true;
  }
  for (const auto& g : pasted) {
    if (geom::bev_iou(candidate, g.box) > 0.0) return true;
  }
  return false;
}

}  // namespace

TtaTransform::TtaTransform(double yaw_, double scale_, double z_offset_)
    : yaw(yaw_), scale(scale_), z_offset(z_offset_) {
  if (!std::isfinite(yaw) || !std::isfinite(scale) || !std::isfinite(z_offset)) {
    throw std::invalid_argument("TtaTransform: non-finite parameter");
  }
  if (scale <= 0.0) {
    throw std::invalid_argument("TtaTransform: scale must be positive");
  }
}

TtaTransform TtaTransform::inverse() const {
  return TtaTransform(-yaw, 1.0 / scale, -z_offset / scale);
}

std::vector<TtaTransform> tta_set(std::span<const double> yaws,
                                  std::span<const double> scales,
                                  std::span<const double> z_offsets) {
  if (yaws.empty() || scales.empty() || z_offsets.empty()) {
    throw std::invalid_argument("tta_set: empty parameter list");
  }
  std::vector<TtaTransform> out;
  out.reserve(yaws.size() * scales.size() * z_offsets.size());
  for (double yaw : yaws) {
    for (double scale : scales) {
      for (double dz : z_offsets) {
        out.emplace_back(yaw, scale, dz);
      }
    }
  }
  return out;
}

std::vector<TtaTransform> default_tta_set() {
  const double yaws[] = {0.0, -0.13 * kPi, -0.07 * kPi, 0.07 * kPi};
  const double scales[] = {0.95, 1.05};
  const double z_offsets[] = {-0.2, 0.2};
  return tta_set(yaws, scales, z_offsets);
}

PointCloud apply_to_cloud(const TtaTransform& t, const PointCloud& cloud) {
  PointCloud out;
  out.feature_dim = cloud.feature_dim;
  out.frame_id = cloud.frame_id;
  out.pose = cloud.pose;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) {
    const geom::Vec3 r = rotate_z(t.yaw, {p.x, p.y, p.z});
    pointcloud::Point q;
    q.x = r.x * t.scale;
    q.y = r.y * t.scale;
    q.z = r.z * t.scale + t.z_offset;
    q.extra = p.extra;
    out.points.push_back(std::move(q));
  }
  return out;
}

geom::Box3D apply_to_box(const TtaTransform& t, const geom::Box3D& box) {
  const geom::Vec3 r = rotate_z(t.yaw, {box.cx, box.cy, box.cz});
  return geom::Box3D(r.x * t.scale, r.y * t.scale, r.z * t.scale + t.z_offset,
                     box.length * t.scale, box.width * t.scale,
                     box.height * t.scale, geom::wrap_angle(box.yaw + t.yaw));
}

geom::Box3D inverse_to_box(const TtaTransform& t, const geom::Box3D& box) {
  return apply_to_box(t.inverse(), box);
}

void AugmentParams::validate() const {
  if (!(scale_lo <= scale_hi) || !(rotation_lo <= rotation_hi) ||
      !(translation_lo <= translation_hi)) {
    throw std::invalid_argument("AugmentParams: range lo must be <= hi");
  }
  const double vals[] = {scale_lo, scale_hi, rotation_lo,
                         rotation_hi, translation_lo, translation_hi};
  for (double v : vals) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("AugmentParams: non-finite range");
    }
  }
  if (scale_lo <= 0.0) {
    throw std::invalid_argument("AugmentParams: scale range must be positive");
  }
}

void flip_over_x(PointCloud& cloud, std::vector<GroundTruthObject>& boxes) {
  for (auto& p : cloud.points) p.y = -p.y;
  for (auto& g : boxes) {
    g.box = geom::Box3D(g.box.cx, -g.box.cy, g.box.cz, g.box.length,
                        g.box.width, g.box.height, geom::wrap_angle(-g.box.yaw));
  }
}

void flip_over_y(PointCloud& cloud, std::vector<GroundTruthObject>& boxes) {
  for (auto& p : cloud.points) p.x = -p.x;
  for (auto& g : boxes) {
    g.box = geom::Box3D(-g.box.cx, g.box.cy, g.box.cz, g.box.length,
                        g.box.width, g.box.height,
                        geom::wrap_angle(kPi - g.box.yaw));
  }
}

std::pair<PointCloud, std::vector<GroundTruthObject>> random_augment(
    const PointCloud& cloud, const std::vector<GroundTruthObject>& boxes,
    const AugmentParams& params) {
  params.validate();
  SplitMix64 rng(params.seed);

  PointCloud out_cloud = cloud;
  std::vector<GroundTruthObject> out_boxes = boxes;

  const bool do_flip_x = params.allow_flip_x && rng.bernoulli(0.5);
  const bool do_flip_y = params.allow_flip_y && rng.bernoulli(0.5);
  const double rotation = rng.uniform(params.rotation_lo, params.rotation_hi);
  const double scale = rng.uniform(params.scale_lo, params.scale_hi);
  const double tx = rng.uniform(params.translation_lo, params.translation_hi);
  const double ty = rng.uniform(params.translation_lo, params.translation_hi);
  const double tz = rng.uniform(params.translation_lo, params.translation_hi);

  if (do_flip_x) flip_over_x(out_cloud, out_boxes);
  if (do_flip_y) flip_over_y(out_cloud, out_boxes);

  for (auto& p : out_cloud.points) {
    const geom::Vec3 r = rotate_z(rotation, {p.x, p.y, p.z});
    p.x = r.x * scale + tx;
    p.y = r.y * scale + ty;
    p.z = r.z * scale + tz;
  }
  for (auto& g : out_boxes) {
    const geom::Vec3 r = rotate_z(rotation, {g.box.cx, g.box.cy, g.box.cz});
    g.box = geom::Box3D(r.x * scale + tx, r.y * scale + ty, r.z * scale + tz,
                        g.box.length * scale, g.box.width * scale,
                        g.box.height * scale,
                        geom::wrap_angle(g.box.yaw + rotation));
  }
  return {std::move(out_cloud), std::move(out_boxes)};
}

std::vector<ObjectDbEntry> build_object_db(
    const std::vector<std::pair<PointCloud, std::vector<GroundTruthObject>>>&
        frames) {
  std::vector<ObjectDbEntry> db;
  for (const auto& [cloud, objects] : frames) {
    for (const auto& g : objects) {
      ObjectDbEntry entry;
      entry.box = g.box;
      entry.class_id = g.class_id;
      entry.points.feature_dim = cloud.feature_dim;
      for (const auto& p : cloud.points) {
        const geom::Vec3 local = to_box_frame(g.box, p);
        if (!point_strictly_inside(g.box, local.x, local.y, local.z)) continue;
        pointcloud::Point q;
        q.x = local.x;
        q.y = local.y;
        q.z = local.z;
        q.extra = p.extra;
        entry.points.points.push_back(std::move(q));
      }
      db.push_back(std::move(entry));
    }
  }
  return db;
}

FadingSchedule::FadingSchedule(int total_epochs_, int fade_last_)
    : total_epochs(total_epochs_), fade_last(fade_last_) {
  if (total_epochs < 0 || fade_last < 0 || fade_last > total_epochs) {
    throw std::invalid_argument("FadingSchedule: need 0 <= fade_last <= total");
  }
}

bool FadingSchedule::paste_active(int epoch) const {
  return epoch < total_epochs - fade_last;
}

std::pair<PointCloud, std::vector<GroundTruthObject>> paste_objects(
    const PointCloud& cloud, const std::vector<GroundTruthObject>& boxes,
    const std::vector<ObjectDbEntry>& db,
    const std::map<int, int>& per_class_counts, int epoch,
    const FadingSchedule& schedule, std::uint64_t seed,
    const PasteOptions& options) {
  if (!schedule.paste_active(epoch)) return {cloud, boxes};
  if (db.empty()) return {cloud, boxes};

  PointCloud out_cloud = cloud;
  std::vector<GroundTruthObject> out_boxes = boxes;
  std::vector<GroundTruthObject> pasted;

  SplitMix64 master(seed);
  for (const auto& [class_id, want] : per_class_counts) {
    if (want <= 0) continue;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < db.size(); ++i) {
      if (db[i].class_id == class_id) candidates.push_back(i);
    }
    if (candidates.empty()) continue;
    SplitMix64 rng = master.split(static_cast<std::uint64_t>(class_id));
    rng.shuffle(candidates);

    int placed = 0;
    for (std::size_t idx : candidates) {
      if (placed >= want) break;
      const ObjectDbEntry& entry = db[idx];
      geom::Box3D target = entry.box;
      bool ok = false;
      if (options.resample_pose) {
        for (int attempt = 0; attempt < options.placement_attempts; ++attempt) {
          const double cx = rng.uniform(options.x_lo, options.x_hi);
          const double cy = rng.uniform(options.y_lo, options.y_hi);
          const double yaw = rng.uniform(-kPi, kPi);
          target = geom::Box3D(cx, cy, entry.box.cz, entry.box.length,
                               entry.box.width, entry.box.height, yaw);
          if (!collides(target, out_boxes, pasted)) {
            ok = true;
            break;
          }
        }
      } else {
        ok = !collides(target, out_boxes, pasted);
      }
      if (!ok) continue;

      for (const auto& p : entry.points.points) {
        const geom::Vec3 world = from_box_frame(target, {p.x, p.y, p.z});
        pointcloud::Point q;
        q.x = world.x;
        q.y = world.y;
        q.z = world.z;
        q.extra = p.extra;
        // Channel counts can differ between the database and the scene;
        // pad with zeros or truncate to the scene layout.
        q.extra.resize(out_cloud.feature_dim, 0.0);
        out_cloud.points.push_back(std::move(q));
      }
      pasted.push_back(GroundTruthObject{target, entry.class_id});
      ++placed;
    }
  }

  out_boxes.insert(out_boxes.end(), pasted.begin(), pasted.end());
  return {std::move(out_cloud), std::move(out_boxes)};
}

}  // namespace det3d::augment
