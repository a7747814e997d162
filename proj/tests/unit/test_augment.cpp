#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "det3d/augment.hpp"
#include "det3d/rng.hpp"
#include "oracles.hpp"

using det3d::GroundTruthObject;
using det3d::SplitMix64;
using det3d::augment::apply_to_box;
using det3d::augment::apply_to_cloud;
using det3d::augment::AugmentParams;
using det3d::augment::build_object_db;
using det3d::augment::default_tta_set;
using det3d::augment::FadingSchedule;
using det3d::augment::inverse_to_box;
using det3d::augment::ObjectDbEntry;
using det3d::augment::paste_objects;
using det3d::augment::random_augment;
using det3d::augment::tta_set;
using det3d::augment::TtaTransform;
using det3d::geom::Box3D;
using det3d::pointcloud::Point;
using det3d::pointcloud::PointCloud;

namespace {

constexpr double kPi = 3.14159265358979323846;

double yaw_diff(double a, double b) {
  return std::abs(det3d::geom::wrap_angle(a - b));
}

bool boxes_close(const Box3D& a, const Box3D& b, double tol) {
  return std::abs(a.cx - b.cx) <= tol && std::abs(a.cy - b.cy) <= tol &&
         std::abs(a.cz - b.cz) <= tol && std::abs(a.length - b.length) <= tol &&
         std::abs(a.width - b.width) <= tol &&
         std::abs(a.height - b.height) <= tol && yaw_diff(a.yaw, b.yaw) <= tol;
}

PointCloud cloud_of(std::initializer_list<Point> points, int feature_dim = 0) {
  PointCloud cloud;
  cloud.feature_dim = feature_dim;
  cloud.points = points;
  return cloud;
}

}  // namespace

TEST_CASE("tta_set builds the cross product in fixed order") {
  const auto defaults = default_tta_set();
  CHECK(defaults.size() == 16);
  // yaw is the outer loop, then scale, then z offset.
  CHECK(defaults[0].yaw == 0.0);
  CHECK(defaults[0].scale == 0.95);
  CHECK(defaults[0].z_offset == -0.2);
  CHECK(defaults[1].z_offset == 0.2);
  CHECK(defaults[2].scale == 1.05);
  CHECK(defaults[4].yaw == doctest::Approx(-0.13 * kPi).epsilon(1e-12));
  CHECK(defaults[15].yaw == doctest::Approx(0.07 * kPi).epsilon(1e-12));
  CHECK(defaults[15].scale == 1.05);
  CHECK(defaults[15].z_offset == 0.2);

  const double one_yaw[] = {0.0};
  const double one_scale[] = {1.0};
  const double one_offset[] = {0.0};
  const auto singleton = tta_set(one_yaw, one_scale, one_offset);
  REQUIRE(singleton.size() == 1);
  CHECK(singleton[0].yaw == 0.0);
  CHECK(singleton[0].scale == 1.0);
  CHECK(singleton[0].z_offset == 0.0);

  const double two_yaws[] = {0.0, kPi / 2};
  CHECK(tta_set(two_yaws, one_scale, one_offset).size() == 2);

  CHECK_THROWS_AS(tta_set({}, one_scale, one_offset), std::invalid_argument);
}

TEST_CASE("TtaTransform validation and inverse involution") {
  CHECK_THROWS_AS(TtaTransform(0.0, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(TtaTransform(0.0, -1.0, 0.0), std::invalid_argument);

  for (const auto& t : default_tta_set()) {
    const TtaTransform back = t.inverse().inverse();
    CHECK(std::abs(back.yaw - t.yaw) <= 1e-12);
    CHECK(std::abs(back.scale - t.scale) <= 1e-12);
    CHECK(std::abs(back.z_offset - t.z_offset) <= 1e-12);
  }
}

TEST_CASE("apply_to_cloud examples") {
  const PointCloud cloud = cloud_of({Point{1, 0, 0, {0.5}}}, 1);

  const PointCloud same = apply_to_cloud(TtaTransform(0, 1, 0), cloud);
  CHECK(same.points[0].x == 1.0);
  CHECK(same.points[0].extra[0] == 0.5);

  const PointCloud turned = apply_to_cloud(TtaTransform(kPi / 2, 1, 0), cloud);
  CHECK(turned.points[0].x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(turned.points[0].y == doctest::Approx(1.0).epsilon(1e-12));

  const PointCloud lifted = apply_to_cloud(TtaTransform(0, 2, 0.2),
                                           cloud_of({Point{0, 0, 1, {}}}));
  CHECK(lifted.points[0].z == doctest::Approx(2.2).epsilon(1e-12));
}

TEST_CASE("apply_to_box scales dims and wraps yaw") {
  const Box3D cube(0, 0, 0, 1, 1, 1, 0);
  const Box3D scaled = apply_to_box(TtaTransform(0, 1.05, 0), cube);
  CHECK(scaled.length == doctest::Approx(1.05).epsilon(1e-12));
  CHECK(scaled.width == doctest::Approx(1.05).epsilon(1e-12));
  CHECK(scaled.height == doctest::Approx(1.05).epsilon(1e-12));
  CHECK(scaled.cz == doctest::Approx(0.0).epsilon(1e-12));

  const Box3D near_wrap(0, 0, 0, 1, 1, 1, kPi - 0.01);
  const Box3D wrapped = apply_to_box(TtaTransform(0.07 * kPi, 1, 0), near_wrap);
  CHECK(wrapped.yaw > -kPi);
  CHECK(wrapped.yaw <= kPi);
  CHECK(yaw_diff(wrapped.yaw, kPi - 0.01 + 0.07 * kPi) <= 1e-12);
}

TEST_CASE("TTA round trip is the identity within 1e-9") {
  const TtaTransform t(-0.13 * kPi, 0.95, -0.2);
  const Box3D box(3.0, -2.0, 0.5, 4.5, 1.9, 1.6, 0.4);
  CHECK(boxes_close(inverse_to_box(t, apply_to_box(t, box)), box, 1e-9));

  SplitMix64 rng(31);
  const auto transforms = default_tta_set();
  for (int i = 0; i < 1000; ++i) {
    const Box3D b = oracles::random_box(rng, 40.0);
    for (const auto& tt : transforms) {
      CHECK(boxes_close(inverse_to_box(tt, apply_to_box(tt, b)), b, 1e-9));
    }
  }
}

TEST_CASE("TTA preserves IoU: 3D at scale 1, BEV in general") {
  SplitMix64 rng(32);
  for (int i = 0; i < 100; ++i) {
    const Box3D a = oracles::random_box(rng);
    const Box3D b = oracles::random_box(rng);
    const TtaTransform rigid(rng.uniform(-kPi, kPi), 1.0, rng.uniform(-1, 1));
    CHECK(std::abs(det3d::geom::iou_3d(apply_to_box(rigid, a),
                                       apply_to_box(rigid, b)) -
                   det3d::geom::iou_3d(a, b)) <= 1e-9);

    const TtaTransform general(rng.uniform(-kPi, kPi), rng.uniform(0.5, 2.0),
                               rng.uniform(-1, 1));
    CHECK(std::abs(det3d::geom::bev_iou(apply_to_box(general, a),
                                        apply_to_box(general, b)) -
                   det3d::geom::bev_iou(a, b)) <= 1e-9);
  }
}

TEST_CASE("random_augment: identity parameters change nothing") {
  AugmentParams params;
  params.allow_flip_x = false;
  params.allow_flip_y = false;
  params.scale_lo = params.scale_hi = 1.0;
  params.rotation_lo = params.rotation_hi = 0.0;
  params.translation_lo = params.translation_hi = 0.0;
  params.seed = 7;

  const PointCloud cloud = cloud_of({Point{1.5, -2.0, 0.25, {0.9}}}, 1);
  const std::vector<GroundTruthObject> boxes = {
      {Box3D(1, 2, 0, 4, 2, 1.5, 0.3), 0}};
  const auto [out_cloud, out_boxes] = random_augment(cloud, boxes, params);
  CHECK(out_cloud.points[0].x == 1.5);
  CHECK(out_cloud.points[0].y == -2.0);
  CHECK(out_cloud.points[0].z == 0.25);
  CHECK(out_boxes[0].box.cx == 1.0);
  CHECK(out_boxes[0].box.yaw == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("flips are involutions") {
  PointCloud cloud = cloud_of({Point{1.0, 2.0, 3.0, {}}, Point{-4.0, 0.5, 0, {}}});
  std::vector<GroundTruthObject> boxes = {{Box3D(1, 2, 0, 4, 2, 1.5, 0.4), 0},
                                          {Box3D(-3, 1, 0, 2, 1, 1, kPi), 1}};
  const PointCloud cloud0 = cloud;
  const auto boxes0 = boxes;

  det3d::augment::flip_over_x(cloud, boxes);
  CHECK(cloud.points[0].y == -2.0);
  CHECK(boxes[0].box.yaw == doctest::Approx(-0.4).epsilon(1e-15));
  det3d::augment::flip_over_x(cloud, boxes);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    CHECK(cloud.points[i].x == cloud0.points[i].x);
    CHECK(cloud.points[i].y == cloud0.points[i].y);
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    CHECK(boxes_close(boxes[i].box, boxes0[i].box, 1e-12));
  }

  det3d::augment::flip_over_y(cloud, boxes);
  CHECK(cloud.points[0].x == -1.0);
  CHECK(yaw_diff(boxes[0].box.yaw, kPi - 0.4) <= 1e-12);
  det3d::augment::flip_over_y(cloud, boxes);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    CHECK(boxes_close(boxes[i].box, boxes0[i].box, 1e-12));
  }
}

TEST_CASE("random_augment is reproducible bit-for-bit") {
  AugmentParams params;
  params.seed = 42;
  const PointCloud cloud = cloud_of(
      {Point{1, 2, 0.5, {0.1}}, Point{-3, 4, -0.5, {0.2}}, Point{7, -1, 1, {0.3}}},
      1);
  const std::vector<GroundTruthObject> boxes = {
      {Box3D(1, 2, 0, 4, 2, 1.5, 0.7), 0}, {Box3D(-3, 4, 0, 2, 1, 1, -2.1), 1}};

  const auto [cloud_a, boxes_a] = random_augment(cloud, boxes, params);
  const auto [cloud_b, boxes_b] = random_augment(cloud, boxes, params);
  REQUIRE(cloud_a.points.size() == cloud_b.points.size());
  for (std::size_t i = 0; i < cloud_a.points.size(); ++i) {
    CHECK(cloud_a.points[i].x == cloud_b.points[i].x);
    CHECK(cloud_a.points[i].y == cloud_b.points[i].y);
    CHECK(cloud_a.points[i].z == cloud_b.points[i].z);
  }
  for (std::size_t i = 0; i < boxes_a.size(); ++i) {
    CHECK(boxes_a[i].box.cx == boxes_b[i].box.cx);
    CHECK(boxes_a[i].box.yaw == boxes_b[i].box.yaw);
  }

  params.seed = 43;  // different stream
  const auto [cloud_c, boxes_c] = random_augment(cloud, boxes, params);
  CHECK(cloud_c.points[0].x != cloud_a.points[0].x);
}

TEST_CASE("build_object_db extracts interior points in box frame") {
  PointCloud cloud = cloud_of({
      Point{1.1, 2.0, 0.0, {}},   // inside
      Point{0.9, 2.2, 0.1, {}},   // inside
      Point{1.0, 1.9, -0.2, {}},  // inside
      Point{5.0, 5.0, 0.0, {}},   // far away
  });
  const std::vector<GroundTruthObject> gts = {{Box3D(1, 2, 0, 2, 1, 1, 0), 3}};
  const auto db = build_object_db({{cloud, gts}});
  REQUIRE(db.size() == 1);
  CHECK(db[0].class_id == 3);
  CHECK(db[0].points.points.size() == 3);
  for (const auto& p : db[0].points.points) {
    CHECK(std::abs(p.x) <= 0.5 * db[0].box.length + 1e-6);
    CHECK(std::abs(p.y) <= 0.5 * db[0].box.width + 1e-6);
    CHECK(std::abs(p.z) <= 0.5 * db[0].box.height + 1e-6);
  }

  CHECK(build_object_db({}).empty());
}

TEST_CASE("build_object_db local coordinates are centered for symmetric input") {
  const Box3D box(4, -1, 0.5, 2, 2, 2, 0.6);
  PointCloud cloud;
  cloud.feature_dim = 0;
  SplitMix64 rng(33);
  for (int i = 0; i < 400; ++i) {
    // Symmetric pairs in the box frame, mapped out to world coordinates.
    const double lx = rng.uniform(-0.9, 0.9);
    const double ly = rng.uniform(-0.9, 0.9);
    const double lz = rng.uniform(-0.9, 0.9);
    for (double sign : {1.0, -1.0}) {
      const double c = std::cos(box.yaw), s = std::sin(box.yaw);
      Point p;
      p.x = box.cx + c * (sign * lx) - s * (sign * ly);
      p.y = box.cy + s * (sign * lx) + c * (sign * ly);
      p.z = box.cz + sign * lz;
      cloud.points.push_back(p);
    }
  }
  const auto db = build_object_db({{cloud, {{box, 0}}}});
  REQUIRE(db.size() == 1);
  double mean_x = 0.0;
  for (const auto& p : db[0].points.points) mean_x += p.x;
  mean_x /= static_cast<double>(db[0].points.points.size());
  CHECK(std::abs(mean_x) < 1e-9);

  // An object with no interior points still yields an entry.
  const auto empty_db =
      build_object_db({{cloud_of({}), {{Box3D(0, 0, 0, 1, 1, 1, 0), 0}}}});
  REQUIRE(empty_db.size() == 1);
  CHECK(empty_db[0].points.points.empty());
}

TEST_CASE("FadingSchedule boundary") {
  const FadingSchedule schedule(20, 5);
  CHECK(schedule.paste_active(14));
  CHECK_FALSE(schedule.paste_active(15));
  CHECK_FALSE(schedule.paste_active(19));
  int active = 0;
  for (int epoch = 0; epoch < 20; ++epoch) {
    if (schedule.paste_active(epoch)) ++active;
  }
  CHECK(active == 15);  // total - fade_last
  CHECK_THROWS_AS(FadingSchedule(10, 11), std::invalid_argument);
}

TEST_CASE("paste_objects: fading, collisions, determinism") {
  // Database with well-separated boxes of two classes.
  std::vector<ObjectDbEntry> db;
  for (int i = 0; i < 6; ++i) {
    ObjectDbEntry entry;
    entry.class_id = i % 2;
    entry.box = Box3D(10.0 + 4.0 * i, 0.0, 0.0, 2, 1, 1, 0.2 * i);
    entry.points.feature_dim = 0;
    Point p;
    p.x = 0.1;
    p.y = -0.1;
    p.z = 0.0;
    entry.points.points.push_back(p);
    db.push_back(std::move(entry));
  }

  const PointCloud scene = cloud_of({Point{0, 0, 0, {}}});
  const std::vector<GroundTruthObject> scene_gts = {
      {Box3D(10.0, 0.0, 0.0, 2, 1, 1, 0.0), 0}};  // collides with entry 0
  const FadingSchedule schedule(20, 5);
  const std::map<int, int> counts = {{0, 2}, {1, 1}};

  // Faded epoch: scene unchanged.
  const auto [faded_cloud, faded_gts] =
      paste_objects(scene, scene_gts, db, counts, 15, schedule, 9);
  CHECK(faded_cloud.points.size() == scene.points.size());
  CHECK(faded_gts.size() == scene_gts.size());

  // Active epoch: pasted boxes never overlap anything.
  const auto [cloud14, gts14] =
      paste_objects(scene, scene_gts, db, counts, 14, schedule, 9);
  CHECK(gts14.size() > scene_gts.size());
  CHECK(gts14.size() <= scene_gts.size() + 3);
  for (std::size_t i = scene_gts.size(); i < gts14.size(); ++i) {
    for (std::size_t j = 0; j < gts14.size(); ++j) {
      if (i == j) continue;
      CHECK(det3d::geom::bev_iou(gts14[i].box, gts14[j].box) == 0.0);
    }
  }
  // Pasted points land inside their boxes.
  CHECK(cloud14.points.size() ==
        scene.points.size() + (gts14.size() - scene_gts.size()));

  // Deterministic given the seed.
  const auto [cloud_again, gts_again] =
      paste_objects(scene, scene_gts, db, counts, 14, schedule, 9);
  REQUIRE(gts_again.size() == gts14.size());
  for (std::size_t i = 0; i < gts14.size(); ++i) {
    CHECK(gts_again[i].box.cx == gts14[i].box.cx);
    CHECK(gts_again[i].box.yaw == gts14[i].box.yaw);
  }

  // Empty database: unchanged.
  const auto [no_cloud, no_gts] =
      paste_objects(scene, scene_gts, {}, counts, 0, schedule, 9);
  CHECK(no_cloud.points.size() == scene.points.size());
  CHECK(no_gts.size() == scene_gts.size());

  // Unsatisfiable counts paste fewer, never throw.
  const std::map<int, int> greedy_counts = {{0, 100}};
  const auto [big_cloud, big_gts] =
      paste_objects(scene, scene_gts, db, greedy_counts, 0, schedule, 9);
  CHECK(big_gts.size() <= scene_gts.size() + 3);
}
