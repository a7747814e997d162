#pragma once

#include <array>
#include <vector>

namespace det3d::geom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Normalizes an angle into (-pi, pi]. -pi maps to +pi by convention.
/// Throws std::invalid_argument for non-finite input.
double wrap_angle(double theta);

/// Oriented 3D box. `length` runs along the box's local x axis, `width`
/// along local y, `height` along z. `yaw` is counterclockwise about +z and
/// is kept normalized to (-pi, pi] by the constructor.
struct Box3D {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double length = 1.0;
  double width = 1.0;
  double height = 1.0;
  double yaw = 0.0;

  /// Validates finiteness and positive extents; wraps yaw.
  Box3D(double cx, double cy, double cz, double length, double width,
        double height, double yaw);

  double volume() const { return length * width * height; }
  double z_min() const { return cz - 0.5 * height; }
  double z_max() const { return cz + 0.5 * height; }
};

/// Row-major 3x3 matrix, just enough for rigid-body math.
struct Mat3 {
  std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

  static Mat3 identity() { return Mat3{}; }
  static Mat3 rotation_z(double angle);

  Vec3 apply(const Vec3& v) const;
  double det() const;
};

/// Proper rigid motion. The rotation must be orthonormal with determinant
/// +1 within 1e-9; the constructor rejects anything else.
struct RigidTransform {
  Mat3 rotation;
  Vec3 translation;

  RigidTransform() = default;
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return RigidTransform{}; }
  static RigidTransform rotation_z(double angle, const Vec3& translation = {});

  Vec3 apply(const Vec3& p) const;

  /// Rotation of the x axis within the xy plane.
  double yaw_angle() const;
  /// Angle by which the rotation tilts the z axis away from vertical.
  double z_tilt() const;
};

/// Convex polygon in the ground plane, vertices counterclockwise.
/// Consecutive vertices closer than 1e-9 m are merged on construction;
/// fewer than 3 surviving vertices yields the empty polygon.
class ConvexPolygon2D {
 public:
  ConvexPolygon2D() = default;
  explicit ConvexPolygon2D(std::vector<Vec2> vertices);

  bool empty() const { return vertices_.empty(); }
  const std::vector<Vec2>& vertices() const { return vertices_; }
  double area() const;

 private:
  std::vector<Vec2> vertices_;
};

/// Ground-plane footprint of a box as a counterclockwise quad.
ConvexPolygon2D box_corners_bev(const Box3D& box);

/// Area of the intersection of two convex polygons (Sutherland-Hodgman
/// clipping + shoelace). Symmetric in its arguments; disjoint inputs give
/// exactly 0. Intersection areas below 1e-12 m^2 are clamped to 0.
double polygon_intersection_area(const ConvexPolygon2D& a,
                                 const ConvexPolygon2D& b);

enum class IouKind { kBev, k3D };

/// IoU of the ground-plane footprints.
double bev_iou(const Box3D& a, const Box3D& b);

/// Volumetric IoU: BEV intersection area times z overlap over the union.
double iou_3d(const Box3D& a, const Box3D& b);

inline double iou(const Box3D& a, const Box3D& b, IouKind kind) {
  return kind == IouKind::kBev ? bev_iou(a, b) : iou_3d(a, b);
}

/// Maps a box through a rigid motion: center transformed, yaw incremented
/// by the transform's z rotation, dims unchanged. Throws
/// std::invalid_argument when the rotation tilts the z axis by more than
/// 1e-6 rad; tilting poses are rejected rather than silently projected.
Box3D transform_box(const Box3D& box, const RigidTransform& t);

}  // namespace det3d::geom
