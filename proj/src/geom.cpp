#include "det3d/geom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace det3d::geom {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kVertexMergeTol = 1e-9;   // duplicate-vertex merge distance
constexpr double kAreaClampTol = 1e-12;    // clip noise floor, m^2
constexpr double kConvexityTol = 1e-9;
constexpr double kRotationTol = 1e-9;
constexpr double kZTiltTol = 1e-6;

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double shoelace(const std::vector<Vec2>& v) {
  double twice_area = 0.0;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = v[i];
    const Vec2& q = v[(i + 1) % n];
    twice_area += p.x * q.y - p.y * q.x;
  }
  return 0.5 * twice_area;
}

std::vector<Vec2> merge_close_vertices(std::vector<Vec2> v) {
  std::vector<Vec2> out;
  out.reserve(v.size());
  for (const Vec2& p : v) {
    if (!out.empty()) {
      const Vec2& last = out.back();
      if (std::hypot(p.x - last.x, p.y - last.y) <= kVertexMergeTol) continue;
    }
    out.push_back(p);
  }
  while (out.size() > 1 &&
         std::hypot(out.front().x - out.back().x,
                    out.front().y - out.back().y) <= kVertexMergeTol) {
    out.pop_back();
  }
  return out;
}

// Clips `subject` against the half-plane left of edge a->b.
std::vector<Vec2> clip_half_plane(const std::vector<Vec2>& subject,
                                  const Vec2& a, const Vec2& b) {
  std::vector<Vec2> out;
  const std::size_t n = subject.size();
  out.reserve(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& cur = subject[i];
    const Vec2& nxt = subject[(i + 1) % n];
    const double side_cur = cross(a, b, cur);
    const double side_nxt = cross(a, b, nxt);
    if (side_cur >= 0.0) out.push_back(cur);
    if ((side_cur > 0.0 && side_nxt < 0.0) ||
        (side_cur < 0.0 && side_nxt > 0.0)) {
      const double t = side_cur / (side_cur - side_nxt);
      out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
    }
  }
  return out;
}

double intersection_area_raw(const std::vector<Vec2>& a,
                             const std::vector<Vec2>& b) {
  std::vector<Vec2> poly = a;
  const std::size_t n = b.size();
  for (std::size_t i = 0; i < n && poly.size() >= 3; ++i) {
    poly = clip_half_plane(poly, b[i], b[(i + 1) % n]);
  }
  if (poly.size() < 3) return 0.0;
  poly = merge_close_vertices(std::move(poly));
  if (poly.size() < 3) return 0.0;
  return shoelace(poly);
}

// Deterministic ordering key so that swapped-argument calls evaluate the
// identical clipping sequence and return bit-equal results.
bool vertices_less(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].x != b[i].x) return a[i].x < b[i].x;
    if (a[i].y != b[i].y) return a[i].y < b[i].y;
  }
  return false;
}

bool box_less(const Box3D& a, const Box3D& b) {
  const double ka[7] = {a.cx, a.cy, a.cz, a.length, a.width, a.height, a.yaw};
  const double kb[7] = {b.cx, b.cy, b.cz, b.length, b.width, b.height, b.yaw};
  for (int i = 0; i < 7; ++i) {
    if (ka[i] != kb[i]) return ka[i] < kb[i];
  }
  return false;
}

double bev_intersection(const Box3D& a, const Box3D& b) {
  const ConvexPolygon2D pa = box_corners_bev(a);
  const ConvexPolygon2D pb = box_corners_bev(b);
  return polygon_intersection_area(pa, pb);
}

}  // namespace

double wrap_angle(double theta) {
  if (!std::isfinite(theta)) {
    throw std::invalid_argument("wrap_angle: non-finite angle");
  }
  double r = std::remainder(theta, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

Box3D::Box3D(double cx_, double cy_, double cz_, double length_, double width_,
             double height_, double yaw_)
    : cx(cx_), cy(cy_), cz(cz_), length(length_), width(width_),
      height(height_), yaw(0.0) {
  const double fields[6] = {cx, cy, cz, length, width, height};
  for (double f : fields) {
    if (!std::isfinite(f)) throw std::invalid_argument("Box3D: non-finite field");
  }
  if (length <= 0.0 || width <= 0.0 || height <= 0.0) {
    throw std::invalid_argument("Box3D: extents must be positive");
  }
  yaw = wrap_angle(yaw_);
}

Mat3 Mat3::rotation_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r.m = {{{c, -s, 0.0}, {s, c, 0.0}, {0.0, 0.0, 1.0}}};
  return r;
}

Vec3 Mat3::apply(const Vec3& v) const {
  return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
          m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
          m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

double Mat3::det() const {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

RigidTransform::RigidTransform(const Mat3& rotation_, const Vec3& translation_)
    : rotation(rotation_), translation(translation_) {
  // R * R^T must be the identity and det(R) must be +1, both within 1e-9.
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += rotation.m[i][k] * rotation.m[j][k];
      const double expect = (i == j) ? 1.0 : 0.0;
      if (std::abs(dot - expect) > kRotationTol) {
        throw std::invalid_argument("RigidTransform: rotation not orthonormal");
      }
    }
  }
  if (std::abs(rotation.det() - 1.0) > kRotationTol) {
    throw std::invalid_argument("RigidTransform: rotation determinant != +1");
  }
  if (!std::isfinite(translation.x) || !std::isfinite(translation.y) ||
      !std::isfinite(translation.z)) {
    throw std::invalid_argument("RigidTransform: non-finite translation");
  }
}

RigidTransform RigidTransform::rotation_z(double angle, const Vec3& translation) {
  return RigidTransform(Mat3::rotation_z(angle), translation);
}

Vec3 RigidTransform::apply(const Vec3& p) const {
  const Vec3 r = rotation.apply(p);
  return {r.x + translation.x, r.y + translation.y, r.z + translation.z};
}

double RigidTransform::yaw_angle() const {
  return std::atan2(rotation.m[1][0], rotation.m[0][0]);
}

double RigidTransform::z_tilt() const {
  const Vec3 ez = rotation.apply({0.0, 0.0, 1.0});
  return std::atan2(std::hypot(ez.x, ez.y), ez.z);
}

ConvexPolygon2D::ConvexPolygon2D(std::vector<Vec2> vertices)
    : vertices_(merge_close_vertices(std::move(vertices))) {
  if (vertices_.empty()) return;
  if (vertices_.size() < 3) {
    throw std::invalid_argument("ConvexPolygon2D: fewer than 3 vertices");
  }
  for (const Vec2& v : vertices_) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
      throw std::invalid_argument("ConvexPolygon2D: non-finite vertex");
    }
  }
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double turn =
        cross(vertices_[i], vertices_[(i + 1) % n], vertices_[(i + 2) % n]);
    if (turn < -kConvexityTol) {
      throw std::invalid_argument(
          "ConvexPolygon2D: vertices not counterclockwise convex");
    }
  }
}

double ConvexPolygon2D::area() const {
  if (vertices_.size() < 3) return 0.0;
  return shoelace(vertices_);
}

ConvexPolygon2D box_corners_bev(const Box3D& box) {
  const double hl = 0.5 * box.length;
  const double hw = 0.5 * box.width;
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  // Local corners in counterclockwise order.
  const Vec2 local[4] = {{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}};
  std::vector<Vec2> world;
  world.reserve(4);
  for (const Vec2& p : local) {
    world.push_back({box.cx + c * p.x - s * p.y, box.cy + s * p.x + c * p.y});
  }
  return ConvexPolygon2D(std::move(world));
}

double polygon_intersection_area(const ConvexPolygon2D& a,
                                 const ConvexPolygon2D& b) {
  if (a.empty() || b.empty()) return 0.0;
  const std::vector<Vec2>* first = &a.vertices();
  const std::vector<Vec2>* second = &b.vertices();
  if (vertices_less(*second, *first)) std::swap(first, second);
  double inter = intersection_area_raw(*first, *second);
  if (inter < kAreaClampTol) return 0.0;
  const double cap = std::min(a.area(), b.area());
  return std::min(inter, cap);
}

double bev_iou(const Box3D& a, const Box3D& b) {
  const Box3D* first = &a;
  const Box3D* second = &b;
  if (box_less(*second, *first)) std::swap(first, second);
  const double inter = bev_intersection(*first, *second);
  if (inter <= 0.0) return 0.0;
  const double area_a = first->length * first->width;
  const double area_b = second->length * second->width;
  return inter / (area_a + area_b - inter);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const Box3D* first = &a;
  const Box3D* second = &b;
  if (box_less(*second, *first)) std::swap(first, second);
  const double z_overlap = std::min(first->z_max(), second->z_max()) -
                           std::max(first->z_min(), second->z_min());
  if (z_overlap <= 0.0) return 0.0;
  const double bev_inter = bev_intersection(*first, *second);
  const double inter = bev_inter * z_overlap;
  if (inter < kAreaClampTol) return 0.0;
  return inter / (first->volume() + second->volume() - inter);
}

Box3D transform_box(const Box3D& box, const RigidTransform& t) {
  if (t.z_tilt() > kZTiltTol) {
    throw std::invalid_argument("transform_box: rotation tilts the z axis");
  }
  const Vec3 center = t.apply({box.cx, box.cy, box.cz});
  return Box3D(center.x, center.y, center.z, box.length, box.width, box.height,
               wrap_angle(box.yaw + t.yaw_angle()));
}

}  // namespace det3d::geom
