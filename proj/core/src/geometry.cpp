#include "fixpose/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace fixpose {

Pose Pose::inverse() const {
  Pose out;
  out.rotation = rotation.conjugate();
  out.translation = -(out.rotation * translation);
  return out;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation = (rotation * rhs.rotation).normalized();
  out.translation = rotation * rhs.translation + translation;
  return out;
}

double geodesic_angle(const Quat& a, const Quat& b) {
  const Quat rel = a.conjugate() * b;
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

double chord_factor(double angle) {
  // 2 sin(a/2) == sqrt(2 - 2 cos a), without cancellation for small a.
  return 2.0 * std::sin(0.5 * std::clamp(angle, 0.0, M_PI));
}

Mat3 minimal_rotation(const Vec3& from, const Vec3& to) {
  const Vec3 v = from.cross(to);
  const double c = from.dot(to);
  Mat3 vx;
  vx << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return Mat3::Identity() + vx + vx * vx / (1.0 + c);
}

Quat align_hemisphere(const Quat& q, const Quat& reference) {
  if (q.coeffs().dot(reference.coeffs()) < 0.0) return Quat(-q.coeffs());
  return q;
}

Vec4 quat_to_vec(const Quat& q) { return Vec4(q.w(), q.x(), q.y(), q.z()); }

Quat vec_to_quat(const Vec4& v) { return Quat(v[0], v[1], v[2], v[3]); }

}  // namespace fixpose
