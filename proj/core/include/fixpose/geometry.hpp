#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace fixpose {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Rigid transform mapping fixture coordinates into the robot base frame:
/// p_base = rotation * p_fixture + translation.
struct Pose {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_inverse(const Vec3& p) const { return rotation.conjugate() * (p - translation); }

  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;
};

/// Geodesic angle on SO(3) between two rotations, in [0, pi].
double geodesic_angle(const Quat& a, const Quat& b);

/// Distance a unit vector moves under a rotation of `angle` radians about a
/// perpendicular axis; equals sqrt(2 - 2 cos(angle)).
double chord_factor(double angle);

/// Smallest rotation taking unit vector `from` onto unit vector `to`.
/// The vectors must not be antipodal.
Mat3 minimal_rotation(const Vec3& from, const Vec3& to);

/// Flip q onto the hemisphere of `reference` (q . reference >= 0).
Quat align_hemisphere(const Quat& q, const Quat& reference);

Vec4 quat_to_vec(const Quat& q);
Quat vec_to_quat(const Vec4& v);

}  // namespace fixpose
