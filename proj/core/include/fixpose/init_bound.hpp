#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "fixpose/geometry.hpp"

namespace fixpose {

/// Probed surface points in the robot base frame with a guaranteed bound on the
/// norm of each measurement error.
struct MeasurementSet {
  std::vector<Vec3> points;
  double sample_bound = 1e-3;    ///< b_s, meters
  double numeric_slack = 1e-7;   ///< b_eps, meters

  /// Throws std::invalid_argument unless there is at least one finite point and
  /// both bounds are positive.
  void validate() const;
};

/// Axis-aligned box guaranteed to contain every feasible fixture position.
struct PositionAABB {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  bool used_fallback = false;  ///< true when an SOCP failed and the enclosing-ball box was used

  Vec3 center() const { return 0.5 * (min + max); }
  double half_diagonal() const { return 0.5 * (max - min).norm(); }
  bool contains(const Vec3& p) const { return (p.array() >= min.array()).all() && (p.array() <= max.array()).all(); }
};

/// The ball intersection is empty: the measurements cannot come from a fixture of this radius.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotConvergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kAabbFaceSlack = 1e-7;
inline constexpr double kInfeasibilityTolerance = 1e-7;

struct SocpSolution {
  Vec3 point = Vec3::Zero();
  double gap_bound = 0.0;  ///< certified bound on objective suboptimality
  int newton_steps = 0;
};

/// Solves  min direction . t  s.t. |t - c_i| <= radius  for all centers c_i with a
/// log-barrier interior-point method (Newton centering, backtracking line search,
/// barrier weight x10 per outer step) until the duality gap is below 1e-8 m.
/// Throws InfeasibleError or NotConvergedError.
SocpSolution socp_min(const Vec3& direction, std::span<const Vec3> centers, double radius);

/// AABB of the intersection of balls of radius (fixture_radius + b_s) around the
/// measured points, from six SOCPs, widened by each SOCP's gap bound plus
/// kAabbFaceSlack on every face.
PositionAABB feasible_aabb(const MeasurementSet& meas, double fixture_radius);

}  // namespace fixpose
