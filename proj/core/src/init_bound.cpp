#include "fixpose/init_bound.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>

#include "fixpose/enclosing_ball.hpp"
#include "fixpose/log.hpp"

namespace fixpose {

void MeasurementSet::validate() const {
  if (points.empty()) throw std::invalid_argument("measurement set is empty");
  for (const Vec3& p : points) {
    if (!p.allFinite()) throw std::invalid_argument("measurement point has a non-finite coordinate");
  }
  if (!(sample_bound > 0.0) || !std::isfinite(sample_bound)) throw std::invalid_argument("sample bound b_s must be positive");
  if (!(numeric_slack > 0.0) || !std::isfinite(numeric_slack)) throw std::invalid_argument("numeric slack b_eps must be positive");
}

namespace {

constexpr double kTargetGap = 1e-8;
// Centering accepted when rounding noise stalls Newton with a decrement this small.
constexpr double kStallDecrement = 1e-6;
constexpr int kMaxNewtonPerCentering = 100;
constexpr int kMaxOuter = 40;

// Barrier problem in coordinates normalized to unit radius around the
// enclosing-ball center: min s * c.x - sum log(1 - |x - q_i|^2).
class Barrier {
 public:
  Barrier(const Vec3& c, std::span<const Vec3> q) : c_(c), q_(q) {}

  bool strictly_feasible(const Vec3& x) const {
    for (const Vec3& qi : q_) {
      if (!(1.0 - (x - qi).squaredNorm() > 0.0)) return false;
    }
    return true;
  }

  // Returns (gradient, hessian) at x for barrier weight s.
  void derivatives(const Vec3& x, double s, Vec3& grad, Mat3& hess) const {
    grad = s * c_;
    hess.setZero();
    for (const Vec3& qi : q_) {
      const Vec3 d = x - qi;
      const double g = 1.0 - d.squaredNorm();
      grad += 2.0 * d / g;
      hess += (2.0 / g) * Mat3::Identity() + (4.0 / (g * g)) * d * d.transpose();
    }
  }

  // phi(x + step) - phi(x), evaluated without forming the large absolute values.
  double delta(const Vec3& x, const Vec3& step, double s) const {
    double sum = s * c_.dot(step);
    for (const Vec3& qi : q_) {
      const double g0 = 1.0 - (x - qi).squaredNorm();
      const double g1 = 1.0 - (x + step - qi).squaredNorm();
      sum -= std::log(g1 / g0);
    }
    return sum;
  }

 private:
  Vec3 c_;
  std::span<const Vec3> q_;
};

}  // namespace

SocpSolution socp_min(const Vec3& direction, std::span<const Vec3> centers, double radius) {
  if (centers.empty()) throw std::invalid_argument("socp_min: no constraints");
  if (!(radius > 0.0)) throw std::invalid_argument("socp_min: radius must be positive");

  // Phase 1: minimizing the largest constraint violation max_i |t - c_i| - radius
  // is exactly the minimum enclosing ball of the centers.
  const BoundingSphere ball = min_enclosing_sphere(centers);
  const double violation = ball.radius - radius;
  if (violation > kInfeasibilityTolerance) {
    std::ostringstream msg;
    msg << "measurements inconsistent with fixture radius (ball intersection empty, violation "
        << violation << " m)";
    throw InfeasibleError(msg.str());
  }
  if (!(violation < -1e-12 * radius)) throw NotConvergedError("ball intersection has no interior");

  std::vector<Vec3> q;
  q.reserve(centers.size());
  for (const Vec3& p : centers) q.push_back((p - ball.center) / radius);
  const Vec3 c = direction.normalized();
  const Barrier barrier(c, q);
  const double m = static_cast<double>(q.size());

  Vec3 x = Vec3::Zero();
  double s = m;  // initial gap bound m/s == 1 (the unit radius)
  int steps = 0;
  for (int outer = 0; outer < kMaxOuter; ++outer) {
    bool centered = false;
    double decrement2 = 0.0;
    for (int it = 0; it < kMaxNewtonPerCentering; ++it) {
      Vec3 grad;
      Mat3 hess;
      barrier.derivatives(x, s, grad, hess);
      const Vec3 dx = -hess.ldlt().solve(grad);
      decrement2 = -grad.dot(dx);
      if (!std::isfinite(decrement2)) throw NotConvergedError("socp_min: non-finite Newton step");
      if (decrement2 <= 1e-12) {
        centered = true;
        break;
      }
      double t = 1.0;
      while (!barrier.strictly_feasible(x + t * dx) && t > 1e-20) t *= 0.5;
      while (barrier.delta(x, t * dx, s) > 0.25 * t * grad.dot(dx) && t > 1e-20) t *= 0.5;
      if (t <= 1e-20) break;
      x += t * dx;
      ++steps;
    }
    centered = centered || decrement2 <= kStallDecrement;
    if (!centered) throw NotConvergedError("socp_min: centering did not converge");
    const double gap = 2.0 * m / s * radius;
    if (gap < kTargetGap) return SocpSolution{ball.center + radius * x, gap, steps};
    s *= 10.0;
  }
  throw NotConvergedError("socp_min: iteration cap reached");
}

PositionAABB feasible_aabb(const MeasurementSet& meas, double fixture_radius) {
  meas.validate();
  const double r = fixture_radius + meas.sample_bound;
  const std::span<const Vec3> centers(meas.points);

  PositionAABB box;
  try {
    for (int axis = 0; axis < 3; ++axis) {
      const Vec3 e = Vec3::Unit(axis);
      const SocpSolution lo = socp_min(e, centers, r);
      const SocpSolution hi = socp_min(-e, centers, r);
      box.min[axis] = lo.point[axis] - lo.gap_bound - kAabbFaceSlack;
      box.max[axis] = hi.point[axis] + hi.gap_bound + kAabbFaceSlack;
    }
  } catch (const NotConvergedError& e) {
    // Every feasible t satisfies max_i |t - p_i|^2 >= rho^2 + |t - c|^2 for the
    // enclosing ball (c, rho) of the points, so T lies in ball(c, sqrt(r^2 - rho^2)).
    warn(std::string("initial bound falls back to enclosing-ball box: ") + e.what());
    const BoundingSphere ball = min_enclosing_sphere(centers);
    const double half = std::sqrt(std::max(r * r - ball.radius * ball.radius, 0.0)) + kAabbFaceSlack;
    box.min = ball.center.array() - half;
    box.max = ball.center.array() + half;
    box.used_fallback = true;
  }
  return box;
}

}  // namespace fixpose
