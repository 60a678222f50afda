#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>

#include <Eigen/Core>

#include "fixpose/geometry.hpp"

namespace fixpose {

template <int Dim>
struct Ball {
  using Point = Eigen::Matrix<double, Dim, 1>;
  Point center = Point::Zero();
  double radius = 0.0;

  bool contains(const Point& p, double slack = 0.0) const { return (p - center).norm() <= radius + slack; }
};

using BoundingSphere = Ball<3>;

inline constexpr std::uint64_t kDefaultBallSeed = 0x5eedba11ULL;

/// Smallest ball enclosing `points` (randomized move-to-front Welzl). The
/// returned radius is the exact maximum distance from the computed center to
/// the input, so every point is enclosed. Deterministic for a fixed seed.
/// Throws std::invalid_argument on empty input.
template <int Dim>
Ball<Dim> min_enclosing_ball(std::span<const typename Ball<Dim>::Point> points,
                             std::uint64_t seed = kDefaultBallSeed);

BoundingSphere min_enclosing_sphere(std::span<const Vec3> points, std::uint64_t seed = kDefaultBallSeed);

extern template Ball<3> min_enclosing_ball<3>(std::span<const Ball<3>::Point>, std::uint64_t);
extern template Ball<4> min_enclosing_ball<4>(std::span<const Ball<4>::Point>, std::uint64_t);

}  // namespace fixpose
