#include "fixpose/enclosing_ball.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <vector>

#include <Eigen/LU>

namespace fixpose {
namespace {

template <int Dim>
class Welzl {
 public:
  using Point = typename Ball<Dim>::Point;

  explicit Welzl(std::vector<Point> pts) : pts_(std::move(pts)) {}

  Ball<Dim> solve() { return recurse(pts_.size(), 0); }

 private:
  // Smallest ball with all `nb` boundary points on its surface.
  Ball<Dim> circumball(int nb) const {
    Ball<Dim> b;
    if (nb == 0) {
      b.radius = -1.0;
      return b;
    }
    const Point& p0 = support_[0];
    if (nb == 1) {
      b.center = p0;
      return b;
    }
    const int m = nb - 1;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, Dim, Dim> a(m, m);
    Eigen::Matrix<double, Eigen::Dynamic, 1, 0, Dim, 1> rhs(m);
    std::array<Point, Dim + 1> q;
    for (int j = 0; j < m; ++j) q[j] = support_[j + 1] - p0;
    for (int j = 0; j < m; ++j) {
      for (int k = 0; k < m; ++k) a(j, k) = 2.0 * q[j].dot(q[k]);
      rhs(j) = q[j].squaredNorm();
    }
    const auto lambda = a.fullPivLu().solve(rhs).eval();
    b.center = p0;
    for (int j = 0; j < m; ++j) b.center += lambda(j) * q[j];
    double r = 0.0;
    for (int j = 0; j < nb; ++j) r = std::max(r, (support_[j] - b.center).norm());
    b.radius = r;
    return b;
  }

  static bool outside(const Ball<Dim>& b, const Point& p) {
    if (b.radius < 0.0) return true;
    const double r2 = b.radius * b.radius;
    return (p - b.center).squaredNorm() > r2 + 1e-13 * std::max(r2, 1e-30);
  }

  Ball<Dim> recurse(std::size_t n, int nb) {
    Ball<Dim> b = circumball(nb);
    if (nb == Dim + 1) return b;
    for (std::size_t i = 0; i < n; ++i) {
      if (!outside(b, pts_[i])) continue;
      support_[nb] = pts_[i];
      b = recurse(i, nb + 1);
      std::rotate(pts_.begin(), pts_.begin() + static_cast<std::ptrdiff_t>(i),
                  pts_.begin() + static_cast<std::ptrdiff_t>(i) + 1);
    }
    return b;
  }

  std::vector<Point> pts_;
  std::array<Point, Dim + 1> support_;
};

}  // namespace

template <int Dim>
Ball<Dim> min_enclosing_ball(std::span<const typename Ball<Dim>::Point> points, std::uint64_t seed) {
  if (points.empty()) throw std::invalid_argument("min_enclosing_ball: empty point set");
  std::vector<typename Ball<Dim>::Point> pts(points.begin(), points.end());
  std::mt19937_64 rng(seed);
  std::shuffle(pts.begin(), pts.end(), rng);

  Ball<Dim> ball = Welzl<Dim>(pts).solve();
  double r = 0.0;
  for (const auto& p : points) r = std::max(r, (p - ball.center).norm());
  ball.radius = r;
  return ball;
}

template Ball<3> min_enclosing_ball<3>(std::span<const Ball<3>::Point>, std::uint64_t);
template Ball<4> min_enclosing_ball<4>(std::span<const Ball<4>::Point>, std::uint64_t);

BoundingSphere min_enclosing_sphere(std::span<const Vec3> points, std::uint64_t seed) {
  return min_enclosing_ball<3>(points, seed);
}

}  // namespace fixpose
