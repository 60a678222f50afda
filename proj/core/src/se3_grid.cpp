#include "fixpose/se3_grid.hpp"

#include <algorithm>
#include <cmath>

#include "fixpose/healpix.hpp"

namespace fixpose {

double position_bound(int level, double l0) { return std::sqrt(3.0) * l0 / std::ldexp(1.0, level + 1); }

std::array<PositionCell, 8> subdivide_position(const PositionCell& cell) {
  std::array<PositionCell, 8> out;
  const double q = 0.25 * cell.side;
  for (int c = 0; c < 8; ++c) {
    const Vec3 offset((c & 1) ? q : -q, (c & 2) ? q : -q, (c & 4) ? q : -q);
    out[c] = PositionCell{cell.center + offset, 0.5 * cell.side, cell.level + 1};
  }
  return out;
}

double PositionGrid::side(int level) const { return std::ldexp(l0, -level); }

Vec3 PositionGrid::center(int level, const std::array<std::uint32_t, 3>& index) const {
  const double s = side(level);
  return origin + s * Vec3(index[0] + 0.5, index[1] + 0.5, index[2] + 0.5);
}

Vec3 PositionGrid::corner(int level, const std::array<std::uint32_t, 3>& lattice_point) const {
  const double s = side(level);
  return origin + s * Vec3(lattice_point[0], lattice_point[1], lattice_point[2]);
}

PositionCell PositionGrid::cell(int level, const std::array<std::uint32_t, 3>& index) const {
  return PositionCell{center(level, index), side(level), level};
}

std::array<std::uint32_t, 3> PositionGrid::index_of(int level, const Vec3& p) const {
  const double s = side(level);
  const double last = std::ldexp(1.0, level) - 1.0;
  std::array<std::uint32_t, 3> idx{};
  for (int k = 0; k < 3; ++k) {
    const double f = std::floor((p[k] - origin[k]) / s);
    idx[k] = static_cast<std::uint32_t>(std::clamp(f, 0.0, last));
  }
  return idx;
}

double tilt_resolution(int level) { return 2.0 * M_PI / tilt_bins(level); }

namespace {

const Mat3& face_frame(int face) {
  static const std::array<Mat3, healpix::kBaseFaces> frames = [] {
    std::array<Mat3, healpix::kBaseFaces> f;
    for (int i = 0; i < healpix::kBaseFaces; ++i) {
      f[i] = minimal_rotation(Vec3::UnitZ(), healpix::face_point(i, 0.5, 0.5));
    }
    return f;
  }();
  return frames[face];
}

const Vec3& face_center(int face) {
  static const std::array<Vec3, healpix::kBaseFaces> centers = [] {
    std::array<Vec3, healpix::kBaseFaces> c;
    for (int i = 0; i < healpix::kBaseFaces; ++i) c[i] = healpix::face_point(i, 0.5, 0.5);
    return c;
  }();
  return centers[face];
}

Mat3 rot_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

int face_of(const RotationCell& cell) { return static_cast<int>(cell.pixel >> (2 * cell.level)); }

void check_cell(const RotationCell& cell) {
  if (cell.level < 0 || cell.level > healpix::kMaxLevel) throw GridError("rotation cell level out of range");
  if (cell.pixel >= healpix::pixel_count(cell.level)) throw GridError("rotation cell pixel out of range");
  if (cell.tilt >= tilt_bins(cell.level)) throw GridError("rotation cell tilt index out of range");
}

}  // namespace

Mat3 direction_frame(int face, const Vec3& dir) {
  return minimal_rotation(face_center(face), dir) * face_frame(face);
}

double frame_twist(const Mat3& frame_a, const Mat3& frame_b) {
  const Mat3 transported = minimal_rotation(frame_a.col(2), frame_b.col(2)) * frame_a;
  const Mat3 rel = transported.transpose() * frame_b;
  return std::atan2(rel(1, 0), rel(0, 0));
}

double spherical_excess(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double triple = a.dot(b.cross(c));
  const double denom = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(std::abs(triple), denom);
}

std::vector<RotationCell> base_rotation_cells() {
  std::vector<RotationCell> cells;
  cells.reserve(healpix::kBaseFaces * kBaseTiltBins);
  for (std::uint64_t p = 0; p < healpix::kBaseFaces; ++p) {
    for (std::uint32_t t = 0; t < tilt_bins(0); ++t) cells.push_back({0, p, t});
  }
  return cells;
}

Quat rotation_in_cell(const RotationCell& cell, double u, double v, double w) {
  check_cell(cell);
  const Vec3 dir = healpix::pixel_point(cell.level, cell.pixel, u, v);
  const double psi = (cell.tilt + w) * tilt_resolution(cell.level);
  return Quat(direction_frame(face_of(cell), dir) * rot_z(psi)).normalized();
}

Quat rotation_cell_center(const RotationCell& cell) { return rotation_in_cell(cell, 0.5, 0.5, 0.5); }

namespace {

double tilt_in_face(const Mat3& r, int face) {
  const Mat3 rel = direction_frame(face, r.col(2)).transpose() * r;
  const double psi = std::atan2(rel(1, 0), rel(0, 0));
  return psi < 0.0 ? psi + 2.0 * M_PI : psi;
}

}  // namespace

double tilt_angle(const Quat& q) {
  const Mat3 r = q.normalized().toRotationMatrix();
  const auto face = static_cast<int>(healpix::pixel_of(0, r.col(2)));
  return tilt_in_face(r, face);
}

RotationCell rotation_cell_of(const Quat& q, int level) {
  const Mat3 r = q.normalized().toRotationMatrix();
  RotationCell cell;
  cell.level = level;
  cell.pixel = healpix::pixel_of(level, r.col(2));
  const double psi = tilt_in_face(r, face_of(cell));
  const auto bins = tilt_bins(level);
  cell.tilt = std::min(bins - 1, static_cast<std::uint32_t>(psi / tilt_resolution(level)));
  return cell;
}

std::array<RotationCell, 8> subdivide_rotation(const RotationCell& cell, int max_level) {
  check_cell(cell);
  if (cell.level >= max_level) throw GridError("rotation grid maximum level exceeded");
  std::array<RotationCell, 8> out;
  for (int j = 0; j < 4; ++j) {
    for (int h = 0; h < 2; ++h) {
      out[2 * j + h] = RotationCell{cell.level + 1, 4 * cell.pixel + static_cast<std::uint64_t>(j), 2 * cell.tilt + static_cast<std::uint32_t>(h)};
    }
  }
  return out;
}

double gamma_bound(double theta, double phi) {
  // acos[(cb + ca cb + ca - 1) / 2] rewritten via 1 - cos x = 2 sin^2(x/2) so
  // that small cells keep full relative precision.
  const double ha = std::sin(0.5 * std::min(theta, M_PI));
  const double hb = std::sin(0.5 * std::min(phi, M_PI));
  const double sa = 2.0 * ha * ha;
  const double sb = 2.0 * hb * hb;
  const double one_minus_arg = sa + sb - 0.5 * sa * sb;
  return 2.0 * std::asin(std::sqrt(std::clamp(0.5 * one_minus_arg, 0.0, 1.0)));
}

double rotation_point_bound(double gamma, double sample_dist, double b_t) {
  return (sample_dist + b_t) * chord_factor(gamma);
}

}  // namespace fixpose
