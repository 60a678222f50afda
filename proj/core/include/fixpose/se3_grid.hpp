#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fixpose/geometry.hpp"

namespace fixpose {

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Positional octree
// ---------------------------------------------------------------------------

/// Cube of the positional octree. side = l0 / 2^level.
struct PositionCell {
  Vec3 center = Vec3::Zero();
  double side = 0.0;
  int level = 0;
};

/// Largest distance from a cube center to any point of the cube at `level`:
/// sqrt(3) * l0 / 2^(level + 1).
double position_bound(int level, double l0);

/// The eight children tiling `cell`, ordered by (x, y, z) bits of the child index.
std::array<PositionCell, 8> subdivide_position(const PositionCell& cell);

/// Integer addressing of the octree below a fixed root cube.
struct PositionGrid {
  Vec3 origin = Vec3::Zero();  ///< minimum corner of the root cube
  double l0 = 0.0;             ///< root cube side

  double side(int level) const;
  Vec3 center(int level, const std::array<std::uint32_t, 3>& index) const;
  Vec3 corner(int level, const std::array<std::uint32_t, 3>& lattice_point) const;
  PositionCell cell(int level, const std::array<std::uint32_t, 3>& index) const;
  /// Index of the cell containing p at `level` (p must lie inside the root cube).
  std::array<std::uint32_t, 3> index_of(int level, const Vec3& p) const;
};

// ---------------------------------------------------------------------------
// Rotational grid: HEALPix directions x tilt about the rotated z-axis
// ---------------------------------------------------------------------------

inline constexpr int kBaseTiltBins = 6;
inline constexpr int kMaxRotationLevel = 10;

/// One rotation cell. A rotation R belongs to the cell when its z-axis R*e_z
/// lies in HEALPix pixel `pixel` and its tilt relative to the direction frame
/// (see direction_frame) lies in tilt bin `tilt`.
struct RotationCell {
  int level = 0;
  std::uint64_t pixel = 0;
  std::uint32_t tilt = 0;

  friend bool operator==(const RotationCell&, const RotationCell&) = default;
};

constexpr std::uint32_t tilt_bins(int level) { return static_cast<std::uint32_t>(kBaseTiltBins) << level; }
double tilt_resolution(int level);

/// Frame field over the sphere: a rotation mapping e_z onto `dir`, obtained by
/// parallel transport from the center of base face `face` (which contains dir).
Mat3 direction_frame(int face, const Vec3& dir);

/// Signed tilt of `frame_b` relative to `frame_a` transported along the geodesic
/// between their z-axes: frame_b = M(a->b) frame_a R_z(twist).
double frame_twist(const Mat3& frame_a, const Mat3& frame_b);

/// Area of the spherical triangle (a, b, c) of unit vectors.
double spherical_excess(const Vec3& a, const Vec3& b, const Vec3& c);

std::vector<RotationCell> base_rotation_cells();  // 72 cells at level 0
Quat rotation_cell_center(const RotationCell& cell);
/// Rotation at in-cell coordinates (u, v, w) in [0,1]^3: (u, v) within the pixel,
/// w along the tilt bin. Uniform (u, v, w) is uniform (Haar) within the cell.
Quat rotation_in_cell(const RotationCell& cell, double u, double v, double w);
RotationCell rotation_cell_of(const Quat& q, int level);
/// Tilt of q about its own z-axis relative to the direction frame, in [0, 2pi).
double tilt_angle(const Quat& q);
std::array<RotationCell, 8> subdivide_rotation(const RotationCell& cell, int max_level = kMaxRotationLevel);

/// Maximum geodesic angle between R_x(a) R_z(b) and the identity over
/// a in [0, theta], b in [0, phi].
double gamma_bound(double theta, double phi);

/// Point displacement bound from rotation discretization:
/// (sample_dist + b_t) * sqrt(2 - 2 cos(gamma)).
double rotation_point_bound(double gamma, double sample_dist, double b_t);

/// Per-level rotation discretization bounds.
///  theta: max center-to-boundary angle over all HEALPix pixels (x safety factor)
///  phi:   half tilt-bin width
///  twist: max tilt drift of the frame field inside a pixel (x safety factor)
///  gamma: gamma_bound(theta, phi + twist)
struct RotationBoundTable {
  double safety_factor = 1.01;
  std::vector<double> theta;
  std::vector<double> phi;
  std::vector<double> twist;
  std::vector<double> gamma;

  int max_level() const { return static_cast<int>(gamma.size()) - 1; }

  static RotationBoundTable compute(int max_level, double safety_factor = 1.01, int level0_edge_samples = 2500);

  std::string to_json() const;
  static RotationBoundTable from_json(const std::string& text);
};

/// Boundary-sampling maxima for one level without the safety factor.
struct PixelExtent {
  double max_angle = 0.0;
  double max_twist = 0.0;
};
PixelExtent measure_pixel_extent(int level, int edge_samples);

/// Process-wide table for (max_level, safety_factor), computed once. When
/// `cache_dir` is given the table is read from / written to a JSON file there.
std::shared_ptr<const RotationBoundTable> shared_rotation_bound_table(
    int max_level, double safety_factor = 1.01, const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

// ---------------------------------------------------------------------------
// SE(3) cells
// ---------------------------------------------------------------------------

struct PoseCell {
  PositionCell position;
  RotationCell rotation;

  Pose center_pose() const { return Pose{rotation_cell_center(rotation), position.center}; }
};

}  // namespace fixpose
