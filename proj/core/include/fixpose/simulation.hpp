#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fixpose/geometry.hpp"
#include "fixpose/init_bound.hpp"
#include "fixpose/mesh.hpp"

namespace fixpose {

inline constexpr double kNormalizedFixtureRadius = 0.125;
inline constexpr int kRoundSegments = 64;

/// Built-in test objects. `membrane` is an asymmetric L-shaped slab with a
/// curved top, with no rotational symmetry.
enum class Primitive { kCube, kCone, kCylinder, kTetrahedron, kMembrane };

Primitive primitive_from_name(std::string_view name);
std::string to_string(Primitive p);

/// Watertight primitive normalized to a 0.125 m enclosing sphere.
TriangleMesh builtin_primitive(Primitive kind);

/// Recenters at the enclosing-sphere center and scales its radius to 0.125 m.
TriangleMesh normalize_mesh(const TriangleMesh& mesh);

/// Rotations S (about the origin of the normalized primitive) with S(mesh) = mesh.
/// Round primitives return `axial_copies` evenly spaced turns about z; the
/// cylinder additionally includes each turn composed with a half-turn about x.
std::vector<Quat> symmetry_rotations(Primitive kind, int axial_copies = 36);

/// Largest gap between a round primitive's true surface and its 64-segment
/// tessellation (chord sagitta); zero for polyhedral primitives.
double tessellation_slack(Primitive kind);

std::vector<Vec3> uniform_surface_samples(const TriangleMesh& mesh, std::size_t n, std::mt19937_64& rng);
std::vector<Vec3> uniform_surface_samples(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

/// Greedy max-min subsample of size m starting from points[start].
std::vector<Vec3> farthest_point_subsample_from(std::span<const Vec3> points, std::size_t m, std::size_t start);
/// Same, starting from a seeded random point.
std::vector<Vec3> farthest_point_subsample(std::span<const Vec3> points, std::size_t m, std::uint64_t seed);

/// e ~ N(0, (scale * b_s)^2 I) conditioned on |e| <= b_s, by rejection.
Vec3 truncated_noise(double sample_bound, double scale, std::mt19937_64& rng);
Vec3 truncated_noise(double sample_bound, double scale, std::uint64_t seed);

/// Uniform rotation and translation uniform in [-half_extent, half_extent]^3.
Pose random_pose(std::mt19937_64& rng, double half_extent = 0.25);

struct SimulationSpec {
  std::optional<Primitive> primitive = Primitive::kMembrane;
  std::optional<TriangleMesh> mesh;  ///< used instead of `primitive` when set; normalized before use
  std::size_t n_uniform = 1000;
  std::size_t n_samples = 10;
  double sample_bound = 1e-3;
  double noise_scale = 0.3;
  bool noiseless = false;
  std::optional<Pose> ground_truth;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SimulationTrial {
  TriangleMesh mesh;             ///< normalized fixture in its own frame
  Pose ground_truth;             ///< fixture frame -> base frame
  MeasurementSet measurements;   ///< base frame; numeric slack includes tessellation_slack
  std::vector<Vec3> noise;       ///< per measurement, already included in the points
  std::optional<Primitive> primitive;
};

/// Surface samples -> FPS -> ground-truth transform -> additive noise.
/// Fully determined by `spec`, including its seed.
SimulationTrial run_trial(const SimulationSpec& spec);

/// Seed of trial `index` in a batch driven by `master_seed`.
std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t index);

}  // namespace fixpose
