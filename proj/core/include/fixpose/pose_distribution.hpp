#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "fixpose/distance_index.hpp"
#include "fixpose/geometry.hpp"
#include "fixpose/init_bound.hpp"
#include "fixpose/pose_search.hpp"

namespace fixpose {

/// The weighted quaternion mean is too close to zero to normalize.
class RotationAmbiguityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WeightedPose {
  Pose pose;
  double probability = 0.0;
};

struct DiscretePoseDistribution {
  std::vector<WeightedPose> samples;
  double sigma = 0.0;
  int k_per_cell = 0;
  std::size_t cells_sampled = 0;  ///< less than the frontier size only when the sample cap forced a subset
};

/// -sum_i d_i^2 / (2 sigma^2), d_i the distance of pose^-1 * p_i to the surface
/// (offset by probe_radius when positive).
double relative_log_likelihood(const Pose& pose, std::span<const Vec3> points, const DistanceIndex& index,
                               double sigma, double probe_radius = 0.0);

/// Uniform pose inside a cell from (u_x, u_y, u_z, u, v, w) in [0,1]^6.
Pose pose_in_cell(const PoseCell& cell, const std::array<double, 6>& u);

/// k poses per listed frontier cell (all cells when `cells` is empty), drawn
/// uniformly in the cell from a generator seeded by (seed, cell index).
std::vector<Pose> stratified_samples(const PoseSuperset& superset, int k, std::uint64_t seed,
                                     std::span<const std::size_t> cells = {});

/// Softmax of the log-likelihoods. If none is finite the result is uniform and a
/// warning is emitted.
DiscretePoseDistribution normalize(std::span<const Pose> samples, std::span<const double> log_likelihoods);

/// Probability-weighted translation mean and hemisphere-aligned quaternion mean
/// (reference: the most probable sample).
Pose expected_pose(const DiscretePoseDistribution& dist);

struct ConfidenceLevel {
  double level = 0.0;
  double position_radius = 0.0;  ///< meters
  double rotation_angle = 0.0;   ///< radians
};

struct ConfidenceReport {
  Pose expected;
  std::vector<ConfidenceLevel> levels;
};

/// Smallest radius (angle) around `expected` holding at least `level` of the mass.
ConfidenceReport confidence_intervals(const DiscretePoseDistribution& dist, const Pose& expected,
                                      std::span<const double> levels);

struct DistributionConfig {
  double sigma_factor = 0.3;  ///< sigma = sigma_factor * b_s unless sigma > 0
  double sigma = 0.0;
  int k_per_cell = 8;
  std::size_t max_samples = 1'000'000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

inline constexpr double kDefaultConfidenceLevels[] = {0.5, 0.9, 0.99};

/// Samples the superset, evaluates likelihoods and normalizes. k is reduced so
/// that cells * k <= max_samples; beyond max_samples cells a seeded random subset
/// of cells gets one sample each.
DiscretePoseDistribution estimate_distribution(const PoseSuperset& superset, const DistributionConfig& config);

}  // namespace fixpose
