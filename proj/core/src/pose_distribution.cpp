#include "fixpose/pose_distribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "fixpose/log.hpp"
#include "fixpose/tip_calibration.hpp"
#include "parallel.hpp"
#include "seeding.hpp"

namespace fixpose {

double relative_log_likelihood(const Pose& pose, std::span<const Vec3> points, const DistanceIndex& index,
                               double sigma, double probe_radius) {
  if (!(sigma > 0.0)) throw std::invalid_argument("likelihood sigma must be positive");
  const Mat3 inv = pose.rotation.conjugate().toRotationMatrix();
  double sum = 0.0;
  for (const Vec3& p : points) {
    const Vec3 q = inv * (p - pose.translation);
    const double d = probe_radius > 0.0 ? offset_distance(index, q, probe_radius) : index.closest_point(q).distance;
    sum += d * d;
  }
  return -sum / (2.0 * sigma * sigma);
}

Pose pose_in_cell(const PoseCell& cell, const std::array<double, 6>& u) {
  const double s = cell.position.side;
  const Vec3 t = cell.position.center + s * Vec3(u[0] - 0.5, u[1] - 0.5, u[2] - 0.5);
  return Pose{rotation_in_cell(cell.rotation, u[3], u[4], u[5]), t};
}

std::vector<Pose> stratified_samples(const PoseSuperset& superset, int k, std::uint64_t seed,
                                     std::span<const std::size_t> cells) {
  if (k < 1) throw std::invalid_argument("samples per cell must be at least 1");
  const std::size_t n = cells.empty() ? superset.size() : cells.size();
  std::vector<Pose> out(n * static_cast<std::size_t>(k));
  const unsigned threads = superset.context ? superset.context->config().threads : 1u;
  detail::parallel_chunks(n, threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads,
                          [&](std::size_t begin, std::size_t end, unsigned) {
                            std::uniform_real_distribution<double> unit(0.0, 1.0);
                            for (std::size_t j = begin; j < end; ++j) {
                              const std::size_t cell_index = cells.empty() ? j : cells[j];
                              std::mt19937_64 rng(detail::stream_seed(seed, cell_index));
                              const PoseCell cell = superset.cell(cell_index);
                              for (int s = 0; s < k; ++s) {
                                std::array<double, 6> u;
                                for (double& x : u) x = unit(rng);
                                out[j * static_cast<std::size_t>(k) + static_cast<std::size_t>(s)] = pose_in_cell(cell, u);
                              }
                            }
                          });
  return out;
}

DiscretePoseDistribution normalize(std::span<const Pose> samples, std::span<const double> log_likelihoods) {
  if (samples.size() != log_likelihoods.size()) throw std::invalid_argument("normalize: length mismatch");
  if (samples.empty()) throw std::invalid_argument("normalize: no samples");
  DiscretePoseDistribution dist;
  dist.samples.resize(samples.size());

  double top = -std::numeric_limits<double>::infinity();
  for (double l : log_likelihoods) {
    if (std::isfinite(l)) top = std::max(top, l);
  }
  if (!std::isfinite(top)) {
    warn("all pose likelihoods underflowed; using a uniform distribution");
    const double p = 1.0 / static_cast<double>(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) dist.samples[i] = {samples[i], p};
    return dist;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double l = log_likelihoods[i];
    const double w = std::isfinite(l) ? std::exp(l - top) : 0.0;
    dist.samples[i] = {samples[i], w};
    total += w;
  }
  for (auto& s : dist.samples) s.probability /= total;
  return dist;
}

Pose expected_pose(const DiscretePoseDistribution& dist) {
  if (dist.samples.empty()) throw std::invalid_argument("expected_pose: empty distribution");
  const auto best = std::max_element(dist.samples.begin(), dist.samples.end(),
                                     [](const WeightedPose& a, const WeightedPose& b) { return a.probability < b.probability; });
  const Quat reference = best->pose.rotation;
  Vec3 t = Vec3::Zero();
  Vec4 q = Vec4::Zero();
  for (const auto& s : dist.samples) {
    t += s.probability * s.pose.translation;
    q += s.probability * quat_to_vec(align_hemisphere(s.pose.rotation, reference));
  }
  if (q.norm() < 1e-6) throw RotationAmbiguityError("rotation ambiguity too large for expected pose");
  return Pose{vec_to_quat(q.normalized()), t};
}

namespace {

double mass_radius(std::vector<std::pair<double, double>>& dist_mass, double level) {
  std::sort(dist_mass.begin(), dist_mass.end());
  double acc = 0.0;
  for (const auto& [d, p] : dist_mass) {
    acc += p;
    if (acc >= level) return d;
  }
  // Rounding left the total a hair below 1.
  return dist_mass.empty() ? 0.0 : dist_mass.back().first;
}

}  // namespace

ConfidenceReport confidence_intervals(const DiscretePoseDistribution& dist, const Pose& expected,
                                      std::span<const double> levels) {
  ConfidenceReport report;
  report.expected = expected;
  std::vector<std::pair<double, double>> pos, rot;
  pos.reserve(dist.samples.size());
  rot.reserve(dist.samples.size());
  for (const auto& s : dist.samples) {
    pos.emplace_back((s.pose.translation - expected.translation).norm(), s.probability);
    rot.emplace_back(geodesic_angle(s.pose.rotation, expected.rotation), s.probability);
  }
  for (double level : levels) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0, 1)");
    report.levels.push_back({level, mass_radius(pos, level), mass_radius(rot, level)});
  }
  return report;
}

DiscretePoseDistribution estimate_distribution(const PoseSuperset& superset, const DistributionConfig& config) {
  if (superset.empty()) throw InconsistentMeasurementsError("cannot build a distribution over an empty superset");
  if (config.k_per_cell < 1 || config.max_samples < 1) throw std::invalid_argument("invalid distribution sample counts");
  const SearchContext& ctx = *superset.context;
  const double sigma = config.sigma > 0.0 ? config.sigma : config.sigma_factor * ctx.measurements().sample_bound;
  if (!(sigma > 0.0)) throw std::invalid_argument("likelihood sigma must be positive");

  const std::size_t cells = superset.size();
  std::vector<std::size_t> subset;
  int k = config.k_per_cell;
  if (cells > config.max_samples) {
    k = 1;
    std::vector<std::size_t> all(cells);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::mt19937_64 rng(detail::stream_seed(config.seed, ~std::uint64_t{0}));
    for (std::size_t i = 0; i < config.max_samples; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, cells - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    subset.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(config.max_samples));
    std::sort(subset.begin(), subset.end());
  } else {
    k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(k), config.max_samples / cells));
  }

  const std::vector<Pose> poses = stratified_samples(superset, k, config.seed, subset);
  std::vector<double> loglik(poses.size());
  const auto& points = ctx.measurements().points;
  const unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  detail::parallel_chunks(poses.size(), threads, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t i = begin; i < end; ++i) {
      loglik[i] = relative_log_likelihood(poses[i], points, ctx.index(), sigma, ctx.config().probe_radius);
    }
  });

  DiscretePoseDistribution dist = normalize(poses, loglik);
  dist.sigma = sigma;
  dist.k_per_cell = k;
  dist.cells_sampled = subset.empty() ? cells : subset.size();
  return dist;
}

}  // namespace fixpose
