#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "fixpose/pose_distribution.hpp"
#include "fixpose/pose_search.hpp"
#include "fixpose/simulation.hpp"
#include "oracles.hpp"

using namespace fixpose;

namespace {

SearchConfig config(std::size_t budget = 200'000) {
  SearchConfig c;
  c.cell_budget = budget;
  c.table_cache = oracle::table_cache();
  return c;
}

SimulationTrial trial(Primitive kind, std::uint64_t seed, bool noiseless = false) {
  SimulationSpec spec;
  spec.primitive = kind;
  spec.seed = seed;
  spec.noiseless = noiseless;
  return run_trial(spec);
}

std::shared_ptr<const SearchContext> context_for(const SimulationTrial& t, const SearchConfig& c) {
  return std::make_shared<const SearchContext>(t.mesh, t.measurements, c, oracle::table());
}

// Ground truth expressed for the centered fixture frame used by the search.
Pose centered_truth(const SimulationTrial& t, const SearchContext& ctx) {
  return Pose{t.ground_truth.rotation, t.ground_truth.translation + t.ground_truth.rotation * ctx.mesh_center()};
}

CellKey key_of(const SearchContext& ctx, const Pose& pose, int pos_level, int rot_level) {
  const RotationCell r = rotation_cell_of(pose.rotation, rot_level);
  return CellKey{ctx.grid().index_of(pos_level, pose.translation), r.tilt, r.pixel};
}

bool contains(const PoseSuperset& s, const CellKey& key) {
  return std::find(s.frontier.begin(), s.frontier.end(), key) != s.frontier.end();
}

double worst_distance(const SearchContext& ctx, const Pose& pose) {
  double worst = 0.0;
  for (const Vec3& p : ctx.measurements().points) worst = std::max(worst, ctx.surface_distance(pose.apply_inverse(p)));
  return worst;
}

}  // namespace

TEST(SearchContext, TotalBoundIsSumOfTerms) {
  const auto t = trial(Primitive::kMembrane, 1);
  const auto ctx = context_for(t, config());
  const double l0 = ctx->grid().l0;
  const double gamma0 = ctx->table().gamma[0];
  for (std::size_t i = 0; i < ctx->sample_count(); ++i) {
    const double d = (t.measurements.points[i] - ctx->aabb().center()).norm();
    EXPECT_NEAR(ctx->sample_distance(i), d, 1e-15);
    const double b_p = std::sqrt(3.0) * l0 / 2.0;
    const double b_r = (d + ctx->b_t()) * std::sqrt(2.0 - 2.0 * std::cos(gamma0));
    const double expected = b_p + b_r + t.measurements.sample_bound + t.measurements.numeric_slack;
    EXPECT_NEAR(ctx->cell_total_bound(0, 0, i), expected, 1e-14);
  }
  EXPECT_NEAR(ctx->b_t(), 0.5 * (ctx->aabb().max - ctx->aabb().min).norm(), 1e-15);
  EXPECT_EQ(l0, (ctx->aabb().max - ctx->aabb().min).maxCoeff());
}

TEST(SearchContext, TotalBoundLimitAndAdditivity) {
  const auto t = trial(Primitive::kMembrane, 2);
  const auto ctx = context_for(t, config());
  const std::size_t i = 0;
  const double discretization = ctx->b_p(20) + ctx->b_r(10, i);
  EXPECT_NEAR(ctx->cell_total_bound(20, 10, i) - discretization,
              t.measurements.sample_bound + t.measurements.numeric_slack, 1e-15);
  MeasurementSet doubled = t.measurements;
  doubled.sample_bound *= 2.0;
  const SearchContext wide(t.mesh, doubled, config(), oracle::table());
  for (std::size_t k = 0; k < wide.sample_count(); ++k) {
    EXPECT_NEAR(wide.cell_total_bound(3, 2, k) - wide.b_p(3) - wide.b_r(2, k),
                ctx->cell_total_bound(3, 2, k) - ctx->b_p(3) - ctx->b_r(2, k) + t.measurements.sample_bound, 1e-15);
  }
}

TEST(SearchContext, RejectsInvalidConfiguration) {
  const auto t = trial(Primitive::kMembrane, 3);
  auto bad = config();
  bad.cell_budget = 10;
  EXPECT_THROW(SearchContext(t.mesh, t.measurements, bad), std::invalid_argument);
  bad = config();
  bad.max_pos_level = 21;
  EXPECT_THROW(SearchContext(t.mesh, t.measurements, bad), std::invalid_argument);
  bad = config();
  bad.stop_fraction = 0.0;
  EXPECT_THROW(SearchContext(t.mesh, t.measurements, bad), std::invalid_argument);
}

TEST(RejectCell, KeepsCellOfTruePose) {
  const auto t = trial(Primitive::kMembrane, 4, true);
  const auto ctx = context_for(t, config());
  const Pose truth = centered_truth(t, *ctx);
  EXPECT_LT(worst_distance(*ctx, truth), 1e-12);
  for (int pl = 0; pl <= 6; ++pl) {
    for (int rl = 0; rl <= 6; ++rl) EXPECT_FALSE(ctx->reject_cell(key_of(*ctx, truth, pl, rl), pl, rl)) << pl << "," << rl;
  }
}

TEST(RejectCell, FarDisplacementExceedsEveryBound) {
  const auto t = trial(Primitive::kMembrane, 5);
  const auto ctx = context_for(t, config());
  const Pose truth = centered_truth(t, *ctx);
  double worst_bound = 0.0;
  for (std::size_t i = 0; i < ctx->sample_count(); ++i) worst_bound = std::max(worst_bound, ctx->cell_total_bound(0, 0, i));
  Pose displaced = truth;
  displaced.translation.x() += 10.0 * (worst_bound + ctx->fixture_radius());
  EXPECT_GT(worst_distance(*ctx, displaced), worst_bound);
  // Lattice cells far from every feasible position are rejected at fine levels.
  const int pl = 6, rl = 4;
  const RotationCell flipped = rotation_cell_of(truth.rotation * Quat(Eigen::AngleAxisd(M_PI, Vec3::UnitX())), rl);
  int rejected = 0;
  for (std::uint32_t c = 0; c < 8; ++c) {
    const std::uint32_t n = (1u << pl) - 1;
    const std::array<std::uint32_t, 3> corner{c & 1u ? n : 0u, c & 2u ? n : 0u, c & 4u ? n : 0u};
    rejected += ctx->reject_cell(CellKey{corner, flipped.tilt, flipped.pixel}, pl, rl) ? 1 : 0;
  }
  EXPECT_EQ(rejected, 8);
}

TEST(RejectCell, RejectedCellsHoldNoFeasiblePose) {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0.0, 1.0), s(-1.0, 1.0);
  int rejected = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto t = trial(Primitive::kMembrane, 100 + seed);
    const auto ctx = context_for(t, config());
    const Pose truth = centered_truth(t, *ctx);
    const double b_s = t.measurements.sample_bound;
    for (int trial_cell = 0; trial_cell < 150; ++trial_cell) {
      const int pl = 3 + trial_cell % 3, rl = 2 + trial_cell % 2;
      Pose near = truth;
      near.rotation = truth.rotation * Quat(Eigen::AngleAxisd(0.25 * u(rng), Vec3(s(rng), s(rng), s(rng)).normalized()));
      near.translation += 0.02 * Vec3(s(rng), s(rng), s(rng));
      if (!ctx->aabb().contains(near.translation)) continue;
      const CellKey key = key_of(*ctx, near, pl, rl);
      if (!ctx->reject_cell(key, pl, rl)) continue;
      ++rejected;
      const PoseCell cell = ctx->cell(key, pl, rl);
      for (int k = 0; k < 40; ++k) {
        const Pose inside = pose_in_cell(cell, {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)});
        ASSERT_GT(worst_distance(*ctx, inside), b_s);
      }
    }
  }
  EXPECT_GT(rejected, 50);
}

TEST(RejectCell, CellsAroundTruePoseSurvive) {
  // Any cell containing the true pose (by construction the truth is feasible) survives,
  // including when the truth sits near a cell boundary.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto t = trial(Primitive::kMembrane, 200 + seed);
    const auto ctx = context_for(t, config());
    const Pose truth = centered_truth(t, *ctx);
    for (int pl = 0; pl <= 8; ++pl) {
      for (int rl = 0; rl <= 8; rl += 2) ASSERT_FALSE(ctx->reject_cell(key_of(*ctx, truth, pl, rl), pl, rl));
    }
  }
}

TEST(Expansion, ChoiceFollowsBoundComparison) {
  const auto t = trial(Primitive::kMembrane, 6);
  const auto ctx = context_for(t, config());
  PoseSuperset s = initial_superset(ctx);
  int expanded = 0;
  for (int step = 0; step < 6 && !s.empty(); ++step) {
    const double b_p = std::sqrt(3.0) * ctx->grid().l0 / std::pow(2.0, s.pos_level + 1);
    double max_b_r = 0.0;
    for (std::size_t i = 0; i < ctx->sample_count(); ++i) {
      max_b_r = std::max(max_b_r, ((t.measurements.points[i] - ctx->aabb().center()).norm() + ctx->b_t()) *
                                      std::sqrt(2.0 - 2.0 * std::cos(ctx->table().gamma[s.rot_level])));
    }
    const auto kind = next_expansion(s);
    ASSERT_TRUE(kind);
    EXPECT_EQ(*kind, max_b_r > b_p ? ExpansionKind::kRotation : ExpansionKind::kPosition);
    const PoseSuperset next = expand(s);
    if (next.budget_exhausted) break;
    ++expanded;
    if (*kind == ExpansionKind::kRotation) {
      EXPECT_EQ(next.rot_level, s.rot_level + 1);
      EXPECT_EQ(next.pos_level, s.pos_level);
    } else {
      EXPECT_EQ(next.pos_level, s.pos_level + 1);
      EXPECT_EQ(next.rot_level, s.rot_level);
    }
    s = next;
  }
  EXPECT_GE(expanded, 3);
}

TEST(Expansion, NoRejectionsMeansEightfold) {
  auto t = trial(Primitive::kMembrane, 7);
  t.measurements.sample_bound = 2.0;  // bounds so loose nothing can be rejected
  const auto ctx = context_for(t, config(1'000'000));
  const PoseSuperset s0 = initial_superset(ctx);
  ASSERT_EQ(s0.size(), 72u);
  const PoseSuperset s1 = expand(s0);
  EXPECT_EQ(s1.size(), 8u * 72u);
  const PoseSuperset s2 = expand(s1);
  EXPECT_EQ(s2.size(), 64u * 72u);
}

TEST(Expansion, BudgetRefusesExpansion) {
  auto t = trial(Primitive::kMembrane, 8);
  t.measurements.sample_bound = 2.0;
  const auto ctx = context_for(t, config(1000));
  const PoseSuperset s1 = expand(initial_superset(ctx));
  ASSERT_EQ(s1.size(), 576u);
  const PoseSuperset same = expand(s1);
  EXPECT_TRUE(same.budget_exhausted);
  EXPECT_EQ(same.frontier, s1.frontier);
  const PoseSuperset full = compute_superset(ctx);
  EXPECT_EQ(full.stop_reason, StopReason::kCellBudget);
}

TEST(Expansion, FrontierNests) {
  const auto t = trial(Primitive::kMembrane, 9);
  const auto ctx = context_for(t, config());
  std::vector<PoseSuperset> levels;
  compute_superset(ctx, [&](const PoseSuperset& s) { levels.push_back(s); });
  ASSERT_GT(levels.size(), 3u);
  for (std::size_t k = 1; k < levels.size(); ++k) {
    const auto& parent = levels[k - 1];
    const auto& child = levels[k];
    const bool rot = child.rot_level > parent.rot_level;
    std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t, std::uint64_t>> keys;
    for (const auto& c : parent.frontier) keys.insert({c.pos[0], c.pos[1], c.pos[2], c.tilt, c.pixel});
    for (const auto& c : child.frontier) {
      const auto up = rot ? std::make_tuple(c.pos[0], c.pos[1], c.pos[2], c.tilt / 2, c.pixel / 4)
                          : std::make_tuple(c.pos[0] / 2, c.pos[1] / 2, c.pos[2] / 2, c.tilt, c.pixel);
      ASSERT_TRUE(keys.count(up));
    }
  }
}

TEST(ComputeSuperset, NoiselessCubeKeepsTruthAtEveryLevel) {
  const auto t = trial(Primitive::kCube, 10, true);
  const auto ctx = context_for(t, config(2'000'000));
  const Pose truth = centered_truth(t, *ctx);
  int checked = 0;
  const PoseSuperset s = compute_superset(ctx, [&](const PoseSuperset& level) {
    ASSERT_FALSE(level.empty());
    EXPECT_TRUE(contains(level, key_of(*ctx, truth, level.pos_level, level.rot_level)));
    ++checked;
  });
  EXPECT_GT(checked, 4);
  EXPECT_TRUE(contains(s, key_of(*ctx, truth, s.pos_level, s.rot_level)));
}

TEST(ComputeSuperset, NoisyMembraneContainsTruthAndBoundsHold) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto t = trial(Primitive::kMembrane, 300 + seed);
    const auto ctx = context_for(t, config(500'000));
    const Pose truth = centered_truth(t, *ctx);
    const PoseSuperset s = compute_superset(ctx);
    EXPECT_TRUE(contains(s, key_of(*ctx, truth, s.pos_level, s.rot_level)));
    const BoundsReport b = point_estimate(s);
    EXPECT_LE((b.position_estimate - truth.translation).norm(), b.position_bound);
    EXPECT_LE(geodesic_angle(b.rotation_estimate, truth.rotation), b.rotation_bound);
    EXPECT_EQ(b.cell_count, s.size());
  }
}

TEST(ComputeSuperset, InconsistentSphereSamples) {
  const TriangleMesh mesh = builtin_primitive(Primitive::kMembrane);
  std::mt19937_64 rng(62);
  std::normal_distribution<double> g(0.0, 1.0);
  MeasurementSet far;
  for (int i = 0; i < 12; ++i) far.points.push_back(0.3 * Vec3(g(rng), g(rng), g(rng)).normalized());
  EXPECT_THROW(compute_superset(mesh, far, config()), InconsistentMeasurementsError);

  // Fits inside the ball intersection but no pose of the slab touches a sphere everywhere.
  MeasurementSet round;
  for (int i = 0; i < 30; ++i) round.points.push_back(0.11 * Vec3(g(rng), g(rng), g(rng)).normalized());
  EXPECT_THROW(compute_superset(mesh, round, config()), InconsistentMeasurementsError);
}

TEST(ComputeSuperset, Deterministic) {
  const auto t = trial(Primitive::kMembrane, 11);
  auto c1 = config();
  const PoseSuperset a = compute_superset(t.mesh, t.measurements, c1);
  const PoseSuperset b = compute_superset(t.mesh, t.measurements, c1);
  auto c3 = config();
  c3.threads = 3;
  const PoseSuperset c = compute_superset(t.mesh, t.measurements, c3);
  EXPECT_EQ(a.frontier, b.frontier);
  EXPECT_EQ(a.frontier, c.frontier);
  EXPECT_EQ(a.pos_level, c.pos_level);
  EXPECT_EQ(a.rot_level, c.rot_level);
}

TEST(ComputeSuperset, ConvergesUnderLooseStopFraction) {
  // With the default fraction ten points run out of budget first; a looser one is reachable.
  const auto t = trial(Primitive::kMembrane, 12);
  auto c = config(5'000'000);
  c.stop_fraction = 4.0;
  const PoseSuperset s = compute_superset(t.mesh, t.measurements, c);
  ASSERT_EQ(s.stop_reason, StopReason::kConverged);
  const auto ctx = s.context;
  const double b_s = t.measurements.sample_bound;
  EXPECT_LE(ctx->b_p(s.pos_level) + ctx->max_b_r(s.rot_level), 4.0 * b_s);
  // One level coarser would not have met the rule.
  ASSERT_GT(s.pos_level, 0);
  ASSERT_GT(s.rot_level, 0);
  const bool coarser_met = ctx->b_p(s.pos_level) + ctx->max_b_r(s.rot_level - 1) <= 4.0 * b_s &&
                           ctx->b_p(s.pos_level - 1) + ctx->max_b_r(s.rot_level) <= 4.0 * b_s;
  EXPECT_FALSE(coarser_met);
}

TEST(PointEstimate, SingleCell) {
  const auto t = trial(Primitive::kMembrane, 13);
  const auto ctx = context_for(t, config());
  PoseSuperset s;
  s.context = ctx;
  s.pos_level = 3;
  s.rot_level = 4;
  const CellKey key{{2, 5, 1}, 7, 100};
  s.frontier = {key};
  const BoundsReport b = point_estimate(s);
  const PoseCell cell = ctx->cell(key, 3, 4);
  EXPECT_LT((b.position_estimate - cell.position.center).norm(), 1e-12);
  EXPECT_NEAR(b.position_bound, std::sqrt(3.0) * cell.position.side / 2.0, 1e-12);
  EXPECT_LE(geodesic_angle(b.rotation_estimate, rotation_cell_center(cell.rotation)), 1e-9);
  EXPECT_NEAR(b.rotation_bound, ctx->table().gamma[4], 1e-9);
}

TEST(PointEstimate, TwoAdjacentCubes) {
  const auto t = trial(Primitive::kMembrane, 14);
  const auto ctx = context_for(t, config());
  PoseSuperset s;
  s.context = ctx;
  s.pos_level = 2;
  s.rot_level = 0;
  s.frontier = {CellKey{{1, 1, 1}, 0, 0}, CellKey{{2, 1, 1}, 0, 0}};
  const BoundsReport b = point_estimate(s);
  const double side = ctx->grid().side(2);
  const Vec3 face_center = ctx->grid().corner(2, {2, 1, 1}) + Vec3(0, 0.5 * side, 0.5 * side);
  EXPECT_LT((b.position_estimate - face_center).norm(), 1e-12);
  EXPECT_NEAR(b.position_bound, 0.5 * side * std::sqrt(6.0), 1e-12);
}

TEST(PointEstimate, MeshFrameConversion) {
  const Pose centered{Quat(Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized())), Vec3(0.1, 0.2, 0.3)};
  const Vec3 c(0.01, -0.02, 0.03);
  const Pose mesh_pose = to_mesh_frame(centered, c);
  // A fixture point x (mesh frame) sits at x - c in the centered frame.
  const Vec3 x(0.05, 0.06, -0.07);
  EXPECT_LT((mesh_pose.apply(x) - centered.apply(x - c)).norm(), 1e-15);
}
