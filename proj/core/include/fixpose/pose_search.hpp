#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fixpose/distance_index.hpp"
#include "fixpose/enclosing_ball.hpp"
#include "fixpose/init_bound.hpp"
#include "fixpose/mesh.hpp"
#include "fixpose/se3_grid.hpp"

namespace fixpose {

/// No pose can bring every measurement within b_s of the surface.
class InconsistentMeasurementsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SearchConfig {
  std::size_t cell_budget = 10'000'000;
  double stop_fraction = 0.125;  ///< stop once b_p + max_i b_r^i <= stop_fraction * b_s
  int max_rot_level = kMaxRotationLevel;
  int max_pos_level = 20;
  double probe_radius = 0.0;     ///< ball-tip radius when measurements are ball centers
  unsigned threads = 1;
  std::optional<std::filesystem::path> table_cache;
};

/// Compact frontier entry; levels are shared by the whole frontier.
struct CellKey {
  std::array<std::uint32_t, 3> pos{};
  std::uint32_t tilt = 0;
  std::uint64_t pixel = 0;

  friend bool operator==(const CellKey&, const CellKey&) = default;
};

/// Read-only state shared by every stage of one search. The mesh is re-expressed
/// with its origin at the center of its minimum enclosing sphere; all poses
/// produced by the search refer to that centered frame.
class SearchContext {
 public:
  SearchContext(const TriangleMesh& mesh, MeasurementSet meas, SearchConfig config,
                std::shared_ptr<const RotationBoundTable> table = nullptr);

  const DistanceIndex& index() const { return *index_; }
  const MeasurementSet& measurements() const { return meas_; }
  const SearchConfig& config() const { return config_; }
  const RotationBoundTable& table() const { return *table_; }
  std::shared_ptr<const RotationBoundTable> table_ptr() const { return table_; }
  const PositionAABB& aabb() const { return aabb_; }
  const PositionGrid& grid() const { return grid_; }
  const Vec3& mesh_center() const { return mesh_center_; }
  double fixture_radius() const { return fixture_radius_; }
  double b_t() const { return b_t_; }
  std::size_t sample_count() const { return meas_.points.size(); }
  double sample_distance(std::size_t i) const { return sample_dist_[i]; }

  double b_p(int pos_level) const;
  double b_r(int rot_level, std::size_t i) const;
  double max_b_r(int rot_level) const;
  /// b^i = b_p + b_r^i + b_s + b_eps.
  double cell_total_bound(int pos_level, int rot_level, std::size_t i) const;

  /// Distance from a fixture-frame point to the (probe-offset) surface.
  double surface_distance(const Vec3& q) const;
  /// surface_distance(q) <= bound, with early exit.
  bool within(const Vec3& q, double bound) const;

  PoseCell cell(const CellKey& key, int pos_level, int rot_level) const;
  Pose cell_pose(const CellKey& key, int pos_level, int rot_level) const;

  /// True iff some measurement, mapped into the fixture frame by the inverse of
  /// the cell-center pose, lies farther than b^i from the surface. Position
  /// cubes disjoint from the feasible AABB are rejected outright.
  bool reject_cell(const CellKey& key, int pos_level, int rot_level) const;

 private:
  TriangleMesh centered_mesh_;
  std::unique_ptr<DistanceIndex> index_;
  MeasurementSet meas_;
  SearchConfig config_;
  std::shared_ptr<const RotationBoundTable> table_;
  Vec3 mesh_center_;
  double fixture_radius_ = 0.0;
  PositionAABB aabb_;
  PositionGrid grid_;
  double b_t_ = 0.0;
  std::vector<double> sample_dist_;
};

enum class StopReason { kConverged, kCellBudget, kMaxLevel, kNotStopped };

/// Live frontier of unrejected cells, all at (pos_level, rot_level).
struct PoseSuperset {
  std::shared_ptr<const SearchContext> context;
  std::vector<CellKey> frontier;
  int pos_level = 0;
  int rot_level = 0;
  bool budget_exhausted = false;
  StopReason stop_reason = StopReason::kNotStopped;

  std::size_t size() const { return frontier.size(); }
  bool empty() const { return frontier.empty(); }
  double l0() const { return context->grid().l0; }
  const RotationBoundTable& bound_table() const { return context->table(); }
  double gamma() const { return context->table().gamma[rot_level]; }
  PoseCell cell(std::size_t i) const { return context->cell(frontier[i], pos_level, rot_level); }
  Pose cell_pose(std::size_t i) const { return context->cell_pose(frontier[i], pos_level, rot_level); }
};

/// Root cube x 72 base rotations, filtered by the rejection test.
PoseSuperset initial_superset(std::shared_ptr<const SearchContext> context);

enum class ExpansionKind { kPosition, kRotation };

/// Which grid part the next expansion refines: rotation when max_i b_r^i > b_p,
/// position otherwise (including ties). Empty when both parts are at their
/// maximum level.
std::optional<ExpansionKind> next_expansion(const PoseSuperset& superset);

/// Subdivides every frontier cell along `next_expansion` and filters the
/// children. If 8x the frontier would exceed the cell budget the superset is
/// returned unchanged with budget_exhausted set.
PoseSuperset expand(const PoseSuperset& superset);

using ProgressCallback = std::function<void(const PoseSuperset&)>;

/// Full search: initial bound, level-(0,0) grid, then alternate expansion and
/// rejection until converged, out of budget, or at maximum levels.
/// Throws InconsistentMeasurementsError if the frontier empties.
PoseSuperset compute_superset(std::shared_ptr<const SearchContext> context, const ProgressCallback& progress = {});
PoseSuperset compute_superset(const TriangleMesh& mesh, const MeasurementSet& meas, const SearchConfig& config,
                              const ProgressCallback& progress = {});

/// Point estimate with guaranteed bounds for the centered fixture frame.
struct BoundsReport {
  Vec3 position_estimate = Vec3::Zero();
  double position_bound = 0.0;  ///< meters
  Quat rotation_estimate = Quat::Identity();
  double rotation_bound = 0.0;  ///< radians
  std::size_t cell_count = 0;
  int pos_level = 0;
  int rot_level = 0;
};

BoundsReport point_estimate(const PoseSuperset& superset);

/// Pose of the mesh's own origin given a pose of the centered frame.
Pose to_mesh_frame(const Pose& centered_pose, const Vec3& mesh_center);

/// Unique rotation cells of the frontier, sorted by (pixel, tilt).
std::vector<RotationCell> unique_rotation_cells(const PoseSuperset& superset);

}  // namespace fixpose
