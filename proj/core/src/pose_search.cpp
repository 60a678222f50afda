#include "fixpose/pose_search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "fixpose/geometry.hpp"
#include "fixpose/log.hpp"
#include "parallel.hpp"

namespace fixpose {

namespace {

constexpr double kFixtureRadiusSlack = 1e-9;

unsigned worker_count(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Per-thread rejection state: measurement order with move-to-front on the
// rejecting sample, and the last rotation seen (frontier runs share rotations).
class Rejector {
 public:
  explicit Rejector(const SearchContext& ctx) : ctx_(ctx), order_(ctx.sample_count()) {
    std::iota(order_.begin(), order_.end(), 0u);
  }

  bool reject(const CellKey& key, int pos_level, int rot_level) {
    const PositionGrid& grid = ctx_.grid();
    const Vec3 t = grid.center(pos_level, key.pos);
    const double half = 0.5 * grid.side(pos_level);
    const PositionAABB& box = ctx_.aabb();
    if ((t.array() + half < box.min.array()).any() || (t.array() - half > box.max.array()).any()) return true;

    const RotationCell rc{rot_level, key.pixel, key.tilt};
    if (!has_rotation_ || !(rc == cached_cell_)) {
      cached_inverse_ = rotation_cell_center(rc).toRotationMatrix().transpose();
      cached_cell_ = rc;
      has_rotation_ = true;
    }

    const auto& points = ctx_.measurements().points;
    for (std::size_t k = 0; k < order_.size(); ++k) {
      const std::uint32_t i = order_[k];
      const Vec3 q = cached_inverse_ * (points[i] - t);
      if (!ctx_.within(q, ctx_.cell_total_bound(pos_level, rot_level, i))) {
        std::rotate(order_.begin(), order_.begin() + static_cast<std::ptrdiff_t>(k), order_.begin() + static_cast<std::ptrdiff_t>(k) + 1);
        return true;
      }
    }
    return false;
  }

 private:
  const SearchContext& ctx_;
  std::vector<std::uint32_t> order_;
  bool has_rotation_ = false;
  RotationCell cached_cell_;
  Mat3 cached_inverse_ = Mat3::Identity();
};

template <typename Generate>
std::vector<CellKey> filtered_children(const SearchContext& ctx, std::size_t parents, int pos_level, int rot_level,
                                       Generate&& generate) {
  const unsigned chunks = worker_count(ctx.config().threads);
  std::vector<std::vector<CellKey>> parts(std::max(1u, chunks));
  detail::parallel_chunks(parents, chunks, [&](std::size_t begin, std::size_t end, unsigned c) {
    Rejector rejector(ctx);
    auto& out = parts[c];
    for (std::size_t i = begin; i < end; ++i) {
      for (const CellKey& child : generate(i)) {
        if (!rejector.reject(child, pos_level, rot_level)) out.push_back(child);
      }
    }
  });
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  std::vector<CellKey> merged;
  merged.reserve(total);
  for (auto& p : parts) merged.insert(merged.end(), p.begin(), p.end());
  return merged;
}

int effective_max_rot_level(const SearchContext& ctx) {
  return std::min(ctx.config().max_rot_level, ctx.table().max_level());
}

}  // namespace

SearchContext::SearchContext(const TriangleMesh& mesh, MeasurementSet meas, SearchConfig config,
                             std::shared_ptr<const RotationBoundTable> table)
    : meas_(std::move(meas)), config_(std::move(config)), table_(std::move(table)) {
  validate(mesh);
  if (mesh.triangles.empty()) throw MeshError("fixture mesh has no triangles");
  meas_.validate();
  if (config_.max_rot_level < 0 || config_.max_rot_level > kMaxRotationLevel) {
    throw std::invalid_argument("max rotation level out of range");
  }
  if (config_.max_pos_level < 0 || config_.max_pos_level > 20) throw std::invalid_argument("max position level out of range");
  if (!(config_.stop_fraction > 0.0)) throw std::invalid_argument("stop fraction must be positive");
  if (!(config_.probe_radius >= 0.0)) throw std::invalid_argument("probe radius must be non-negative");
  if (config_.cell_budget < 72) throw std::invalid_argument("cell budget must admit the 72 base cells");

  const BoundingSphere sphere = min_enclosing_sphere(mesh.vertices);
  mesh_center_ = sphere.center;
  centered_mesh_ = transformed(mesh, 1.0, -mesh_center_);
  fixture_radius_ = sphere.radius + kFixtureRadiusSlack;
  index_ = std::make_unique<DistanceIndex>(centered_mesh_);

  if (!table_) table_ = shared_rotation_bound_table(config_.max_rot_level, 1.01, config_.table_cache);

  try {
    aabb_ = feasible_aabb(meas_, fixture_radius_ + config_.probe_radius);
  } catch (const InfeasibleError& e) {
    throw InconsistentMeasurementsError(e.what());
  }
  const Vec3 extent = aabb_.max - aabb_.min;
  grid_.l0 = extent.maxCoeff();
  grid_.origin = aabb_.center().array() - 0.5 * grid_.l0;
  b_t_ = aabb_.half_diagonal();

  sample_dist_.reserve(meas_.points.size());
  for (const Vec3& p : meas_.points) sample_dist_.push_back((p - aabb_.center()).norm());
}

double SearchContext::b_p(int pos_level) const { return position_bound(pos_level, grid_.l0); }

double SearchContext::b_r(int rot_level, std::size_t i) const {
  return rotation_point_bound(table_->gamma.at(static_cast<std::size_t>(rot_level)), sample_dist_[i], b_t_);
}

double SearchContext::max_b_r(int rot_level) const {
  const double d = *std::max_element(sample_dist_.begin(), sample_dist_.end());
  return rotation_point_bound(table_->gamma.at(static_cast<std::size_t>(rot_level)), d, b_t_);
}

double SearchContext::cell_total_bound(int pos_level, int rot_level, std::size_t i) const {
  return b_p(pos_level) + b_r(rot_level, i) + meas_.sample_bound + meas_.numeric_slack;
}

double SearchContext::surface_distance(const Vec3& q) const {
  const double d = index_->closest_point(q).distance;
  return config_.probe_radius > 0.0 ? std::abs(d - config_.probe_radius) : d;
}

bool SearchContext::within(const Vec3& q, double bound) const {
  if (config_.probe_radius > 0.0) {
    if (!index_->any_within(q, config_.probe_radius + bound)) return false;
    return surface_distance(q) <= bound;
  }
  return index_->any_within(q, bound);
}

PoseCell SearchContext::cell(const CellKey& key, int pos_level, int rot_level) const {
  return PoseCell{grid_.cell(pos_level, key.pos), RotationCell{rot_level, key.pixel, key.tilt}};
}

Pose SearchContext::cell_pose(const CellKey& key, int pos_level, int rot_level) const {
  return cell(key, pos_level, rot_level).center_pose();
}

bool SearchContext::reject_cell(const CellKey& key, int pos_level, int rot_level) const {
  Rejector rejector(*this);
  return rejector.reject(key, pos_level, rot_level);
}

PoseSuperset initial_superset(std::shared_ptr<const SearchContext> context) {
  PoseSuperset s;
  s.context = std::move(context);
  const auto base = base_rotation_cells();
  s.frontier = filtered_children(*s.context, base.size(), 0, 0, [&](std::size_t i) {
    return std::array<CellKey, 1>{CellKey{{0, 0, 0}, base[i].tilt, base[i].pixel}};
  });
  return s;
}

std::optional<ExpansionKind> next_expansion(const PoseSuperset& superset) {
  const SearchContext& ctx = *superset.context;
  const bool can_rot = superset.rot_level < effective_max_rot_level(ctx);
  const bool can_pos = superset.pos_level < ctx.config().max_pos_level;
  const bool prefer_rot = ctx.max_b_r(superset.rot_level) > ctx.b_p(superset.pos_level);
  if (prefer_rot && can_rot) return ExpansionKind::kRotation;
  if (can_pos) return ExpansionKind::kPosition;
  if (can_rot) return ExpansionKind::kRotation;
  return std::nullopt;
}

PoseSuperset expand(const PoseSuperset& superset) {
  const auto kind = next_expansion(superset);
  if (!kind) throw GridError("both grid parts are at their maximum level");
  const SearchContext& ctx = *superset.context;
  if (superset.frontier.size() > ctx.config().cell_budget / 8) {
    PoseSuperset same = superset;
    same.budget_exhausted = true;
    return same;
  }

  PoseSuperset next;
  next.context = superset.context;
  next.pos_level = superset.pos_level;
  next.rot_level = superset.rot_level;
  const auto& parents = superset.frontier;

  if (*kind == ExpansionKind::kRotation) {
    next.rot_level += 1;
    next.frontier = filtered_children(ctx, parents.size(), next.pos_level, next.rot_level, [&](std::size_t i) {
      const CellKey& p = parents[i];
      std::array<CellKey, 8> children;
      for (std::uint32_t j = 0; j < 4; ++j) {
        for (std::uint32_t h = 0; h < 2; ++h) {
          children[2 * j + h] = CellKey{p.pos, 2 * p.tilt + h, 4 * p.pixel + j};
        }
      }
      return children;
    });
  } else {
    next.pos_level += 1;
    next.frontier = filtered_children(ctx, parents.size(), next.pos_level, next.rot_level, [&](std::size_t i) {
      const CellKey& p = parents[i];
      std::array<CellKey, 8> children;
      for (std::uint32_t c = 0; c < 8; ++c) {
        children[c] = CellKey{{2 * p.pos[0] + (c & 1u), 2 * p.pos[1] + ((c >> 1) & 1u), 2 * p.pos[2] + ((c >> 2) & 1u)},
                              p.tilt, p.pixel};
      }
      return children;
    });
  }
  return next;
}

PoseSuperset compute_superset(std::shared_ptr<const SearchContext> context, const ProgressCallback& progress) {
  const SearchContext& ctx = *context;
  PoseSuperset current = initial_superset(std::move(context));
  const double target = ctx.config().stop_fraction * ctx.measurements().sample_bound;

  while (true) {
    if (current.empty()) {
      std::ostringstream msg;
      msg << "no pose is consistent with the measurements (frontier emptied at position level " << current.pos_level
          << ", rotation level " << current.rot_level << ")";
      throw InconsistentMeasurementsError(msg.str());
    }
    if (progress) progress(current);
    if (ctx.b_p(current.pos_level) + ctx.max_b_r(current.rot_level) <= target) {
      current.stop_reason = StopReason::kConverged;
      return current;
    }
    if (!next_expansion(current)) {
      current.stop_reason = StopReason::kMaxLevel;
      return current;
    }
    PoseSuperset next = expand(current);
    if (next.budget_exhausted) {
      next.stop_reason = StopReason::kCellBudget;
      return next;
    }
    current = std::move(next);
  }
}

PoseSuperset compute_superset(const TriangleMesh& mesh, const MeasurementSet& meas, const SearchConfig& config,
                              const ProgressCallback& progress) {
  return compute_superset(std::make_shared<const SearchContext>(mesh, meas, config), progress);
}

std::vector<RotationCell> unique_rotation_cells(const PoseSuperset& superset) {
  std::vector<std::pair<std::uint64_t, std::uint32_t>> keys;
  keys.reserve(superset.frontier.size());
  for (const CellKey& k : superset.frontier) keys.emplace_back(k.pixel, k.tilt);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::vector<RotationCell> cells;
  cells.reserve(keys.size());
  for (const auto& [pixel, tilt] : keys) cells.push_back(RotationCell{superset.rot_level, pixel, tilt});
  return cells;
}

BoundsReport point_estimate(const PoseSuperset& superset) {
  if (superset.empty()) throw InconsistentMeasurementsError("empty pose superset has no point estimate");
  const SearchContext& ctx = *superset.context;
  const PositionGrid& grid = ctx.grid();
  BoundsReport report;
  report.cell_count = superset.size();
  report.pos_level = superset.pos_level;
  report.rot_level = superset.rot_level;

  // The union of position cubes is enclosed exactly by a ball around its corners.
  std::unordered_set<std::uint64_t> lattice;
  for (const CellKey& k : superset.frontier) {
    for (std::uint64_t c = 0; c < 8; ++c) {
      const std::uint64_t x = k.pos[0] + (c & 1u);
      const std::uint64_t y = k.pos[1] + ((c >> 1) & 1u);
      const std::uint64_t z = k.pos[2] + ((c >> 2) & 1u);
      lattice.insert(x | (y << 21) | (z << 42));
    }
  }
  std::vector<std::uint64_t> sorted(lattice.begin(), lattice.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<Vec3> corners;
  corners.reserve(sorted.size());
  constexpr std::uint64_t kMask = (std::uint64_t{1} << 21) - 1;
  for (std::uint64_t code : sorted) {
    corners.push_back(grid.corner(superset.pos_level, {static_cast<std::uint32_t>(code & kMask),
                                                       static_cast<std::uint32_t>((code >> 21) & kMask),
                                                       static_cast<std::uint32_t>((code >> 42) & kMask)}));
  }
  const BoundingSphere pos_ball = min_enclosing_sphere(corners);
  report.position_estimate = pos_ball.center;
  report.position_bound = pos_ball.radius;

  const auto cells = unique_rotation_cells(superset);
  std::vector<Quat> centers;
  centers.reserve(cells.size());
  for (const RotationCell& c : cells) centers.push_back(rotation_cell_center(c));
  const Quat reference = centers.front();
  std::vector<Vec4> aligned;
  aligned.reserve(centers.size());
  for (const Quat& q : centers) aligned.push_back(quat_to_vec(align_hemisphere(q, reference)));
  const Ball<4> rot_ball = min_enclosing_ball<4>(aligned);
  Quat estimate = reference;
  if (rot_ball.center.norm() > 1e-9) estimate = vec_to_quat(rot_ball.center.normalized());

  const double gamma = superset.gamma();
  double bound = 0.0;
  for (const Quat& q : centers) bound = std::max(bound, geodesic_angle(estimate, q) + gamma);
  report.rotation_estimate = estimate;
  report.rotation_bound = std::min(bound, M_PI);
  return report;
}

Pose to_mesh_frame(const Pose& centered_pose, const Vec3& mesh_center) {
  return Pose{centered_pose.rotation, centered_pose.translation - (centered_pose.rotation * mesh_center)};
}

}  // namespace fixpose
