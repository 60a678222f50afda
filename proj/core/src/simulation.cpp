#include "fixpose/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "fixpose/enclosing_ball.hpp"
#include "seeding.hpp"

namespace fixpose {

namespace {

std::uint32_t add_vertex(TriangleMesh& m, double x, double y, double z) {
  m.vertices.emplace_back(x, y, z);
  return static_cast<std::uint32_t>(m.vertices.size() - 1);
}

void add_quad(TriangleMesh& m, std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d) {
  m.triangles.push_back({a, b, c});
  m.triangles.push_back({a, c, d});
}

TriangleMesh raw_cube() {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i) add_vertex(m, (i & 1) ? 0.5 : -0.5, (i & 2) ? 0.5 : -0.5, (i & 4) ? 0.5 : -0.5);
  add_quad(m, 0, 2, 3, 1);  // z-
  add_quad(m, 4, 5, 7, 6);  // z+
  add_quad(m, 0, 1, 5, 4);  // y-
  add_quad(m, 2, 6, 7, 3);  // y+
  add_quad(m, 0, 4, 6, 2);  // x-
  add_quad(m, 1, 3, 7, 5);  // x+
  return m;
}

std::vector<std::uint32_t> ring(TriangleMesh& m, double radius, double z) {
  std::vector<std::uint32_t> ids;
  for (int i = 0; i < kRoundSegments; ++i) {
    const double a = 2.0 * M_PI * i / kRoundSegments;
    ids.push_back(add_vertex(m, radius * std::cos(a), radius * std::sin(a), z));
  }
  return ids;
}

TriangleMesh raw_cone() {
  TriangleMesh m;
  const auto base = ring(m, 1.0, 0.0);
  const auto apex = add_vertex(m, 0.0, 0.0, 2.0);
  const auto center = add_vertex(m, 0.0, 0.0, 0.0);
  for (int i = 0; i < kRoundSegments; ++i) {
    const auto a = base[i];
    const auto b = base[(i + 1) % kRoundSegments];
    m.triangles.push_back({a, b, apex});
    m.triangles.push_back({b, a, center});
  }
  return m;
}

TriangleMesh raw_cylinder() {
  TriangleMesh m;
  const auto bottom = ring(m, 1.0, -1.0);
  const auto top = ring(m, 1.0, 1.0);
  const auto bc = add_vertex(m, 0.0, 0.0, -1.0);
  const auto tc = add_vertex(m, 0.0, 0.0, 1.0);
  for (int i = 0; i < kRoundSegments; ++i) {
    const int j = (i + 1) % kRoundSegments;
    add_quad(m, bottom[i], bottom[j], top[j], top[i]);
    m.triangles.push_back({bottom[j], bottom[i], bc});
    m.triangles.push_back({top[i], top[j], tc});
  }
  return m;
}

TriangleMesh raw_tetrahedron() {
  TriangleMesh m;
  add_vertex(m, 1, 1, 1);
  add_vertex(m, 1, -1, -1);
  add_vertex(m, -1, 1, -1);
  add_vertex(m, -1, -1, 1);
  m.triangles = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  return m;
}

// L-shaped slab over [-1,1]^2 minus the quadrant x > 0, y < 0, with a smooth
// asymmetric top surface and a flat bottom.
TriangleMesh raw_membrane() {
  constexpr int kCells = 16;  // per side of [-1, 1]
  const double h = 2.0 / kCells;
  auto inside = [&](int i, int j) {
    if (i < 0 || j < 0 || i >= kCells || j >= kCells) return false;
    return !(i >= kCells / 2 && j < kCells / 2);
  };
  auto height = [](double x, double y) {
    return 0.25 + 0.55 * std::exp(-((x + 0.45) * (x + 0.45) + (y - 0.35) * (y - 0.35)) / 0.18) +
           0.12 * (x + 1.0) * (y + 1.0) / 4.0 + 0.08 * std::sin(2.5 * x + 1.0) * std::cos(1.7 * y);
  };

  TriangleMesh m;
  std::map<std::pair<int, int>, std::pair<std::uint32_t, std::uint32_t>> ids;  // grid point -> (top, bottom)
  auto vertex = [&](int i, int j) {
    auto it = ids.find({i, j});
    if (it != ids.end()) return it->second;
    const double x = -1.0 + i * h;
    const double y = -1.0 + j * h;
    const auto top = add_vertex(m, x, y, height(x, y));
    const auto bottom = add_vertex(m, x, y, 0.0);
    return ids[{i, j}] = {top, bottom};
  };

  for (int i = 0; i < kCells; ++i) {
    for (int j = 0; j < kCells; ++j) {
      if (!inside(i, j)) continue;
      const auto v00 = vertex(i, j), v10 = vertex(i + 1, j), v11 = vertex(i + 1, j + 1), v01 = vertex(i, j + 1);
      add_quad(m, v00.first, v10.first, v11.first, v01.first);
      add_quad(m, v00.second, v01.second, v11.second, v10.second);
      // Walls on edges shared with the outside, oriented outward.
      if (!inside(i, j - 1)) add_quad(m, v00.second, v10.second, v10.first, v00.first);
      if (!inside(i + 1, j)) add_quad(m, v10.second, v11.second, v11.first, v10.first);
      if (!inside(i, j + 1)) add_quad(m, v11.second, v01.second, v01.first, v11.first);
      if (!inside(i - 1, j)) add_quad(m, v01.second, v00.second, v00.first, v01.first);
    }
  }
  return m;
}

// Radius of the round primitives' circular rim before normalization, over the
// raw enclosing-sphere radius.
double rim_fraction(Primitive kind) {
  switch (kind) {
    case Primitive::kCylinder: return 1.0 / std::sqrt(2.0);
    case Primitive::kCone: {
      const TriangleMesh raw = raw_cone();
      return 1.0 / min_enclosing_sphere(raw.vertices).radius;
    }
    default: return 0.0;
  }
}

Mat3 half_turn_x() { return Eigen::AngleAxisd(M_PI, Vec3::UnitX()).toRotationMatrix(); }

}  // namespace

Primitive primitive_from_name(std::string_view name) {
  if (name == "cube") return Primitive::kCube;
  if (name == "cone") return Primitive::kCone;
  if (name == "cylinder") return Primitive::kCylinder;
  if (name == "tetrahedron") return Primitive::kTetrahedron;
  if (name == "membrane") return Primitive::kMembrane;
  throw std::invalid_argument("unknown primitive '" + std::string(name) + "'");
}

std::string to_string(Primitive p) {
  switch (p) {
    case Primitive::kCube: return "cube";
    case Primitive::kCone: return "cone";
    case Primitive::kCylinder: return "cylinder";
    case Primitive::kTetrahedron: return "tetrahedron";
    case Primitive::kMembrane: return "membrane";
  }
  return "unknown";
}

TriangleMesh normalize_mesh(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) throw MeshError("cannot normalize an empty mesh");
  const BoundingSphere s = min_enclosing_sphere(mesh.vertices);
  if (!(s.radius > 0.0)) throw MeshError("cannot normalize a mesh with zero extent");
  const double scale = kNormalizedFixtureRadius / s.radius;
  return transformed(mesh, scale, -scale * s.center);
}

TriangleMesh builtin_primitive(Primitive kind) {
  switch (kind) {
    case Primitive::kCube: return normalize_mesh(raw_cube());
    case Primitive::kCone: return normalize_mesh(raw_cone());
    case Primitive::kCylinder: return normalize_mesh(raw_cylinder());
    case Primitive::kTetrahedron: return normalize_mesh(raw_tetrahedron());
    case Primitive::kMembrane: return normalize_mesh(raw_membrane());
  }
  throw std::invalid_argument("unknown primitive");
}

std::vector<Quat> symmetry_rotations(Primitive kind, int axial_copies) {
  std::vector<Quat> out;
  switch (kind) {
    case Primitive::kCube:
    case Primitive::kTetrahedron: {
      const TriangleMesh tet = raw_tetrahedron();
      std::array<int, 3> perm{0, 1, 2};
      do {
        for (int signs = 0; signs < 8; ++signs) {
          Mat3 r = Mat3::Zero();
          for (int row = 0; row < 3; ++row) r(row, perm[row]) = (signs >> row) & 1 ? -1.0 : 1.0;
          if (r.determinant() < 0.0) continue;
          if (kind == Primitive::kTetrahedron) {
            const bool maps = std::all_of(tet.vertices.begin(), tet.vertices.end(), [&](const Vec3& v) {
              const Vec3 w = r * v;
              return std::any_of(tet.vertices.begin(), tet.vertices.end(), [&](const Vec3& u) { return (u - w).norm() < 1e-12; });
            });
            if (!maps) continue;
          }
          out.emplace_back(r);
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
      break;
    }
    case Primitive::kCone:
    case Primitive::kCylinder:
      if (axial_copies < 1) throw std::invalid_argument("axial_copies must be positive");
      for (int i = 0; i < axial_copies; ++i) {
        const Mat3 turn = Eigen::AngleAxisd(2.0 * M_PI * i / axial_copies, Vec3::UnitZ()).toRotationMatrix();
        out.emplace_back(turn);
        if (kind == Primitive::kCylinder) out.emplace_back(Mat3(turn * half_turn_x()));
      }
      break;
    case Primitive::kMembrane: out.push_back(Quat::Identity()); break;
  }
  return out;
}

double tessellation_slack(Primitive kind) {
  const double rim = rim_fraction(kind) * kNormalizedFixtureRadius;
  return rim * (1.0 - std::cos(M_PI / kRoundSegments));
}

std::vector<Vec3> uniform_surface_samples(const TriangleMesh& mesh, std::size_t n, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("uniform_surface_samples: n must be at least 1");
  if (mesh.triangles.empty()) throw MeshError("cannot sample an empty mesh");
  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) cumulative[t] = (total += mesh.area(t));
  if (!(total > 0.0)) throw MeshError("cannot sample a mesh with zero area");

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double pick = unit(rng) * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
    const auto [a, b, c] = mesh.corners(t);
    const double r1 = std::sqrt(unit(rng));
    const double r2 = unit(rng);
    out.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
  }
  return out;
}

std::vector<Vec3> uniform_surface_samples(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return uniform_surface_samples(mesh, n, rng);
}

std::vector<Vec3> farthest_point_subsample_from(std::span<const Vec3> points, std::size_t m, std::size_t start) {
  if (m > points.size()) throw std::invalid_argument("farthest point subsample larger than the input");
  if (m == 0) return {};
  if (start >= points.size()) throw std::invalid_argument("farthest point start index out of range");
  std::vector<double> gap(points.size(), std::numeric_limits<double>::infinity());
  std::vector<Vec3> out;
  out.reserve(m);
  std::size_t next = start;
  for (std::size_t k = 0; k < m; ++k) {
    out.push_back(points[next]);
    gap[next] = -1.0;
    std::size_t best = 0;
    double best_gap = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (gap[i] < 0.0) continue;
      gap[i] = std::min(gap[i], (points[i] - points[next]).norm());
      if (gap[i] > best_gap) {
        best_gap = gap[i];
        best = i;
      }
    }
    next = best;
  }
  return out;
}

std::vector<Vec3> farthest_point_subsample(std::span<const Vec3> points, std::size_t m, std::uint64_t seed) {
  if (points.empty()) {
    if (m == 0) return {};
    throw std::invalid_argument("farthest point subsample larger than the input");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  return farthest_point_subsample_from(points, m, pick(rng));
}

Vec3 truncated_noise(double sample_bound, double scale, std::mt19937_64& rng) {
  if (!(sample_bound > 0.0)) throw std::invalid_argument("truncated_noise: sample bound must be positive");
  if (!(scale >= 0.0)) throw std::invalid_argument("truncated_noise: scale must be non-negative");
  std::normal_distribution<double> normal(0.0, scale * sample_bound);
  if (scale == 0.0) return Vec3::Zero();
  while (true) {
    const Vec3 e(normal(rng), normal(rng), normal(rng));
    if (e.norm() <= sample_bound) return e;
  }
}

Vec3 truncated_noise(double sample_bound, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return truncated_noise(sample_bound, scale, rng);
}

Pose random_pose(std::mt19937_64& rng, double half_extent) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Shoemake's uniform quaternion.
  const double u1 = unit(rng), u2 = unit(rng), u3 = unit(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const Quat q(b * std::cos(2.0 * M_PI * u3), a * std::sin(2.0 * M_PI * u2), a * std::cos(2.0 * M_PI * u2),
               b * std::sin(2.0 * M_PI * u3));
  std::uniform_real_distribution<double> coord(-half_extent, half_extent);
  const double x = coord(rng), y = coord(rng), z = coord(rng);
  return Pose{q.normalized(), Vec3(x, y, z)};
}

void SimulationSpec::validate() const {
  if (!primitive && !mesh) throw std::invalid_argument("simulation needs a primitive or a mesh");
  if (n_samples < 1 || n_samples > n_uniform) throw std::invalid_argument("need 1 <= n_samples <= n_uniform");
  if (!(sample_bound > 0.0)) throw std::invalid_argument("sample bound must be positive");
  if (!(noise_scale >= 0.0)) throw std::invalid_argument("noise scale must be non-negative");
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t index) { return detail::stream_seed(master_seed, index); }

SimulationTrial run_trial(const SimulationSpec& spec) {
  spec.validate();
  SimulationTrial trial;
  if (spec.mesh) {
    trial.mesh = normalize_mesh(*spec.mesh);
  } else {
    trial.mesh = builtin_primitive(*spec.primitive);
    trial.primitive = spec.primitive;
  }

  std::mt19937_64 pose_rng(detail::stream_seed(spec.seed, 0));
  trial.ground_truth = spec.ground_truth ? *spec.ground_truth : random_pose(pose_rng);

  const auto dense = uniform_surface_samples(trial.mesh, spec.n_uniform, detail::stream_seed(spec.seed, 1));
  const auto chosen = farthest_point_subsample(dense, spec.n_samples, detail::stream_seed(spec.seed, 2));

  std::mt19937_64 noise_rng(detail::stream_seed(spec.seed, 3));
  trial.measurements.sample_bound = spec.sample_bound;
  if (trial.primitive) trial.measurements.numeric_slack += tessellation_slack(*trial.primitive);
  for (const Vec3& p : chosen) {
    const Vec3 e = spec.noiseless ? Vec3::Zero() : truncated_noise(spec.sample_bound, spec.noise_scale, noise_rng);
    trial.noise.push_back(e);
    trial.measurements.points.push_back(trial.ground_truth.apply(p) + e);
  }
  return trial;
}

}  // namespace fixpose
