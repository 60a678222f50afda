#include "fixpose_app/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace fixpose::app {

namespace {

bool same_pose(const Pose& a, const Pose& b) {
  return a.rotation.coeffs() == b.rotation.coeffs() && a.translation == b.translation;
}

bool same_levels(const std::vector<ConfidenceLevel>& a, const std::vector<ConfidenceLevel>& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) {
           return x.level == y.level && x.position_radius == y.position_radius && x.rotation_angle == y.rotation_angle;
         });
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

}  // namespace

bool operator==(const RunReport& a, const RunReport& b) {
  return a.mesh_digest == b.mesh_digest && a.point_count == b.point_count && a.sample_bound == b.sample_bound &&
         a.numeric_slack == b.numeric_slack && a.probe_radius == b.probe_radius && a.seed == b.seed &&
         a.aabb_min == b.aabb_min && a.aabb_max == b.aabb_max && a.aabb_fallback == b.aabb_fallback &&
         a.reference_point == b.reference_point && a.pos_level == b.pos_level && a.rot_level == b.rot_level &&
         a.cell_count == b.cell_count && a.stop_reason == b.stop_reason && same_pose(a.estimate, b.estimate) &&
         a.position_bound == b.position_bound && a.rotation_bound == b.rotation_bound &&
         a.has_distribution == b.has_distribution && same_pose(a.expected, b.expected) &&
         same_levels(a.confidence, b.confidence) && a.sigma == b.sigma && a.k_per_cell == b.k_per_cell &&
         a.multimodal == b.multimodal && a.rotation_components == b.rotation_components &&
         a.wall_time_s == b.wall_time_s;
}

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw InputError("expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json quat_to_json(const Quat& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

Quat quat_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw InputError("expected a 4-element quaternion [w,x,y,z]");
  return Quat(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

json pose_to_json(const Pose& p) { return json{{"q", quat_to_json(p.rotation)}, {"t", vec_to_json(p.translation)}}; }

Pose pose_from_json(const json& j) { return Pose{quat_from_json(j.at("q")), vec_from_json(j.at("t"))}; }

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::kConverged: return "converged";
    case StopReason::kCellBudget: return "cell_budget";
    case StopReason::kMaxLevel: return "max_level";
    case StopReason::kNotStopped: return "not_stopped";
  }
  return "unknown";
}

json to_json(const RunReport& r) {
  json j;
  j["input"] = {{"mesh_digest", r.mesh_digest},
                {"point_count", r.point_count},
                {"sample_bound", r.sample_bound},
                {"numeric_slack", r.numeric_slack},
                {"probe_radius", r.probe_radius},
                {"seed", r.seed}};
  j["aabb"] = {{"min", vec_to_json(r.aabb_min)}, {"max", vec_to_json(r.aabb_max)}, {"fallback", r.aabb_fallback}};
  j["reference_point"] = vec_to_json(r.reference_point);
  j["search"] = {{"pos_level", r.pos_level},
                 {"rot_level", r.rot_level},
                 {"cell_count", r.cell_count},
                 {"stop_reason", r.stop_reason}};
  j["bounds"] = {{"estimate", pose_to_json(r.estimate)},
                 {"position_bound", r.position_bound},
                 {"rotation_bound", r.rotation_bound}};
  if (r.has_distribution) {
    json levels = json::array();
    for (const auto& c : r.confidence) {
      levels.push_back({{"level", c.level}, {"position_radius", c.position_radius}, {"rotation_angle", c.rotation_angle}});
    }
    j["distribution"] = {{"expected", pose_to_json(r.expected)},
                         {"confidence", levels},
                         {"sigma", r.sigma},
                         {"k_per_cell", r.k_per_cell}};
  }
  j["multimodality"] = {{"multimodal", r.multimodal}, {"components", r.rotation_components}, {"advisory", true}};
  if (r.wall_time_s) j["wall_time_s"] = *r.wall_time_s;
  return j;
}

RunReport report_from_json(const json& j) {
  try {
    RunReport r;
    const auto& in = j.at("input");
    r.mesh_digest = in.at("mesh_digest").get<std::string>();
    r.point_count = in.at("point_count").get<std::size_t>();
    r.sample_bound = in.at("sample_bound").get<double>();
    r.numeric_slack = in.at("numeric_slack").get<double>();
    r.probe_radius = in.at("probe_radius").get<double>();
    r.seed = in.at("seed").get<std::uint64_t>();
    r.aabb_min = vec_from_json(j.at("aabb").at("min"));
    r.aabb_max = vec_from_json(j.at("aabb").at("max"));
    r.aabb_fallback = j.at("aabb").at("fallback").get<bool>();
    r.reference_point = vec_from_json(j.at("reference_point"));
    const auto& s = j.at("search");
    r.pos_level = s.at("pos_level").get<int>();
    r.rot_level = s.at("rot_level").get<int>();
    r.cell_count = s.at("cell_count").get<std::size_t>();
    r.stop_reason = s.at("stop_reason").get<std::string>();
    const auto& b = j.at("bounds");
    r.estimate = pose_from_json(b.at("estimate"));
    r.position_bound = b.at("position_bound").get<double>();
    r.rotation_bound = b.at("rotation_bound").get<double>();
    if (j.contains("distribution")) {
      const auto& d = j.at("distribution");
      r.has_distribution = true;
      r.expected = pose_from_json(d.at("expected"));
      for (const auto& c : d.at("confidence")) {
        r.confidence.push_back({c.at("level").get<double>(), c.at("position_radius").get<double>(),
                                c.at("rotation_angle").get<double>()});
      }
      r.sigma = d.at("sigma").get<double>();
      r.k_per_cell = d.at("k_per_cell").get<int>();
    }
    r.multimodal = j.at("multimodality").at("multimodal").get<bool>();
    r.rotation_components = j.at("multimodality").at("components").get<std::size_t>();
    if (j.contains("wall_time_s")) r.wall_time_s = j.at("wall_time_s").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed report: ") + e.what());
  }
}

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

struct CellHash {
  std::size_t operator()(const std::array<std::int64_t, 4>& k) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto v : k) h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ULL;
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

std::size_t rotation_components(std::span<const RotationCell> cells, double adjacency) {
  if (cells.empty()) return 0;
  // Geodesic <= a  <=>  |q - p| <= 2 sin(a/4) for q, p on the same hemisphere.
  const double reach = 2.0 * std::sin(std::min(adjacency, M_PI) / 4.0);
  const double h = std::max(reach, 1e-12);
  std::vector<Vec4> q;
  q.reserve(cells.size());
  for (const auto& c : cells) q.push_back(quat_to_vec(rotation_cell_center(c)));

  auto key = [&](const Vec4& v) {
    std::array<std::int64_t, 4> k{};
    for (int d = 0; d < 4; ++d) k[d] = static_cast<std::int64_t>(std::floor(v[d] / h));
    return k;
  };
  // Both signs are indexed so that neighbors across the hemisphere seam are found.
  std::unordered_map<std::array<std::int64_t, 4>, std::vector<std::uint32_t>, CellHash> grid;
  for (std::size_t i = 0; i < q.size(); ++i) {
    grid[key(q[i])].push_back(static_cast<std::uint32_t>(i));
    grid[key(-q[i])].push_back(static_cast<std::uint32_t>(i));
  }

  DisjointSets sets(q.size());
  std::size_t components = q.size();
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto base = key(q[i]);
    for (int n = 0; n < 81; ++n) {
      std::array<std::int64_t, 4> k = base;
      int code = n;
      for (int d = 0; d < 4; ++d, code /= 3) k[d] += code % 3 - 1;
      const auto it = grid.find(k);
      if (it == grid.end()) continue;
      for (std::uint32_t j : it->second) {
        if (j <= i) continue;
        const double dot = std::abs(q[i].dot(q[j]));
        const double angle = 2.0 * std::acos(std::min(1.0, dot));
        if (angle <= adjacency && sets.unite(i, j)) --components;
      }
    }
  }
  return components;
}

std::vector<Vec3> read_points_csv(std::istream& in) {
  std::vector<Vec3> points;
  std::string line;
  int line_no = 0;
  bool first_data = true;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(trim(f));
    double v[3];
    bool numeric = fields.size() == 3;
    for (int i = 0; numeric && i < 3; ++i) {
      try {
        std::size_t used = 0;
        v[i] = std::stod(fields[i], &used);
        numeric = used == fields[i].size() && std::isfinite(v[i]);
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (first_data) {
        first_data = false;
        continue;  // header
      }
      throw InputError("points file line " + std::to_string(line_no) + ": expected x,y,z");
    }
    first_data = false;
    points.emplace_back(v[0], v[1], v[2]);
  }
  if (points.empty()) throw InputError("points file has no points");
  return points;
}

std::vector<Vec3> read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open points file " + path.string());
  return read_points_csv(in);
}

void write_points_csv(std::ostream& out, std::span<const Vec3> points) {
  out << "x,y,z\n";
  char buf[128];
  for (const Vec3& p : points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.x(), p.y(), p.z());
    out << buf;
  }
}

json calibration_to_json(const TipCalibration& c) {
  return json{{"tip_offset", vec_to_json(c.tip_offset)},
              {"coarse_tip_offset", vec_to_json(c.coarse_tip_offset)},
              {"table_normal", vec_to_json(c.table_normal)},
              {"plane_offset", c.plane_offset},
              {"residuals", c.residuals},
              {"sample_bound", c.sample_bound}};
}

TipCalibration calibration_from_json(const json& j) {
  try {
    TipCalibration c;
    c.tip_offset = vec_from_json(j.at("tip_offset"));
    c.coarse_tip_offset = vec_from_json(j.at("coarse_tip_offset"));
    c.table_normal = vec_from_json(j.at("table_normal"));
    c.plane_offset = j.at("plane_offset").get<double>();
    c.residuals = j.at("residuals").get<std::vector<double>>();
    c.sample_bound = j.at("sample_bound").get<double>();
    return c;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed calibration: ") + e.what());
  }
}

void write_distribution_jsonl(std::ostream& out, const DiscretePoseDistribution& dist, double min_probability) {
  for (const auto& s : dist.samples) {
    if (s.probability < min_probability) continue;
    out << json{{"q", quat_to_json(s.pose.rotation)}, {"t", vec_to_json(s.pose.translation)}, {"p", s.probability}}.dump()
        << '\n';
  }
}

std::vector<WeightedPose> read_distribution_jsonl(std::istream& in) {
  std::vector<WeightedPose> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({Pose{quat_from_json(j.at("q")).normalized(), vec_from_json(j.at("t"))}, j.at("p").get<double>()});
    } catch (const json::exception& e) {
      throw InputError("distribution line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_superset_jsonl(std::ostream& out, const PoseSuperset& superset) {
  const SearchContext& ctx = *superset.context;
  out << json{{"pos_level", superset.pos_level},
              {"rot_level", superset.rot_level},
              {"grid_origin", vec_to_json(ctx.grid().origin)},
              {"grid_l0", ctx.grid().l0},
              {"reference_point", vec_to_json(ctx.mesh_center())},
              {"gamma", superset.gamma()},
              {"position_bound", ctx.b_p(superset.pos_level)},
              {"cells", superset.size()},
              {"columns", {"ix", "iy", "iz", "pixel", "tilt"}}}
             .dump()
      << '\n';
  for (const CellKey& k : superset.frontier) {
    out << '[' << k.pos[0] << ',' << k.pos[1] << ',' << k.pos[2] << ',' << k.pixel << ',' << k.tilt << "]\n";
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace fixpose::app
