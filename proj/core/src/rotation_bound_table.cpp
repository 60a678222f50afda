#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

#include <json.hpp>

#include "fixpose/healpix.hpp"
#include "fixpose/log.hpp"
#include "fixpose/se3_grid.hpp"

namespace fixpose {

PixelExtent measure_pixel_extent(int level, int edge_samples) {
  // Faces 0..3 are azimuthal quarter-turns of each other, 8..11 mirror 0..3
  // through the equator, and 4..7 are quarter-turns of face 4. Angles and
  // spherical excess are invariant under these maps, so faces 0 and 4 suffice.
  constexpr int kRepresentativeFaces[] = {0, 4};
  const std::uint32_t nside = std::uint32_t{1} << level;
  const double inv_nside = 1.0 / nside;
  const double step = 1.0 / edge_samples;

  PixelExtent ext;
  for (int face : kRepresentativeFaces) {
    const Vec3 base_center = healpix::face_point(face, 0.5, 0.5);
    for (std::uint32_t ix = 0; ix < nside; ++ix) {
      for (std::uint32_t iy = 0; iy < nside; ++iy) {
        const Vec3 center = healpix::face_point(face, (ix + 0.5) * inv_nside, (iy + 0.5) * inv_nside);
        auto visit = [&](double u, double v) {
          const Vec3 b = healpix::face_point(face, (ix + u) * inv_nside, (iy + v) * inv_nside);
          const double angle = std::atan2(center.cross(b).norm(), center.dot(b));
          ext.max_angle = std::max(ext.max_angle, angle);
          ext.max_twist = std::max(ext.max_twist, spherical_excess(base_center, center, b));
        };
        for (int s = 0; s < edge_samples; ++s) {
          const double t = s * step;
          visit(t, 0.0);
          visit(1.0, t);
          visit(1.0 - t, 1.0);
          visit(0.0, 1.0 - t);
        }
      }
    }
  }
  return ext;
}

RotationBoundTable RotationBoundTable::compute(int max_level, double safety_factor, int level0_edge_samples) {
  if (max_level < 0 || max_level > kMaxRotationLevel) throw GridError("rotation bound table level out of range");
  RotationBoundTable table;
  table.safety_factor = safety_factor;
  for (int level = 0; level <= max_level; ++level) {
    const int samples = std::max(8, level0_edge_samples >> level);
    const PixelExtent ext = measure_pixel_extent(level, samples);
    const double theta = safety_factor * ext.max_angle;
    const double twist = safety_factor * ext.max_twist;
    const double phi = 0.5 * tilt_resolution(level);
    table.theta.push_back(theta);
    table.phi.push_back(phi);
    table.twist.push_back(twist);
    table.gamma.push_back(gamma_bound(theta, phi + twist));
  }
  return table;
}

std::string RotationBoundTable::to_json() const {
  nlohmann::json j;
  j["max_level"] = max_level();
  j["safety_factor"] = safety_factor;
  j["theta"] = theta;
  j["phi"] = phi;
  j["twist"] = twist;
  j["gamma"] = gamma;
  return j.dump();
}

RotationBoundTable RotationBoundTable::from_json(const std::string& text) {
  RotationBoundTable t;
  int max_level = -1;
  try {
    const auto j = nlohmann::json::parse(text);
    t.safety_factor = j.at("safety_factor").get<double>();
    t.theta = j.at("theta").get<std::vector<double>>();
    t.phi = j.at("phi").get<std::vector<double>>();
    t.twist = j.at("twist").get<std::vector<double>>();
    t.gamma = j.at("gamma").get<std::vector<double>>();
    max_level = j.at("max_level").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw GridError(std::string("malformed rotation bound table: ") + e.what());
  }
  const auto n = t.gamma.size();
  if (n == 0 || t.theta.size() != n || t.phi.size() != n || t.twist.size() != n || max_level != static_cast<int>(n) - 1) {
    throw GridError("malformed rotation bound table");
  }
  return t;
}

std::shared_ptr<const RotationBoundTable> shared_rotation_bound_table(
    int max_level, double safety_factor, const std::optional<std::filesystem::path>& cache_dir) {
  static std::mutex mutex;
  static std::map<std::pair<int, double>, std::shared_ptr<const RotationBoundTable>> tables;

  std::lock_guard lock(mutex);
  const auto key = std::make_pair(max_level, safety_factor);
  if (auto it = tables.find(key); it != tables.end()) return it->second;

  std::optional<std::filesystem::path> file;
  if (cache_dir) {
    std::ostringstream name;
    name << "rotation_bounds_L" << max_level << "_s" << safety_factor << ".json";
    file = *cache_dir / name.str();
  }

  std::shared_ptr<const RotationBoundTable> table;
  if (file && std::filesystem::exists(*file)) {
    try {
      std::ifstream in(*file);
      std::stringstream buf;
      buf << in.rdbuf();
      auto loaded = RotationBoundTable::from_json(buf.str());
      if (loaded.max_level() == max_level && loaded.safety_factor == safety_factor) {
        table = std::make_shared<const RotationBoundTable>(std::move(loaded));
      }
    } catch (const std::exception& e) {
      warn(std::string("ignoring unreadable rotation bound cache: ") + e.what());
    }
  }
  if (!table) {
    table = std::make_shared<const RotationBoundTable>(RotationBoundTable::compute(max_level, safety_factor));
    if (file) {
      std::error_code ec;
      std::filesystem::create_directories(file->parent_path(), ec);
      // Write-then-rename so concurrent processes never read a partial file.
      std::filesystem::path tmp = *file;
      tmp += ".tmp" + std::to_string(std::random_device{}());
      {
        std::ofstream out(tmp);
        if (out) out << table->to_json();
      }
      std::filesystem::rename(tmp, *file, ec);
      if (ec) std::filesystem::remove(tmp, ec);
    }
  }
  tables.emplace(key, table);
  return table;
}

}  // namespace fixpose
