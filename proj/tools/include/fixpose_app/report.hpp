#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fixpose/init_bound.hpp"
#include "fixpose/pose_distribution.hpp"
#include "fixpose/pose_search.hpp"
#include "fixpose/tip_calibration.hpp"

namespace fixpose::app {

using nlohmann::json;

/// Input problems that map to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Summary of one bound run. Poses refer to the mesh's own frame; the position
/// bound refers to `reference_point` (the enclosing-sphere center, mesh frame).
struct RunReport {
  std::string mesh_digest;
  std::size_t point_count = 0;
  double sample_bound = 0.0;
  double numeric_slack = 0.0;
  double probe_radius = 0.0;
  std::uint64_t seed = 0;

  Vec3 aabb_min = Vec3::Zero();
  Vec3 aabb_max = Vec3::Zero();
  bool aabb_fallback = false;
  Vec3 reference_point = Vec3::Zero();

  int pos_level = 0;
  int rot_level = 0;
  std::size_t cell_count = 0;
  std::string stop_reason;

  Pose estimate;
  double position_bound = 0.0;
  double rotation_bound = 0.0;

  bool has_distribution = false;
  Pose expected;
  std::vector<ConfidenceLevel> confidence;
  double sigma = 0.0;
  int k_per_cell = 0;

  bool multimodal = false;
  std::size_t rotation_components = 0;

  std::optional<double> wall_time_s;

  friend bool operator==(const RunReport&, const RunReport&);
};

json to_json(const RunReport& r);
RunReport report_from_json(const json& j);

json pose_to_json(const Pose& p);
Pose pose_from_json(const json& j);
json vec_to_json(const Vec3& v);
Vec3 vec_from_json(const json& j);
json quat_to_json(const Quat& q);
Quat quat_from_json(const json& j);

std::string to_string(StopReason r);

/// Rotation cells joined when their centers are within `adjacency` radians.
/// Returns the number of connected components.
std::size_t rotation_components(std::span<const RotationCell> cells, double adjacency);

inline constexpr double kAdjacencyGammaFactor = 2.5;

/// CSV of x,y,z rows in meters; an optional non-numeric header line and lines
/// starting with '#' are skipped. Throws InputError.
std::vector<Vec3> read_points_csv(std::istream& in);
std::vector<Vec3> read_points_csv(const std::filesystem::path& path);
void write_points_csv(std::ostream& out, std::span<const Vec3> points);

json calibration_to_json(const TipCalibration& c);
TipCalibration calibration_from_json(const json& j);

/// One JSON object per line: {"q":[w,x,y,z],"t":[x,y,z],"p":probability}.
/// Samples with probability below `min_probability` are skipped.
void write_distribution_jsonl(std::ostream& out, const DiscretePoseDistribution& dist, double min_probability = 0.0);
std::vector<WeightedPose> read_distribution_jsonl(std::istream& in);

/// Header line with grid parameters, then one [ix,iy,iz,pixel,tilt] array per cell.
void write_superset_jsonl(std::ostream& out, const PoseSuperset& superset);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace fixpose::app
