#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fixpose/distance_index.hpp"
#include "fixpose/geometry.hpp"

namespace fixpose {

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CalibrationStage { kCoarse, kTable, kFine };

/// One recorded flange pose T_base^tcp.
struct StagedPose {
  CalibrationStage stage = CalibrationStage::kCoarse;
  Pose pose;
};

/// Flange poses recorded for tip calibration. CSV columns:
/// stage,qw,qx,qy,qz,tx,ty,tz  with stage in {coarse, table, fine}.
struct PoseLog {
  std::vector<StagedPose> entries;

  std::vector<Pose> stage(CalibrationStage s) const;

  static PoseLog parse_csv(std::istream& in);
  void write_csv(std::ostream& out) const;
};

struct TipCalibration {
  Vec3 tip_offset = Vec3::Zero();      ///< ball center in the flange frame
  Vec3 coarse_tip_offset = Vec3::Zero();
  Vec3 table_normal = Vec3::UnitZ();
  double plane_offset = 0.0;           ///< n . p_base for table contacts
  std::vector<double> residuals;       ///< per fine-stage pose, meters
  double sample_bound = 0.0;           ///< derived b_s
};

/// Least-squares pivot calibration: T_i p_tip = p_fixed for all i.
/// Needs >= 4 poses; throws CalibrationError when the orientations do not
/// constrain the tip (condition number in the message).
Vec3 coarse_tip_calibration(std::span<const Pose> poses);

/// Unit normal of the best-fit plane (least singular vector of the centered
/// points), signed to have a non-negative dot product with `up`.
Vec3 table_normal(std::span<const Vec3> points, const Vec3& up = Vec3::UnitZ());

struct FineTipResult {
  Vec3 tip_offset = Vec3::Zero();
  double plane_offset = 0.0;
  std::vector<double> residuals;
};

/// Least squares over (p_tip, k) from  n^T (R_i p_tip + t_i) = k  for poses
/// touching one plane with normal n.
FineTipResult fine_tip_calibration(std::span<const Pose> poses, const Vec3& normal);

/// margin_factor * max |residual|. Throws std::invalid_argument on empty input
/// or margin_factor < 1.
double derive_sample_bound(std::span<const double> residuals, double margin_factor = 1.25);

/// Full pipeline over a pose log: coarse pivot, table normal from the table
/// stage translations, fine calibration, b_s = max(floor, margin * max residual).
TipCalibration calibrate_tip(const PoseLog& log, const Vec3& up = Vec3::UnitZ(), double margin_factor = 1.25,
                             double sample_bound_floor = 1e-4);

/// Distance from `query` to the surface offset outward by `ball_radius`:
/// |d - ball_radius| where d is the point-to-mesh distance. Exact for queries
/// outside the solid; never overestimates near concavities tighter than the ball.
double offset_distance(const DistanceIndex& index, const Vec3& query, double ball_radius);

std::string to_string(CalibrationStage s);
CalibrationStage stage_from_string(const std::string& s);

}  // namespace fixpose
