#include "fixpose/tip_calibration.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/SVD>

namespace fixpose {

namespace {

constexpr double kMaxCondition = 1e8;

Eigen::VectorXd solve_checked(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const char* what) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cond = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(cond < kMaxCondition)) {
    std::ostringstream msg;
    msg << what << ": orientations do not constrain the tip (condition number " << cond << ")";
    throw CalibrationError(msg.str());
  }
  return svd.solve(b);
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string to_string(CalibrationStage s) {
  switch (s) {
    case CalibrationStage::kCoarse: return "coarse";
    case CalibrationStage::kTable: return "table";
    case CalibrationStage::kFine: return "fine";
  }
  return "unknown";
}

CalibrationStage stage_from_string(const std::string& s) {
  if (s == "coarse") return CalibrationStage::kCoarse;
  if (s == "table") return CalibrationStage::kTable;
  if (s == "fine") return CalibrationStage::kFine;
  throw CalibrationError("unknown calibration stage '" + s + "'");
}

std::vector<Pose> PoseLog::stage(CalibrationStage s) const {
  std::vector<Pose> out;
  for (const auto& e : entries) {
    if (e.stage == s) out.push_back(e.pose);
  }
  return out;
}

PoseLog PoseLog::parse_csv(std::istream& in) {
  PoseLog log;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(trim(f));
    if (fields.size() != 8) throw CalibrationError("pose log line " + std::to_string(line_no) + ": expected 8 columns");
    if (fields[0] == "stage") continue;
    StagedPose entry;
    entry.stage = stage_from_string(fields[0]);
    double v[7];
    for (int i = 0; i < 7; ++i) {
      try {
        std::size_t used = 0;
        v[i] = std::stod(fields[i + 1], &used);
        if (used != fields[i + 1].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw CalibrationError("pose log line " + std::to_string(line_no) + ": bad number '" + fields[i + 1] + "'");
      }
    }
    const Quat q(v[0], v[1], v[2], v[3]);
    if (!(std::abs(q.norm() - 1.0) < 1e-6)) {
      throw CalibrationError("pose log line " + std::to_string(line_no) + ": quaternion is not unit length");
    }
    entry.pose = Pose{q.normalized(), Vec3(v[4], v[5], v[6])};
    log.entries.push_back(entry);
  }
  return log;
}

void PoseLog::write_csv(std::ostream& out) const {
  out << "stage,qw,qx,qy,qz,tx,ty,tz\n" << std::setprecision(17);
  for (const auto& e : entries) {
    const Quat& q = e.pose.rotation;
    const Vec3& t = e.pose.translation;
    out << to_string(e.stage) << ',' << q.w() << ',' << q.x() << ',' << q.y() << ',' << q.z() << ',' << t.x() << ','
        << t.y() << ',' << t.z() << '\n';
  }
}

Vec3 coarse_tip_calibration(std::span<const Pose> poses) {
  if (poses.size() < 4) throw CalibrationError("coarse tip calibration needs at least 4 poses");
  const auto n = static_cast<Eigen::Index>(poses.size());
  Eigen::MatrixXd a(3 * n, 6);
  Eigen::VectorXd b(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Pose& p = poses[static_cast<std::size_t>(i)];
    a.block<3, 3>(3 * i, 0) = p.rotation.toRotationMatrix();
    a.block<3, 3>(3 * i, 3) = Mat3::Identity();
    b.segment<3>(3 * i) = -p.translation;
  }
  return solve_checked(a, b, "coarse tip calibration").head<3>();
}

Vec3 table_normal(std::span<const Vec3> points, const Vec3& up) {
  if (points.size() < 3) throw CalibrationError("table normal needs at least 3 points");
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = (points[i] - centroid).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (!(s(1) > 1e-9 * std::max(s(0), 1e-300)) || s(0) == 0.0) throw CalibrationError("table points are colinear");
  Vec3 n = svd.matrixV().col(2).normalized();
  if (n.dot(up) < 0.0) n = -n;
  return n;
}

FineTipResult fine_tip_calibration(std::span<const Pose> poses, const Vec3& normal) {
  if (poses.size() < 4) throw CalibrationError("fine tip calibration needs at least 4 poses");
  const Vec3 n_hat = normal.normalized();
  const auto n = static_cast<Eigen::Index>(poses.size());
  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Pose& p = poses[static_cast<std::size_t>(i)];
    a.block<1, 3>(i, 0) = n_hat.transpose() * p.rotation.toRotationMatrix();
    a(i, 3) = -1.0;
    b(i) = -n_hat.dot(p.translation);
  }
  const Eigen::VectorXd x = solve_checked(a, b, "fine tip calibration");
  FineTipResult r;
  r.tip_offset = x.head<3>();
  r.plane_offset = x(3);
  const Eigen::VectorXd res = a * x - b;
  r.residuals.assign(res.data(), res.data() + res.size());
  return r;
}

double derive_sample_bound(std::span<const double> residuals, double margin_factor) {
  if (residuals.empty()) throw std::invalid_argument("derive_sample_bound: no residuals");
  if (!(margin_factor >= 1.0)) throw std::invalid_argument("derive_sample_bound: margin factor must be >= 1");
  double worst = 0.0;
  for (double r : residuals) worst = std::max(worst, std::abs(r));
  return margin_factor * worst;
}

TipCalibration calibrate_tip(const PoseLog& log, const Vec3& up, double margin_factor, double sample_bound_floor) {
  TipCalibration cal;
  const auto coarse = log.stage(CalibrationStage::kCoarse);
  cal.coarse_tip_offset = coarse_tip_calibration(coarse);

  const auto table = log.stage(CalibrationStage::kTable);
  std::vector<Vec3> contacts;
  for (const Pose& p : table) contacts.push_back(p.apply(cal.coarse_tip_offset));
  cal.table_normal = table_normal(contacts, up);

  const auto fine = log.stage(CalibrationStage::kFine);
  FineTipResult r = fine_tip_calibration(fine, cal.table_normal);
  cal.tip_offset = r.tip_offset;
  cal.plane_offset = r.plane_offset;
  cal.residuals = std::move(r.residuals);
  cal.sample_bound = std::max(sample_bound_floor, derive_sample_bound(cal.residuals, margin_factor));
  return cal;
}

double offset_distance(const DistanceIndex& index, const Vec3& query, double ball_radius) {
  if (!(ball_radius >= 0.0)) throw std::invalid_argument("offset_distance: ball radius must be non-negative");
  const double d = index.closest_point(query).distance;
  return ball_radius == 0.0 ? d : std::abs(d - ball_radius);
}

}  // namespace fixpose
