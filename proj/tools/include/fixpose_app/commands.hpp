#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fixpose/mesh.hpp"
#include "fixpose/pose_distribution.hpp"
#include "fixpose/pose_search.hpp"
#include "fixpose/simulation.hpp"
#include "fixpose_app/report.hpp"

namespace fixpose::app {

struct GlobalOptions {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool json = false;
};

/// Search and distribution settings shared by `bound` and `simulate --run`.
struct AnalysisOptions {
  std::size_t cell_budget = 10'000'000;
  double stop_fraction = 0.125;
  int max_rot_level = kMaxRotationLevel;
  int max_pos_level = 20;
  double probe_radius = 0.0;
  int k_per_cell = 8;
  double sigma_factor = 0.3;
  std::size_t max_samples = 1'000'000;
  bool distribution = true;
  bool wall_time = false;
  std::optional<std::filesystem::path> table_cache;
};

struct Analysis {
  std::shared_ptr<const SearchContext> context;
  PoseSuperset superset;
  BoundsReport bounds;
  std::optional<DiscretePoseDistribution> distribution;
  RunReport report;
};

/// compute_superset -> point_estimate -> distribution -> confidence intervals
/// -> multimodality. Throws InconsistentMeasurementsError.
Analysis analyze(const TriangleMesh& mesh, const MeasurementSet& meas, const AnalysisOptions& options,
                 const GlobalOptions& global);

struct ArtifactOptions {
  bool superset = true;
  bool distribution = true;
  bool plot = true;
  double min_probability = 1e-12;  ///< distribution.jsonl omits samples below this
  std::vector<Quat> markers;  ///< plot markers, mesh frame
};

/// Writes report.json, superset.jsonl, distribution.jsonl and plot.svg into
/// `out_dir`; returns the report path.
std::filesystem::path write_artifacts(const Analysis& analysis, const std::filesystem::path& out_dir,
                                      const ArtifactOptions& artifacts);

struct BoundOptions {
  std::filesystem::path mesh;
  std::filesystem::path points;
  std::string unit = "m";
  std::optional<double> sample_bound;
  double numeric_slack = 1e-7;
  std::optional<std::filesystem::path> calibration;
  std::optional<std::filesystem::path> truth;  ///< trial JSON; adds plot markers
  std::filesystem::path out_dir = "fixpose_out";
  AnalysisOptions analysis;
  ArtifactOptions artifacts;
};

struct CommandResult {
  RunReport report;
  std::filesystem::path report_path;
};

CommandResult cmd_bound(const BoundOptions& options, const GlobalOptions& global);

struct SimulateOptions {
  std::string object = "membrane";
  std::optional<std::filesystem::path> mesh;
  std::string unit = "m";
  std::size_t n_uniform = 1000;
  std::size_t n_samples = 10;
  double sample_bound = 1e-3;
  double noise_scale = 0.3;
  bool noiseless = false;
  std::size_t trials = 1;
  bool run = false;
  int axial_copies = 36;
  std::filesystem::path out_dir = "fixpose_sim";
  AnalysisOptions analysis;
  ArtifactOptions artifacts;
};

json trial_to_json(const SimulationTrial& trial, const SimulationSpec& spec, int axial_copies = 36);

/// Ground truth composed with the object's symmetries (mesh frame).
std::vector<Quat> symmetric_ground_truths(const SimulationTrial& trial, int axial_copies = 36);

struct BatchRow {
  std::size_t trial = 0;
  double pos_bound = 0.0, rot_bound = 0.0, pos_ci99 = 0.0, rot_ci99 = 0.0, pos_err = 0.0, rot_err = 0.0;
};

/// Single trial: writes trial.json, points.csv, mesh.obj (and the bound
/// artifacts with `run`); returns the path of trial.json or report.json.
/// Batch (trials > 1): writes batch.csv; returns its path.
std::filesystem::path cmd_simulate(const SimulateOptions& options, const GlobalOptions& global);

struct CalibrateOptions {
  std::filesystem::path log;
  Vec3 up = Vec3::UnitZ();
  double margin = 1.25;
  double floor = 1e-4;
  std::filesystem::path out = "calibration.json";
};

std::filesystem::path cmd_calibrate_tip(const CalibrateOptions& options, const GlobalOptions& global);

struct PlotCommandOptions {
  std::filesystem::path distribution;
  std::filesystem::path out = "plot.svg";
  std::optional<std::filesystem::path> truth;
  std::size_t max_points = 20000;
};

std::filesystem::path cmd_plot(const PlotCommandOptions& options, const GlobalOptions& global);

/// Markers from a trial JSON ("symmetric_rotations", else "ground_truth").
std::vector<Quat> markers_from_trial(const json& trial);

}  // namespace fixpose::app
