#include "fixpose_app/commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fixpose/log.hpp"
#include "fixpose_app/plot.hpp"

namespace fixpose::app {

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

SearchConfig search_config(const AnalysisOptions& o, const GlobalOptions& g) {
  SearchConfig c;
  c.cell_budget = o.cell_budget;
  c.stop_fraction = o.stop_fraction;
  c.max_rot_level = o.max_rot_level;
  c.max_pos_level = o.max_pos_level;
  c.probe_radius = o.probe_radius;
  c.threads = g.threads;
  c.table_cache = o.table_cache;
  return c;
}

std::string summary_line(const RunReport& r) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(3);
  s << "position bound " << r.position_bound * 1e3 << " mm, rotation bound " << r.rotation_bound * 180.0 / M_PI
    << " deg, " << r.cell_count << " cells (" << r.stop_reason << ")";
  if (r.has_distribution && !r.confidence.empty()) {
    s << ", 99% CI " << r.confidence.back().position_radius * 1e3 << " mm / "
      << r.confidence.back().rotation_angle * 180.0 / M_PI << " deg";
  }
  if (r.multimodal) s << ", multimodal (" << r.rotation_components << " components)";
  return s.str();
}

void emit(const GlobalOptions& g, const std::filesystem::path& path, const json& payload) {
  if (g.json) {
    std::cout << payload.dump(2) << '\n';
  } else {
    std::cout << path.string() << '\n';
  }
}

double min_symmetric_angle(const Quat& q, std::span<const Quat> copies) {
  double best = M_PI;
  for (const Quat& c : copies) best = std::min(best, geodesic_angle(q, c));
  return best;
}

}  // namespace

Analysis analyze(const TriangleMesh& mesh, const MeasurementSet& meas, const AnalysisOptions& options,
                 const GlobalOptions& global) {
  const auto start = std::chrono::steady_clock::now();
  Analysis a;
  a.context = std::make_shared<const SearchContext>(mesh, meas, search_config(options, global));
  a.superset = compute_superset(a.context);
  a.bounds = point_estimate(a.superset);

  RunReport& r = a.report;
  const SearchContext& ctx = *a.context;
  r.mesh_digest = hex64(mesh_digest(mesh));
  r.point_count = meas.points.size();
  r.sample_bound = meas.sample_bound;
  r.numeric_slack = meas.numeric_slack;
  r.probe_radius = options.probe_radius;
  r.seed = global.seed;
  // The search works in the centered frame; report the box for the reference point.
  r.aabb_min = ctx.aabb().min;
  r.aabb_max = ctx.aabb().max;
  r.aabb_fallback = ctx.aabb().used_fallback;
  r.reference_point = ctx.mesh_center();
  r.pos_level = a.superset.pos_level;
  r.rot_level = a.superset.rot_level;
  r.cell_count = a.superset.size();
  r.stop_reason = to_string(a.superset.stop_reason);
  r.estimate = to_mesh_frame(Pose{a.bounds.rotation_estimate, a.bounds.position_estimate}, ctx.mesh_center());
  r.position_bound = a.bounds.position_bound;
  r.rotation_bound = a.bounds.rotation_bound;

  if (options.distribution) {
    DistributionConfig dc;
    dc.sigma_factor = options.sigma_factor;
    dc.k_per_cell = options.k_per_cell;
    dc.max_samples = options.max_samples;
    dc.seed = global.seed;
    dc.threads = global.threads;
    a.distribution = estimate_distribution(a.superset, dc);
    try {
      const Pose expected = expected_pose(*a.distribution);
      const ConfidenceReport ci = confidence_intervals(*a.distribution, expected, kDefaultConfidenceLevels);
      r.has_distribution = true;
      r.expected = to_mesh_frame(expected, ctx.mesh_center());
      r.confidence = ci.levels;
      r.sigma = a.distribution->sigma;
      r.k_per_cell = a.distribution->k_per_cell;
    } catch (const RotationAmbiguityError& e) {
      warn(e.what());
    }
  }

  const auto cells = unique_rotation_cells(a.superset);
  r.rotation_components = rotation_components(cells, kAdjacencyGammaFactor * a.superset.gamma());
  r.multimodal = r.rotation_components > 1;
  if (options.wall_time) {
    r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return a;
}

std::filesystem::path write_artifacts(const Analysis& analysis, const std::filesystem::path& out_dir,
                                      const ArtifactOptions& artifacts) {
  std::filesystem::create_directories(out_dir);
  const auto report_path = out_dir / "report.json";
  write_text_file(report_path, to_json(analysis.report).dump(2) + "\n");
  if (artifacts.superset) {
    std::ostringstream s;
    write_superset_jsonl(s, analysis.superset);
    write_text_file(out_dir / "superset.jsonl", s.str());
  }
  if (analysis.distribution) {
    // Samples are in the centered frame; store them in the mesh frame.
    DiscretePoseDistribution mesh_frame = *analysis.distribution;
    for (auto& s : mesh_frame.samples) s.pose = to_mesh_frame(s.pose, analysis.context->mesh_center());
    if (artifacts.distribution) {
      std::ostringstream s;
      write_distribution_jsonl(s, mesh_frame, artifacts.min_probability);
      write_text_file(out_dir / "distribution.jsonl", s.str());
    }
    if (artifacts.plot) write_text_file(out_dir / "plot.svg", mollweide_svg(mesh_frame.samples, artifacts.markers));
  }
  return report_path;
}

std::vector<Quat> markers_from_trial(const json& trial) {
  std::vector<Quat> out;
  if (trial.contains("symmetric_rotations")) {
    for (const auto& q : trial.at("symmetric_rotations")) out.push_back(quat_from_json(q).normalized());
  } else if (trial.contains("ground_truth")) {
    out.push_back(pose_from_json(trial.at("ground_truth")).rotation.normalized());
  }
  return out;
}

CommandResult cmd_bound(const BoundOptions& options, const GlobalOptions& global) {
  const TriangleMesh mesh = load_mesh(options.mesh, unit_scale_from_name(options.unit));
  MeasurementSet meas;
  meas.points = read_points_csv(options.points);
  meas.numeric_slack = options.numeric_slack;
  if (options.calibration) {
    const TipCalibration cal = calibration_from_json(read_json_file(*options.calibration));
    meas.sample_bound = cal.sample_bound;
  }
  if (options.sample_bound) meas.sample_bound = *options.sample_bound;

  ArtifactOptions artifacts = options.artifacts;
  if (options.truth) artifacts.markers = markers_from_trial(read_json_file(*options.truth));

  const Analysis a = analyze(mesh, meas, options.analysis, global);
  CommandResult result{a.report, write_artifacts(a, options.out_dir, artifacts)};
  std::cerr << summary_line(a.report) << '\n';
  emit(global, result.report_path, to_json(a.report));
  return result;
}

std::vector<Quat> symmetric_ground_truths(const SimulationTrial& trial, int axial_copies) {
  const Quat gt = trial.ground_truth.rotation;
  if (!trial.primitive) return {gt};
  std::vector<Quat> out;
  for (const Quat& s : symmetry_rotations(*trial.primitive, axial_copies)) out.push_back((gt * s).normalized());
  return out;
}

json trial_to_json(const SimulationTrial& trial, const SimulationSpec& spec, int axial_copies) {
  json points = json::array();
  json noise = json::array();
  for (const Vec3& p : trial.measurements.points) points.push_back(vec_to_json(p));
  for (const Vec3& e : trial.noise) noise.push_back(vec_to_json(e));
  json sym = json::array();
  for (const Quat& q : symmetric_ground_truths(trial, axial_copies)) sym.push_back(quat_to_json(q));
  return json{{"seed", spec.seed},
              {"object", trial.primitive ? to_string(*trial.primitive) : std::string("mesh")},
              {"mesh_digest", hex64(mesh_digest(trial.mesh))},
              {"n_uniform", spec.n_uniform},
              {"n_samples", spec.n_samples},
              {"sample_bound", trial.measurements.sample_bound},
              {"numeric_slack", trial.measurements.numeric_slack},
              {"noise_scale", spec.noise_scale},
              {"noiseless", spec.noiseless},
              {"ground_truth", pose_to_json(trial.ground_truth)},
              {"points", points},
              {"noise", noise},
              {"symmetric_rotations", sym}};
}

std::filesystem::path cmd_simulate(const SimulateOptions& options, const GlobalOptions& global) {
  if (options.trials < 1) throw std::invalid_argument("--trials must be at least 1");
  SimulationSpec spec;
  if (options.mesh) {
    spec.primitive.reset();
    spec.mesh = load_mesh(*options.mesh, unit_scale_from_name(options.unit));
  } else {
    spec.primitive = primitive_from_name(options.object);
  }
  spec.n_uniform = options.n_uniform;
  spec.n_samples = options.n_samples;
  spec.sample_bound = options.sample_bound;
  spec.noise_scale = options.noise_scale;
  spec.noiseless = options.noiseless;
  spec.validate();
  std::filesystem::create_directories(options.out_dir);

  if (options.trials == 1) {
    spec.seed = global.seed;
    const SimulationTrial trial = run_trial(spec);
    write_text_file(options.out_dir / "trial.json", trial_to_json(trial, spec, options.axial_copies).dump(2) + "\n");
    std::ostringstream pts;
    write_points_csv(pts, trial.measurements.points);
    write_text_file(options.out_dir / "points.csv", pts.str());
    std::ostringstream obj;
    write_obj(trial.mesh, obj);
    write_text_file(options.out_dir / "mesh.obj", obj.str());
    if (!options.run) {
      emit(global, options.out_dir / "trial.json", trial_to_json(trial, spec, options.axial_copies));
      return options.out_dir / "trial.json";
    }
    ArtifactOptions artifacts = options.artifacts;
    artifacts.markers = symmetric_ground_truths(trial, options.axial_copies);
    const Analysis a = analyze(trial.mesh, trial.measurements, options.analysis, global);
    const auto path = write_artifacts(a, options.out_dir, artifacts);
    std::cerr << summary_line(a.report) << '\n';
    emit(global, path, to_json(a.report));
    return path;
  }

  std::ostringstream csv;
  csv << "trial,pos_bound,rot_bound,pos_ci99,rot_ci99,pos_err,rot_err\n";
  json rows = json::array();
  for (std::size_t i = 0; i < options.trials; ++i) {
    spec.seed = trial_seed(global.seed, i);
    const SimulationTrial trial = run_trial(spec);
    GlobalOptions g = global;
    g.seed = spec.seed;
    const Analysis a = analyze(trial.mesh, trial.measurements, options.analysis, g);
    const RunReport& r = a.report;
    const auto copies = symmetric_ground_truths(trial, options.axial_copies);
    const Pose& shown = r.has_distribution ? r.expected : r.estimate;
    BatchRow row{i,
                 r.position_bound,
                 r.rotation_bound,
                 r.has_distribution ? r.confidence.back().position_radius : std::nan(""),
                 r.has_distribution ? r.confidence.back().rotation_angle : std::nan(""),
                 (shown.apply(r.reference_point) - trial.ground_truth.apply(r.reference_point)).norm(),
                 min_symmetric_angle(shown.rotation, copies)};
    char line[256];
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", row.trial, row.pos_bound, row.rot_bound,
                  row.pos_ci99, row.rot_ci99, row.pos_err, row.rot_err);
    csv << line;
    rows.push_back({{"trial", row.trial}, {"pos_bound", row.pos_bound}, {"rot_bound", row.rot_bound},
                    {"pos_err", row.pos_err}, {"rot_err", row.rot_err}});
    std::cerr << "trial " << i << ": " << summary_line(r) << '\n';
  }
  const auto path = options.out_dir / "batch.csv";
  write_text_file(path, csv.str());
  emit(global, path, json{{"batch", path.string()}, {"rows", rows}});
  return path;
}

std::filesystem::path cmd_calibrate_tip(const CalibrateOptions& options, const GlobalOptions& global) {
  std::ifstream in(options.log);
  if (!in) throw InputError("cannot open pose log " + options.log.string());
  const PoseLog log = PoseLog::parse_csv(in);
  const TipCalibration cal = calibrate_tip(log, options.up, options.margin, options.floor);
  const json j = calibration_to_json(cal);
  write_text_file(options.out, j.dump(2) + "\n");
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(3);
  s << "tip offset [" << cal.tip_offset.x() * 1e3 << ", " << cal.tip_offset.y() * 1e3 << ", "
    << cal.tip_offset.z() * 1e3 << "] mm, b_s " << cal.sample_bound * 1e3 << " mm";
  std::cerr << s.str() << '\n';
  emit(global, options.out, j);
  return options.out;
}

std::filesystem::path cmd_plot(const PlotCommandOptions& options, const GlobalOptions& global) {
  std::ifstream in(options.distribution);
  if (!in) throw InputError("cannot open distribution " + options.distribution.string());
  const auto samples = read_distribution_jsonl(in);
  if (samples.empty()) throw InputError("distribution file is empty");
  std::vector<Quat> markers;
  if (options.truth) markers = markers_from_trial(read_json_file(*options.truth));
  PlotOptions po;
  po.max_points = options.max_points;
  write_text_file(options.out, mollweide_svg(samples, markers, po));
  emit(global, options.out, json{{"plot", options.out.string()}, {"samples", samples.size()}});
  return options.out;
}

}  // namespace fixpose::app
