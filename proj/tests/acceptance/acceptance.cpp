// Acceptance runner: one PASS/FAIL line per criterion. Exit status is nonzero if
// any selected criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "fixpose/distance_index.hpp"
#include "fixpose/enclosing_ball.hpp"
#include "fixpose/init_bound.hpp"
#include "fixpose/simulation.hpp"
#include "fixpose/tip_calibration.hpp"
#include "fixpose_app/commands.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fixpose;
using namespace fixpose::app;

namespace {

constexpr double kMm = 1e-3;
constexpr double kDeg = M_PI / 180.0;

struct Settings {
  fs::path cache;
  fs::path cli;
  unsigned threads = 1;
};

bool report(int id, bool pass, const std::string& what) {
  std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << what << std::endl;
  return pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

AnalysisOptions default_analysis(const Settings& s) {
  AnalysisOptions o;
  o.table_cache = s.cache;
  return o;
}

struct TrialOutcome {
  SimulationTrial trial;
  RunReport report;
  double pos_err = 0.0;
  double rot_err = 0.0;
  double expected_pos_err = 0.0;
  double seconds = 0.0;
};

double reference_error(const Pose& estimate, const Pose& truth, const Vec3& ref) {
  return (estimate.apply(ref) - truth.apply(ref)).norm();
}

double symmetric_error(const Quat& q, const std::vector<Quat>& copies) {
  double best = M_PI;
  for (const Quat& c : copies) best = std::min(best, geodesic_angle(q, c));
  return best;
}

TrialOutcome run_default_trial(const Settings& s, SimulationSpec spec, bool distribution) {
  const auto start = std::chrono::steady_clock::now();
  TrialOutcome out;
  out.trial = run_trial(spec);
  AnalysisOptions o = default_analysis(s);
  o.distribution = distribution;
  const Analysis a = analyze(out.trial.mesh, out.trial.measurements, o, GlobalOptions{spec.seed, s.threads, false});
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.report = a.report;
  const Vec3& ref = a.report.reference_point;
  const auto copies = symmetric_ground_truths(out.trial);
  out.pos_err = reference_error(a.report.estimate, out.trial.ground_truth, ref);
  out.rot_err = symmetric_error(a.report.estimate.rotation, copies);
  if (a.report.has_distribution) out.expected_pos_err = reference_error(a.report.expected, out.trial.ground_truth, ref);
  return out;
}

std::vector<TrialOutcome> membrane_batch(const Settings& s, std::uint64_t master, std::size_t n, double b_s,
                                         std::size_t points, bool distribution) {
  std::vector<TrialOutcome> out;
  for (std::size_t i = 0; i < n; ++i) {
    SimulationSpec spec;
    spec.primitive = Primitive::kMembrane;
    spec.sample_bound = b_s;
    spec.n_samples = points;
    spec.seed = trial_seed(master, i);
    out.push_back(run_default_trial(s, spec, distribution));
    const auto& t = out.back();
    std::cerr << fmt("  trial %zu: pos %.3f/%.3f mm  rot %.3f/%.3f deg  cells %zu  %.1f s\n", i, t.pos_err / kMm,
                     t.report.position_bound / kMm, t.rot_err / kDeg, t.report.rotation_bound / kDeg,
                     t.report.cell_count, t.seconds);
  }
  return out;
}

// --- 1, 2, 7 --------------------------------------------------------------------

bool guarantee_ci_runtime(const Settings& s, const std::set<int>& which) {
  const auto trials = membrane_batch(s, 1001, 100, 1.0 * kMm, 10, true);
  bool ok = true;
  if (which.count(1)) {
    std::size_t held = 0;
    for (const auto& t : trials) {
      if (t.pos_err <= t.report.position_bound && t.rot_err <= t.report.rotation_bound) ++held;
    }
    ok &= report(1, held == trials.size(), fmt("bounds hold in %zu/%zu trials", held, trials.size()));
  }
  if (which.count(2)) {
    std::vector<double> errs;
    std::size_t tight = 0;
    for (const auto& t : trials) {
      errs.push_back(t.expected_pos_err);
      if (t.report.has_distribution && t.report.confidence.back().position_radius < t.report.position_bound) ++tight;
    }
    const double med = median(errs);
    const double frac = double(tight) / double(trials.size());
    ok &= report(2, med < 1.0 * kMm && frac >= 0.95,
                 fmt("median expected-pose error %.4f mm (< 1 mm); 99%% CI below bound in %.0f%% of trials (>= 95%%)",
                     med / kMm, 100.0 * frac));
  }
  if (which.count(7)) {
    double worst = 0.0, total = 0.0;
    for (const auto& t : trials) {
      worst = std::max(worst, t.seconds);
      total += t.seconds;
    }
    ok &= report(7, worst <= 120.0 && total <= 3600.0,
                 fmt("slowest trial %.1f s (<= 120 s), batch %.1f s (<= 3600 s) on %u thread(s)", worst, total, s.threads));
  }
  return ok;
}

// --- 3 ----------------------------------------------------------------------------

bool scaling(const Settings& s) {
  auto bounds = [&](double b_s) {
    std::vector<double> v;
    for (const auto& t : membrane_batch(s, 3003, 25, b_s, 10, false)) v.push_back(t.report.position_bound);
    return median(v);
  };
  const double fine = bounds(0.3 * kMm);
  const double coarse = bounds(3.0 * kMm);
  const double ratio = coarse / fine;
  return report(3, ratio >= 5.0 && ratio <= 20.0,
                fmt("median position bound %.3f mm at 3.0 mm / %.3f mm at 0.3 mm = %.2f (in [5, 20])", coarse / kMm,
                    fine / kMm, ratio));
}

// --- 4 ----------------------------------------------------------------------------

// Every symmetric copy of the truth must be inside a retained cell: rotation within
// gamma of the cell's center rotation, centered-frame translation inside its cube.
std::pair<std::size_t, std::size_t> copies_contained(const Settings& s, Primitive kind, std::uint64_t seed) {
  SimulationSpec spec;
  spec.primitive = kind;
  spec.seed = seed;
  const SimulationTrial trial = run_trial(spec);
  AnalysisOptions o = default_analysis(s);
  o.distribution = false;
  const Analysis a = analyze(trial.mesh, trial.measurements, o, GlobalOptions{seed, s.threads, false});
  const PoseSuperset& sup = a.superset;
  const Vec3 c = a.context->mesh_center();
  const double gamma = sup.gamma();
  const auto copies = symmetric_ground_truths(trial);
  std::size_t inside = 0;
  for (const Quat& q : copies) {
    const Vec3 t = trial.ground_truth.translation + q * c;
    bool found = false;
    for (std::size_t i = 0; i < sup.size() && !found; ++i) {
      const PositionCell cube = a.context->grid().cell(sup.pos_level, sup.frontier[i].pos);
      if (((t - cube.center).cwiseAbs().array() > 0.5 * cube.side).any()) continue;
      found = geodesic_angle(rotation_cell_center(sup.cell(i).rotation), q) <= gamma;
    }
    inside += found;
  }
  std::cerr << fmt("  %s: %zu cells, gamma %.3f deg, %zu/%zu copies\n", to_string(kind).c_str(), sup.size(),
                   gamma / kDeg, inside, copies.size());
  return {inside, copies.size()};
}

bool symmetry(const Settings& s) {
  const auto [cube_in, cube_n] = copies_contained(s, Primitive::kCube, 4004);
  const auto [cyl_in, cyl_n] = copies_contained(s, Primitive::kCylinder, 4005);
  return report(4, cube_n == 24 && cube_in == cube_n && cyl_n == 72 && cyl_in == cyl_n,
                fmt("cube %zu/%zu copies retained (24 expected); cylinder %zu/%zu (36 turns x flip)", cube_in, cube_n,
                    cyl_in, cyl_n));
}

// --- 5 ----------------------------------------------------------------------------

bool asymmetric_tightness(const Settings& s) {
  const auto trials = membrane_batch(s, 5005, 25, 1.0 * kMm, 15, false);
  std::size_t tight = 0;
  for (const auto& t : trials) {
    if (t.report.position_bound <= 5.0 * kMm && t.report.rotation_bound <= 5.0 * kDeg) ++tight;
  }
  const double frac = double(tight) / double(trials.size());
  return report(5, frac >= 0.8, fmt("bounds within 5 mm and 5 deg in %zu/%zu trials (>= 80%%)", tight, trials.size()));
}

// --- 6 ----------------------------------------------------------------------------

bool oracles() {
  std::mt19937_64 rng(6006);
  std::uniform_real_distribution<double> u(-1.5, 1.5);

  double closest_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const TriangleMesh mesh = oracle::random_mesh(rng, 1 + i % 40);
    const DistanceIndex index(mesh);
    const Vec3 q(u(rng), u(rng), u(rng));
    closest_err = std::max(closest_err, std::abs(index.closest_point(q).distance - oracle::mesh_distance(mesh, q)));
  }

  double ball_err = 0.0;
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<Vec3> pts(1 + i % 12);
    for (auto& p : pts) p = Vec3(g(rng), g(rng), g(rng));
    const BoundingSphere ball = min_enclosing_sphere(pts);
    const auto ref = oracle::brute_force_ball(pts);
    ball_err = std::max({ball_err, std::abs(ball.radius - ref.radius), (ball.center - ref.center).norm()});
  }

  double gamma_err = 0.0;
  for (int i = 0; i <= 12; ++i) {
    for (int j = 0; j <= 12; ++j) {
      const double theta = 0.1 * i, phi = 0.1 * j;
      gamma_err = std::max(gamma_err, std::abs(gamma_bound(theta, phi) - oracle::dense_gamma(theta, phi, 1e-3)));
    }
  }

  // Measurement sets as the pipeline sees them: simulated trials on the normalized fixtures.
  bool aabb_contains = true;
  double aabb_slack = 0.0;
  const Primitive kinds[] = {Primitive::kMembrane, Primitive::kCube, Primitive::kCylinder, Primitive::kCone,
                             Primitive::kTetrahedron};
  for (int i = 0; i < 20; ++i) {
    SimulationSpec spec;
    spec.primitive = kinds[i % 5];
    spec.seed = 6100 + static_cast<std::uint64_t>(i);
    const SimulationTrial trial = run_trial(spec);
    const MeasurementSet& meas = trial.measurements;
    const PositionAABB box = feasible_aabb(meas, kNormalizedFixtureRadius);
    const auto scan = oracle::scan_ball_intersection(meas.points, kNormalizedFixtureRadius + meas.sample_bound, 1e-3);
    for (const Vec3& t : scan.feasible) aabb_contains &= box.contains(t);
    if (scan.empty()) continue;
    aabb_slack = std::max({aabb_slack, (scan.min - box.min).maxCoeff(), (box.max - scan.max).maxCoeff()});
  }

  double calib_err = 0.0;
  std::uniform_real_distribution<double> small(-0.05, 0.05);
  for (int i = 0; i < 100; ++i) {
    const Vec3 tip(small(rng), small(rng), 0.1 + small(rng));
    const Vec3 n = Vec3(small(rng), small(rng), 1.0).normalized();
    const double offset = 2.0 * small(rng);
    PoseLog log;
    for (const auto& p : oracle::pivot_poses(tip, Vec3(0.4, 0.1, 0.2), 10, rng)) log.entries.push_back({CalibrationStage::kCoarse, p});
    for (const auto& p : oracle::plane_poses(tip, n, offset, 6, rng)) log.entries.push_back({CalibrationStage::kTable, p});
    for (const auto& p : oracle::plane_poses(tip, n, offset, 10, rng)) log.entries.push_back({CalibrationStage::kFine, p});
    const TipCalibration c = calibrate_tip(log);
    calib_err = std::max({calib_err, (c.tip_offset - tip).norm(), (c.table_normal - n).norm(),
                          std::abs(c.plane_offset - offset)});
  }

  const bool pass = closest_err <= 1e-12 && ball_err <= 1e-9 && gamma_err <= 1e-6 && aabb_contains &&
                    aabb_slack <= 2e-3 && calib_err <= 1e-9;
  return report(6, pass,
                fmt("closest point %.2e (<= 1e-12); enclosing sphere %.2e (<= 1e-9); gamma %.2e (<= 1e-6); "
                    "AABB %s, slack %.2e (<= 2e-3); calibration %.2e (<= 1e-9)",
                    closest_err, ball_err, gamma_err, aabb_contains ? "contains grid" : "MISSES grid points",
                    aabb_slack, calib_err));
}

// --- 8 ----------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// JSON files compare after parsing and re-serializing with sorted keys.
std::string canonical_text(const fs::path& p) {
  const std::string text = slurp(p);
  if (p.extension() == ".json") return json::parse(text).dump();
  return text;
}

int run_cli(const Settings& s, const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + s.cli.string() + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool determinism(const Settings& s) {
  std::vector<std::string> failures;

  SimulationSpec spec;
  spec.seed = 8008;
  const SimulationTrial trial = run_trial(spec);
  const AnalysisOptions o = default_analysis(s);
  const Analysis a = analyze(trial.mesh, trial.measurements, o, GlobalOptions{8008, s.threads, false});
  const Analysis b = analyze(trial.mesh, trial.measurements, o, GlobalOptions{8008, s.threads, false});
  if (!(a.report == b.report) || to_json(a.report).dump() != to_json(b.report).dump()) failures.push_back("library report");

  if (!s.cli.empty()) {
    const fs::path root = fs::temp_directory_path() / fmt("fixpose_acceptance_%d", static_cast<int>(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cache = " --table-cache '" + s.cache.string() + "'";
    // Setup artifacts consumed by the bound, plot and calibration commands.
    {
      std::mt19937_64 rng(8);
      const Vec3 tip(0.01, -0.02, 0.12);
      PoseLog log;
      for (const auto& p : oracle::pivot_poses(tip, Vec3(0.4, 0.0, 0.1), 10, rng)) log.entries.push_back({CalibrationStage::kCoarse, p});
      for (const auto& p : oracle::plane_poses(tip, Vec3::UnitZ(), 0.0, 6, rng)) log.entries.push_back({CalibrationStage::kTable, p});
      for (const auto& p : oracle::plane_poses(tip, Vec3::UnitZ(), 0.0, 10, rng)) log.entries.push_back({CalibrationStage::kFine, p});
      std::ofstream out(root / "log.csv");
      log.write_csv(out);
    }
    if (run_cli(s, root, "--seed 8 simulate --out-dir input") != 0) failures.push_back("cli setup");

    struct Command {
      std::string name;
      std::string args;
      std::vector<std::string> files;
    };
    const std::vector<Command> commands{
        {"simulate", "--seed 8 simulate --object cube --out-dir OUT", {"trial.json", "points.csv", "mesh.obj"}},
        {"simulate --run", "--seed 9 simulate --run --out-dir OUT" + cache,
         {"trial.json", "report.json", "superset.jsonl", "distribution.jsonl", "plot.svg"}},
        {"simulate batch", "--seed 10 simulate --trials 2 --out-dir OUT --no-distribution" + cache, {"batch.csv"}},
        {"bound", "--seed 11 bound --mesh input/mesh.obj --points input/points.csv --out-dir OUT" + cache,
         {"report.json", "superset.jsonl", "distribution.jsonl", "plot.svg"}},
        {"calibrate-tip", "calibrate-tip --log log.csv --out OUT/calibration.json", {"calibration.json"}},
    };
    auto with_out = [](std::string args, const std::string& out) {
      const auto pos = args.find("OUT");
      return args.replace(pos, 3, out);
    };
    int n = 0;
    for (const auto& c : commands) {
      const std::string d1 = fmt("r%d_a", n), d2 = fmt("r%d_b", n);
      ++n;
      fs::create_directories(root / d1);
      fs::create_directories(root / d2);
      const int e1 = run_cli(s, root, with_out(c.args, d1));
      const int e2 = run_cli(s, root, with_out(c.args, d2));
      bool same = e1 == 0 && e2 == 0;
      for (const auto& f : c.files) same = same && fs::exists(root / d1 / f) && canonical_text(root / d1 / f) == canonical_text(root / d2 / f);
      if (!same) failures.push_back(c.name);
    }
    const int p1 = run_cli(s, root, "plot --distribution r1_a/distribution.jsonl --out p1.svg");
    const int p2 = run_cli(s, root, "plot --distribution r1_a/distribution.jsonl --out p2.svg");
    if (p1 != 0 || p2 != 0 || slurp(root / "p1.svg") != slurp(root / "p2.svg")) failures.push_back("plot");
    fs::remove_all(root);
  }

  std::string detail = failures.empty() ? "identical outputs" : "differs:";
  for (const auto& f : failures) detail += " [" + f + "]";
  if (s.cli.empty()) detail += " (library only, no --cli given)";
  return report(8, failures.empty(), detail);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fixpose acceptance criteria"};
  std::vector<int> criteria{1, 2, 3, 4, 5, 6, 7, 8};
  Settings s;
  s.threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--criteria", criteria, "Criteria to run")->delimiter(',')->check(CLI::Range(1, 8));
  app.add_option("--cache", s.cache, "Rotation bound table cache directory")->required();
  app.add_option("--cli", s.cli, "fixpose executable for CLI determinism checks");
  app.add_option("--threads", s.threads, "Worker threads");
  CLI11_PARSE(app, argc, argv);
  // The CLI checks run from a scratch directory.
  s.cache = fs::absolute(s.cache);
  if (!s.cli.empty()) s.cli = fs::absolute(s.cli);

  const std::set<int> which(criteria.begin(), criteria.end());
  bool ok = true;
  try {
    if (which.count(1) || which.count(2) || which.count(7)) ok &= guarantee_ci_runtime(s, which);
    if (which.count(3)) ok &= scaling(s);
    if (which.count(4)) ok &= symmetry(s);
    if (which.count(5)) ok &= asymmetric_tightness(s);
    if (which.count(6)) ok &= oracles();
    if (which.count(8)) ok &= determinism(s);
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  return ok ? 0 : 1;
}
