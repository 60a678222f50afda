// fixpose: guaranteed fixture pose bounds from probed surface points.

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fixpose/mesh.hpp"
#include "fixpose/pose_search.hpp"
#include "fixpose/tip_calibration.hpp"
#include "fixpose_app/commands.hpp"

namespace fs = std::filesystem;
using namespace fixpose;
using namespace fixpose::app;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitInconsistent = 2;

template <typename T>
void assign(T& target, const json& j) {
  target = j.get<T>();
}
void assign(fs::path& target, const json& j) { target = j.get<std::string>(); }
template <typename T>
void assign(std::optional<T>& target, const json& j) {
  T v;
  assign(v, j);
  target = v;
}

std::string normalize_key(std::string k) {
  for (char& c : k) {
    if (c == '_') c = '-';
  }
  return k;
}

// Options that may also be supplied by a --config JSON file. Command-line values win.
class ConfigBinder {
 public:
  template <typename T>
  CLI::Option* option(CLI::App* app, const std::string& scope, const std::string& name, T& target,
                      const std::string& help) {
    CLI::Option* opt = app->add_option("--" + name, target, help)->capture_default_str();
    entries_[scope][name] = {opt, [&target](const json& j) { assign(target, j); }};
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& scope, const std::string& name, bool& target,
                    const std::string& help) {
    CLI::Option* opt = app->add_flag("--" + name, target, help);
    entries_[scope][name] = {opt, [&target](const json& j) { target = j.get<bool>(); }};
    return opt;
  }

  void apply(const json& config, const std::string& scope) {
    if (!config.is_object()) throw InputError("config file must hold a JSON object");
    auto apply_object = [&](const json& obj) {
      for (const auto& [raw_key, value] : obj.items()) {
        if (value.is_object()) continue;
        const std::string key = normalize_key(raw_key);
        Entry* e = find(scope, key);
        if (!e) e = find("", key);
        if (!e) throw InputError("unknown config key '" + raw_key + "'");
        if (e->option->count() > 0) continue;
        try {
          e->set(value);
        } catch (const json::exception& ex) {
          throw InputError("config key '" + raw_key + "': " + ex.what());
        }
      }
    };
    apply_object(config);
    if (config.contains(scope) && config.at(scope).is_object()) apply_object(config.at(scope));
  }

 private:
  struct Entry {
    CLI::Option* option = nullptr;
    std::function<void(const json&)> set;
  };
  Entry* find(const std::string& scope, const std::string& key) {
    auto s = entries_.find(scope);
    if (s == entries_.end()) return nullptr;
    auto e = s->second.find(key);
    return e == s->second.end() ? nullptr : &e->second;
  }
  std::map<std::string, std::map<std::string, Entry>> entries_;
};

void add_analysis_options(ConfigBinder& binder, CLI::App* app, const std::string& scope, AnalysisOptions& a,
                          ArtifactOptions& art) {
  binder.option(app, scope, "cell-budget", a.cell_budget, "Maximum frontier cells");
  binder.option(app, scope, "stop-fraction", a.stop_fraction, "Stop once b_p + max b_r <= fraction * b_s");
  binder.option(app, scope, "max-rot-level", a.max_rot_level, "Deepest rotation grid level")->check(CLI::Range(0, kMaxRotationLevel));
  binder.option(app, scope, "max-pos-level", a.max_pos_level, "Deepest position grid level")->check(CLI::Range(0, 20));
  binder.option(app, scope, "probe-radius", a.probe_radius, "Ball-tip radius in meters (points are ball centers)");
  binder.option(app, scope, "k-per-cell", a.k_per_cell, "Distribution samples per cell");
  binder.option(app, scope, "sigma-factor", a.sigma_factor, "Likelihood sigma as a multiple of b_s");
  binder.option(app, scope, "max-samples", a.max_samples, "Cap on distribution samples");
  binder.option(app, scope, "table-cache", a.table_cache, "Directory caching the rotation bound table");
  app->add_flag("--no-distribution{false}", a.distribution, "Skip the likelihood distribution");
  app->add_flag("--no-superset-file{false}", art.superset, "Do not write superset.jsonl");
  app->add_flag("--no-distribution-file{false}", art.distribution, "Do not write distribution.jsonl");
  app->add_flag("--no-plot{false}", art.plot, "Do not write plot.svg");
  binder.option(app, scope, "min-probability", art.min_probability, "distribution.jsonl omits samples below this probability");
  binder.flag(app, scope, "wall-time", a.wall_time, "Record wall time in the report (breaks bitwise determinism)");
}

std::optional<fs::path> default_table_cache() {
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) return fs::path(xdg) / "fixpose";
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "fixpose";
  return std::nullopt;
}

Vec3 parse_vec3(const std::string& s) {
  std::stringstream ss(s);
  Vec3 v;
  char comma = 0;
  if (!(ss >> v.x() >> comma >> v.y() >> comma >> v.z())) throw InputError("expected a vector 'x,y,z', got '" + s + "'");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fixpose: guaranteed fixture pose bounds from probed surface points"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "fixpose 0.1.0");

  ConfigBinder binder;
  GlobalOptions global;
  std::optional<fs::path> config_path;
  binder.option(&app, "", "seed", global.seed, "Random seed");
  binder.option(&app, "", "threads", global.threads, "Worker threads (0 = all cores)");
  binder.flag(&app, "", "json", global.json, "Print the result as JSON on stdout");
  app.add_option("--config", config_path, "JSON file with option values (command line wins)");

  BoundOptions bound;
  auto* bound_cmd = app.add_subcommand("bound", "Compute the pose superset, bounds and distribution");
  binder.option(bound_cmd, "bound", "mesh", bound.mesh, "Fixture mesh (OBJ or STL)");
  binder.option(bound_cmd, "bound", "points", bound.points, "Measured points CSV (x,y,z)");
  binder.option(bound_cmd, "bound", "unit", bound.unit, "Mesh length unit: m, cm or mm")->check(CLI::IsMember({"m", "cm", "mm"}));
  binder.option(bound_cmd, "bound", "sample-bound", bound.sample_bound, "Sample error bound b_s in meters");
  binder.option(bound_cmd, "bound", "numeric-slack", bound.numeric_slack, "Numeric slack b_eps in meters");
  binder.option(bound_cmd, "bound", "calibration", bound.calibration, "Calibration JSON providing b_s");
  binder.option(bound_cmd, "bound", "truth", bound.truth, "Trial JSON whose rotations are marked in the plot");
  binder.option(bound_cmd, "bound", "out-dir", bound.out_dir, "Output directory");
  add_analysis_options(binder, bound_cmd, "bound", bound.analysis, bound.artifacts);

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate simulated trials, optionally running the bound pipeline");
  binder.option(sim_cmd, "simulate", "object", sim.object, "Builtin object")
      ->check(CLI::IsMember({"cube", "cone", "cylinder", "tetrahedron", "membrane"}));
  binder.option(sim_cmd, "simulate", "mesh", sim.mesh, "Mesh file instead of a builtin object");
  binder.option(sim_cmd, "simulate", "unit", sim.unit, "Mesh length unit: m, cm or mm")->check(CLI::IsMember({"m", "cm", "mm"}));
  binder.option(sim_cmd, "simulate", "n-uniform", sim.n_uniform, "Uniform surface samples before FPS");
  binder.option(sim_cmd, "simulate", "n-samples", sim.n_samples, "Measured points after FPS");
  binder.option(sim_cmd, "simulate", "sample-bound", sim.sample_bound, "Sample error bound b_s in meters");
  binder.option(sim_cmd, "simulate", "noise-scale", sim.noise_scale, "Noise std as a multiple of b_s");
  binder.flag(sim_cmd, "simulate", "noiseless", sim.noiseless, "No measurement noise");
  binder.option(sim_cmd, "simulate", "trials", sim.trials, "Number of trials (> 1 writes batch.csv)");
  binder.flag(sim_cmd, "simulate", "run", sim.run, "Run the bound pipeline on a single trial");
  binder.option(sim_cmd, "simulate", "axial-copies", sim.axial_copies, "Marked copies for round objects");
  binder.option(sim_cmd, "simulate", "out-dir", sim.out_dir, "Output directory");
  add_analysis_options(binder, sim_cmd, "simulate", sim.analysis, sim.artifacts);

  CalibrateOptions cal;
  std::string up = "0,0,1";
  auto* cal_cmd = app.add_subcommand("calibrate-tip", "Tip offset, table normal and b_s from a pose log");
  binder.option(cal_cmd, "calibrate-tip", "log", cal.log, "Pose log CSV (stage,qw,qx,qy,qz,tx,ty,tz)");
  binder.option(cal_cmd, "calibrate-tip", "up", up, "Direction the table normal should face, x,y,z");
  binder.option(cal_cmd, "calibrate-tip", "margin", cal.margin, "b_s = margin * max residual");
  binder.option(cal_cmd, "calibrate-tip", "floor", cal.floor, "Minimum b_s in meters");
  binder.option(cal_cmd, "calibrate-tip", "out", cal.out, "Calibration JSON output");

  PlotCommandOptions plot;
  auto* plot_cmd = app.add_subcommand("plot", "Mollweide plot of a distribution");
  binder.option(plot_cmd, "plot", "distribution", plot.distribution, "distribution.jsonl");
  binder.option(plot_cmd, "plot", "out", plot.out, "SVG output");
  binder.option(plot_cmd, "plot", "truth", plot.truth, "Trial JSON with rotations to mark");
  binder.option(plot_cmd, "plot", "max-points", plot.max_points, "Most probable samples drawn");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    CLI::App* active = app.get_subcommands().front();
    const std::string scope = active->get_name();
    if (config_path) binder.apply(read_json_file(*config_path), scope);

    auto require = [&](const fs::path& p, const char* flag) {
      if (p.empty()) throw InputError(std::string("missing required option ") + flag);
    };
    if (!bound.analysis.table_cache) bound.analysis.table_cache = default_table_cache();
    if (!sim.analysis.table_cache) sim.analysis.table_cache = default_table_cache();

    if (active == bound_cmd) {
      require(bound.mesh, "--mesh");
      require(bound.points, "--points");
      cmd_bound(bound, global);
    } else if (active == sim_cmd) {
      cmd_simulate(sim, global);
    } else if (active == cal_cmd) {
      require(cal.log, "--log");
      cal.up = parse_vec3(up);
      cmd_calibrate_tip(cal, global);
    } else if (active == plot_cmd) {
      require(plot.distribution, "--distribution");
      cmd_plot(plot, global);
    }
    return kExitOk;
  } catch (const InconsistentMeasurementsError& e) {
    std::cerr << "error: measurements are inconsistent with the fixture: no pose keeps every point within its bound "
                 "of the surface ("
              << e.what() << ")\n";
    return kExitInconsistent;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
}
