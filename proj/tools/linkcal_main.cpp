// linkcal command-line front end: trajectory generation, sensor-frame
// calibration, measurement simulation, identification, validation and
// adaptive Monte Carlo runs. Every command writes a manifest.json with
// argv, seed and artifact checksums so a run can be reproduced exactly.

#include <CLI11.hpp>
#include <linkcal/linkcal.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace linkcal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNoConvergence = 3;

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Resolves relative config paths against LINKCAL_CONFIG_ROOT when set.
fs::path resolve_config_path(const std::string& p) {
  fs::path path(p);
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv("LINKCAL_CONFIG_ROOT")) return fs::path(root) / path;
  return path;
}

/// Collects artifacts and finalizes the manifest for one command run.
class RunContext {
 public:
  RunContext(std::string command, std::vector<std::string> argv, fs::path out_dir,
             std::uint64_t seed)
      : start_(std::chrono::steady_clock::now()), out_dir_(std::move(out_dir)) {
    manifest_.command = std::move(command);
    manifest_.argv = std::move(argv);
    manifest_.seed = seed;
    manifest_.out_dir = out_dir_.string();
    manifest_.started_utc = utc_now();
    fs::create_directories(out_dir_);
  }

  void note_config(const fs::path& p) { manifest_.config_paths.push_back(p.string()); }

  fs::path write(const std::string& name, const std::string& content) {
    const fs::path p = out_dir_ / name;
    io::write_text_file(p, content);
    manifest_.artifacts.emplace_back(name, io::fnv1a_hex(content));
    return p;
  }

  void write_binary_artifact(const std::string& name, const RawSensorLog& log) {
    const fs::path p = out_dir_ / name;
    io::raw_log_to_binary(log, p);
    manifest_.artifacts.emplace_back(name, io::file_checksum(p));
  }

  void finish() {
    manifest_.duration_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    io::write_text_file(out_dir_ / "manifest.json", io::manifest_to_json(manifest_).dump(2) + "\n");
  }

  const fs::path& out_dir() const { return out_dir_; }

 private:
  std::chrono::steady_clock::time_point start_;
  fs::path out_dir_;
  io::RunManifest manifest_;
};

MachineTopology load_topology(const std::string& config, RunContext* ctx) {
  if (config.empty()) return MachineTopology::trunnion_45_default();
  const fs::path p = resolve_config_path(config);
  if (ctx) ctx->note_config(p);
  return io::topology_from_json(io::parse_json(io::read_text_file(p), p.string()));
}

UncertaintySourceSet load_sources(const std::string& path, const std::string& drift_override,
                                  RunContext* ctx) {
  UncertaintySourceSet s = UncertaintySourceSet::all();
  if (!path.empty()) {
    const fs::path p = resolve_config_path(path);
    if (ctx) ctx->note_config(p);
    s = io::sources_from_json(io::parse_json(io::read_text_file(p), p.string()),
                              p.parent_path());
  }
  if (!drift_override.empty()) {
    if (drift_override == "none") s.drift_mode = DriftMode::none;
    else if (drift_override == "statistical") s.drift_mode = DriftMode::statistical;
    else if (drift_override == "cyclic") s.drift_mode = DriftMode::cyclic;
    else throw ConfigError("unknown drift model '" + drift_override + "'");
  }
  return s;
}

ErrorParameterVector load_parameters(const std::string& path, RunContext* ctx) {
  if (path.empty()) return {};
  const fs::path p = resolve_config_path(path);
  if (ctx) ctx->note_config(p);
  const io::json j = io::parse_json(io::read_text_file(p), p.string());
  return io::parameters_from_json(j.contains("parameters") ? j["parameters"] : j);
}

// ---------------------------------------------------------------------------

struct TrajectoryOpts {
  std::string kind = "identification";
  std::string config, out = "out/trajectory";
  int poses = 0;
  double ti_s = 0.74;
  double cube_halfwidth_mm = 0.1;
  int mesh_points = 125;
  double condition_ceiling = 100.0;
};

int cmd_trajectory(const TrajectoryOpts& o, const std::vector<std::string>& argv) {
  RunContext ctx("trajectory", argv, o.out, 0);
  const MachineTopology topo = load_topology(o.config, &ctx);

  if (o.kind == "calibration-grid") {
    TrajectorySpec spec = TrajectorySpec::calibration_grid_default();
    spec.cube_halfwidth_mm = o.cube_halfwidth_mm;
    spec.mesh_points = o.poses > 0 ? o.poses : o.mesh_points;
    const auto grid = generate_calibration_grid(spec);
    ctx.write("calibration_grid.csv", io::calibration_grid_to_csv(grid));
    ctx.finish();
    std::cout << "wrote " << grid.size() << " grid points to " << ctx.out_dir().string() << "\n";
    return kExitOk;
  }

  TrajectorySpec spec = o.kind == "validation" ? TrajectorySpec::validation_default()
                                               : TrajectorySpec::identification_default();
  if (o.kind != "identification" && o.kind != "validation")
    throw ConfigError("unknown trajectory kind '" + o.kind + "'");
  if (o.poses > 0) spec.pose_count = o.poses;
  spec.dwell_interval_s = o.ti_s;
  spec.condition_ceiling = o.condition_ceiling;

  const auto poses = o.kind == "validation" ? generate_validation_trajectory(topo, spec)
                                            : generate_identification_trajectory(topo, spec);
  ctx.write("trajectory.csv", io::trajectory_to_csv(poses, spec.dwell_interval_s));
  const auto jid = assemble_identification_jacobian(topo, poses);
  ctx.write("jacobian.csv", io::jacobian_to_csv(jid));
  ctx.finish();
  std::cout << "wrote " << poses.size() << " poses (condition number "
            << condition_number_report_units(jid) << ") to " << ctx.out_dir().string() << "\n";
  return kExitOk;
}

struct CalibrateOpts {
  std::string pairs, out = "out/calibrate";
};

int cmd_calibrate(const CalibrateOpts& o, const std::vector<std::string>& argv) {
  RunContext ctx("calibrate", argv, o.out, 0);
  const fs::path pairs_path = resolve_config_path(o.pairs);
  ctx.note_config(pairs_path);
  auto [programmed, measured] = io::calibration_pairs_from_csv(io::read_text_file(pairs_path));
  const FrameTransformFit fit = fit_frame_transform(programmed, measured);

  io::json j = io::transform_to_json(fit.transform);
  j["fit"] = {{"points", programmed.count()},
              {"residual_std_um",
               {fit.residual_std_mm[0] * kUmPerMm, fit.residual_std_mm[1] * kUmPerMm,
                fit.residual_std_mm[2] * kUmPerMm}}};
  ctx.write("transform.json", j.dump(2) + "\n");
  ctx.finish();

  const TransformQuality q = transform_quality(fit.transform);
  std::printf(
      "norms %.4f %.4f %.4f | projections %+.4f %+.4f %+.4f | offsets %+.2f %+.2f %+.2f um\n",
      q.norms[0], q.norms[1], q.norms[2], q.projections[0], q.projections[1], q.projections[2],
      q.offset_mm[0] * kUmPerMm, q.offset_mm[1] * kUmPerMm, q.offset_mm[2] * kUmPerMm);
  if (q.any_flag()) std::cout << "warning: transform quality outside the instrument envelope\n";
  return kExitOk;
}

struct SimulateOpts {
  std::string trajectory, params, sources, drift_model, config, transform;
  std::string out = "out/simulate";
  std::uint64_t seed = 1;
  double t0_s = -1.0;  // <0: draw from seed when cyclic drift is active
  bool raw_log = false;
  bool via_raw_log = false;
  bool emit_waveform = false;
  double dwell_s = 0.5;
};

int cmd_simulate(const SimulateOpts& o, const std::vector<std::string>& argv) {
  RunContext ctx("simulate", argv, o.out, o.seed);
  const MachineTopology topo = load_topology(o.config, &ctx);

  const fs::path traj_path = resolve_config_path(o.trajectory);
  ctx.note_config(traj_path);
  const io::TrajectoryFile traj = io::trajectory_from_csv(io::read_text_file(traj_path));

  SimulationScenario sc;
  sc.true_params = load_parameters(o.params, &ctx);
  sc.trajectory = traj.poses;
  sc.clock.ti_s = traj.ti_s;
  sc.clock.pose_count = static_cast<int>(traj.poses.size());
  sc.sources = load_sources(o.sources, o.drift_model, &ctx);
  sc.seed = o.seed;
  if (!o.transform.empty()) {
    const fs::path p = resolve_config_path(o.transform);
    ctx.note_config(p);
    const FrameTransform t =
        io::transform_from_json(io::parse_json(io::read_text_file(p), p.string()));
    sc.instrument_truth = t;
    sc.instrument_fitted = t;
  }
  if (o.t0_s >= 0.0) {
    sc.clock.t0_s = o.t0_s;
  } else if (sc.sources.drift_mode == DriftMode::cyclic) {
    RngStream rng = RngStream::derive(o.seed, {stream_id::kSequenceStart, 1});
    sc.clock.t0_s = rng.uniform(0.0, sc.sources.cyclic_drift.period_s);
  }

  if (o.emit_waveform) ctx.write("waveform.csv", io::waveform_to_csv(sc.sources.cyclic_drift));

  int flagged = 0;
  if (o.via_raw_log) {
    RawLogSettings settings;
    settings.dwell_s = o.dwell_s;
    const RawSensorLog log = simulate_raw_log(topo, sc, settings);
    if (o.raw_log) {
      ctx.write("raw_log.csv", io::raw_log_to_csv(log));
      ctx.write_binary_artifact("raw_log.bin", log);
    }
    ExtractionSettings ex;
    ex.sensor_sigma_um =
        sc.sources.sensor_noise_enabled ? sc.sources.sensor.sigma_um : Vec3::Zero();
    ErrorVectorSet sensor_set =
        extract_steady_values(log, static_cast<int>(traj.poses.size()), ex);
    ErrorVectorSet machine_set = to_machine_frame(sensor_set, sc.instrument_fitted);
    for (int k = 0; k < machine_set.pose_count(); ++k)
      machine_set.pose_indices[static_cast<std::size_t>(k)] =
          traj.poses[static_cast<std::size_t>(k)].index;
    ctx.write("measurements.csv", io::error_vector_set_to_csv(machine_set));
  } else {
    const MeasurementRun run = simulate_measurement_run(topo, sc);
    flagged = run.saturated_count;
    ctx.write("measurements.csv", io::error_vector_set_to_csv(run.chi));
    if (o.raw_log) {
      RawLogSettings settings;
      settings.dwell_s = o.dwell_s;
      const RawSensorLog log = simulate_raw_log(topo, sc, settings);
      ctx.write("raw_log.csv", io::raw_log_to_csv(log));
      ctx.write_binary_artifact("raw_log.bin", log);
    }
  }
  ctx.finish();
  std::cout << "simulated " << traj.poses.size() << " poses (drift "
            << drift_mode_name(sc.sources.drift_mode) << ", " << flagged << " saturated) into "
            << ctx.out_dir().string() << "\n";
  return kExitOk;
}

struct IdentifyOpts {
  std::string trajectory, measurements, config, out = "out/identify";
};

int cmd_identify(const IdentifyOpts& o, const std::vector<std::string>& argv) {
  RunContext ctx("identify", argv, o.out, 0);
  const MachineTopology topo = load_topology(o.config, &ctx);
  const fs::path traj_path = resolve_config_path(o.trajectory);
  const fs::path meas_path = resolve_config_path(o.measurements);
  ctx.note_config(traj_path);
  ctx.note_config(meas_path);

  const io::TrajectoryFile traj = io::trajectory_from_csv(io::read_text_file(traj_path));
  const ErrorVectorSet chi = io::error_vector_set_from_csv(io::read_text_file(meas_path));
  const auto jid = assemble_identification_jacobian(topo, traj.poses);
  const IdentificationResult res = identify(jid, chi);

  ctx.write("result.json", io::identification_result_to_json(res).dump(2) + "\n");
  ctx.write("residuals.csv", io::residuals_to_csv(residual_report(res, chi.pose_indices)));
  ctx.finish();
  std::printf("identified 14 parameters, residual RMS %.3f / %.3f / %.3f um (max %.3f um)\n",
              res.rms_um[0], res.rms_um[1], res.rms_um[2], res.max_abs_um);
  return kExitOk;
}

struct ValidateOpts {
  std::string trajectory, measurements, params, config, out = "out/validate";
};

int cmd_validate(const ValidateOpts& o, const std::vector<std::string>& argv) {
  RunContext ctx("validate", argv, o.out, 0);
  const MachineTopology topo = load_topology(o.config, &ctx);
  const fs::path traj_path = resolve_config_path(o.trajectory);
  const fs::path meas_path = resolve_config_path(o.measurements);
  ctx.note_config(traj_path);
  ctx.note_config(meas_path);

  const io::TrajectoryFile traj = io::trajectory_from_csv(io::read_text_file(traj_path));
  const ErrorVectorSet chi = io::error_vector_set_from_csv(io::read_text_file(meas_path));
  const ErrorParameterVector p = load_parameters(o.params, &ctx);
  const auto jid = assemble_identification_jacobian(topo, traj.poses);
  const Vec3 rms = validate_parameters(p, jid, chi);

  io::json j;
  j["rms_um"] = {rms[0], rms[1], rms[2]};
  j["poses"] = traj.poses.size();
  ctx.write("validation.json", j.dump(2) + "\n");
  ctx.finish();
  std::printf("validation RMS %.3f / %.3f / %.3f um over %zu poses\n", rms[0], rms[1], rms[2],
              traj.poses.size());
  return kExitOk;
}

struct McOpts {
  std::string profile = "desk";
  std::string sources, drift_model, params, config, out = "out/mc";
  std::uint64_t seed = 1;
  int trials = 0;
  int poses = 0;
  int max_sequences = 0;
  double delta = 0.0;  // um and um/m
  double coverage = 0.0;
  unsigned threads = 0;
  bool contributions = false;
  bool compare_drift = false;
  bool shortest_intervals = false;
  bool literal_criterion = false;
};

std::string trace_to_csv(const McResult& r) {
  std::ostringstream os;
  os << "h,ratio_mean,ratio_u,ratio_y_low,ratio_y_high,converged\n";
  for (const auto& row : r.trace)
    os << row.sequences << ',' << io::format_double(row.ratio_mean) << ','
       << io::format_double(row.ratio_u) << ',' << io::format_double(row.ratio_low) << ','
       << io::format_double(row.ratio_high) << ',' << (row.converged ? 1 : 0) << '\n';
  return os.str();
}

int cmd_mc(const McOpts& o, const std::vector<std::string>& argv) {
  RunContext ctx("mc", argv, o.out, o.seed);

  if (o.profile != "paper" && o.profile != "desk")
    throw ConfigError("unknown profile '" + o.profile + "'");
  McConfig cfg =
      o.profile == "paper" ? McConfig::paper_profile(o.seed) : McConfig::desk_profile(o.seed);
  cfg.topology = load_topology(o.config, &ctx);
  if (o.trials > 0) cfg.trials_per_sequence = o.trials;
  if (o.poses > 0) cfg.pose_count = o.poses;
  if (o.max_sequences > 0) cfg.max_sequences = o.max_sequences;
  if (o.delta > 0.0) {
    cfg.delta_length_mm = o.delta * kMmPerUm;
    cfg.delta_angle_rad = o.delta * kRadPerUmPerM;
  }
  if (o.coverage > 0.0) cfg.coverage = o.coverage;
  cfg.threads = o.threads;
  cfg.sources = load_sources(o.sources, o.drift_model, &ctx);
  cfg.true_params = load_parameters(o.params, &ctx);
  cfg.percentile_intervals = !o.shortest_intervals;
  cfg.gum_factor_two = !o.literal_criterion;

  if (o.contributions) {
    const ContributionAnalysis c = contribution_analysis(cfg);
    ctx.write("contributions.csv", io::contributions_to_csv(c));
    ctx.write("mc_result.json", io::mc_result_to_json(c.run_all, cfg).dump(2) + "\n");
    ctx.finish();
    std::cout << io::contributions_to_csv(c);
    const bool ok = c.run_all.converged && c.run_drift.converged && c.run_sensors.converged &&
                    c.run_transform.converged;
    return ok ? kExitOk : kExitNoConvergence;
  }

  if (o.compare_drift) {
    const DriftComparison cmp = compare_drift_methods(cfg);
    io::json j;
    j["statistical"] = io::mc_result_to_json(cmp.statistical, cfg);
    j["cyclic"] = io::mc_result_to_json(cmp.cyclic, cfg);
    io::json ratios;
    for (int i = 0; i < kParamCount; ++i)
      ratios[param_names()[static_cast<std::size_t>(i)]] = cmp.interval_ratio[i];
    j["interval_ratio_cyclic_over_statistical"] = ratios;
    ctx.write("drift_comparison.json", j.dump(2) + "\n");
    ctx.finish();
    int larger = 0;
    for (int i = 0; i < kLinkErrorCount; ++i) larger += cmp.interval_ratio[i] > 1.0;
    std::printf("cyclic intervals larger for %d of 8 link errors\n", larger);
    return (cmp.statistical.converged && cmp.cyclic.converged) ? kExitOk : kExitNoConvergence;
  }

  const McResult res = McEngine(cfg).run_adaptive();
  ctx.write("mc_result.json", io::mc_result_to_json(res, cfg).dump(2) + "\n");
  ctx.write("trace.csv", trace_to_csv(res));
  for (int i = 0; i < kParamCount; ++i)
    ctx.write("hist_" + param_names()[static_cast<std::size_t>(i)] + ".csv",
              io::histogram_to_csv(res.histograms[static_cast<std::size_t>(i)], i));
  ctx.finish();
  std::printf("%s after %d sequences (%ld trials, %ld excluded)\n",
              res.converged ? "converged" : "NOT CONVERGED", res.sequences, res.total_trials,
              res.excluded_trials);
  return res.converged ? kExitOk : kExitNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"five-axis link error identification and uncertainty propagation"};
  app.require_subcommand(1);
  const std::vector<std::string> argv_vec(argv, argv + argc);

  TrajectoryOpts to;
  auto* t = app.add_subcommand("trajectory", "generate identification/validation/grid poses");
  t->add_option("--kind", to.kind, "identification | validation | calibration-grid");
  t->add_option("--poses", to.poses, "pose count override");
  t->add_option("--ti", to.ti_s, "inter-point interval, s");
  t->add_option("--cube-halfwidth", to.cube_halfwidth_mm, "grid half width, mm");
  t->add_option("--mesh-points", to.mesh_points, "grid point count (perfect cube)");
  t->add_option("--condition-ceiling", to.condition_ceiling, "max condition number");
  t->add_option("--config", to.config, "topology json");
  t->add_option("--out", to.out, "output directory");

  CalibrateOpts co;
  auto* c = app.add_subcommand("calibrate", "fit the sensor-to-machine frame transform");
  c->add_option("--pairs", co.pairs, "calibration pairs csv")->required();
  c->add_option("--out", co.out, "output directory");

  SimulateOpts so;
  auto* s = app.add_subcommand("simulate", "simulate a measurement run");
  s->add_option("--trajectory", so.trajectory, "trajectory csv")->required();
  s->add_option("--params", so.params, "true parameters json");
  s->add_option("--sources", so.sources, "uncertainty sources json");
  s->add_option("--drift-model", so.drift_model, "none | statistical | cyclic");
  s->add_option("--transform", so.transform, "instrument transform json");
  s->add_option("--config", so.config, "topology json");
  s->add_option("--seed", so.seed, "random seed");
  s->add_option("--t0", so.t0_s, "sequence start time, s");
  s->add_option("--dwell", so.dwell_s, "raw-log dwell per pose, s");
  s->add_flag("--raw-log", so.raw_log, "also write the 1 kHz raw sensor log");
  s->add_flag("--via-raw-log", so.via_raw_log,
              "synthesize the raw log and extract steady values from it");
  s->add_flag("--emit-waveform", so.emit_waveform, "write the active drift waveform csv");
  s->add_option("--out", so.out, "output directory");

  IdentifyOpts io_opts;
  auto* i = app.add_subcommand("identify", "solve for the 14 link and setup errors");
  i->add_option("--trajectory", io_opts.trajectory, "trajectory csv")->required();
  i->add_option("--measurements", io_opts.measurements, "measurements csv")->required();
  i->add_option("--config", io_opts.config, "topology json");
  i->add_option("--out", io_opts.out, "output directory");

  ValidateOpts vo;
  auto* v = app.add_subcommand("validate", "check identified parameters on a second trajectory");
  v->add_option("--trajectory", vo.trajectory, "validation trajectory csv")->required();
  v->add_option("--measurements", vo.measurements, "validation measurements csv")->required();
  v->add_option("--params", vo.params, "identified parameters json")->required();
  v->add_option("--config", vo.config, "topology json");
  v->add_option("--out", vo.out, "output directory");

  McOpts mo;
  auto* m = app.add_subcommand("mc", "adaptive Monte Carlo uncertainty propagation");
  m->add_option("--profile", mo.profile, "desk | paper");
  m->add_option("--seed", mo.seed, "root seed");
  m->add_option("--M,--trials", mo.trials, "trials per sequence");
  m->add_option("--poses", mo.poses, "pose count");
  m->add_option("--max-sequences", mo.max_sequences, "sequence cap");
  m->add_option("--delta", mo.delta, "numerical tolerance (um and um/m)");
  m->add_option("--coverage", mo.coverage, "coverage probability");
  m->add_option("--threads", mo.threads, "worker threads (0 = auto)");
  m->add_option("--sources", mo.sources, "uncertainty sources json");
  m->add_option("--drift-model", mo.drift_model, "none | statistical | cyclic");
  m->add_option("--params", mo.params, "true parameters json");
  m->add_option("--config", mo.config, "topology json");
  m->add_flag("--contributions", mo.contributions, "per-source interval table");
  m->add_flag("--compare-drift", mo.compare_drift, "statistical vs cyclic paired runs");
  m->add_flag("--shortest-intervals", mo.shortest_intervals,
              "report shortest instead of percentile coverage intervals");
  m->add_flag("--literal-criterion", mo.literal_criterion,
              "use s < delta instead of 2s <= delta for convergence");
  m->add_option("--out", mo.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*t) return cmd_trajectory(to, argv_vec);
    if (*c) return cmd_calibrate(co, argv_vec);
    if (*s) return cmd_simulate(so, argv_vec);
    if (*i) return cmd_identify(io_opts, argv_vec);
    if (*v) return cmd_validate(vo, argv_vec);
    if (*m) return cmd_mc(mo, argv_vec);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}
