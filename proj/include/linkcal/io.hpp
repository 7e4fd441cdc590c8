#pragma once

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "linkcal/adaptive_mc.hpp"
#include "linkcal/common.hpp"
#include "linkcal/identification.hpp"
#include "linkcal/kinematics.hpp"
#include "linkcal/measurement_sim.hpp"
#include "linkcal/sensor_calibration.hpp"
#include "linkcal/trajectory.hpp"
#include "linkcal/uncertainty.hpp"

namespace linkcal::io {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// primitives

/// Shortest representation that round-trips a double through text.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

/// FNV-1a 64-bit digest, hex encoded.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string file_checksum(const std::filesystem::path& path) {
  return fnv1a_hex(read_text_file(path));
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> comments;  // leading '#' lines
};

inline CsvTable parse_csv(const std::string& text, const std::string& origin = "csv") {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line);
      continue;
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!have_header) {
      t.header = fields;
      have_header = true;
      continue;
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      double value = 0.0;
      const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
      if (ec != std::errc{} || end != f.data() + f.size())
        throw ConfigError(origin + ": line " + std::to_string(lineno) +
                          ": cannot parse number '" + f + "'");
      row.push_back(value);
    }
    if (row.size() != t.header.size())
      throw ConfigError(origin + ": line " + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " fields, got " +
                        std::to_string(row.size()));
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw ConfigError(origin + ": empty file");
  return t;
}

inline json parse_json(const std::string& text, const std::string& origin = "json") {
  try {
    return json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// trajectories and grids

inline std::string trajectory_to_csv(const std::vector<Pose>& poses, double ti_s) {
  std::ostringstream os;
  os << "k,a_deg,c_deg,x_mm,y_mm,z_mm,t_offset_s\n";
  for (const auto& p : poses)
    os << p.index << ',' << format_double(p.a_deg) << ',' << format_double(p.c_deg) << ','
       << format_double(p.x_mm) << ',' << format_double(p.y_mm) << ',' << format_double(p.z_mm)
       << ',' << format_double(p.index * ti_s) << '\n';
  return os.str();
}

struct TrajectoryFile {
  std::vector<Pose> poses;
  double ti_s = 0.74;
};

inline TrajectoryFile trajectory_from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text, "trajectory csv");
  if (t.header.size() != 7)
    throw ConfigError("trajectory csv must have 7 columns, got " +
                      std::to_string(t.header.size()));
  TrajectoryFile out;
  out.poses.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    Pose p;
    p.index = static_cast<int>(r[0]);
    p.a_deg = r[1];
    p.c_deg = r[2];
    p.x_mm = r[3];
    p.y_mm = r[4];
    p.z_mm = r[5];
    out.poses.push_back(p);
  }
  if (!t.rows.empty() && t.rows.front()[0] > 0)
    out.ti_s = t.rows.front()[6] / t.rows.front()[0];
  return out;
}

inline std::string calibration_grid_to_csv(const std::vector<Vec3>& grid) {
  std::ostringstream os;
  os << "index,dx_mm,dy_mm,dz_mm\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    os << i + 1 << ',' << format_double(grid[i].x()) << ',' << format_double(grid[i].y()) << ','
       << format_double(grid[i].z()) << '\n';
  return os.str();
}

inline std::vector<Vec3> calibration_grid_from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text, "calibration grid csv");
  if (t.header.size() != 4) throw ConfigError("calibration grid csv must have 4 columns");
  std::vector<Vec3> grid;
  grid.reserve(t.rows.size());
  for (const auto& r : t.rows) grid.emplace_back(r[1], r[2], r[3]);
  return grid;
}

// ---------------------------------------------------------------------------
// Jacobian export

inline std::string jacobian_to_csv(const IdentificationJacobian& jid) {
  std::ostringstream os;
  const auto& names = param_names();
  for (int i = 0; i < kParamCount; ++i) os << (i ? "," : "") << names[static_cast<std::size_t>(i)];
  os << '\n';
  for (Eigen::Index r = 0; r < jid.J.rows(); ++r) {
    for (Eigen::Index c = 0; c < jid.J.cols(); ++c)
      os << (c ? "," : "") << format_double(jid.J(r, c));
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// frame transform

inline json transform_to_json(const FrameTransform& t) {
  json j;
  std::vector<double> m;
  m.reserve(16);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m.push_back(t.m(r, c));
  j["matrix_row_major"] = m;
  const TransformQuality q = transform_quality(t);
  j["quality"] = {
      {"norms", {q.norms[0], q.norms[1], q.norms[2]}},
      {"projections", {q.projections[0], q.projections[1], q.projections[2]}},
      {"offset_um", {q.offset_mm[0] * kUmPerMm, q.offset_mm[1] * kUmPerMm,
                     q.offset_mm[2] * kUmPerMm}},
      {"gain_flag", q.gain_flag},
      {"projection_flag", q.projection_flag},
      {"offset_flag", q.offset_flag},
  };
  return j;
}

inline FrameTransform transform_from_json(const json& j) {
  if (!j.contains("matrix_row_major") || !j["matrix_row_major"].is_array() ||
      j["matrix_row_major"].size() != 16)
    throw ConfigError("transform json needs a 16-element matrix_row_major array");
  FrameTransform t;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      t.m(r, c) = j["matrix_row_major"][static_cast<std::size_t>(4 * r + c)].get<double>();
  return t;
}

/// Calibration data pairs: programmed machine offsets with raw channel readings.
inline std::string calibration_pairs_to_csv(const DisplacementSet& programmed,
                                            const DisplacementSet& measured) {
  if (programmed.count() != measured.count())
    throw DataError("programmed and measured sets differ in size");
  std::ostringstream os;
  os << "index,px_mm,py_mm,pz_mm,m1_mm,m2_mm,m3_mm\n";
  for (Eigen::Index i = 0; i < programmed.count(); ++i) {
    const Vec3 p = programmed.point(i);
    const Vec3 m = measured.point(i);
    os << i + 1 << ',' << format_double(p.x()) << ',' << format_double(p.y()) << ','
       << format_double(p.z()) << ',' << format_double(m.x()) << ',' << format_double(m.y())
       << ',' << format_double(m.z()) << '\n';
  }
  return os.str();
}

inline std::pair<DisplacementSet, DisplacementSet> calibration_pairs_from_csv(
    const std::string& text) {
  const CsvTable t = parse_csv(text, "calibration pairs csv");
  if (t.header.size() != 7) throw ConfigError("calibration pairs csv must have 7 columns");
  std::vector<Vec3> prog, meas;
  prog.reserve(t.rows.size());
  meas.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    prog.emplace_back(r[1], r[2], r[3]);
    meas.emplace_back(r[4], r[5], r[6]);
  }
  return {DisplacementSet::from_points(prog), DisplacementSet::from_points(meas)};
}

// ---------------------------------------------------------------------------
// parameters and identification results

inline json parameters_to_json(const ErrorParameterVector& p) {
  json j;
  const Param14 rep = p.to_report_units();
  for (int i = 0; i < kParamCount; ++i)
    j[param_names()[static_cast<std::size_t>(i)]] = {{"value", rep[i]},
                                                     {"unit", param_report_unit(i)}};
  return j;
}

inline ErrorParameterVector parameters_from_json(const json& j) {
  Param14 rep;
  for (int i = 0; i < kParamCount; ++i) {
    const auto& name = param_names()[static_cast<std::size_t>(i)];
    if (!j.contains(name)) throw ConfigError("parameters json is missing '" + name + "'");
    const auto& e = j[name];
    rep[i] = e.is_object() ? e.at("value").get<double>() : e.get<double>();
  }
  return ErrorParameterVector::from_report_units(rep);
}

inline json identification_result_to_json(const IdentificationResult& r) {
  json j;
  j["parameters"] = parameters_to_json(r.parameters);
  j["diagnostics"] = {
      {"rms_x_um", r.rms_um[0]},         {"rms_y_um", r.rms_um[1]},
      {"rms_z_um", r.rms_um[2]},         {"max_abs_um", r.max_abs_um},
      {"condition_number", r.condition_number},
      {"equation_count", r.residual_mm.size()},
  };
  return j;
}

inline std::string residuals_to_csv(const ResidualReport& rep) {
  std::ostringstream os;
  os << "k,rx_um,ry_um,rz_um\n";
  for (std::size_t i = 0; i < rep.residual_um.size(); ++i)
    os << rep.pose_indices[i] << ',' << format_double(rep.residual_um[i].x()) << ','
       << format_double(rep.residual_um[i].y()) << ',' << format_double(rep.residual_um[i].z())
       << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// error vector sets (measurements)

inline std::string error_vector_set_to_csv(const ErrorVectorSet& set) {
  set.validate();
  if (set.frame != Frame::machine)
    throw DataError("measurement csv stores machine-frame values; map the set first");
  std::ostringstream os;
  os << "k,t_s,ex_um,ey_um,ez_um\n";
  for (int k = 0; k < set.pose_count(); ++k) {
    const double t = set.timestamps_s.empty() ? 0.0 : set.timestamps_s[static_cast<std::size_t>(k)];
    const Vec3 v = set.at(k) * kUmPerMm;
    os << set.pose_indices[static_cast<std::size_t>(k)] << ',' << format_double(t) << ','
       << format_double(v.x()) << ',' << format_double(v.y()) << ',' << format_double(v.z())
       << '\n';
  }
  return os.str();
}

inline ErrorVectorSet error_vector_set_from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text, "measurement csv");
  if (t.header.size() != 5) throw ConfigError("measurement csv must have 5 columns");
  ErrorVectorSet set;
  set.frame = Frame::machine;
  set.chi_mm.resize(static_cast<Eigen::Index>(3 * t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    set.pose_indices.push_back(static_cast<int>(r[0]));
    set.timestamps_s.push_back(r[1]);
    set.chi_mm.segment(static_cast<Eigen::Index>(3 * i), 3) =
        Vec3(r[2], r[3], r[4]) * kMmPerUm;
  }
  return set;
}

// ---------------------------------------------------------------------------
// raw sensor logs

inline std::string raw_log_to_csv(const RawSensorLog& log) {
  std::ostringstream os;
  os << "t_s,ch1_um,ch2_um,ch3_um\n";
  for (Eigen::Index j = 0; j < log.sample_count(); ++j)
    os << format_double(static_cast<double>(j) / log.rate_hz) << ','
       << format_double(log.samples_um(0, j)) << ',' << format_double(log.samples_um(1, j))
       << ',' << format_double(log.samples_um(2, j)) << '\n';
  return os.str();
}

inline RawSensorLog raw_log_from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text, "raw log csv");
  if (t.header.size() != 4) throw ConfigError("raw log csv must have 4 columns");
  RawSensorLog log;
  if (t.rows.size() >= 2) log.rate_hz = 1.0 / (t.rows[1][0] - t.rows[0][0]);
  log.samples_um.resize(3, static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    log.samples_um.col(static_cast<Eigen::Index>(i)) =
        Vec3(t.rows[i][1], t.rows[i][2], t.rows[i][3]);
  return log;
}

// framed binary: magic, rate, sample count, then ch1,ch2,ch3 per sample
inline constexpr char kRawLogMagic[8] = {'L', 'C', 'R', 'A', 'W', 'L', 'G', '1'};

inline void raw_log_to_binary(const RawSensorLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(kRawLogMagic, 8);
  const double rate = log.rate_hz;
  const std::uint64_t count = static_cast<std::uint64_t>(log.sample_count());
  out.write(reinterpret_cast<const char*>(&rate), sizeof(rate));
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (Eigen::Index j = 0; j < log.sample_count(); ++j) {
    const Vec3 v = log.samples_um.col(j);
    out.write(reinterpret_cast<const char*>(v.data()), 3 * sizeof(double));
  }
}

inline RawSensorLog raw_log_from_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kRawLogMagic, 8) != 0)
    throw ConfigError(path.string() + ": not a raw log (bad magic)");
  double rate = 0.0;
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&rate), sizeof(rate));
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  RawSensorLog log;
  log.rate_hz = rate;
  log.samples_um.resize(3, static_cast<Eigen::Index>(count));
  for (std::uint64_t j = 0; j < count; ++j) {
    double v[3];
    in.read(reinterpret_cast<char*>(v), sizeof(v));
    if (!in) throw DataError(path.string() + ": truncated raw log");
    log.samples_um.col(static_cast<Eigen::Index>(j)) = Vec3(v[0], v[1], v[2]);
  }
  return log;
}

// ---------------------------------------------------------------------------
// drift waveform

inline std::string waveform_to_csv(const CyclicDriftModel& m) {
  std::ostringstream os;
  os << "# period_s=" << format_double(m.period_s) << '\n';
  os << "time_s,ch1_um,ch2_um,ch3_um\n";
  for (std::size_t i = 0; i < m.time_s.size(); ++i) {
    const auto col = m.values_um.col(static_cast<Eigen::Index>(i));
    os << format_double(m.time_s[i]) << ',' << format_double(col[0]) << ','
       << format_double(col[1]) << ',' << format_double(col[2]) << '\n';
  }
  return os.str();
}

inline CyclicDriftModel waveform_from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text, "waveform csv");
  if (t.header.size() != 4) throw ConfigError("waveform csv must have 4 columns");
  CyclicDriftModel m;
  m.period_s = 0.0;
  for (const auto& c : t.comments) {
    const auto pos = c.find("period_s=");
    if (pos != std::string::npos) m.period_s = std::stod(c.substr(pos + 9));
  }
  if (m.period_s <= 0.0)
    throw ConfigError("waveform csv must declare the period in a '# period_s=' comment");
  m.time_s.reserve(t.rows.size());
  m.values_um.resize(3, static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    m.time_s.push_back(t.rows[i][0]);
    m.values_um.col(static_cast<Eigen::Index>(i)) =
        Vec3(t.rows[i][1], t.rows[i][2], t.rows[i][3]);
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// uncertainty source configuration

inline json sources_to_json(const UncertaintySourceSet& s) {
  json j;
  j["sensor_noise"] = {{"enabled", s.sensor_noise_enabled},
                       {"sigma_um", {s.sensor.sigma_um[0], s.sensor.sigma_um[1],
                                     s.sensor.sigma_um[2]}}};
  j["transform_noise"] = {
      {"enabled", s.transform_noise_enabled},
      {"u_um", {s.transform.u_um[0], s.transform.u_um[1], s.transform.u_um[2]}}};
  j["drift"] = {{"mode", drift_mode_name(s.drift_mode)},
                {"e_ve_um", {s.statistical_drift.e_ve_um[0], s.statistical_drift.e_ve_um[1],
                             s.statistical_drift.e_ve_um[2]}},
                {"period_s", s.cyclic_drift.period_s}};
  return j;
}

inline UncertaintySourceSet sources_from_json(const json& j,
                                              const std::filesystem::path& base_dir = {}) {
  UncertaintySourceSet s;
  if (j.contains("sensor_noise")) {
    const auto& sn = j["sensor_noise"];
    if (sn.contains("enabled")) s.sensor_noise_enabled = sn["enabled"].get<bool>();
    if (sn.contains("sigma_um"))
      for (int i = 0; i < 3; ++i)
        s.sensor.sigma_um[i] = sn["sigma_um"][static_cast<std::size_t>(i)].get<double>();
  }
  if (j.contains("transform_noise")) {
    const auto& tn = j["transform_noise"];
    if (tn.contains("enabled")) s.transform_noise_enabled = tn["enabled"].get<bool>();
    if (tn.contains("u_um"))
      for (int i = 0; i < 3; ++i)
        s.transform.u_um[i] = tn["u_um"][static_cast<std::size_t>(i)].get<double>();
  }
  if (j.contains("drift")) {
    const auto& d = j["drift"];
    if (d.contains("mode")) {
      const std::string mode = d["mode"].get<std::string>();
      if (mode == "none") s.drift_mode = DriftMode::none;
      else if (mode == "statistical") s.drift_mode = DriftMode::statistical;
      else if (mode == "cyclic") s.drift_mode = DriftMode::cyclic;
      else throw ConfigError("unknown drift mode '" + mode + "'");
    }
    Vec3 e_ve = s.statistical_drift.e_ve_um;
    if (d.contains("e_ve_um"))
      for (int i = 0; i < 3; ++i) e_ve[i] = d["e_ve_um"][static_cast<std::size_t>(i)].get<double>();
    s.statistical_drift.e_ve_um = e_ve;
    double period = d.contains("period_s") ? d["period_s"].get<double>() : 420.0;
    if (d.contains("waveform_csv") && !d["waveform_csv"].is_null()) {
      const std::filesystem::path p =
          base_dir / d["waveform_csv"].get<std::string>();
      s.cyclic_drift = waveform_from_csv(read_text_file(p));
    } else {
      s.cyclic_drift = CyclicDriftModel::sawtooth_default(e_ve, period);
    }
  }
  s.sensor.validate();
  s.transform.validate();
  return s;
}

// ---------------------------------------------------------------------------
// machine topology

inline json topology_to_json(const MachineTopology& t) {
  json j;
  json chain = json::array();
  for (const auto& ax : t.chain) {
    json e;
    e["name"] = ax.name;
    e["kind"] = axis_kind_name(ax.kind);
    if (ax.kind != AxisKind::fixed)
      e["direction"] = {ax.direction[0], ax.direction[1], ax.direction[2]};
    e["location_mm"] = {ax.location[0], ax.location[1], ax.location[2]};
    if (ax.kind == AxisKind::linear) e["stroke_mm"] = {ax.stroke_min, ax.stroke_max};
    if (ax.kind == AxisKind::rotary) e["stroke_deg"] = {ax.stroke_min, ax.stroke_max};
    chain.push_back(e);
  }
  j["chain"] = chain;
  return j;
}

inline MachineTopology topology_from_json(const json& j) {
  if (!j.contains("chain") || !j["chain"].is_array() || j["chain"].size() != 8)
    throw ConfigError("topology json needs an 8-element chain array");
  MachineTopology t;
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& e = j["chain"][i];
    AxisDescriptor ax;
    ax.name = e.at("name").get<std::string>();
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "rotary") ax.kind = AxisKind::rotary;
    else if (kind == "linear") ax.kind = AxisKind::linear;
    else if (kind == "fixed") ax.kind = AxisKind::fixed;
    else throw ConfigError("axis " + ax.name + ": unknown kind '" + kind + "'");
    if (e.contains("direction"))
      for (int d = 0; d < 3; ++d)
        ax.direction[d] = e["direction"][static_cast<std::size_t>(d)].get<double>();
    if (e.contains("location_mm"))
      for (int d = 0; d < 3; ++d)
        ax.location[d] = e["location_mm"][static_cast<std::size_t>(d)].get<double>();
    const char* stroke_key = ax.kind == AxisKind::linear ? "stroke_mm" : "stroke_deg";
    if (e.contains(stroke_key)) {
      ax.stroke_min = e[stroke_key][0].get<double>();
      ax.stroke_max = e[stroke_key][1].get<double>();
    }
    t.chain[i] = ax;
  }
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------
// Monte Carlo results

inline json mc_result_to_json(const McResult& r, const McConfig& cfg) {
  json j;
  j["profile"] = mc_profile_name(cfg.profile);
  j["converged"] = r.converged;
  j["sequences"] = r.sequences;
  j["trials_per_sequence"] = cfg.trials_per_sequence;
  j["total_trials"] = r.total_trials;
  j["excluded_trials"] = r.excluded_trials;
  j["coverage"] = cfg.coverage;
  j["tolerance"] = {{"length_um", cfg.delta_length_mm * kUmPerMm},
                    {"angle_um_per_m", cfg.delta_angle_rad * kUmPerMPerRad}};
  j["drift_mode"] = drift_mode_name(cfg.sources.drift_mode);
  j["last_blocking_family"] = control_family_name(r.last_blocking_family);

  json params;
  for (int i = 0; i < kParamCount; ++i) {
    const double scale = param_is_angular(i) ? kUmPerMPerRad : kUmPerMm;
    params[param_names()[static_cast<std::size_t>(i)]] = {
        {"unit", param_report_unit(i)},
        {"mean", r.pooled.mean[i] * scale},
        {"u", r.pooled.u[i] * scale},
        {"y_low", r.pooled.low[i] * scale},
        {"y_high", r.pooled.high[i] * scale},
        {"interval_size", r.interval_size[i] * scale},
        {"coverage_fraction", r.coverage_fraction[i]},
        {"lag1_autocorrelation", r.lag1_autocorrelation[i]},
    };
  }
  j["parameters"] = params;

  json trace = json::array();
  for (const auto& row : r.trace)
    trace.push_back({{"h", row.sequences},
                     {"ratio_mean", row.ratio_mean},
                     {"ratio_u", row.ratio_u},
                     {"ratio_y_low", row.ratio_low},
                     {"ratio_y_high", row.ratio_high},
                     {"converged", row.converged}});
  j["trace"] = trace;
  return j;
}

/// Histogram of one output parameter, bin edges in report units.
inline std::string histogram_to_csv(const std::vector<HistogramBin>& bins, int param) {
  const double scale = param_is_angular(param) ? kUmPerMPerRad : kUmPerMm;
  std::ostringstream os;
  os << "bin_low,bin_high,count\n";
  for (const auto& b : bins)
    os << format_double(b.low * scale) << ',' << format_double(b.high * scale) << ',' << b.count
       << '\n';
  return os.str();
}

inline std::string contributions_to_csv(const ContributionAnalysis& c) {
  std::ostringstream os;
  os << "parameter,unit,delta_drift,delta_sensors,delta_transform,quad_sum,delta_95\n";
  for (int i = 0; i < kParamCount; ++i) {
    const double scale = param_is_angular(i) ? kUmPerMPerRad : kUmPerMm;
    os << param_names()[static_cast<std::size_t>(i)] << ',' << param_report_unit(i) << ','
       << format_double(c.delta_drift[i] * scale) << ','
       << format_double(c.delta_sensors[i] * scale) << ','
       << format_double(c.delta_transform[i] * scale) << ','
       << format_double(c.quadratic_sum[i] * scale) << ','
       << format_double(c.delta_total[i] * scale) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// run manifest

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::vector<std::string> config_paths;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::pair<std::string, std::string>> artifacts;  // name, checksum
  std::string started_utc;
  double duration_s = 0.0;
};

inline json manifest_to_json(const RunManifest& m) {
  json j;
  j["schema"] = 1;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["config_paths"] = m.config_paths;
  j["seed"] = m.seed;
  j["out_dir"] = m.out_dir;
  json art;
  for (const auto& [name, sum] : m.artifacts) art[name] = sum;
  j["artifacts"] = art;
  j["started_utc"] = m.started_utc;
  j["duration_s"] = m.duration_s;
  return j;
}

}  // namespace linkcal::io
