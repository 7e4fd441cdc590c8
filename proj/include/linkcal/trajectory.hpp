#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include "linkcal/common.hpp"
#include "linkcal/kinematics.hpp"

namespace linkcal {

enum class TrajectoryKind { identification, validation, calibration_grid };
enum class RotationSense { clockwise, counter_clockwise };

inline const char* trajectory_kind_name(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::identification: return "identification";
    case TrajectoryKind::validation: return "validation";
    default: return "calibration-grid";
  }
}

/// Sweep / grid description. Senses map to command monotonicity:
/// clockwise sweeps increase the command angle, counter-clockwise
/// sweeps decrease it.
struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::identification;
  int pose_count = 807;
  double a_start_deg = 0.0;
  double a_end_deg = 180.0;
  double c_start_deg = 0.0;
  double c_end_deg = 1250.0;
  RotationSense sense = RotationSense::clockwise;
  double dwell_interval_s = 0.74;  // t_i, inter-point interval
  double cube_halfwidth_mm = 0.1;
  int mesh_points = 125;
  double condition_ceiling = 100.0;

  static TrajectorySpec identification_default() { return TrajectorySpec{}; }

  static TrajectorySpec validation_default() {
    TrajectorySpec s;
    s.kind = TrajectoryKind::validation;
    s.sense = RotationSense::counter_clockwise;
    return s;
  }

  static TrajectorySpec calibration_grid_default() {
    TrajectorySpec s;
    s.kind = TrajectoryKind::calibration_grid;
    s.pose_count = 125;
    return s;
  }
};

/// Linear commands that put the tool point on the ball centre for the
/// given rotary commands. Solves the 3x3 system over the axis directions,
/// so it stays valid for any (unit, independent) direction configuration.
inline Pose inverse_kinematics_coincidence(const MachineTopology& topo, double a_deg,
                                           double c_deg) {
  const Mat3 R_A =
      Eigen::AngleAxisd(deg_to_rad(a_deg), topo.a_dir_carriage()).toRotationMatrix();
  const Mat3 R_C =
      Eigen::AngleAxisd(deg_to_rad(c_deg), topo.c_dir_platform()).toRotationMatrix();
  const Vec3 ball_in_carriage = topo.a_anchor_carriage() +
                                R_A * (topo.c_anchor_platform() + R_C * topo.ball_in_table());

  Mat3 basis;
  basis.col(0) = topo.x_dir();
  basis.col(1) = -topo.y_dir();
  basis.col(2) = topo.z_dir();
  const Vec3 cmd = basis.inverse() * (ball_in_carriage - topo.head_offset());

  Pose pose;
  pose.a_deg = a_deg;
  pose.c_deg = c_deg;
  pose.x_mm = cmd[0];
  pose.y_mm = cmd[1];
  pose.z_mm = cmd[2];

  struct Check { int axis; double value; };
  const Check checks[] = {{MachineTopology::iX, pose.x_mm},
                          {MachineTopology::iY, pose.y_mm},
                          {MachineTopology::iZ, pose.z_mm}};
  for (const auto& c : checks) {
    const auto& ax = topo.axis(c.axis);
    if (c.value < ax.stroke_min - 1e-9 || c.value > ax.stroke_max + 1e-9) {
      std::ostringstream os;
      os << "coincidence at A=" << a_deg << " deg, C=" << c_deg << " deg needs " << ax.name
         << " = " << c.value << " mm, available [" << ax.stroke_min << ", " << ax.stroke_max
         << "]";
      throw DataError(os.str());
    }
  }
  return pose;
}

namespace detail {

inline void check_a_range(const MachineTopology& topo, double a_lo, double a_hi) {
  const auto& ax = topo.axis(MachineTopology::iA);
  if (a_lo < ax.stroke_min - 1e-9 || a_hi > ax.stroke_max + 1e-9) {
    std::ostringstream os;
    os << "A sweep [" << a_lo << ", " << a_hi << "] deg outside stroke [" << ax.stroke_min
       << ", " << ax.stroke_max << "]";
    throw DataError(os.str());
  }
}

}  // namespace detail

/// Monotone A/C sweep holding tool-ball coincidence. All poses are
/// verified feasible and the resulting system must meet the condition
/// ceiling (in reporting units).
inline std::vector<Pose> generate_identification_trajectory(const MachineTopology& topo,
                                                            const TrajectorySpec& spec) {
  if (spec.kind != TrajectoryKind::identification)
    throw ConfigError("spec kind must be identification");
  if (spec.pose_count < 5) throw ConfigError("identification needs at least 5 poses");
  detail::check_a_range(topo, std::min(spec.a_start_deg, spec.a_end_deg),
                        std::max(spec.a_start_deg, spec.a_end_deg));

  // clockwise: sweep start -> end; counter-clockwise: end -> start
  const bool cw = spec.sense == RotationSense::clockwise;
  const int n = spec.pose_count;
  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double frac = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    const double t = cw ? frac : 1.0 - frac;
    const double a = spec.a_start_deg + t * (spec.a_end_deg - spec.a_start_deg);
    const double c = spec.c_start_deg + t * (spec.c_end_deg - spec.c_start_deg);
    Pose p = inverse_kinematics_coincidence(topo, a, c);
    p.index = i + 1;
    poses.push_back(p);
  }

  const auto jid = assemble_identification_jacobian(topo, poses);
  const double kappa = condition_number_report_units(jid);
  if (kappa > spec.condition_ceiling) {
    std::ostringstream os;
    os << "identification trajectory condition number " << kappa << " exceeds ceiling "
       << spec.condition_ceiling;
    throw DataError(os.str());
  }
  return poses;
}

/// Reversed-A sweep, offset a third of a step so no command tuple can
/// repeat an identification pose (a half step would collide at the sweep
/// midpoint).
inline std::vector<Pose> generate_validation_trajectory(const MachineTopology& topo,
                                                        const TrajectorySpec& spec) {
  if (spec.kind != TrajectoryKind::validation)
    throw ConfigError("spec kind must be validation");
  if (spec.pose_count < 5) throw ConfigError("validation needs at least 5 poses");
  detail::check_a_range(topo, std::min(spec.a_start_deg, spec.a_end_deg),
                        std::max(spec.a_start_deg, spec.a_end_deg));

  const int n = spec.pose_count;
  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double frac = (static_cast<double>(i) + 1.0 / 3.0) / n;
    const double a = spec.a_end_deg - frac * (spec.a_end_deg - spec.a_start_deg);
    const double c = spec.c_start_deg + frac * (spec.c_end_deg - spec.c_start_deg);
    Pose p = inverse_kinematics_coincidence(topo, a, c);
    p.index = i + 1;
    poses.push_back(p);
  }
  return poses;
}

/// Regular cubic lattice of programmed tool offsets, centred on zero.
inline std::vector<Vec3> generate_calibration_grid(const TrajectorySpec& spec) {
  if (spec.kind != TrajectoryKind::calibration_grid)
    throw ConfigError("spec kind must be calibration-grid");
  const int per_axis = static_cast<int>(std::llround(std::cbrt(double(spec.mesh_points))));
  if (per_axis < 2 || per_axis * per_axis * per_axis != spec.mesh_points)
    throw ConfigError("calibration mesh count " + std::to_string(spec.mesh_points) +
                      " is not a perfect cube");
  const double hw = spec.cube_halfwidth_mm;
  std::vector<Vec3> grid;
  grid.reserve(static_cast<std::size_t>(spec.mesh_points));
  for (int iz = 0; iz < per_axis; ++iz)
    for (int iy = 0; iy < per_axis; ++iy)
      for (int ix = 0; ix < per_axis; ++ix) {
        auto coord = [&](int i) { return -hw + 2.0 * hw * i / (per_axis - 1); };
        grid.emplace_back(coord(ix), coord(iy), coord(iz));
      }
  return grid;
}

}  // namespace linkcal
