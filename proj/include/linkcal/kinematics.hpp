#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "linkcal/common.hpp"

namespace linkcal {

enum class AxisKind { rotary, linear, fixed };

inline const char* axis_kind_name(AxisKind k) {
  switch (k) {
    case AxisKind::rotary: return "rotary";
    case AxisKind::linear: return "linear";
    default: return "fixed";
  }
}

/// One element of the serial chain. `direction` and `location` are
/// expressed in the frame of the preceding element (workpiece branch)
/// or of the machine base (tool branch). Locations in mm, strokes in mm
/// for linear axes and deg for rotary ones.
struct AxisDescriptor {
  std::string name;
  AxisKind kind = AxisKind::fixed;
  Vec3 direction = Vec3::Zero();
  Vec3 location = Vec3::Zero();
  double stroke_min = 0.0;
  double stroke_max = 0.0;
};

/// Serial two-branch machine: workpiece branch W-C-A-Y-F, tool branch
/// F-X-Z-T. The A axis is tilted 45 degrees; the machine frame is
/// right-handed with x along the X axis.
struct MachineTopology {
  std::array<AxisDescriptor, 8> chain;

  // chain positions, in order
  static constexpr int iW = 0, iC = 1, iA = 2, iY = 3, iF = 4, iX = 5, iZ = 6, iT = 7;

  const AxisDescriptor& axis(int i) const { return chain[static_cast<std::size_t>(i)]; }

  Vec3 ball_in_table() const { return axis(iW).location; }        // C-table frame
  Vec3 c_anchor_platform() const { return axis(iC).location; }    // A-platform frame
  Vec3 c_dir_platform() const { return axis(iC).direction; }
  Vec3 a_anchor_carriage() const { return axis(iA).location; }    // Y-carriage frame
  Vec3 a_dir_carriage() const { return axis(iA).direction; }
  Vec3 head_offset() const { return axis(iT).location; }          // tool point at x=z=0
  Vec3 x_dir() const { return axis(iX).direction; }
  Vec3 y_dir() const { return axis(iY).direction; }
  Vec3 z_dir() const { return axis(iZ).direction; }

  /// Default trunnion machine: 45-degree A axis under the C table,
  /// X 650 / Y 700 / Z 450 mm strokes, master ball near table centre.
  /// The A axis lies in the machine x-z plane so that the common
  /// perpendicular of the A and C axis lines runs along platform y,
  /// which is what makes the dy_C offset parameter identifiable next
  /// to the ball setup errors.
  static MachineTopology trunnion_45_default() {
    const double s = std::sqrt(0.5);
    MachineTopology t;
    t.chain[iW] = {"W", AxisKind::fixed, Vec3::Zero(), Vec3(100.0, 60.0, 110.0), 0, 0};
    t.chain[iC] = {"C", AxisKind::rotary, Vec3(0, 0, 1), Vec3(0.0, 40.0, 130.0), -36000.0, 36000.0};
    t.chain[iA] = {"A", AxisKind::rotary, Vec3(-s, 0, s), Vec3(92.0, -86.0, -67.0), 0.0, 180.0};
    t.chain[iY] = {"Y", AxisKind::linear, Vec3(0, 1, 0), Vec3::Zero(), -350.0, 350.0};
    t.chain[iF] = {"F", AxisKind::fixed, Vec3::Zero(), Vec3::Zero(), 0, 0};
    t.chain[iX] = {"X", AxisKind::linear, Vec3(1, 0, 0), Vec3::Zero(), -325.0, 325.0};
    t.chain[iZ] = {"Z", AxisKind::linear, Vec3(0, 0, 1), Vec3::Zero(), -225.0, 225.0};
    t.chain[iT] = {"T", AxisKind::fixed, Vec3::Zero(), Vec3::Zero(), 0, 0};
    t.validate();
    return t;
  }

  void validate() const {
    static const char* expected[8] = {"W", "C", "A", "Y", "F", "X", "Z", "T"};
    for (int i = 0; i < 8; ++i) {
      if (axis(i).name != expected[i])
        throw ConfigError("topology chain must be W,C,A,Y,F,X,Z,T; element " +
                          std::to_string(i) + " is '" + axis(i).name + "'");
    }
    for (int i : {iC, iA, iY, iX, iZ}) {
      const double n = axis(i).direction.norm();
      if (std::abs(n - 1.0) > 1e-12)
        throw ConfigError("axis " + axis(i).name + " direction is not unit (norm " +
                          std::to_string(n) + ")");
    }
    const double cos_tilt = axis(iA).direction.dot(Vec3(0, 0, 1));
    if (std::abs(std::acos(std::clamp(cos_tilt, -1.0, 1.0)) - deg_to_rad(45.0)) > 1e-9)
      throw ConfigError("A axis must be tilted 45 degrees from z");
    auto span = [this](int i) { return axis(i).stroke_max - axis(i).stroke_min; };
    if (std::abs(span(iX) - 650.0) > 1e-9 || std::abs(span(iY) - 700.0) > 1e-9 ||
        std::abs(span(iZ) - 450.0) > 1e-9)
      throw ConfigError("linear strokes must span X 650 / Y 700 / Z 450 mm");
  }
};

/// One commanded machine configuration. Angles in deg, travels in mm.
struct Pose {
  double a_deg = 0.0;
  double c_deg = 0.0;
  double x_mm = 0.0;
  double y_mm = 0.0;
  double z_mm = 0.0;
  int index = 1;
};

inline void validate_pose(const MachineTopology& topo, const Pose& pose) {
  struct Check { int axis; double value; };
  const Check checks[] = {{MachineTopology::iX, pose.x_mm},
                          {MachineTopology::iY, pose.y_mm},
                          {MachineTopology::iZ, pose.z_mm}};
  for (const auto& c : checks) {
    const auto& ax = topo.axis(c.axis);
    if (c.value < ax.stroke_min - 1e-9 || c.value > ax.stroke_max + 1e-9) {
      std::ostringstream os;
      os << "pose " << pose.index << ": axis " << ax.name << " command " << c.value
         << " mm outside stroke [" << ax.stroke_min << ", " << ax.stroke_max << "]";
      throw DataError(os.str());
    }
  }
}

struct JointFrame {
  std::string name;
  Mat3 rotation = Mat3::Identity();
  Vec3 origin = Vec3::Zero();  // machine frame, mm
};

struct NominalKinematics {
  Vec3 tool_point = Vec3::Zero();   // P_t, machine frame, mm
  Vec3 ball_point = Vec3::Zero();   // P_w, machine frame, mm
  std::vector<JointFrame> frames;   // per-joint machine-frame placements
};

/// Nominal (error-free) chain evaluation.
inline NominalKinematics forward_nominal(const MachineTopology& topo, const Pose& pose) {
  validate_pose(topo, pose);
  const double a = deg_to_rad(pose.a_deg);
  const double c = deg_to_rad(pose.c_deg);

  const Mat3 R_A = Eigen::AngleAxisd(a, topo.a_dir_carriage()).toRotationMatrix();
  const Mat3 R_C = Eigen::AngleAxisd(c, topo.c_dir_platform()).toRotationMatrix();

  const Vec3 carriage_origin = pose.y_mm * topo.y_dir();
  const Vec3 a_origin = carriage_origin + topo.a_anchor_carriage();
  const Vec3 c_origin = a_origin + R_A * topo.c_anchor_platform();
  const Mat3 R_table = R_A * R_C;
  const Vec3 ball = c_origin + R_table * topo.ball_in_table();

  const Vec3 z_origin = pose.x_mm * topo.x_dir();
  const Vec3 tool = z_origin + pose.z_mm * topo.z_dir() + topo.head_offset();

  NominalKinematics out;
  out.tool_point = tool;
  out.ball_point = ball;
  out.frames = {
      {"F", Mat3::Identity(), Vec3::Zero()},
      {"Y", Mat3::Identity(), carriage_origin},
      {"A", R_A, a_origin},
      {"C", R_table, c_origin},
      {"W", R_table, ball},
      {"X", Mat3::Identity(), z_origin},
      {"Z", Mat3::Identity(), z_origin + pose.z_mm * topo.z_dir()},
      {"T", Mat3::Identity(), tool},
  };
  return out;
}

namespace detail {
inline Mat3 rot_x(double t) { return Eigen::AngleAxisd(t, Vec3::UnitX()).toRotationMatrix(); }
inline Mat3 rot_y(double t) { return Eigen::AngleAxisd(t, Vec3::UnitY()).toRotationMatrix(); }
inline Mat3 rot_z(double t) { return Eigen::AngleAxisd(t, Vec3::UnitZ()).toRotationMatrix(); }
}  // namespace detail

/// Tool and ball positions with the 14 link/setup errors applied as finite
/// (non-linearised) displacements. Squareness errors tilt the travel
/// direction of their axis; rotary-axis errors tilt the joint frame about
/// the axis anchor; dy_C shifts the C anchor along platform y.
inline std::pair<Vec3, Vec3> forward_perturbed(const MachineTopology& topo, const Pose& pose,
                                               const ErrorParameterVector& p) {
  const double a = deg_to_rad(pose.a_deg);
  const double c = deg_to_rad(pose.c_deg);

  const Vec3 d_Y = detail::rot_z(p[kGammaY]) * topo.y_dir();
  const Vec3 d_Z = detail::rot_x(p[kAlphaZ]) * detail::rot_y(p[kBetaZ]) * topo.z_dir();

  const Mat3 R_A = detail::rot_y(p[kBetaA]) * detail::rot_z(p[kGammaA]) *
                   Eigen::AngleAxisd(a, topo.a_dir_carriage()).toRotationMatrix();
  const Mat3 R_C = detail::rot_x(p[kAlphaC]) * detail::rot_y(p[kBetaC]) *
                   Eigen::AngleAxisd(c, topo.c_dir_platform()).toRotationMatrix();

  const Vec3 c_anchor = topo.c_anchor_platform() + Vec3(0.0, p[kYC], 0.0);
  const Vec3 ball_table = topo.ball_in_table() + Vec3(p[kXW], p[kYW], p[kZW]);

  const Vec3 ball = pose.y_mm * d_Y + topo.a_anchor_carriage() +
                    R_A * (c_anchor + R_C * ball_table);
  const Vec3 tool = pose.x_mm * topo.x_dir() + pose.z_mm * d_Z + topo.head_offset() +
                    Vec3(p[kXT], p[kYT], p[kZT]);
  return {tool, ball};
}

/// Deviation of the tool-relative-to-workpiece displacement from nominal,
/// machine frame, mm. Non-linear in the parameters; the linearisation at
/// p = 0 is build_jacobian_row.
inline Vec3 volumetric_error_perturbed(const MachineTopology& topo, const Pose& pose,
                                       const ErrorParameterVector& p) {
  const auto nominal = forward_nominal(topo, pose);
  const auto [tool, ball] = forward_perturbed(topo, pose, p);
  return (tool - ball) - (nominal.tool_point - nominal.ball_point);
}

/// 3x14 sensitivity of the volumetric error to the parameters at one pose.
struct JacobianBlock {
  Eigen::Matrix<double, 3, kParamCount> J = Eigen::Matrix<double, 3, kParamCount>::Zero();
  int pose_index = 1;
};

inline JacobianBlock build_jacobian_row(const MachineTopology& topo, const Pose& pose) {
  validate_pose(topo, pose);
  const double a = deg_to_rad(pose.a_deg);
  const double c = deg_to_rad(pose.c_deg);

  const Mat3 R_A = Eigen::AngleAxisd(a, topo.a_dir_carriage()).toRotationMatrix();
  const Mat3 R_C = Eigen::AngleAxisd(c, topo.c_dir_platform()).toRotationMatrix();

  const Vec3 ex = Vec3::UnitX(), ey = Vec3::UnitY(), ez = Vec3::UnitZ();
  const Vec3 ball_from_c = R_C * topo.ball_in_table();           // platform frame
  const Vec3 ball_from_a = topo.c_anchor_platform() + ball_from_c;
  const Vec3 lever_a = R_A * ball_from_a;                        // machine frame

  JacobianBlock blk;
  blk.pose_index = pose.index;
  auto col = [&blk](int i) { return blk.J.col(i); };

  // workpiece-branch effects displace the ball: dtau = -dP_w
  col(kGammaY) = -pose.y_mm * ez.cross(topo.y_dir());
  col(kBetaA) = -ey.cross(lever_a);
  col(kGammaA) = -ez.cross(lever_a);
  col(kAlphaC) = -R_A * ex.cross(ball_from_c);
  col(kBetaC) = -R_A * ey.cross(ball_from_c);
  col(kYC) = -R_A * ey;
  col(kXW) = -R_A * R_C * ex;
  col(kYW) = -R_A * R_C * ey;
  col(kZW) = -R_A * R_C * ez;

  // tool-branch effects displace the tool point: dtau = +dP_t
  col(kAlphaZ) = pose.z_mm * ex.cross(topo.z_dir());
  col(kBetaZ) = pose.z_mm * ey.cross(topo.z_dir());
  col(kXT) = ex;
  col(kYT) = ey;
  col(kZT) = ez;
  return blk;
}

/// Stacked (3n)x14 system over a pose set.
struct IdentificationJacobian {
  Eigen::MatrixXd J;              // 3n x 14
  std::vector<int> pose_indices;  // length n, row block order

  Eigen::Index rows() const { return J.rows(); }
  int pose_count() const { return static_cast<int>(pose_indices.size()); }
};

inline IdentificationJacobian assemble_identification_jacobian(const MachineTopology& topo,
                                                               const std::vector<Pose>& poses) {
  if (poses.size() < 5)
    throw DataError("identification needs at least 5 poses (15 equations for 14 unknowns), got " +
                    std::to_string(poses.size()));
  IdentificationJacobian out;
  out.J.resize(static_cast<Eigen::Index>(3 * poses.size()), kParamCount);
  out.pose_indices.reserve(poses.size());
  for (std::size_t k = 0; k < poses.size(); ++k) {
    const JacobianBlock blk = build_jacobian_row(topo, poses[k]);
    out.J.middleRows(static_cast<Eigen::Index>(3 * k), 3) = blk.J;
    out.pose_indices.push_back(poses[k].index);
  }
  return out;
}

/// Ratio of the largest to smallest singular value. Throws if the matrix
/// is numerically rank deficient (relative cutoff 1e-10).
inline double condition_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (smax <= 0.0 || smin <= 1e-10 * smax) {
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > 1e-10 * smax) ++rank;
    throw DataError("singular system: numerical rank " + std::to_string(rank) + " of " +
                    std::to_string(std::min(m.rows(), m.cols())) + " columns");
  }
  return smax / smin;
}

inline double condition_number(const IdentificationJacobian& jid) {
  return condition_number(jid.J);
}

/// Jacobian rescaled to reporting units (um outputs; um/m angular and um
/// length inputs). Conditioning is meaningful in these units because the
/// parameter magnitudes are commensurate there.
inline Eigen::MatrixXd report_unit_jacobian(const IdentificationJacobian& jid) {
  Eigen::MatrixXd J = jid.J;
  for (int i = 0; i < kParamCount; ++i)
    if (param_is_angular(i)) J.col(i) *= kMmPerUm;  // mm/rad -> um per um/m
  return J;
}

inline double condition_number_report_units(const IdentificationJacobian& jid) {
  return condition_number(report_unit_jacobian(jid));
}

/// delta_chi = J_id * p, reshaped into per-pose machine-frame errors.
inline std::vector<VolumetricError> predict_volumetric_errors(const IdentificationJacobian& jid,
                                                              const ErrorParameterVector& p) {
  if (jid.J.cols() != kParamCount)
    throw DataError("Jacobian has " + std::to_string(jid.J.cols()) + " columns, expected 14");
  const Eigen::VectorXd chi = jid.J * p.v;
  std::vector<VolumetricError> out(static_cast<std::size_t>(jid.pose_count()));
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].delta_mm = chi.segment(static_cast<Eigen::Index>(3 * k), 3);
    out[k].frame = Frame::machine;
  }
  return out;
}

}  // namespace linkcal
