#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace linkcal {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Param14 = Eigen::Matrix<double, 14, 1>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kUmPerMm = 1e3;
inline constexpr double kMmPerUm = 1e-3;
// angles: stored in rad, reported in um/m (= urad)
inline constexpr double kUmPerMPerRad = 1e6;
inline constexpr double kRadPerUmPerM = 1e-6;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Configuration / input-file problems (CLI exit code 1).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Dimension, rank or content mismatches in data (CLI exit code 2).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

enum class Frame { machine, sensor };

inline const char* frame_name(Frame f) {
  return f == Frame::machine ? "machine" : "sensor";
}

/// Index of each error parameter. Order is fixed and shared by the
/// Jacobian columns, serialization and all reports.
enum ParamIndex : int {
  kGammaY = 0,  // X-Y squareness, rotation of Y travel about z
  kAlphaZ = 1,  // Y-Z squareness, rotation of Z travel about x
  kBetaZ = 2,   // X-Z squareness, rotation of Z travel about y
  kBetaA = 3,   // tilt of the A axis about y
  kGammaA = 4,  // tilt of the A axis about z
  kAlphaC = 5,  // tilt of the C axis about platform x
  kBetaC = 6,   // tilt of the C axis about platform y
  kYC = 7,      // offset of the C axis relative to the A axis along platform y
  kXT = 8,      // sensing-head setup offsets
  kYT = 9,
  kZT = 10,
  kXW = 11,     // master-ball setup offsets
  kYW = 12,
  kZW = 13,
};

inline constexpr int kParamCount = 14;
inline constexpr int kLinkErrorCount = 8;
inline constexpr int kAngularParamCount = 7;  // indices 0..6

inline bool param_is_angular(int i) { return i >= 0 && i < kAngularParamCount; }

inline const std::array<std::string, kParamCount>& param_names() {
  static const std::array<std::string, kParamCount> names = {
      "dgamma_Y", "dalpha_Z", "dbeta_Z", "dbeta_A", "dgamma_A",
      "dalpha_C", "dbeta_C",  "dy_C",    "dx_T",    "dy_T",
      "dz_T",     "dx_W",     "dy_W",    "dz_W"};
  return names;
}

inline const char* param_report_unit(int i) {
  return param_is_angular(i) ? "um/m" : "um";
}

/// 14 link + setup errors. Internal units: rad for the 7 angular
/// components, mm for the 7 length components.
struct ErrorParameterVector {
  Param14 v = Param14::Zero();

  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }

  /// Report units: um/m for angles, um for lengths.
  Param14 to_report_units() const {
    Param14 r;
    for (int i = 0; i < kParamCount; ++i)
      r[i] = v[i] * (param_is_angular(i) ? kUmPerMPerRad : kUmPerMm);
    return r;
  }

  static ErrorParameterVector from_report_units(const Param14& r) {
    ErrorParameterVector p;
    for (int i = 0; i < kParamCount; ++i)
      p.v[i] = r[i] * (param_is_angular(i) ? kRadPerUmPerM : kMmPerUm);
    return p;
  }
};

/// Cartesian tool-relative-to-workpiece displacement at one pose, mm.
struct VolumetricError {
  Vec3 delta_mm = Vec3::Zero();
  Frame frame = Frame::machine;
};

}  // namespace linkcal
