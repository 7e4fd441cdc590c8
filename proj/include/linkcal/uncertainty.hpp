#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "linkcal/common.hpp"
#include "linkcal/rng.hpp"

namespace linkcal {

/// Per-channel standard uncertainty of the capacitive sensors, um.
struct SensorNoiseModel {
  Vec3 sigma_um = Vec3(0.28, 0.28, 0.40);

  void validate() const {
    if (sigma_um.minCoeff() < 0.0) throw ConfigError("sensor sigma must be >= 0");
  }
};

/// Per-machine-axis standard deviation of the frame-transformation
/// scatter, um.
struct TransformNoiseModel {
  Vec3 u_um = Vec3(0.56, 0.27, 0.69);

  void validate() const {
    if (u_um.minCoeff() < 0.0) throw ConfigError("transform noise u must be >= 0");
  }
};

/// u_EVE = E_VE / (2*sqrt(3)): standard uncertainty from a peak-to-valley
/// environmental variation magnitude.
inline double compute_u_eve(double e_ve_um) {
  if (e_ve_um < 0.0) throw ConfigError("E_VE must be >= 0");
  return e_ve_um / (2.0 * std::sqrt(3.0));
}

/// Drift treated as independent per-point noise of magnitude u_EVE.
struct StatisticalDriftModel {
  Vec3 e_ve_um = Vec3(6.95, 3.42, 6.63);

  Vec3 u_eve_um() const {
    return Vec3(compute_u_eve(e_ve_um[0]), compute_u_eve(e_ve_um[1]),
                compute_u_eve(e_ve_um[2]));
  }
};

/// Drift preserved as a deterministic periodic waveform per channel.
/// Samples cover exactly one period; evaluation wraps and interpolates
/// linearly.
struct CyclicDriftModel {
  std::vector<double> time_s;     // ascending, first sample at t = 0
  Eigen::Matrix3Xd values_um;     // 3 channels x samples
  double period_s = 420.0;

  void validate() const {
    if (time_s.size() < 2) throw ConfigError("cyclic waveform needs at least 2 samples");
    if (static_cast<Eigen::Index>(time_s.size()) != values_um.cols())
      throw ConfigError("cyclic waveform time/value count mismatch");
    if (std::abs(time_s.front()) > 1e-12)
      throw ConfigError("cyclic waveform must start at t = 0");
    if (time_s.back() >= period_s)
      throw ConfigError("cyclic waveform samples must lie inside one period");
    for (std::size_t i = 1; i < time_s.size(); ++i)
      if (time_s[i] <= time_s[i - 1])
        throw ConfigError("cyclic waveform times must be strictly increasing");
  }

  /// Periodic evaluation, um per channel.
  Vec3 value_at(double t_s) const {
    double u = std::fmod(t_s, period_s);
    if (u < 0.0) u += period_s;
    // locate the surrounding samples; the segment after the last sample
    // wraps back to the first
    std::size_t hi = 0;
    while (hi < time_s.size() && time_s[hi] <= u) ++hi;
    const std::size_t i0 = (hi == 0) ? time_s.size() - 1 : hi - 1;
    const std::size_t i1 = hi % time_s.size();
    const double t0 = time_s[i0];
    double t1 = time_s[i1];
    double span = t1 - t0;
    if (span <= 0.0) span += period_s;  // wrapped segment
    double frac = (u - t0) / span;
    const Vec3 v0 = values_um.col(static_cast<Eigen::Index>(i0));
    const Vec3 v1 = values_um.col(static_cast<Eigen::Index>(i1));
    return v0 + frac * (v1 - v0);
  }

  Vec3 peak_to_valley_um() const {
    Vec3 p2v;
    for (int r = 0; r < 3; ++r)
      p2v[r] = values_um.row(r).maxCoeff() - values_um.row(r).minCoeff();
    return p2v;
  }

  /// Zero-mean sawtooth-like cycle: rise over the first fifth of the
  /// period, decay over the rest. Peak-to-valley equals e_ve per channel.
  static CyclicDriftModel sawtooth_default(const Vec3& e_ve_um = Vec3(6.95, 3.42, 6.63),
                                           double period_s = 420.0, int samples = 250,
                                           double rise_fraction = 0.2) {
    CyclicDriftModel m;
    m.period_s = period_s;
    m.time_s.resize(static_cast<std::size_t>(samples));
    m.values_um.resize(3, samples);
    for (int j = 0; j < samples; ++j) {
      const double u = static_cast<double>(j) / samples;
      m.time_s[static_cast<std::size_t>(j)] = u * period_s;
      const double shape =
          u < rise_fraction ? u / rise_fraction : (1.0 - u) / (1.0 - rise_fraction);
      for (int ch = 0; ch < 3; ++ch) m.values_um(ch, j) = e_ve_um[ch] * (shape - 0.5);
    }
    return m;
  }
};

enum class DriftMode { none, statistical, cyclic };

inline const char* drift_mode_name(DriftMode m) {
  switch (m) {
    case DriftMode::statistical: return "statistical";
    case DriftMode::cyclic: return "cyclic";
    default: return "none";
  }
}

/// Which disturbance sources a simulation applies.
struct UncertaintySourceSet {
  bool sensor_noise_enabled = true;
  bool transform_noise_enabled = true;
  DriftMode drift_mode = DriftMode::cyclic;
  SensorNoiseModel sensor;
  TransformNoiseModel transform;
  StatisticalDriftModel statistical_drift;
  CyclicDriftModel cyclic_drift = CyclicDriftModel::sawtooth_default();

  static UncertaintySourceSet none() {
    UncertaintySourceSet s;
    s.sensor_noise_enabled = false;
    s.transform_noise_enabled = false;
    s.drift_mode = DriftMode::none;
    return s;
  }

  static UncertaintySourceSet all(DriftMode drift = DriftMode::cyclic) {
    UncertaintySourceSet s;
    s.drift_mode = drift;
    return s;
  }
};

/// Timing of the measurement sequence: trial n, point k happens at
/// t_0 + (n-1)*t_m + k*t_i with t_m = pose_count * t_i.
struct MeasurementClock {
  double t0_s = 0.0;
  double ti_s = 0.74;
  int pose_count = 807;

  double tm_s() const { return pose_count * ti_s; }
};

inline double measurement_time(const MeasurementClock& clock, int trial, int point) {
  if (trial < 1) throw DataError("trial index must be >= 1");
  if (point < 1 || point > clock.pose_count)
    throw DataError("point index " + std::to_string(point) + " outside 1.." +
                    std::to_string(clock.pose_count));
  return clock.t0_s + (trial - 1) * clock.tm_s() + point * clock.ti_s;
}

inline Vec3 cyclic_drift_value(const CyclicDriftModel& model, double t_s) {
  if (t_s < 0.0) throw DataError("drift evaluation time must be >= 0");
  return model.value_at(t_s);
}

inline Vec3 sample_sensor_noise(const SensorNoiseModel& model, RngStream& rng) {
  return rng.normal3(model.sigma_um);
}

inline Vec3 sample_transform_noise(const TransformNoiseModel& model, RngStream& rng) {
  return rng.normal3(model.u_um);
}

inline Vec3 sample_statistical_drift(const StatisticalDriftModel& model, RngStream& rng) {
  return rng.normal3(model.u_eve_um());
}

}  // namespace linkcal
