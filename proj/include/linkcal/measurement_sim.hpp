#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "linkcal/common.hpp"
#include "linkcal/identification.hpp"
#include "linkcal/kinematics.hpp"
#include "linkcal/rng.hpp"
#include "linkcal/sensor_calibration.hpp"
#include "linkcal/uncertainty.hpp"

namespace linkcal {

/// Instrument with gains, inter-channel projections and reading offsets
/// representative of a calibrated sensing head.
inline FrameTransform default_instrument_transform() {
  return FrameTransform::from_gram(Vec3(0.998, 0.996, 0.996), Vec3(-0.030, -0.029, -0.021),
                                   Vec3(0.005, -0.003, 0.008));
}

inline constexpr double kSensorLinearRangeMm = 0.300;  // +-300 um per channel

/// One full simulated measurement campaign: planted errors, trajectory,
/// instrument truth vs fitted transform, disturbance sources.
struct SimulationScenario {
  ErrorParameterVector true_params;
  std::vector<Pose> trajectory;
  MeasurementClock clock;
  FrameTransform instrument_truth = default_instrument_transform();
  FrameTransform instrument_fitted = default_instrument_transform();
  UncertaintySourceSet sources = UncertaintySourceSet::none();
  std::uint64_t seed = 1;
  int sequence_index = 1;
  int trial_index = 1;
  bool exact_stop_jitter = false;      // per-pose settle deviation toggle
  double exact_stop_tolerance_mm = 1e-3;
  // cubic response deviation per channel; the fraction is reached at the
  // edge of the linear range (0.005 = 0.5% there), 0 = ideal response
  double sensor_nonlinearity = 0.0;

  void validate() const {
    if (trajectory.empty()) throw ConfigError("scenario trajectory is empty");
    if (clock.pose_count != static_cast<int>(trajectory.size()))
      throw ConfigError("clock pose count " + std::to_string(clock.pose_count) +
                        " does not match trajectory size " +
                        std::to_string(trajectory.size()));
  }
};

struct MeasurementRun {
  ErrorVectorSet chi;            // machine frame, mm
  std::vector<bool> saturated;   // per pose: any channel left the linear range
  int saturated_count = 0;
};

/// Reusable simulation pipeline with the trajectory-dependent pieces
/// (Jacobian, noise-free error pattern, transform inverses) factored out.
/// run() is const and safe to call concurrently for different trials.
class MeasurementSimulator {
 public:
  MeasurementSimulator(const MachineTopology& topo, SimulationScenario scenario)
      : scenario_(std::move(scenario)),
        jid_(assemble_identification_jacobian(topo, scenario_.trajectory)),
        true_chi_(jid_.J * scenario_.true_params.v) {
    scenario_.validate();
    truth_linear_inv_ = scenario_.instrument_truth.linear().inverse();
    truth_offset_ = scenario_.instrument_truth.offset();
  }

  const IdentificationJacobian& jacobian() const { return jid_; }
  const SimulationScenario& scenario() const { return scenario_; }

  /// Noise-free sensor channel values for point k (0-based), at time t_s.
  /// Drift is part of the level because it moves the plateau itself.
  Vec3 channel_level_mm(int k, double t_s, int sequence, int trial) const {
    Vec3 tau = true_chi_.segment(3 * k, 3);
    if (scenario_.exact_stop_jitter) {
      RngStream rng = RngStream::derive(
          scenario_.seed, {static_cast<std::uint64_t>(sequence), static_cast<std::uint64_t>(trial),
                           static_cast<std::uint64_t>(k), stream_id::kExactStopJitter});
      for (int i = 0; i < 3; ++i)
        tau[i] += rng.uniform(-scenario_.exact_stop_tolerance_mm,
                              scenario_.exact_stop_tolerance_mm);
    }
    Vec3 s = truth_linear_inv_ * (tau - truth_offset_);
    if (scenario_.sensor_nonlinearity != 0.0) {
      for (int ch = 0; ch < 3; ++ch) {
        const double rel = s[ch] / kSensorLinearRangeMm;
        s[ch] *= 1.0 + scenario_.sensor_nonlinearity * rel * rel;
      }
    }
    if (scenario_.sources.drift_mode == DriftMode::cyclic) {
      s -= cyclic_drift_value(scenario_.sources.cyclic_drift, t_s) * kMmPerUm;
    } else if (scenario_.sources.drift_mode == DriftMode::statistical) {
      RngStream rng = RngStream::derive(
          scenario_.seed, {static_cast<std::uint64_t>(sequence), static_cast<std::uint64_t>(trial),
                           static_cast<std::uint64_t>(k), stream_id::kStatisticalDrift});
      s -= sample_statistical_drift(scenario_.sources.statistical_drift, rng) * kMmPerUm;
    }
    return s;
  }

  MeasurementRun run(int sequence, int trial) const {
    return run_with_clock(sequence, trial, scenario_.clock);
  }

  /// Same trial with the sequence start time overridden; used by the
  /// adaptive engine, which draws t_0 once per sequence.
  MeasurementRun run(int sequence, int trial, double t0_s) const {
    MeasurementClock clock = scenario_.clock;
    clock.t0_s = t0_s;
    return run_with_clock(sequence, trial, clock);
  }

 private:
  MeasurementRun run_with_clock(int sequence, int trial, const MeasurementClock& clock) const {
    const int n = static_cast<int>(scenario_.trajectory.size());
    MeasurementRun out;
    out.chi.chi_mm.resize(3 * n);
    out.chi.frame = Frame::machine;
    out.chi.pose_indices.reserve(static_cast<std::size_t>(n));
    out.chi.timestamps_s.reserve(static_cast<std::size_t>(n));
    out.saturated.assign(static_cast<std::size_t>(n), false);

    for (int k = 0; k < n; ++k) {
      const double t = measurement_time(clock, trial, k + 1);
      Vec3 s = channel_level_mm(k, t, sequence, trial);

      if (scenario_.sources.sensor_noise_enabled) {
        RngStream rng = RngStream::derive(
            scenario_.seed, {static_cast<std::uint64_t>(sequence),
                             static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(k),
                             stream_id::kSensorNoise});
        s += sample_sensor_noise(scenario_.sources.sensor, rng) * kMmPerUm;
      }

      if (s.cwiseAbs().maxCoeff() > kSensorLinearRangeMm) {
        out.saturated[static_cast<std::size_t>(k)] = true;
        ++out.saturated_count;
      }

      Vec3 tau_hat = apply_transform(scenario_.instrument_fitted, s).delta_mm;
      if (scenario_.sources.transform_noise_enabled) {
        RngStream rng = RngStream::derive(
            scenario_.seed, {static_cast<std::uint64_t>(sequence),
                             static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(k),
                             stream_id::kTransformNoise});
        tau_hat += sample_transform_noise(scenario_.sources.transform, rng) * kMmPerUm;
      }

      out.chi.chi_mm.segment(3 * k, 3) = tau_hat;
      out.chi.pose_indices.push_back(scenario_.trajectory[static_cast<std::size_t>(k)].index);
      out.chi.timestamps_s.push_back(t);
    }
    return out;
  }

  SimulationScenario scenario_;
  IdentificationJacobian jid_;
  Eigen::VectorXd true_chi_;
  Mat3 truth_linear_inv_;
  Vec3 truth_offset_;
};

inline MeasurementRun simulate_measurement_run(const MachineTopology& topo,
                                               const SimulationScenario& scenario) {
  MeasurementSimulator sim(topo, scenario);
  return sim.run(scenario.sequence_index, scenario.trial_index);
}

/// Continuous sensor-channel record, um, fixed sampling rate.
struct RawSensorLog {
  double rate_hz = 1000.0;
  Eigen::Matrix3Xd samples_um;                            // 3 channels x samples
  std::vector<std::pair<std::size_t, std::size_t>> dwell_ranges;  // synthesis ground truth

  Eigen::Index sample_count() const { return samples_um.cols(); }
  double duration_s() const { return static_cast<double>(sample_count()) / rate_hz; }
};

struct RawLogSettings {
  double rate_hz = 1000.0;
  double dwell_s = 0.5;  // stationary time per pose; the rest of t_i is the move
};

/// Exact-stop record: a move ramp followed by a stationary plateau per
/// pose, with per-sample sensor noise.
inline RawSensorLog simulate_raw_log(const MachineTopology& topo,
                                     const SimulationScenario& scenario,
                                     const RawLogSettings& settings = {}) {
  if (settings.dwell_s < 0.2) throw ConfigError("raw log dwell must be >= 0.2 s");
  if (settings.dwell_s > scenario.clock.ti_s + 1e-12)
    throw ConfigError("dwell exceeds the inter-point interval t_i");

  MeasurementSimulator sim(topo, scenario);
  const int n = static_cast<int>(scenario.trajectory.size());
  const double ti = scenario.clock.ti_s;
  const double transition = ti - settings.dwell_s;

  std::vector<Vec3> levels(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double t = measurement_time(scenario.clock, scenario.trial_index, k + 1);
    levels[static_cast<std::size_t>(k)] =
        sim.channel_level_mm(k, t, scenario.sequence_index, scenario.trial_index) * kUmPerMm;
  }

  RawSensorLog log;
  log.rate_hz = settings.rate_hz;
  const auto total = static_cast<Eigen::Index>(std::llround(n * ti * settings.rate_hz));
  log.samples_um.resize(3, total);

  RngStream rng = RngStream::derive(
      scenario.seed,
      {static_cast<std::uint64_t>(scenario.sequence_index),
       static_cast<std::uint64_t>(scenario.trial_index), stream_id::kRawLogSamples});
  const Vec3 sigma =
      scenario.sources.sensor_noise_enabled ? scenario.sources.sensor.sigma_um : Vec3::Zero();

  for (Eigen::Index j = 0; j < total; ++j) {
    const double t = static_cast<double>(j) / settings.rate_hz;
    int k = std::min(static_cast<int>(t / ti), n - 1);
    const double tau = t - k * ti;
    Vec3 v;
    if (k == 0 || tau >= transition) {
      v = levels[static_cast<std::size_t>(k)];
    } else {
      const double f = tau / transition;
      v = levels[static_cast<std::size_t>(k - 1)] +
          f * (levels[static_cast<std::size_t>(k)] - levels[static_cast<std::size_t>(k - 1)]);
    }
    log.samples_um.col(j) = v + rng.normal3(sigma);
  }

  for (int k = 0; k < n; ++k) {
    const double start = k == 0 ? 0.0 : k * ti + transition;
    const auto s0 = static_cast<std::size_t>(std::llround(start * settings.rate_hz));
    const auto s1 = static_cast<std::size_t>(std::llround((k + 1) * ti * settings.rate_hz));
    log.dwell_ranges.emplace_back(s0, s1);
  }
  return log;
}

struct ExtractionSettings {
  double window_s = 0.1;
  double threshold_factor = 3.0;        // times the per-channel sensor sigma
  Vec3 sensor_sigma_um = Vec3(0.28, 0.28, 0.40);
  double min_plateau_s = 0.3;
  double central_fraction = 0.6;        // averaged part of each plateau
  double threshold_floor_um = 0.02;     // keeps noise-free logs detectable
};

/// Plateau detection by rolling standard deviation. Returns one averaged
/// channel triple per detected plateau, in time order, sensor frame (mm).
inline ErrorVectorSet extract_steady_values(const RawSensorLog& log, int expected_poses,
                                            const ExtractionSettings& settings = {}) {
  const Eigen::Index n = log.sample_count();
  const auto w = static_cast<Eigen::Index>(std::llround(settings.window_s * log.rate_hz));
  if (w < 2 || n < w) throw DataError("raw log shorter than the detection window");

  Vec3 threshold;
  for (int ch = 0; ch < 3; ++ch)
    threshold[ch] = std::max(settings.threshold_factor * settings.sensor_sigma_um[ch],
                             settings.threshold_floor_um);

  // prefix sums for O(1) window std
  Eigen::Matrix3Xd ps = Eigen::Matrix3Xd::Zero(3, n + 1);
  Eigen::Matrix3Xd ps2 = Eigen::Matrix3Xd::Zero(3, n + 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    ps.col(j + 1) = ps.col(j) + log.samples_um.col(j);
    ps2.col(j + 1) = ps2.col(j) + log.samples_um.col(j).cwiseProduct(log.samples_um.col(j));
  }
  auto window_steady = [&](Eigen::Index start) {
    for (int ch = 0; ch < 3; ++ch) {
      const double s = ps(ch, start + w) - ps(ch, start);
      const double s2 = ps2(ch, start + w) - ps2(ch, start);
      const double var = std::max(0.0, (s2 - s * s / double(w)) / double(w - 1));
      if (std::sqrt(var) >= threshold[ch]) return false;
    }
    return true;
  };

  // maximal runs of steady windows -> plateau spans
  std::vector<std::pair<Eigen::Index, Eigen::Index>> spans;  // [first, last) samples
  Eigen::Index run_start = -1;
  const Eigen::Index last_window = n - w;
  for (Eigen::Index i = 0; i <= last_window; ++i) {
    if (window_steady(i)) {
      if (run_start < 0) run_start = i;
    } else if (run_start >= 0) {
      spans.emplace_back(run_start, i - 1 + w);
      run_start = -1;
    }
  }
  if (run_start >= 0) spans.emplace_back(run_start, last_window + w);

  const auto min_len = static_cast<Eigen::Index>(std::llround(settings.min_plateau_s * log.rate_hz));
  std::vector<std::pair<Eigen::Index, Eigen::Index>> plateaus;
  for (const auto& s : spans)
    if (s.second - s.first >= min_len) plateaus.push_back(s);

  auto span_mean = [&](const std::pair<Eigen::Index, Eigen::Index>& s) {
    const Eigen::Index len = s.second - s.first;
    const auto trim = static_cast<Eigen::Index>(
        std::llround(0.5 * (1.0 - settings.central_fraction) * double(len)));
    const Eigen::Index a = s.first + trim, b = s.second - trim;
    Vec3 m = (ps.col(b) - ps.col(a)).head<3>() / double(b - a);
    return m;
  };

  // neighbouring plateaus at the same level separated by a sub-window gap
  // are detection dropouts, not distinct poses
  for (std::size_t i = 0; i + 1 < plateaus.size(); ++i) {
    const auto gap = plateaus[i + 1].first - plateaus[i].second;
    if (gap < w) {
      const Vec3 da = span_mean(plateaus[i]);
      const Vec3 db = span_mean(plateaus[i + 1]);
      if ((da - db).cwiseAbs().maxCoeff() < threshold.maxCoeff())
        throw DataError("ambiguous plateaus: segments " + std::to_string(i + 1) + " and " +
                        std::to_string(i + 2) + " are merge candidates (gap " +
                        std::to_string(double(gap) / log.rate_hz) + " s at equal level)");
    }
  }

  if (static_cast<int>(plateaus.size()) != expected_poses)
    throw DataError("detected " + std::to_string(plateaus.size()) + " plateaus, expected " +
                    std::to_string(expected_poses));

  ErrorVectorSet out;
  out.frame = Frame::sensor;
  out.chi_mm.resize(3 * expected_poses);
  for (int k = 0; k < expected_poses; ++k) {
    out.chi_mm.segment(3 * k, 3) = span_mean(plateaus[static_cast<std::size_t>(k)]) * kMmPerUm;
    out.pose_indices.push_back(k + 1);
    out.timestamps_s.push_back(
        0.5 *
        double(plateaus[static_cast<std::size_t>(k)].first +
               plateaus[static_cast<std::size_t>(k)].second) /
        log.rate_hz);
  }
  return out;
}

/// Sensor-frame set mapped through a fitted transform, pose by pose.
inline ErrorVectorSet to_machine_frame(const ErrorVectorSet& sensor_set,
                                       const FrameTransform& fitted) {
  if (sensor_set.frame != Frame::sensor)
    throw DataError("set is already in the machine frame");
  ErrorVectorSet out = sensor_set;
  out.frame = Frame::machine;
  for (int k = 0; k < sensor_set.pose_count(); ++k)
    out.chi_mm.segment(3 * k, 3) = apply_transform(fitted, sensor_set.at(k)).delta_mm;
  return out;
}

}  // namespace linkcal
