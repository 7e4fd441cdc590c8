#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <linkcal/linkcal.hpp>

#include <vector>

#include "helpers.hpp"

using namespace linkcal;

TEST_CASE("u_EVE formula") {
  CHECK(compute_u_eve(6.95) == doctest::Approx(2.00).epsilon(0.005));
  CHECK(compute_u_eve(3.42) == doctest::Approx(0.99).epsilon(0.011));
  CHECK(compute_u_eve(6.63) == doctest::Approx(1.91).epsilon(0.005));
  CHECK(compute_u_eve(0.0) == 0.0);
  CHECK_THROWS_AS(compute_u_eve(-1.0), ConfigError);
}

TEST_CASE("measurement_time: formula and telescoping") {
  MeasurementClock clock;
  clock.t0_s = 0.0;
  clock.ti_s = 0.74;
  clock.pose_count = 807;
  CHECK(measurement_time(clock, 1, 1) == doctest::Approx(0.74).epsilon(1e-12));
  CHECK(clock.tm_s() == doctest::Approx(597.18).epsilon(1e-12));

  clock.t0_s = 5.0;
  CHECK(measurement_time(clock, 2, 1) == doctest::Approx(602.92).epsilon(1e-12));

  for (int k = 1; k < 807; ++k)
    CHECK(measurement_time(clock, 3, k + 1) - measurement_time(clock, 3, k) ==
          doctest::Approx(clock.ti_s).epsilon(1e-12));
  CHECK(measurement_time(clock, 4, 100) - measurement_time(clock, 3, 100) ==
        doctest::Approx(clock.tm_s()).epsilon(1e-12));

  CHECK_THROWS_AS(measurement_time(clock, 0, 1), DataError);
  CHECK_THROWS_AS(measurement_time(clock, 1, 0), DataError);
  CHECK_THROWS_AS(measurement_time(clock, 1, 808), DataError);
}

TEST_CASE("cyclic drift: first sample, periodicity and interpolation") {
  const auto model = CyclicDriftModel::sawtooth_default();
  model.validate();
  const Vec3 first = model.values_um.col(0);
  CHECK((cyclic_drift_value(model, 0.0) - first).norm() < 1e-12);
  CHECK((cyclic_drift_value(model, model.period_s) - first).norm() < 1e-9);
  CHECK((cyclic_drift_value(model, 3.0 * model.period_s + 17.2) -
         cyclic_drift_value(model, 17.2))
            .norm() < 1e-9);
  CHECK_THROWS_AS(cyclic_drift_value(model, -1.0), DataError);
}

TEST_CASE("cyclic drift: synthetic sine crosses zero at half period") {
  CyclicDriftModel sine;
  sine.period_s = 420.0;
  const int n = 1000;
  sine.time_s.resize(n);
  sine.values_um.resize(3, n);
  const double amp = 6.95 / 2.0;
  for (int j = 0; j < n; ++j) {
    sine.time_s[static_cast<std::size_t>(j)] = 420.0 * j / n;
    const double v = amp * std::sin(2.0 * kPi * j / n);
    sine.values_um.col(j) = Vec3(v, v, v);
  }
  sine.validate();
  CHECK(sine.peak_to_valley_um()[0] == doctest::Approx(6.95).epsilon(1e-4));
  CHECK(std::abs(cyclic_drift_value(sine, 210.0)[0]) < 1e-3);
}

TEST_CASE("default waveform: peak-to-valley matches the drift magnitudes") {
  const auto model = CyclicDriftModel::sawtooth_default();
  const Vec3 p2v = model.peak_to_valley_um();
  const Vec3 e_ve(6.95, 3.42, 6.63);
  for (int ch = 0; ch < 3; ++ch)
    CHECK(std::abs(p2v[ch] - e_ve[ch]) / e_ve[ch] < 0.01);

  // the statistical model derives its sigma from the same magnitudes
  StatisticalDriftModel stat;
  for (int ch = 0; ch < 3; ++ch)
    CHECK(compute_u_eve(p2v[ch]) == doctest::Approx(stat.u_eve_um()[ch]).epsilon(0.01));
}

#ifdef LINKCAL_DATA_DIR
TEST_CASE("default waveform: equals the bundled csv") {
  const auto bundled = io::waveform_from_csv(
      io::read_text_file(std::string(LINKCAL_DATA_DIR) + "/drift_waveform.csv"));
  const auto built = CyclicDriftModel::sawtooth_default();
  REQUIRE(bundled.time_s.size() == built.time_s.size());
  CHECK(bundled.period_s == built.period_s);
  CHECK((bundled.values_um - built.values_um).cwiseAbs().maxCoeff() < 1e-12);
}
#endif

TEST_CASE("sensor noise sampler: zero sigma, spread and independence") {
  SensorNoiseModel zero;
  zero.sigma_um = Vec3::Zero();
  RngStream rng(1);
  for (int i = 0; i < 10; ++i) CHECK(sample_sensor_noise(zero, rng).norm() == 0.0);

  SensorNoiseModel model;  // defaults 0.28 / 0.28 / 0.40
  RngStream stream = RngStream::derive(42, {1, 2, 3});
  const int n = 100000;
  std::vector<double> ch1(n), ch2(n), ch3(n);
  for (int i = 0; i < n; ++i) {
    const Vec3 v = sample_sensor_noise(model, stream);
    ch1[static_cast<std::size_t>(i)] = v[0];
    ch2[static_cast<std::size_t>(i)] = v[1];
    ch3[static_cast<std::size_t>(i)] = v[2];
  }
  CHECK(sample_std(ch1) > 0.27);
  CHECK(sample_std(ch1) < 0.29);
  CHECK(sample_std(ch3) > 0.39);
  CHECK(sample_std(ch3) < 0.41);
  CHECK(std::abs(correlation(ch1, ch2)) < 0.02);
  CHECK(std::abs(correlation(ch1, ch3)) < 0.02);
  CHECK(std::abs(correlation(ch2, ch3)) < 0.02);
}

TEST_CASE("transform noise sampler: spread and near-zero mean") {
  TransformNoiseModel model;  // defaults 0.56 / 0.27 / 0.69
  RngStream stream = RngStream::derive(7, {9});
  const int n = 100000;
  std::vector<double> x(n), y(n), z(n);
  for (int i = 0; i < n; ++i) {
    const Vec3 v = sample_transform_noise(model, stream);
    x[static_cast<std::size_t>(i)] = v[0];
    y[static_cast<std::size_t>(i)] = v[1];
    z[static_cast<std::size_t>(i)] = v[2];
  }
  CHECK(sample_std(x) > 0.55);
  CHECK(sample_std(x) < 0.58);
  CHECK(std::abs(mean(x)) < 0.01);
  CHECK(std::abs(mean(y)) < 0.01);
  CHECK(std::abs(mean(z)) < 0.01);
}

TEST_CASE("statistical drift sampler: sigma matches u_EVE, points independent") {
  StatisticalDriftModel model;
  RngStream stream = RngStream::derive(5, {1});
  const int n = 100000;
  std::vector<double> ch1(n);
  for (int i = 0; i < n; ++i)
    ch1[static_cast<std::size_t>(i)] = sample_statistical_drift(model, stream)[0];
  CHECK(std::abs(sample_std(ch1) - 2.00) < 0.03);
  CHECK(std::abs(autocorrelation(ch1, 1)) < 0.02);

  StatisticalDriftModel off;
  off.e_ve_um = Vec3::Zero();
  RngStream s2(3);
  CHECK(sample_statistical_drift(off, s2).norm() == 0.0);
}

TEST_CASE("streams: same ids reproduce, different ids decorrelate") {
  RngStream a = RngStream::derive(123, {4, 5, 6, stream_id::kSensorNoise});
  RngStream b = RngStream::derive(123, {4, 5, 6, stream_id::kSensorNoise});
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c = RngStream::derive(123, {4, 5, 7, stream_id::kSensorNoise});
  const int n = 20000;
  std::vector<double> va(n), vc(n);
  RngStream a2 = RngStream::derive(123, {4, 5, 6, stream_id::kSensorNoise});
  for (int i = 0; i < n; ++i) {
    va[static_cast<std::size_t>(i)] = a2.normal();
    vc[static_cast<std::size_t>(i)] = c.normal();
  }
  CHECK(std::abs(correlation(va, vc)) < 0.03);
}

TEST_CASE("waveform validation rejects malformed models") {
  CyclicDriftModel bad = CyclicDriftModel::sawtooth_default();
  bad.time_s[0] = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  CyclicDriftModel beyond = CyclicDriftModel::sawtooth_default();
  beyond.time_s.back() = beyond.period_s + 1.0;
  CHECK_THROWS_AS(beyond.validate(), ConfigError);
}
