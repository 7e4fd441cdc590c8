#pragma once

#include <cstdint>
#include <cmath>
#include <initializer_list>

#include "linkcal/common.hpp"

namespace linkcal {

/// Counter-based random stream with deterministic splitting.
///
/// Streams are derived from a root seed and a list of stream ids
/// (sequence, trial, point, source, ...) by chained splitmix64 mixing.
/// Deriving the same (root, ids...) always yields the same stream, so
/// trials and points can be evaluated concurrently in any order while
/// drawing identical values.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {
    // burn-in so adjacent seeds decorrelate
    next_u64();
    next_u64();
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined word
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Substream for a tuple of ids, e.g. derive(root, {seq, trial, point, src}).
  static RngStream derive(std::uint64_t root, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t s = mix(root, 0x8f1bbcdcbfa53e0bULL);
    for (std::uint64_t id : ids) s = mix(s, id);
    return RngStream(s);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + uniform01() * (b - a); }

  /// Standard normal via Box-Muller. Draws are paired; the spare is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  Vec3 normal3(const Vec3& sigma) {
    return Vec3(normal(0.0, sigma.x()), normal(0.0, sigma.y()), normal(0.0, sigma.z()));
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Named source ids used when splitting measurement streams.
namespace stream_id {
inline constexpr std::uint64_t kSensorNoise = 1;
inline constexpr std::uint64_t kTransformNoise = 2;
inline constexpr std::uint64_t kStatisticalDrift = 3;
inline constexpr std::uint64_t kSequenceStart = 4;   // t0 draw
inline constexpr std::uint64_t kRawLogSamples = 5;
inline constexpr std::uint64_t kExactStopJitter = 6;
}  // namespace stream_id

}  // namespace linkcal
