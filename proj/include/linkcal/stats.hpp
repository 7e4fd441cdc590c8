#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "linkcal/common.hpp"

namespace linkcal {

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Sample standard deviation (n-1 denominator). Identical samples give
/// exactly zero, independent of accumulation rounding.
inline double sample_std(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  if (*mn == *mx) return 0.0;
  const double m = mean(x);
  double s2 = 0.0;
  for (double v : x) s2 += (v - m) * (v - m);
  return std::sqrt(s2 / static_cast<double>(n - 1));
}

/// Sample skewness (g1, biased moment form).
inline double skewness(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 3) return 0.0;
  const double m = mean(x);
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  if (m2 <= 0.0) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

/// Excess kurtosis (g2 = m4/m2^2 - 3).
inline double excess_kurtosis(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) return 0.0;
  const double m = mean(x);
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  if (m2 <= 0.0) return 0.0;
  return m4 / (m2 * m2) - 3.0;
}

/// Pearson correlation of x[i] with x[i+lag].
inline double autocorrelation(std::span<const double> x, std::size_t lag) {
  const std::size_t n = x.size();
  if (n <= lag + 1) return 0.0;
  const double m = mean(x);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - m;
    den += d * d;
    if (i + lag < n) num += d * (x[i + lag] - m);
  }
  if (den <= 0.0) return 0.0;
  return num / den;
}

inline double correlation(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n < 2) return 0.0;
  const double ma = mean(a.subspan(0, n));
  const double mb = mean(b.subspan(0, n));
  double num = 0.0, da2 = 0.0, db2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    num += da * db;
    da2 += da * da;
    db2 += db * db;
  }
  if (da2 <= 0.0 || db2 <= 0.0) return 0.0;
  return num / std::sqrt(da2 * db2);
}

struct HistogramBin {
  double low = 0.0;
  double high = 0.0;
  std::size_t count = 0;
};

inline std::vector<HistogramBin> histogram(std::span<const double> x, int bins) {
  std::vector<HistogramBin> h;
  if (x.empty() || bins < 1) return h;
  const auto [mn_it, mx_it] = std::minmax_element(x.begin(), x.end());
  double lo = *mn_it, hi = *mx_it;
  if (hi <= lo) hi = lo + 1.0;  // degenerate: all samples equal
  const double w = (hi - lo) / bins;
  h.resize(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    h[static_cast<std::size_t>(b)].low = lo + b * w;
    h[static_cast<std::size_t>(b)].high = lo + (b + 1) * w;
  }
  for (double v : x) {
    int b = static_cast<int>((v - lo) / w);
    b = std::clamp(b, 0, bins - 1);
    ++h[static_cast<std::size_t>(b)].count;
  }
  return h;
}

}  // namespace linkcal
