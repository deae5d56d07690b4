#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "bootdelta/error.hpp"

namespace bootdelta {

/// Linear-interpolation quantile (type 7) of an unsorted sample.
inline double quantile(std::span<const double> x, double p) {
  require(!x.empty(), "quantile: empty sample");
  require(p >= 0.0 && p <= 1.0, "quantile: probability outside [0,1]");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double h = p * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

inline double median(std::span<const double> x) { return quantile(x, 0.5); }

inline double mean(std::span<const double> x) {
  require(!x.empty(), "mean: empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Unbiased sample variance (denominator n - 1).
inline double sample_variance(std::span<const double> x) {
  require(x.size() >= 2, "sample_variance: need at least two values");
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

/// Values that are not NaN.
inline std::vector<double> finite_values(std::span<const double> x) {
  std::vector<double> out;
  out.reserve(x.size());
  for (double v : x)
    if (!std::isnan(v)) out.push_back(v);
  return out;
}

}  // namespace bootdelta
