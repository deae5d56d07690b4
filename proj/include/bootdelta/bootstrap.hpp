#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bootdelta/error.hpp"
#include "bootdelta/rng.hpp"
#include "bootdelta/stepfn.hpp"

namespace bootdelta {

enum class SchemeKind { Efron, Bayesian, CircularBlock };

inline const char* to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::Efron: return "efron";
    case SchemeKind::Bayesian: return "bayesian";
    case SchemeKind::CircularBlock: return "circular";
  }
  return "unknown";
}

/// The Bayesian bootstrap draws Y_i from the standard exponential law (mean = sd = 1).
inline constexpr double kBayesianWeightRate = 1.0;

struct BootstrapScheme {
  SchemeKind kind = SchemeKind::Efron;
  /// Block length exponent gamma, block length ceil(n^gamma). CircularBlock only.
  double block_exponent = 0.0;
  /// Fixed block length overriding the exponent rule.
  std::optional<std::size_t> block_length;

  static BootstrapScheme efron() { return {SchemeKind::Efron, 0.0, std::nullopt}; }
  static BootstrapScheme bayesian() { return {SchemeKind::Bayesian, 0.0, std::nullopt}; }
  static BootstrapScheme circular(double gamma) { return {SchemeKind::CircularBlock, gamma, std::nullopt}; }
  static BootstrapScheme circular_fixed(std::size_t ell) { return {SchemeKind::CircularBlock, 0.0, ell}; }

  std::size_t block_length_for(std::size_t n) const {
    if (block_length) return *block_length;
    require(block_exponent > 0.0 && block_exponent < 1.0, "circular bootstrap: block exponent must lie in (0,1)");
    const auto ell = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), block_exponent)));
    return std::max<std::size_t>(ell, 1);
  }
};

/// Bootstrap weights (W_n1, ..., W_nn).
struct WeightVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double sum() const noexcept {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  operator std::span<const double>() const noexcept { return values; }
};

/// Multinomial(n; 1/n, ..., 1/n) counts.
template <class Rng>
WeightVector efron_weights(std::size_t n, Rng& rng) {
  require(n >= 1, "efron_weights: n must be positive");
  WeightVector w{std::vector<double>(n, 0.0)};
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t i = 0; i < n; ++i) w.values[pick(rng)] += 1.0;
  return w;
}

/// W_i = Y_i / mean(Y) with Y_i i.i.d. standard exponential.
template <class Rng>
WeightVector bayesian_weights(std::size_t n, Rng& rng) {
  require(n >= 1, "bayesian_weights: n must be positive");
  std::exponential_distribution<double> expo(kBayesianWeightRate);
  WeightVector w{std::vector<double>(n)};
  double total = 0.0;
  // Y-bar = 0 has probability zero; redraw if it ever happens.
  while (total <= 0.0) {
    total = 0.0;
    for (auto& y : w.values) {
      y = expo(rng);
      total += y;
    }
  }
  const double mean = total / static_cast<double>(n);
  for (auto& y : w.values) y /= mean;
  return w;
}

/**
 * Circular block weights for k = floor(n/ell) blocks with the given 1-based
 * start indices. W_i counts the blocks {I, ..., I+ell-1} (indices taken
 * modulo n, wrapping past n to 1) that contain i.
 */
inline WeightVector circular_block_weights_from_starts(std::size_t n, std::size_t ell,
                                                       std::span<const std::size_t> starts) {
  require(ell >= 1 && ell < n, "circular_block_weights: block length must satisfy 1 <= ell < n");
  require(starts.size() == n / ell, "circular_block_weights: need floor(n/ell) start indices");
  WeightVector w{std::vector<double>(n, 0.0)};
  for (std::size_t start : starts) {
    require(start >= 1 && start <= n, "circular_block_weights: start index outside {1..n}");
    // Indices start..min(start+ell-1, n), then 1..start+ell-1-n when the block wraps.
    const std::size_t end = start + ell - 1;
    for (std::size_t i = start; i <= std::min(end, n); ++i) w.values[i - 1] += 1.0;
    if (end > n)
      for (std::size_t i = 1; i <= end - n; ++i) w.values[i - 1] += 1.0;
  }
  return w;
}

template <class Rng>
WeightVector circular_block_weights(std::size_t n, std::size_t ell, Rng& rng) {
  require(ell >= 1 && ell < n, "circular_block_weights: block length must satisfy 1 <= ell < n");
  std::uniform_int_distribution<std::size_t> pick(1, n);
  std::vector<std::size_t> starts(n / ell);
  for (auto& s : starts) s = pick(rng);
  return circular_block_weights_from_starts(n, ell, starts);
}

template <class Rng>
WeightVector draw_weights(const BootstrapScheme& scheme, std::size_t n, Rng& rng) {
  switch (scheme.kind) {
    case SchemeKind::Efron: return efron_weights(n, rng);
    case SchemeKind::Bayesian: return bayesian_weights(n, rng);
    case SchemeKind::CircularBlock: return circular_block_weights(n, scheme.block_length_for(n), rng);
  }
  fail(ErrorCode::InvalidArgument, "draw_weights: unknown scheme");
}

/// F*_n = (1/n) sum_i W_i 1[X_i, inf). Circular weights may leave total mass below one.
inline StepFunction bootstrap_ecdf(std::span<const double> sample, const WeightVector& w) {
  require(sample.size() == w.size(), "bootstrap_ecdf: sample and weight vector differ in length");
  return weighted_ecdf(sample, w.values);
}

struct CircularParamsDiagnostic {
  double moment_order = 0.0;
  bool mixing_ok = false;
  bool block_ok = false;
  /// One entry per violated condition, e.g. "(b) mixing exponent b=1.5 must exceed p/(p-2)=2".
  std::vector<std::string> violations;

  bool passed() const noexcept { return violations.empty(); }
};

/**
 * Checks the mixing-rate and block-length conditions for the circular block
 * bootstrap under a moment condition of order p: b > p/(p-2) and
 * 0 < gamma < (p-2)/(2(p-1)). Pass b = +inf for geometric mixing.
 * The moment condition itself is checked by moment_check.
 */
inline CircularParamsDiagnostic validate_circular_params(double p, double b, double gamma) {
  if (!(p > 2.0)) fail(ErrorCode::InvalidArgument, "validate_circular_params: moment order p must exceed 2");
  CircularParamsDiagnostic d;
  d.moment_order = p;
  const double b_min = p / (p - 2.0);
  const double gamma_max = (p - 2.0) / (2.0 * (p - 1.0));
  d.mixing_ok = b > b_min;
  d.block_ok = gamma > 0.0 && gamma < gamma_max;
  if (!d.mixing_ok) {
    std::ostringstream os;
    os << "(b) mixing exponent b=" << b << " must exceed p/(p-2)=" << b_min;
    d.violations.push_back(os.str());
  }
  if (!d.block_ok) {
    std::ostringstream os;
    os << "(c) block exponent gamma=" << gamma << " must lie in (0, " << gamma_max << ")";
    d.violations.push_back(os.str());
  }
  return d;
}

}  // namespace bootdelta
