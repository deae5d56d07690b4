#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "bootdelta/error.hpp"

namespace bootdelta {

/**
 * Right-continuous piecewise-constant function on the real line.
 *
 * The value is base_level on (-inf, knots[0]) and levels[i] on
 * [knots[i], knots[i+1]), with the last level extending to +inf. Empirical
 * distribution functions, their bootstrap versions and scaled differences of
 * those are all represented exactly by this type.
 */
class StepFunction {
 public:
  StepFunction() = default;

  StepFunction(std::vector<double> knots, std::vector<double> levels, double base_level = 0.0)
      : knots_(std::move(knots)), levels_(std::move(levels)), base_(base_level) {
    require(knots_.size() == levels_.size(), "StepFunction: knots and levels differ in length");
    require(std::isfinite(base_), "StepFunction: base level must be finite");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
      require(std::isfinite(knots_[i]) && std::isfinite(levels_[i]),
              "StepFunction: knots and levels must be finite");
      require(i == 0 || knots_[i - 1] < knots_[i], "StepFunction: knots must be strictly increasing");
    }
  }

  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<double>& levels() const noexcept { return levels_; }
  double base_level() const noexcept { return base_; }
  std::size_t size() const noexcept { return knots_.size(); }
  bool empty() const noexcept { return knots_.empty(); }

  /// Value on [knots.back(), inf).
  double final_level() const noexcept { return knots_.empty() ? base_ : levels_.back(); }

  double operator()(double t) const noexcept {
    // First knot strictly greater than t; the piece containing t starts one before it.
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.begin()) return base_;
    return levels_[static_cast<std::size_t>(it - knots_.begin()) - 1];
  }

  /// Value approached from the left at t.
  double left_limit(double t) const noexcept {
    auto it = std::lower_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.begin()) return base_;
    return levels_[static_cast<std::size_t>(it - knots_.begin()) - 1];
  }

  bool operator==(const StepFunction&) const = default;

 private:
  std::vector<double> knots_;
  std::vector<double> levels_;
  double base_ = 0.0;
};

inline double eval(const StepFunction& f, double t) noexcept { return f(t); }

/// Weight (1 + |t|)^lambda of the nonuniform sup-norm.
struct WeightFunction {
  double exponent = 0.0;

  explicit WeightFunction(double lambda = 0.0) : exponent(lambda) {
    require(lambda >= 0.0 && std::isfinite(lambda), "WeightFunction: exponent must be finite and >= 0");
  }

  double operator()(double t) const noexcept {
    if (exponent == 0.0) return 1.0;
    return std::pow(1.0 + std::abs(t), exponent);
  }
};

namespace detail {

// Builds a step function from (knot, level) pairs, dropping knots where the
// level does not change.
inline StepFunction pruned(const std::vector<double>& knots, const std::vector<double>& levels,
                           double base) {
  std::vector<double> k;
  std::vector<double> l;
  k.reserve(knots.size());
  l.reserve(levels.size());
  double previous = base;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (levels[i] == previous) continue;
    k.push_back(knots[i]);
    l.push_back(levels[i]);
    previous = levels[i];
  }
  return StepFunction(std::move(k), std::move(l), base);
}

}  // namespace detail

/**
 * Step function (1/n) * sum_i w_i 1[x_i, inf) for a sample already sorted in
 * non-decreasing order.
 *
 * Atoms with zero weight leave no knot. Cumulative weights are summed before
 * the division by n, so integer weights give levels that are exact multiples
 * of 1/n.
 */
inline StepFunction weighted_ecdf_sorted(std::span<const double> sorted, std::span<const double> weights) {
  require(sorted.size() == weights.size(), "weighted_ecdf: sample and weights differ in length");
  const std::size_t n = sorted.size();
  if (n == 0) return {};
  std::vector<double> knots;
  std::vector<double> cumulative;
  knots.reserve(n);
  cumulative.reserve(n);
  double running = 0.0;
  for (std::size_t pos = 0; pos < n;) {
    const double x = sorted[pos];
    require(std::isfinite(x), "weighted_ecdf: sample values must be finite");
    require(pos == 0 || sorted[pos - 1] <= x, "weighted_ecdf_sorted: sample is not sorted");
    for (; pos < n && sorted[pos] == x; ++pos) {
      const double w = weights[pos];
      require(w >= 0.0 && std::isfinite(w), "weighted_ecdf: weights must be finite and nonnegative");
      running += w;
    }
    knots.push_back(x);
    cumulative.push_back(running);
  }
  const double dn = static_cast<double>(n);
  for (auto& c : cumulative) c /= dn;
  return detail::pruned(knots, cumulative, 0.0);
}

/// Step function (1/n) * sum_i w_i 1[x_i, inf) for an unsorted sample.
inline StepFunction weighted_ecdf(std::span<const double> sample, std::span<const double> weights) {
  require(sample.size() == weights.size(), "weighted_ecdf: sample and weights differ in length");
  const std::size_t n = sample.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sample[a] < sample[b]; });
  std::vector<double> x(n);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = sample[order[i]];
    w[i] = weights[order[i]];
  }
  return weighted_ecdf_sorted(x, w);
}

/// Empirical distribution function of a sample.
inline StepFunction ecdf(std::span<const double> sample) {
  std::vector<double> ones(sample.size(), 1.0);
  return weighted_ecdf(sample, ones);
}

/**
 * Exact representation of a*f + b*g on the merged knot set.
 *
 * Knots whose jump cancels are pruned, so 1*f + (-1)*f is the empty zero
 * function.
 */
inline StepFunction linear_combine(double a, const StepFunction& f, double b, const StepFunction& g) {
  std::vector<double> merged;
  merged.reserve(f.size() + g.size());
  std::merge(f.knots().begin(), f.knots().end(), g.knots().begin(), g.knots().end(),
             std::back_inserter(merged));
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());

  std::vector<double> levels(merged.size());
  // Two-pointer walk instead of a binary search per knot.
  std::size_t i = 0;
  std::size_t j = 0;
  double fv = f.base_level();
  double gv = g.base_level();
  for (std::size_t k = 0; k < merged.size(); ++k) {
    const double t = merged[k];
    if (i < f.size() && f.knots()[i] == t) fv = f.levels()[i++];
    if (j < g.size() && g.knots()[j] == t) gv = g.levels()[j++];
    levels[k] = a * fv + b * gv;
  }
  return detail::pruned(merged, levels, a * f.base_level() + b * g.base_level());
}

/**
 * Exact sup_t |x(t)| * phi(t).
 *
 * phi is minimal at 0 and monotone on each half-line, so on a bounded piece
 * [u, v) the supremum of phi is max(phi(u), phi(v)). Unbounded pieces with a
 * nonzero level give +infinity when the exponent is positive; callers test
 * the result with std::isinf.
 */
inline double weighted_sup_norm(const StepFunction& x, const WeightFunction& phi) {
  const bool flat_weight = phi.exponent == 0.0;
  auto unbounded_piece = [&](double level) {
    if (level == 0.0) return 0.0;
    return flat_weight ? std::abs(level) : std::numeric_limits<double>::infinity();
  };

  double sup = unbounded_piece(x.base_level());
  if (x.empty()) return sup;
  sup = std::max(sup, unbounded_piece(x.final_level()));
  const auto& k = x.knots();
  const auto& l = x.levels();
  for (std::size_t i = 0; i + 1 < k.size(); ++i) {
    if (l[i] == 0.0) continue;
    sup = std::max(sup, std::abs(l[i]) * std::max(phi(k[i]), phi(k[i + 1])));
  }
  return sup;
}

/// Uniform distance sup_t |f(t) - g(t)|.
inline double ks_distance(const StepFunction& f, const StepFunction& g) {
  return weighted_sup_norm(linear_combine(1.0, f, -1.0, g), WeightFunction(0.0));
}

}  // namespace bootdelta
