#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "bootdelta/error.hpp"
#include "bootdelta/model_cdf.hpp"
#include "bootdelta/stepfn.hpp"

namespace bootdelta {

/// Finitely many weighted point masses on the line.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  /// Sorts the atoms and merges duplicates; masses must be positive.
  DiscreteMeasure(std::vector<double> atoms, std::vector<double> masses) {
    require(atoms.size() == masses.size(), "DiscreteMeasure: atoms and masses differ in length");
    std::vector<std::size_t> order(atoms.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });
    for (std::size_t idx : order) {
      require(std::isfinite(atoms[idx]), "DiscreteMeasure: atoms must be finite");
      require(masses[idx] > 0.0 && std::isfinite(masses[idx]), "DiscreteMeasure: masses must be positive");
      if (!atoms_.empty() && atoms_.back() == atoms[idx]) {
        masses_.back() += masses[idx];
      } else {
        atoms_.push_back(atoms[idx]);
        masses_.push_back(masses[idx]);
      }
      total_ += masses[idx];
    }
  }

  /// Uniform measure (1/n) sum_i delta_{x_i}.
  static DiscreteMeasure uniform(std::span<const double> sample) {
    require(!sample.empty(), "DiscreteMeasure::uniform: empty sample");
    std::vector<double> atoms(sample.begin(), sample.end());
    std::vector<double> masses(sample.size(), 1.0 / static_cast<double>(sample.size()));
    return DiscreteMeasure(std::move(atoms), std::move(masses));
  }

  static DiscreteMeasure dirac(double x) { return DiscreteMeasure({x}, {1.0}); }

  const std::vector<double>& atoms() const noexcept { return atoms_; }
  const std::vector<double>& masses() const noexcept { return masses_; }
  double total() const noexcept { return total_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  bool empty() const noexcept { return atoms_.empty(); }

 private:
  std::vector<double> atoms_;
  std::vector<double> masses_;
  double total_ = 0.0;
};

namespace detail {

// Merged support x_1 < ... < x_J of two measures with the signed mass
// differences mu_j - nu_j (zero entries kept where both share an atom with
// equal mass).
struct SignedChain {
  std::vector<double> x;
  std::vector<double> d;
};

inline SignedChain merge_signed(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  SignedChain c;
  c.x.reserve(mu.size() + nu.size());
  c.d.reserve(mu.size() + nu.size());
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < mu.size() || j < nu.size()) {
    const double xi = i < mu.size() ? mu.atoms()[i] : std::numeric_limits<double>::infinity();
    const double xj = j < nu.size() ? nu.atoms()[j] : std::numeric_limits<double>::infinity();
    if (xi < xj) {
      c.x.push_back(xi);
      c.d.push_back(mu.masses()[i++]);
    } else if (xj < xi) {
      c.x.push_back(xj);
      c.d.push_back(-nu.masses()[j++]);
    } else {
      c.x.push_back(xi);
      c.d.push_back(mu.masses()[i++] - nu.masses()[j++]);
    }
  }
  return c;
}

inline void check_probability(const DiscreteMeasure& m, const char* who) {
  if (m.empty()) fail(ErrorCode::InvalidArgument, std::string(who) + ": empty measure");
  if (std::abs(m.total() - 1.0) > 1e-9)
    fail(ErrorCode::InvalidArgument, std::string(who) + ": only probability measures are supported");
}

}  // namespace detail

/**
 * Exact bounded Lipschitz distance
 *   sup { |int f dmu - int f dnu| : |f| <= 1, |f(s) - f(t)| <= |s - t| }
 * between two discrete probability measures on the line.
 *
 * Only the values f_j = f(x_j) on the merged support matter, giving the LP
 *   maximize sum_j f_j d_j  s.t.  -1 <= f_j <= 1,  |f_{j+1} - f_j| <= x_{j+1} - x_j.
 * The consecutive constraints suffice: for i < k,
 *   |f_k - f_i| <= sum_{j=i}^{k-1} |f_{j+1} - f_j| <= sum (x_{j+1} - x_j) = x_k - x_i,
 * and any feasible (f_j) extends to all of R by linear interpolation and
 * constant continuation, which stays 1-Lipschitz and bounded by 1.
 *
 * The chain LP is solved by dynamic programming over the concave value
 * function V_j(f) = d_j f + max_{|f'-f| <= gap} V_{j-1}(f') on [-1,1], kept
 * as its argmax a, the slopes next to a and two heaps of breakpoints with
 * lazy shifts ("slope trick"). The window maximum only shifts the two heaps
 * apart and adding d_j f moves a across breakpoints, so a solve costs
 * O(J log J) in practice.
 */
inline double bl_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  detail::check_probability(mu, "bl_distance");
  detail::check_probability(nu, "bl_distance");
  const detail::SignedChain chain = detail::merge_signed(mu, nu);

  struct Breakpoint {
    double raw;
    double weight;
  };
  auto left_order = [](const Breakpoint& p, const Breakpoint& q) { return p.raw < q.raw; };
  auto right_order = [](const Breakpoint& p, const Breakpoint& q) { return p.raw > q.raw; };
  // Left heap: breakpoints left of a, nearest on top; slope grows by weight crossing leftwards.
  std::priority_queue<Breakpoint, std::vector<Breakpoint>, decltype(left_order)> left(left_order);
  // Right heap: breakpoints right of a, nearest on top; slope drops by weight crossing rightwards.
  std::priority_queue<Breakpoint, std::vector<Breakpoint>, decltype(right_order)> right(right_order);
  double left_shift = 0.0;
  double right_shift = 0.0;

  double a = 0.0;
  double value = 0.0;
  double slope_left = 0.0;
  double slope_right = 0.0;

  for (std::size_t j = 0; j < chain.x.size(); ++j) {
    if (j > 0) {
      const double gap = chain.x[j] - chain.x[j - 1];
      if (a > -1.0 && slope_left > 0.0) left.push({a - left_shift, slope_left});
      if (a < 1.0 && slope_right < 0.0) right.push({a - right_shift, -slope_right});
      left_shift -= gap;
      right_shift += gap;
      slope_left = 0.0;
      slope_right = 0.0;
    }
    const double dj = chain.d[j];
    value += dj * a;
    slope_left += dj;
    slope_right += dj;

    while (slope_right > 0.0 && a < 1.0) {
      const bool has_next = !right.empty() && right.top().raw + right_shift < 1.0;
      const double next = has_next ? right.top().raw + right_shift : 1.0;
      value += slope_right * (next - a);
      if (slope_left > slope_right) left.push({a - left_shift, slope_left - slope_right});
      a = next;
      slope_left = slope_right;
      if (has_next) {
        slope_right -= right.top().weight;
        right.pop();
      }
    }
    while (slope_left < 0.0 && a > -1.0) {
      const bool has_next = !left.empty() && left.top().raw + left_shift > -1.0;
      const double next = has_next ? left.top().raw + left_shift : -1.0;
      value += slope_left * (next - a);
      if (slope_left > slope_right) right.push({a - right_shift, slope_left - slope_right});
      a = next;
      slope_right = slope_left;
      if (has_next) {
        slope_left += left.top().weight;
        left.pop();
      }
    }
  }
  return std::clamp(value, 0.0, 2.0);
}

/**
 * Lattice search for the same LP: the best f with f_j on {-1, -1+h, ..., 1}
 * and consecutive index steps within floor(gap/h). Exhaustive over the
 * lattice (dense DP over all lattice states), so it is a lower bound of the
 * LP value that converges as h -> 0. Merged support limited to 8 points.
 */
inline double bl_distance_bruteforce(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double lattice_step) {
  detail::check_probability(mu, "bl_distance_bruteforce");
  detail::check_probability(nu, "bl_distance_bruteforce");
  require(lattice_step > 0.0 && lattice_step <= 1.0, "bl_distance_bruteforce: lattice step must lie in (0,1]");
  const detail::SignedChain chain = detail::merge_signed(mu, nu);
  require(chain.x.size() <= 8, "bl_distance_bruteforce: merged support larger than 8 points");

  const auto steps = static_cast<long>(std::floor(2.0 / lattice_step + 1e-9));
  std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
  for (long k = 0; k <= steps; ++k) grid[static_cast<std::size_t>(k)] = -1.0 + static_cast<double>(k) * lattice_step;

  std::vector<double> best(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) best[k] = chain.d[0] * grid[k];
  for (std::size_t j = 1; j < chain.x.size(); ++j) {
    const auto reach = static_cast<long>(std::floor((chain.x[j] - chain.x[j - 1]) / lattice_step + 1e-12));
    std::vector<double> next(grid.size(), -std::numeric_limits<double>::infinity());
    for (long k = 0; k <= steps; ++k) {
      double m = -std::numeric_limits<double>::infinity();
      for (long q = std::max(0L, k - reach); q <= std::min(steps, k + reach); ++q)
        m = std::max(m, best[static_cast<std::size_t>(q)]);
      next[static_cast<std::size_t>(k)] = m + chain.d[j] * grid[static_cast<std::size_t>(k)];
    }
    best.swap(next);
  }
  return std::abs(*std::max_element(best.begin(), best.end()));
}

/// (1/2) sum_j |mu_j - nu_j| over the merged support.
inline double total_variation(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const detail::SignedChain chain = detail::merge_signed(mu, nu);
  double s = 0.0;
  for (double d : chain.d) s += std::abs(d);
  return 0.5 * s;
}

struct WeightedKS {
  double value = 0.0;
  /// Bound on how far the true supremum can exceed value between evaluation points.
  double mesh_bound = 0.0;
};

/// ||(Fhat - G) phi||_inf for two step functions (exact).
inline WeightedKS weighted_ks(const StepFunction& Fhat, const StepFunction& G, const WeightFunction& phi) {
  return {weighted_sup_norm(linear_combine(1.0, Fhat, -1.0, G), phi), 0.0};
}

/**
 * ||(Fhat - F) phi||_inf against a continuous model, evaluated at the knots
 * of Fhat (value and left limit) and at the refinement points.
 *
 * For phi = 1 this is exact because F is monotone on each constant piece of
 * Fhat. For a growing weight the value is a lower bound and mesh_bound
 * reports phi_max * (F(v) - F(u)) + |diff| * (phi_max - phi_min) maximized
 * over cells [u, v] between evaluation points; tails beyond the extreme
 * quantile refinement (probability 1e-12) are not included.
 */
inline WeightedKS weighted_ks(const StepFunction& Fhat, const ModelCDF& F, const WeightFunction& phi,
                              std::span<const double> refinement = {}) {
  const bool flat = phi.exponent == 0.0;
  WeightedKS r;
  const auto& k = Fhat.knots();
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double Ft = F.cdf(k[i]);
    const double w = phi(k[i]);
    r.value = std::max(r.value, std::abs(Fhat.levels()[i] - Ft) * w);
    r.value = std::max(r.value, std::abs(Fhat.left_limit(k[i]) - Ft) * w);
  }
  if (flat) {
    // Limits at -inf and +inf.
    r.value = std::max(r.value, std::abs(Fhat.base_level()));
    r.value = std::max(r.value, std::abs(Fhat.final_level() - 1.0));
    for (double t : refinement) r.value = std::max(r.value, std::abs(Fhat(t) - F.cdf(t)));
    return r;
  }

  std::vector<double> pts(k.begin(), k.end());
  pts.insert(pts.end(), refinement.begin(), refinement.end());
  if (!F.bounded_support()) {
    for (double p = 1e-3; p >= 1e-12; p *= 0.1) {
      pts.push_back(F.quantile(p));
      pts.push_back(F.quantile(1.0 - p));
    }
  } else {
    pts.push_back(F.lower_support());
    pts.push_back(F.upper_support());
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double t = pts[i];
    const double diff = std::abs(Fhat(t) - F.cdf(t));
    r.value = std::max(r.value, diff * phi(t));
    if (i + 1 < pts.size()) {
      const double u = t;
      const double v = pts[i + 1];
      const double level = Fhat(u);  // constant on [u, v)
      const double phi_max = std::max(phi(u), phi(v));
      const double phi_min = (u <= 0.0 && v >= 0.0) ? 1.0 : std::min(phi(u), phi(v));
      const double worst = std::max(std::abs(level - F.cdf(u)), std::abs(level - F.cdf(v)));
      const double bound = phi_max * (F.cdf(v) - F.cdf(u)) + worst * (phi_max - phi_min);
      r.mesh_bound = std::max(r.mesh_bound, bound);
    }
  }
  return r;
}

/// sup |F_a - F_b| between the empirical distribution functions of two samples.
inline double two_sample_ks(std::span<const double> a, std::span<const double> b) {
  return ks_distance(ecdf(a), ecdf(b));
}

/**
 * Asymptotic Kolmogorov critical value c(level) / sqrt(n_eff), with
 * n_eff = n for one sample and n m / (n + m) for two samples.
 */
inline double ks_critical_value(double level, double n_eff) {
  require(level > 0.0 && level < 1.0 && n_eff > 0.0, "ks_critical_value: invalid arguments");
  return std::sqrt(-0.5 * std::log(level / 2.0)) / std::sqrt(n_eff);
}

}  // namespace bootdelta
