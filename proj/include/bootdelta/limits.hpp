#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bootdelta/error.hpp"
#include "bootdelta/functionals.hpp"
#include "bootdelta/model_cdf.hpp"
#include "bootdelta/quadrature.hpp"
#include "bootdelta/stepfn.hpp"

namespace bootdelta {

/// Covariance kernel Gamma(s, t) of a centered Gaussian process on the line.
using CovarianceKernel = std::function<double(double, double)>;

/**
 * Centered Gaussian vector (xi(t_1), ..., xi(t_m)) with covariance
 * Gamma(t_i, t_j).
 *
 * The square root is taken once at construction from a pivoted LDL^T
 * decomposition, so semidefinite matrices (a zero row where F is 0 or 1, or
 * the zero matrix) factor without perturbation. If negative pivots appear,
 * diagonal jitter 1e-12, 1e-11, ..., 1e-6 is added until they vanish; the
 * jitter used is recorded. Beyond 1e-6 the object is ill-conditioned and
 * sample_path throws.
 */
class GridGaussian {
 public:
  GridGaussian(std::vector<double> grid, Eigen::MatrixXd cov) : grid_(std::move(grid)), cov_(std::move(cov)) {
    require(static_cast<Eigen::Index>(grid_.size()) == cov_.rows() && cov_.rows() == cov_.cols(),
            "GridGaussian: covariance must be m x m for a grid of size m");
    for (std::size_t i = 1; i < grid_.size(); ++i)
      require(grid_[i - 1] < grid_[i], "GridGaussian: grid must be strictly increasing");
    factorize();
  }

  const std::vector<double>& grid() const noexcept { return grid_; }
  const Eigen::MatrixXd& covariance() const noexcept { return cov_; }
  /// Square root S with S S^T = cov + jitter * I.
  const Eigen::MatrixXd& factor() const noexcept { return factor_; }
  double jitter() const noexcept { return jitter_; }
  bool factorized() const noexcept { return ok_; }
  std::size_t size() const noexcept { return grid_.size(); }

  /// Truncation diagnostics for series covariances (zero otherwise).
  double truncation_remainder = 0.0;
  std::size_t truncation_lags_used = 0;

 private:
  void factorize() {
    const auto m = cov_.rows();
    if (m == 0) {
      ok_ = true;
      return;
    }
    double jitter = 0.0;
    const double scale = std::max(1.0, cov_.diagonal().cwiseAbs().maxCoeff());
    while (true) {
      Eigen::MatrixXd a = cov_;
      a.diagonal().array() += jitter;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
      Eigen::VectorXd d = ldlt.vectorD();
      const double floor = -1e-14 * scale;
      if (ldlt.info() == Eigen::Success && d.minCoeff() >= floor) {
        d = d.cwiseMax(0.0);
        Eigen::MatrixXd l = ldlt.matrixL();
        Eigen::MatrixXd root = l * d.cwiseSqrt().asDiagonal();
        // A = P^T L D L^T P, so S = P^T L D^{1/2}.
        factor_ = ldlt.transpositionsP().transpose() * root;
        jitter_ = jitter;
        ok_ = true;
        return;
      }
      jitter = jitter == 0.0 ? 1e-12 : jitter * 10.0;
      if (jitter > 1e-6 * (1.0 + 1e-9)) {
        ok_ = false;
        return;
      }
    }
  }

  std::vector<double> grid_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd factor_;
  double jitter_ = 0.0;
  bool ok_ = false;
};

/// F-quantiles of the equispaced probabilities i/(m+1), i = 1..m.
inline std::vector<double> quantile_grid(const ModelCDF& F, std::size_t m) {
  require(m >= 1, "quantile_grid: need at least one point");
  std::vector<double> grid(m);
  for (std::size_t i = 0; i < m; ++i)
    grid[i] = F.quantile(static_cast<double>(i + 1) / static_cast<double>(m + 1));
  return grid;
}

/// Gamma(s, t) = F(s ^ t) (1 - F(s v t)) of the F-Brownian bridge.
inline CovarianceKernel bridge_kernel(const ModelCDF& F) {
  return [F](double s, double t) { return F.cdf(std::min(s, t)) * F.survival(std::max(s, t)); };
}

inline GridGaussian brownian_bridge_cov(const ModelCDF& F, std::span<const double> grid) {
  const auto m = static_cast<Eigen::Index>(grid.size());
  std::vector<double> cdf(grid.size());
  std::vector<double> sf(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    cdf[i] = F.cdf(grid[i]);
    sf[i] = F.survival(grid[i]);
  }
  Eigen::MatrixXd cov(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i; j < m; ++j) {
      // grid is increasing, so min is i and max is j.
      cov(i, j) = cdf[static_cast<std::size_t>(i)] * sf[static_cast<std::size_t>(j)];
      cov(j, i) = cov(i, j);
    }
  return GridGaussian(std::vector<double>(grid.begin(), grid.end()), std::move(cov));
}

/**
 * Phi_2(h, k; r) - Phi(h) Phi(k) for standard bivariate normal with
 * correlation r, via the arcsine representation
 *   (1 / 2 pi) int_0^{asin r} exp(-(h^2 + k^2 - 2 h k sin u) / (2 cos^2 u)) du.
 * Computing the difference directly avoids cancellation for small r.
 */
inline double bivariate_normal_excess(double h, double k, double r) {
  if (r == 0.0 || std::isinf(h) || std::isinf(k)) return 0.0;
  require(r >= -1.0 && r <= 1.0, "bivariate_normal_excess: correlation outside [-1,1]");
  const double top = std::asin(r);
  // u = top * v maps the range onto [0, 1]; the adaptive rule stalls on very short intervals.
  auto f = [&](double v) {
    const double u = top * v;
    const double c = std::cos(u);
    if (c <= 0.0) return 0.0;
    return std::exp(-(h * h + k * k - 2.0 * h * k * std::sin(u)) / (2.0 * c * c));
  };
  return top * integrate(f, 0.0, 1.0, 1e-12).value / (2.0 * std::numbers::pi);
}

/// Standard bivariate normal CDF P(Z1 <= h, Z2 <= k).
inline double bivariate_normal_cdf(double h, double k, double r) {
  const ModelCDF std_normal = ModelCDF::normal();
  if (h == -std::numeric_limits<double>::infinity() || k == -std::numeric_limits<double>::infinity()) return 0.0;
  return std_normal.cdf(h) * std_normal.cdf(k) + bivariate_normal_excess(h, k, r);
}

/// |rho|^K / (2 (1 - |rho|)): bound on the lag terms k > K of the AR(1) series.
inline double ar1_truncation_bound(double rho, std::size_t lags) {
  return std::pow(std::abs(rho), static_cast<double>(lags)) / (2.0 * (1.0 - std::abs(rho)));
}

namespace detail {

// Series part sum_{k=2}^{K} 2 cov(1{X_1 <= s}, 1{X_k <= t}) for standardized levels.
// Terms stop once their bound drops below 1e-18, which is below double resolution.
inline double ar1_lag_sum(double zs, double zt, double rho, std::size_t max_lag, std::size_t* used = nullptr) {
  double sum = 0.0;
  double r = rho;
  std::size_t k = 2;
  for (; k <= max_lag; ++k, r *= rho) {
    if (std::abs(r) < 1e-18) break;
    // Gaussian pairs are exchangeable, so both orderings contribute the same term.
    sum += 2.0 * bivariate_normal_excess(zs, zt, r);
  }
  if (used) *used = k - 1;
  return sum;
}

}  // namespace detail

/**
 * Long-run covariance of the indicator process of a stationary Gaussian
 * AR(1) with unit innovations: the Normal(0, 1/(1 - rho^2)) bridge term plus
 * sum_{k=2}^{K} [cov(1{X_1 <= s}, 1{X_k <= t}) + cov(1{X_1 <= t}, 1{X_k <= s})],
 * with corr(X_1, X_k) = rho^(k-1).
 */
inline GridGaussian longrun_cov_ar1(double rho, std::span<const double> grid, std::size_t max_lag = 200) {
  require(rho > -1.0 && rho < 1.0, "longrun_cov_ar1: |rho| must be below 1");
  require(max_lag >= 1, "longrun_cov_ar1: max lag must be at least 1");
  const double sd = 1.0 / std::sqrt(1.0 - rho * rho);
  const ModelCDF marginal = ModelCDF::normal(0.0, sd);
  GridGaussian bridge = brownian_bridge_cov(marginal, grid);
  Eigen::MatrixXd cov = bridge.covariance();
  const auto m = cov.rows();
  std::size_t used = 1;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i; j < m; ++j) {
      std::size_t u = 1;
      const double extra = detail::ar1_lag_sum(grid[static_cast<std::size_t>(i)] / sd,
                                               grid[static_cast<std::size_t>(j)] / sd, rho, max_lag, &u);
      used = std::max(used, u);
      cov(i, j) += extra;
      cov(j, i) = cov(i, j);
    }
  GridGaussian g(std::vector<double>(grid.begin(), grid.end()), std::move(cov));
  g.truncation_lags_used = used;
  g.truncation_remainder = ar1_truncation_bound(rho, used);
  return g;
}

/// Pointwise long-run kernel for the AR(1) model, for use in quadrature.
inline CovarianceKernel longrun_kernel_ar1(double rho, std::size_t max_lag = 200) {
  const double sd = 1.0 / std::sqrt(1.0 - rho * rho);
  const ModelCDF marginal = ModelCDF::normal(0.0, sd);
  return [=](double s, double t) {
    return marginal.cdf(std::min(s, t)) * marginal.survival(std::max(s, t)) +
           detail::ar1_lag_sum(s / sd, t / sd, rho, max_lag);
  };
}

/// One path factor * z with z i.i.d. standard normal.
template <class Rng>
std::vector<double> sample_path(const GridGaussian& gg, Rng& rng) {
  if (!gg.factorized()) fail(ErrorCode::IllConditioned, "sample_path: covariance could not be factorized");
  const auto m = static_cast<Eigen::Index>(gg.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(m);
  for (Eigen::Index i = 0; i < m; ++i) z(i) = normal(rng);
  const Eigen::VectorXd path = gg.factor() * z;
  return std::vector<double>(path.data(), path.data() + m);
}

/**
 * Weights w_i with sum_i w_i xi(t_i) approximating int g'(F(t)) xi(t) dt:
 * each grid value is held on the cell between the midpoints to its
 * neighbours (end cells mirror the inner half-width), and w_i is the exact
 * derivative applied to that cell's indicator.
 */
inline std::vector<double> grid_derivative_weights(const DistortionFunction& g, const ModelCDF& F,
                                                   std::span<const double> grid) {
  const std::size_t m = grid.size();
  require(m >= 2, "grid_derivative_weights: need at least two grid points");
  std::vector<double> edges(m + 1);
  for (std::size_t i = 1; i < m; ++i) edges[i] = 0.5 * (grid[i - 1] + grid[i]);
  edges[0] = grid[0] - (edges[1] - grid[0]);
  edges[m] = grid[m - 1] + (grid[m - 1] - edges[m - 1]);
  std::vector<double> w(m);
  for (std::size_t i = 0; i < m; ++i) {
    const StepFunction cell({edges[i], edges[i + 1]}, {1.0, 0.0});
    w[i] = distortion_derivative(g, F, cell);
  }
  return w;
}

/**
 * Var(int g'(F(s)) xi(s) ds) = int int g'(F(s)) g'(F(t)) Gamma(s, t) ds dt by
 * nested adaptive Gauss-Kronrod on [q(1e-10), q(1 - 1e-10)] (or the support
 * of F), split at the diagonal and at the kinks of g. The domain stops at the
 * saturation point of g, beyond which g' vanishes.
 */
inline double limit_variance_distortion(const DistortionFunction& g, const ModelCDF& F, const CovarianceKernel& gamma) {
  constexpr double kTailProb = 1e-10;
  const double lo = F.bounded_support() ? F.lower_support() : F.quantile(kTailProb);
  double hi = F.bounded_support() ? F.upper_support() : F.quantile(1.0 - kTailProb);
  if (g.saturation() < 1.0) hi = std::min(hi, F.quantile(g.saturation()));
  std::vector<double> kinks;
  for (double s : g.kinks()) kinks.push_back(F.quantile(s));

  auto inner = [&](double s) {
    const double ws = g.right_derivative(F.cdf(s));
    if (ws == 0.0) return 0.0;
    std::vector<double> splits = kinks;
    splits.push_back(s);
    auto f = [&](double t) { return g.right_derivative(F.cdf(t)) * gamma(s, t); };
    return ws * integrate_split(f, lo, hi, splits, 1e-10).value;
  };
  const Integral outer = integrate_split(inner, lo, hi, kinks, 1e-9);
  if (!std::isfinite(outer.value) || outer.error > 1e-6)
    fail(ErrorCode::Divergent, "limit_variance_distortion: quadrature did not converge");
  return outer.value;
}

}  // namespace bootdelta
