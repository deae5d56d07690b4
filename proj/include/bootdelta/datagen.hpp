#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "bootdelta/error.hpp"
#include "bootdelta/model_cdf.hpp"
#include "bootdelta/quadrature.hpp"
#include "bootdelta/rng.hpp"
#include "bootdelta/stepfn.hpp"

namespace bootdelta {

struct IidModel {
  ModelCDF dist;
};

/// X_t = rho X_{t-1} + eps_t with standard normal innovations.
struct Ar1Model {
  double rho = 0.0;
};

/// X_t = sigma_t z_t, sigma_t^2 = omega + alpha X_{t-1}^2 + beta sigma_{t-1}^2.
struct Garch11Model {
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

using DataModel = std::variant<IidModel, Ar1Model, Garch11Model>;

/// Steps discarded before a GARCH(1,1) path is recorded.
inline constexpr std::size_t kGarchBurnIn = 1000;

inline void validate_model(const DataModel& model) {
  if (const auto* ar = std::get_if<Ar1Model>(&model))
    require(std::abs(ar->rho) < 1.0, "AR(1): |rho| must be below 1 for stationarity");
  if (const auto* g = std::get_if<Garch11Model>(&model)) {
    require(g->omega > 0.0, "GARCH(1,1): omega must be positive");
    require(g->alpha >= 0.0 && g->beta >= 0.0, "GARCH(1,1): alpha and beta must be nonnegative");
    require(g->alpha + g->beta < 1.0, "GARCH(1,1): alpha + beta must be below 1");
  }
}

inline std::string model_name(const DataModel& model) {
  std::ostringstream os;
  os.precision(17);
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, IidModel>) os << "iid " << m.dist.name();
        if constexpr (std::is_same_v<T, Ar1Model>) os << "ar1(" << m.rho << ")";
        if constexpr (std::is_same_v<T, Garch11Model>) os << "garch11(" << m.omega << "," << m.alpha << "," << m.beta << ")";
      },
      model);
  return os.str();
}

template <class Rng>
double draw_from(const ModelCDF& F, Rng& rng) {
  switch (F.kind()) {
    case ModelCDF::Kind::Normal: return std::normal_distribution<double>(F.param1(), F.param2())(rng);
    case ModelCDF::Kind::Uniform: return std::uniform_real_distribution<double>(F.param1(), F.param2())(rng);
    case ModelCDF::Kind::StudentT: return std::student_t_distribution<double>(F.param1())(rng);
  }
  return 0.0;
}

/**
 * n consecutive observations of a stationary model.
 *
 * AR(1) paths start from the stationary law N(0, 1/(1 - rho^2)), so every
 * X_t has that marginal and no burn-in is needed. GARCH(1,1) starts at the
 * unconditional variance and discards kGarchBurnIn steps.
 */
template <class Rng>
std::vector<double> sample(const DataModel& model, std::size_t n, Rng& rng) {
  require(n >= 1, "sample: n must be positive");
  validate_model(model);
  std::vector<double> x(n);
  if (const auto* iid = std::get_if<IidModel>(&model)) {
    for (auto& v : x) v = draw_from(iid->dist, rng);
  } else if (const auto* ar = std::get_if<Ar1Model>(&model)) {
    std::normal_distribution<double> eps(0.0, 1.0);
    x[0] = eps(rng) / std::sqrt(1.0 - ar->rho * ar->rho);
    for (std::size_t t = 1; t < n; ++t) x[t] = ar->rho * x[t - 1] + eps(rng);
  } else {
    const auto& g = std::get<Garch11Model>(model);
    std::normal_distribution<double> z(0.0, 1.0);
    double sigma2 = g.omega / (1.0 - g.alpha - g.beta);
    double previous = 0.0;
    for (std::size_t t = 0; t < kGarchBurnIn + n; ++t) {
      sigma2 = g.omega + g.alpha * previous * previous + g.beta * sigma2;
      previous = std::sqrt(sigma2) * z(rng);
      if (t >= kGarchBurnIn) x[t - kGarchBurnIn] = previous;
    }
  }
  return x;
}

/// Marginal distribution when known in closed form; nullopt for GARCH(1,1).
inline std::optional<ModelCDF> true_cdf(const DataModel& model) {
  if (const auto* iid = std::get_if<IidModel>(&model)) return iid->dist;
  if (const auto* ar = std::get_if<Ar1Model>(&model)) {
    require(std::abs(ar->rho) < 1.0, "AR(1): |rho| must be below 1 for stationarity");
    return ModelCDF::normal(0.0, 1.0 / std::sqrt(1.0 - ar->rho * ar->rho));
  }
  return std::nullopt;
}

struct MomentReport {
  bool finite = false;
  /// int phi^p dF, +inf when infinite.
  double value = std::numeric_limits<double>::infinity();
  double weight_tail_exponent = 0.0;
  double distribution_tail_exponent = 0.0;
  /// Set when the model has no closed-form marginal and an empirical moment is reported instead.
  bool heuristic = false;
  std::size_t empirical_sample_size = 0;
};

/**
 * Finiteness of int phi^p dF with phi = (1 + |t|)^lambda.
 *
 * The verdict compares lambda * p with the tail exponent of F (infinite for
 * Normal and Uniform, nu for Student t); finite values are then integrated
 * to relative tolerance 1e-8. Models without a closed-form marginal get an
 * empirical moment over a long seeded path, flagged heuristic.
 */
inline MomentReport moment_check(const DataModel& model, const WeightFunction& phi, double p,
                                 std::uint64_t seed = 0, std::size_t empirical_size = 200000) {
  require(p > 0.0, "moment_check: p must be positive");
  MomentReport r;
  r.weight_tail_exponent = phi.exponent * p;
  const auto F = true_cdf(model);
  if (!F) {
    Engine rng = make_stream(seed, StreamTag::Surrogate);
    const std::vector<double> x = sample(model, empirical_size, rng);
    double s = 0.0;
    for (double v : x) s += std::pow(phi(v), p);
    r.value = s / static_cast<double>(x.size());
    r.finite = std::isfinite(r.value);
    r.heuristic = true;
    r.empirical_sample_size = empirical_size;
    r.distribution_tail_exponent = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.distribution_tail_exponent = F->tail_exponent();
  r.finite = r.weight_tail_exponent < r.distribution_tail_exponent;
  if (!r.finite) return r;
  const double power = r.weight_tail_exponent;
  auto integrand = [&](double t) { return std::pow(1.0 + std::abs(t), power) * F->density(t); };
  if (F->bounded_support()) {
    r.value = integrate_split(integrand, F->lower_support(), F->upper_support(), {0.0}, 1e-10).value;
  } else {
    const double inf = std::numeric_limits<double>::infinity();
    r.value = integrate(integrand, -inf, 0.0, 1e-10).value + integrate(integrand, 0.0, inf, 1e-10).value;
  }
  return r;
}

}  // namespace bootdelta
