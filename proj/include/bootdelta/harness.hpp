#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bootdelta/bootstrap.hpp"
#include "bootdelta/datagen.hpp"
#include "bootdelta/error.hpp"
#include "bootdelta/functionals.hpp"
#include "bootdelta/limits.hpp"
#include "bootdelta/metrics.hpp"
#include "bootdelta/parallel.hpp"
#include "bootdelta/rng.hpp"
#include "bootdelta/stats.hpp"
#include "bootdelta/stepfn.hpp"

namespace bootdelta {

/// A distortion functional f_g or a V-functional f_h.
class Functional {
 public:
  Functional(DistortionFunction g) : f_(std::move(g)) {}
  Functional(Kernel2 h) : f_(std::move(h)) {}

  const DistortionFunction* distortion() const noexcept { return std::get_if<DistortionFunction>(&f_); }
  const Kernel2* kernel() const noexcept { return std::get_if<Kernel2>(&f_); }

  /// Plug-in value on a step distribution function.
  double evaluate(const StepFunction& F) const {
    if (const auto* g = distortion()) return distortion_value(*g, F);
    const auto& h = std::get<Kernel2>(f_);
    return h.plug_in ? h.plug_in(F) : vfunctional_value(h, F);
  }

  std::optional<double> population(const ModelCDF& F) const {
    if (const auto* g = distortion()) return distortion_value(*g, F);
    const auto& h = std::get<Kernel2>(f_);
    return h.population ? h.population(F) : std::nullopt;
  }

  std::string name() const {
    if (const auto* g = distortion()) return g->name();
    return std::get<Kernel2>(f_).name;
  }

 private:
  std::variant<DistortionFunction, Kernel2> f_;
};

enum class ExperimentKind { Consistency, Process };

inline const char* to_string(ExperimentKind k) { return k == ExperimentKind::Consistency ? "consistency" : "process"; }

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Consistency;
  DataModel model = IidModel{ModelCDF::normal()};
  Functional functional = DistortionFunction::identity();
  /// lambda in phi(t) = (1 + |t|)^lambda.
  double weight_exponent = 0.0;
  BootstrapScheme scheme = BootstrapScheme::efron();
  /// Declared moment order p and mixing-rate exponent b (b may be +inf for geometric mixing).
  std::optional<double> moment_order;
  std::optional<double> mixing_exponent;
  std::vector<std::size_t> n_grid{200, 800};
  std::size_t outer_replicates = 200;
  std::size_t bootstrap_replicates = 500;
  std::size_t grid_size = 201;
  std::size_t limit_draws = 5000;
  std::size_t truncation_lag = 200;
  std::size_t surrogate_size = 200000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// Absolute ceiling on the median d_BL at the largest n.
  std::optional<double> max_median_dbl;
  /// Ceiling on the sampling-vs-limit two-sample KS at the largest n.
  std::optional<double> max_process_ks;
  /// Replace every bootstrap weight vector by all ones.
  bool unit_weights = false;

  /// Field-level problems; empty when the configuration is usable.
  std::vector<std::string> validate() const {
    std::vector<std::string> errors;
    try {
      validate_model(model);
    } catch (const Error& e) {
      errors.push_back(std::string("model: ") + e.what());
    }
    if (!std::isfinite(weight_exponent) || weight_exponent < 0.0)
      errors.push_back("weight_exponent: must be finite and >= 0");
    if (n_grid.empty()) errors.push_back("n_grid: must not be empty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      if (n_grid[i] < 2) errors.push_back("n_grid: sample sizes must be at least 2");
      if (i > 0 && n_grid[i] <= n_grid[i - 1]) errors.push_back("n_grid: must be strictly increasing");
    }
    if (outer_replicates < 1) errors.push_back("M: must be at least 1");
    if (bootstrap_replicates < 1) errors.push_back("B: must be at least 1");
    if (grid_size < 2) errors.push_back("grid_size: must be at least 2");
    if (limit_draws < 1) errors.push_back("limit_draws: must be at least 1");
    if (threads < 1) errors.push_back("threads: must be at least 1");
    if (scheme.kind == SchemeKind::CircularBlock) {
      if (scheme.block_length) {
        for (std::size_t n : n_grid)
          if (*scheme.block_length >= n) errors.push_back("scheme.block_length: must be below every n in n_grid");
      } else if (!(scheme.block_exponent > 0.0 && scheme.block_exponent < 1.0)) {
        errors.push_back("scheme.gamma: must lie in (0,1)");
      }
      if (!moment_order || !mixing_exponent) {
        errors.push_back("scheme: circular block bootstrap needs declared p and b");
      } else if (*moment_order <= 2.0) {
        errors.push_back("scheme.p: moment order must exceed 2");
      } else if (!scheme.block_length) {
        const auto diag = validate_circular_params(*moment_order, *mixing_exponent, scheme.block_exponent);
        for (const auto& v : diag.violations) errors.push_back("scheme: " + v);
      } else {
        // A fixed block length has no exponent; only the mixing condition applies.
        const double p = *moment_order;
        const double admissible_gamma = 0.25 * (p - 2.0) / (p - 1.0);
        const auto diag = validate_circular_params(p, *mixing_exponent, admissible_gamma);
        for (const auto& v : diag.violations)
          if (v.rfind("(b)", 0) == 0) errors.push_back("scheme: " + v);
      }
    }
    return errors;
  }
};

/// Shortest round-trip decimal form of x.
inline std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

namespace detail {

inline void require_valid(const ExperimentConfig& c) {
  const auto errors = c.validate();
  if (errors.empty()) return;
  std::string msg = "invalid experiment config:";
  for (const auto& e : errors) msg += "\n  " + e;
  fail(ErrorCode::InvalidArgument, msg);
}

// Sample sorted once, with the permutation needed to carry weights drawn in
// time order onto the sorted values.
struct SortedSample {
  std::vector<double> values;
  std::vector<std::size_t> order;

  explicit SortedSample(std::span<const double> x) : order(x.size()) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    values.reserve(x.size());
    for (std::size_t i : order) values.push_back(x[i]);
  }

  StepFunction weighted(const WeightVector& w, std::vector<double>& scratch) const {
    scratch.resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) scratch[i] = w.values[order[i]];
    return weighted_ecdf_sorted(values, scratch);
  }
};

inline double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

/// f(F) for the model: closed form when available, else the plug-in value on a long surrogate path.
inline double true_value(const ExperimentConfig& c) {
  if (const auto F = true_cdf(c.model)) {
    const auto v = c.functional.population(*F);
    if (!v) fail(ErrorCode::Unavailable, "true_value: no population value for " + c.functional.name());
    return *v;
  }
  Engine rng = make_stream(c.seed, StreamTag::Surrogate);
  const std::vector<double> x = sample(c.model, c.surrogate_size, rng);
  return c.functional.evaluate(ecdf(x));
}

/// M draws of sqrt(n) (f(F_n) - f(F)), one independent sample each.
inline std::vector<double> sampling_draws(const ExperimentConfig& c, std::size_t n, double truth) {
  std::vector<double> draws(c.outer_replicates);
  const double scale = std::sqrt(static_cast<double>(n));
  parallel_for(c.outer_replicates, c.threads, [&](std::size_t j) {
    Engine rng = make_stream(c.seed, StreamTag::Sampling, n, j);
    const std::vector<double> x = sample(c.model, n, rng);
    draws[j] = scale * (c.functional.evaluate(ecdf(x)) - truth);
  });
  return draws;
}

inline DiscreteMeasure sampling_law(const ExperimentConfig& c, std::size_t n) {
  detail::require_valid(c);
  return DiscreteMeasure::uniform(sampling_draws(c, n, true_value(c)));
}

/**
 * B draws of sqrt(n) (f(F*_n) - f(F_n)) given the sample, all from one
 * stream. The estimate f(F_n) is returned through `estimate` when non-null.
 */
template <class Rng>
std::vector<double> bootstrap_draws(std::span<const double> x, const Functional& f, const BootstrapScheme& scheme,
                                    std::size_t B, Rng& rng, bool unit_weights = false, double* estimate = nullptr) {
  require(!x.empty(), "bootstrap_draws: empty sample");
  require(B >= 1, "bootstrap_draws: B must be at least 1");
  const detail::SortedSample s(x);
  const std::size_t n = x.size();
  const WeightVector ones{std::vector<double>(n, 1.0)};
  std::vector<double> scratch;
  const double center = f.evaluate(s.weighted(ones, scratch));
  if (estimate) *estimate = center;
  const double scale = std::sqrt(static_cast<double>(n));
  std::vector<double> draws(B);
  for (auto& d : draws) {
    const WeightVector w = unit_weights ? ones : draw_weights(scheme, n, rng);
    d = scale * (f.evaluate(s.weighted(w, scratch)) - center);
  }
  return draws;
}

template <class Rng>
DiscreteMeasure bootstrap_law(std::span<const double> x, const ExperimentConfig& c, Rng& rng) {
  return DiscreteMeasure::uniform(bootstrap_draws(x, c.functional, c.scheme, c.bootstrap_replicates, rng, c.unit_weights));
}

struct LimitSample {
  std::vector<double> draws;
  /// Variance of the limit law by quadrature, when available.
  std::optional<double> quadrature_variance;
  /// Two-sample KS-type distance of the draws to Normal(0, quadrature_variance) (identity functional only).
  std::optional<double> normal_ks;
  double jitter = 0.0;
  double truncation_remainder = 0.0;
  std::size_t truncation_lags_used = 0;
  std::size_t grid_size = 0;
};

namespace detail {

inline GridGaussian limit_covariance(const ExperimentConfig& c, const std::vector<double>& grid) {
  if (const auto* iid = std::get_if<IidModel>(&c.model)) return brownian_bridge_cov(iid->dist, grid);
  if (const auto* ar = std::get_if<Ar1Model>(&c.model)) return longrun_cov_ar1(ar->rho, grid, c.truncation_lag);
  fail(ErrorCode::Unavailable, "limit law: no closed-form covariance for " + model_name(c.model) +
                                   "; use the sampling law as reference");
}

inline CovarianceKernel limit_kernel(const ExperimentConfig& c) {
  if (const auto* iid = std::get_if<IidModel>(&c.model)) return bridge_kernel(iid->dist);
  if (const auto* ar = std::get_if<Ar1Model>(&c.model)) return longrun_kernel_ar1(ar->rho, c.truncation_lag);
  fail(ErrorCode::Unavailable, "limit law: no closed-form covariance for " + model_name(c.model));
}

// Grid on the quantiles of probabilities s (i - 1/2) / m, i = 1..m, where s
// is the saturation point of g: g' vanishes beyond it.
inline std::vector<double> derivative_grid(const ModelCDF& F, double saturation, std::size_t m) {
  std::vector<double> grid(m);
  for (std::size_t i = 0; i < m; ++i)
    grid[i] = F.quantile(saturation * (static_cast<double>(i) + 0.5) / static_cast<double>(m));
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

}  // namespace detail

/**
 * N draws of f'_F(xi) = int g'(F(t)) xi(t) dt for the Gaussian limit xi of
 * the empirical process, approximated by a weighted sum over a grid.
 */
inline LimitSample limit_law_sample(const ExperimentConfig& c) {
  const DistortionFunction* g = c.functional.distortion();
  if (!g) fail(ErrorCode::Unavailable, "limit law: only distortion functionals have a simulated limit");
  const auto F = true_cdf(c.model);
  if (!F) fail(ErrorCode::Unavailable, "limit law: no closed-form marginal for " + model_name(c.model));
  const std::vector<double> grid = detail::derivative_grid(*F, g->saturation(), c.grid_size);
  const GridGaussian gg = detail::limit_covariance(c, grid);
  const std::vector<double> w = grid_derivative_weights(*g, *F, grid);

  LimitSample out;
  out.grid_size = grid.size();
  out.jitter = gg.jitter();
  out.truncation_remainder = gg.truncation_remainder;
  out.truncation_lags_used = gg.truncation_lags_used;
  out.draws.resize(c.limit_draws);
  parallel_for(c.limit_draws, c.threads, [&](std::size_t i) {
    Engine rng = make_stream(c.seed, StreamTag::Limit, i);
    const std::vector<double> path = sample_path(gg, rng);
    double s = 0.0;
    for (std::size_t k = 0; k < path.size(); ++k) s += w[k] * path[k];
    out.draws[i] = s;
  });
  try {
    out.quadrature_variance = limit_variance_distortion(*g, *F, detail::limit_kernel(c));
  } catch (const Error&) {
    out.quadrature_variance.reset();
  }
  if (g->is_identity() && out.quadrature_variance && *out.quadrature_variance > 0.0) {
    const StepFunction emp = ecdf(out.draws);
    out.normal_ks = weighted_ks(emp, ModelCDF::normal(0.0, std::sqrt(*out.quadrature_variance)), WeightFunction(0.0)).value;
  }
  return out;
}

/// Grid maxima of |xi(t)| phi(t) over N limit paths, for the process-level check.
inline LimitSample limit_norm_sample(const ExperimentConfig& c) {
  const auto F = true_cdf(c.model);
  if (!F) fail(ErrorCode::Unavailable, "limit law: no closed-form marginal for " + model_name(c.model));
  const std::vector<double> grid = quantile_grid(*F, c.grid_size);
  const GridGaussian gg = detail::limit_covariance(c, grid);
  const WeightFunction phi(c.weight_exponent);
  LimitSample out;
  out.grid_size = grid.size();
  out.jitter = gg.jitter();
  out.truncation_remainder = gg.truncation_remainder;
  out.truncation_lags_used = gg.truncation_lags_used;
  out.draws.resize(c.limit_draws);
  parallel_for(c.limit_draws, c.threads, [&](std::size_t i) {
    Engine rng = make_stream(c.seed, StreamTag::Limit, i);
    const std::vector<double> path = sample_path(gg, rng);
    double m = 0.0;
    for (std::size_t k = 0; k < path.size(); ++k) m = std::max(m, std::abs(path[k]) * phi(grid[k]));
    out.draws[i] = m;
  });
  return out;
}

struct ConsistencyRow {
  std::size_t n = 0;
  std::size_t rep = 0;
  double d_bl_limit = std::numeric_limits<double>::quiet_NaN();
  double d_bl_sampling = std::numeric_limits<double>::quiet_NaN();
  double est = std::numeric_limits<double>::quiet_NaN();
  double boot_q05 = std::numeric_limits<double>::quiet_NaN();
  double boot_q50 = std::numeric_limits<double>::quiet_NaN();
  double boot_q95 = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct ProcessRow {
  std::size_t n = 0;
  std::string source;
  std::size_t rep = 0;
  double value = 0.0;
};

struct Aggregate {
  std::size_t n = 0;
  double median_d_bl_limit = std::numeric_limits<double>::quiet_NaN();
  double iqr_d_bl_limit = std::numeric_limits<double>::quiet_NaN();
  double median_d_bl_sampling = std::numeric_limits<double>::quiet_NaN();
  double iqr_d_bl_sampling = std::numeric_limits<double>::quiet_NaN();
  std::size_t failures = 0;
  /// Process check: pairwise two-sample KS distances.
  double ks_sampling_limit = std::numeric_limits<double>::quiet_NaN();
  double ks_bootstrap_limit = std::numeric_limits<double>::quiet_NaN();
  double ks_sampling_bootstrap = std::numeric_limits<double>::quiet_NaN();
};

struct Verdict {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ConsistencyRow> rows;
  std::vector<ProcessRow> process_rows;
  std::vector<Aggregate> aggregates;
  std::vector<Verdict> verdicts;
  nlohmann::json diagnostics = nlohmann::json::object();

  bool passed() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.passed; });
  }

  std::string csv() const {
    std::ostringstream os;
    if (config.kind == ExperimentKind::Consistency) {
      os << "n,rep,d_bl_limit,d_bl_sampling,est,boot_q05,boot_q50,boot_q95\n";
      for (const auto& r : rows)
        os << r.n << ',' << r.rep << ',' << format_double(r.d_bl_limit) << ',' << format_double(r.d_bl_sampling)
           << ',' << format_double(r.est) << ',' << format_double(r.boot_q05) << ',' << format_double(r.boot_q50)
           << ',' << format_double(r.boot_q95) << '\n';
    } else {
      os << "n,source,rep,value\n";
      for (const auto& r : process_rows) os << r.n << ',' << r.source << ',' << r.rep << ',' << format_double(r.value) << '\n';
    }
    return os.str();
  }

  nlohmann::json summary() const;
};

namespace detail {

// JSON has no NaN or infinity; those become null.
inline nlohmann::json number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

inline nlohmann::json config_echo(const ExperimentConfig& c) {
  nlohmann::json j;
  j["kind"] = to_string(c.kind);
  j["model"] = model_name(c.model);
  j["functional"] = c.functional.name();
  j["weight_exponent"] = c.weight_exponent;
  j["scheme"] = to_string(c.scheme.kind);
  if (c.scheme.kind == SchemeKind::CircularBlock) {
    if (c.scheme.block_length)
      j["block_length"] = *c.scheme.block_length;
    else
      j["gamma"] = c.scheme.block_exponent;
  }
  if (c.moment_order) j["p"] = *c.moment_order;
  if (c.mixing_exponent) j["b"] = std::isinf(*c.mixing_exponent) ? nlohmann::json("inf") : nlohmann::json(*c.mixing_exponent);
  j["n_grid"] = c.n_grid;
  j["M"] = c.outer_replicates;
  j["B"] = c.bootstrap_replicates;
  j["grid_size"] = c.grid_size;
  j["limit_draws"] = c.limit_draws;
  j["truncation_lag"] = c.truncation_lag;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  if (c.max_median_dbl) j["max_median_dbl"] = *c.max_median_dbl;
  if (c.max_process_ks) j["max_process_ks"] = *c.max_process_ks;
  if (c.unit_weights) j["unit_weights"] = true;
  return j;
}

inline double median_or_nan(const std::vector<double>& x) {
  const auto v = finite_values(x);
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : median(v);
}

inline double iqr_or_nan(const std::vector<double>& x) {
  const auto v = finite_values(x);
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : quantile(v, 0.75) - quantile(v, 0.25);
}

// Non-increasing sequence check; NaN entries fail it.
inline Verdict non_increasing(const std::string& name, const std::vector<std::size_t>& ns, const std::vector<double>& v) {
  Verdict out{name, true, ""};
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    os << (i ? ", " : "") << "n=" << ns[i] << ": " << format_double(v[i]);
    if (std::isnan(v[i]) || (i > 0 && !(v[i] <= v[i - 1]))) out.passed = false;
  }
  out.detail = os.str();
  return out;
}

}  // namespace detail

inline nlohmann::json ExperimentReport::summary() const {
  nlohmann::json j;
  j["config"] = detail::config_echo(config);
  j["aggregates"] = nlohmann::json::array();
  for (const auto& a : aggregates) {
    nlohmann::json e;
    e["n"] = a.n;
    if (config.kind == ExperimentKind::Consistency) {
      e["median_d_bl_limit"] = detail::number(a.median_d_bl_limit);
      e["iqr_d_bl_limit"] = detail::number(a.iqr_d_bl_limit);
      e["median_d_bl_sampling"] = detail::number(a.median_d_bl_sampling);
      e["iqr_d_bl_sampling"] = detail::number(a.iqr_d_bl_sampling);
      e["failures"] = a.failures;
    } else {
      e["ks_sampling_limit"] = detail::number(a.ks_sampling_limit);
      e["ks_bootstrap_limit"] = detail::number(a.ks_bootstrap_limit);
      e["ks_sampling_bootstrap"] = detail::number(a.ks_sampling_bootstrap);
    }
    j["aggregates"].push_back(e);
  }
  j["verdicts"] = nlohmann::json::array();
  for (const auto& v : verdicts) j["verdicts"].push_back({{"name", v.name}, {"passed", v.passed}, {"detail", v.detail}});
  j["passed"] = passed();
  j["diagnostics"] = diagnostics;
  return j;
}

/**
 * For each n and each of M outer samples: the bootstrap law of
 * sqrt(n)(f(F*_n) - f(F_n)) and its d_BL to the limit-law sample and to the
 * sampling-law sample. The verdict is a non-increasing median d_BL across
 * n_grid, against the limit law when it can be simulated and the sampling
 * law otherwise, plus the optional ceiling at the largest n.
 *
 * Failures inside one (n, rep) cell are recorded in that row and the
 * diagnostics; they do not abort the run.
 */
inline ExperimentReport run_consistency(const ExperimentConfig& c) {
  detail::require_valid(c);
  require(c.kind == ExperimentKind::Consistency, "run_consistency: config kind must be consistency");
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.config = c;
  auto& diag = report.diagnostics;
  diag["cell_errors"] = nlohmann::json::array();

  const double truth = true_value(c);
  diag["true_value"] = truth;
  if (!true_cdf(c.model)) {
    diag["surrogate_size"] = c.surrogate_size;
    diag["surrogate_seed"] = c.seed;
  }

  std::optional<DiscreteMeasure> limit;
  try {
    const LimitSample ls = limit_law_sample(c);
    limit = DiscreteMeasure::uniform(ls.draws);
    nlohmann::json l;
    l["draws"] = ls.draws.size();
    l["grid_size"] = ls.grid_size;
    l["jitter"] = ls.jitter;
    l["truncation_lags_used"] = ls.truncation_lags_used;
    l["truncation_remainder"] = ls.truncation_remainder;
    l["mc_variance"] = ls.draws.size() >= 2 ? sample_variance(ls.draws) : 0.0;
    l["quadrature_variance"] = ls.quadrature_variance ? nlohmann::json(*ls.quadrature_variance) : nlohmann::json(nullptr);
    if (ls.normal_ks) l["normal_ks"] = *ls.normal_ks;
    diag["limit_law"] = l;
  } catch (const Error& e) {
    diag["limit_law"] = {{"unavailable", e.what()}};
  }

  std::vector<double> medians_limit;
  std::vector<double> medians_sampling;
  for (std::size_t n : c.n_grid) {
    std::optional<DiscreteMeasure> sampling;
    try {
      sampling = DiscreteMeasure::uniform(sampling_draws(c, n, truth));
    } catch (const Error& e) {
      diag["cell_errors"].push_back({{"n", n}, {"rep", nullptr}, {"error", std::string("sampling law: ") + e.what()}});
    }
    std::vector<ConsistencyRow> rows(c.outer_replicates);
    parallel_for(c.outer_replicates, c.threads, [&](std::size_t rep) {
      ConsistencyRow& r = rows[rep];
      r.n = n;
      r.rep = rep;
      try {
        Engine data_rng = make_stream(c.seed, StreamTag::Data, n, rep);
        const std::vector<double> x = sample(c.model, n, data_rng);
        Engine boot_rng = make_stream(c.seed, StreamTag::Bootstrap, n, rep);
        const std::vector<double> draws =
            bootstrap_draws(x, c.functional, c.scheme, c.bootstrap_replicates, boot_rng, c.unit_weights, &r.est);
        r.boot_q05 = quantile(draws, 0.05);
        r.boot_q50 = quantile(draws, 0.50);
        r.boot_q95 = quantile(draws, 0.95);
        const DiscreteMeasure law = DiscreteMeasure::uniform(draws);
        if (limit) r.d_bl_limit = bl_distance(law, *limit);
        if (sampling) r.d_bl_sampling = bl_distance(law, *sampling);
      } catch (const Error& e) {
        r.error = std::string(to_string(e.code())) + ": " + e.what();
      }
    });
    Aggregate a;
    a.n = n;
    std::vector<double> dl;
    std::vector<double> ds;
    for (const auto& r : rows) {
      if (!r.error.empty()) {
        ++a.failures;
        diag["cell_errors"].push_back({{"n", n}, {"rep", r.rep}, {"error", r.error}});
      }
      dl.push_back(r.d_bl_limit);
      ds.push_back(r.d_bl_sampling);
    }
    a.median_d_bl_limit = detail::median_or_nan(dl);
    a.iqr_d_bl_limit = detail::iqr_or_nan(dl);
    a.median_d_bl_sampling = detail::median_or_nan(ds);
    a.iqr_d_bl_sampling = detail::iqr_or_nan(ds);
    medians_limit.push_back(a.median_d_bl_limit);
    medians_sampling.push_back(a.median_d_bl_sampling);
    report.aggregates.push_back(a);
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }

  const bool use_limit = limit.has_value();
  const auto& medians = use_limit ? medians_limit : medians_sampling;
  const std::string reference = use_limit ? "limit" : "sampling";
  report.verdicts.push_back(detail::non_increasing("median_d_bl_" + reference + "_non_increasing", c.n_grid, medians));
  if (c.max_median_dbl) {
    const double last = medians.back();
    report.verdicts.push_back({"median_d_bl_" + reference + "_below_ceiling", last < *c.max_median_dbl,
                               format_double(last) + " < " + format_double(*c.max_median_dbl)});
  }
  diag["verdict_reference"] = reference;
  diag["runtime_seconds"] = detail::elapsed_seconds(start);
  return report;
}

/**
 * Process-level check with the weighted-KS statistic: for each n, M draws of
 * ||sqrt(n)(F_n - F)||_phi, B draws of ||sqrt(n)(F*_n - F_n)||_phi from the
 * first outer sample, and N grid maxima of |xi| phi for the limit process.
 * Pairwise two-sample KS distances are reported; the verdict is a
 * non-increasing sampling-vs-limit distance plus the optional ceiling.
 */
inline ExperimentReport run_process_check(const ExperimentConfig& c) {
  detail::require_valid(c);
  require(c.kind == ExperimentKind::Process, "run_process_check: config kind must be process");
  const auto start = std::chrono::steady_clock::now();
  const auto F = true_cdf(c.model);
  if (!F) fail(ErrorCode::Unavailable, "process check: no closed-form marginal for " + model_name(c.model));
  const WeightFunction phi(c.weight_exponent);

  ExperimentReport report;
  report.config = c;
  auto& diag = report.diagnostics;
  const LimitSample ls = limit_norm_sample(c);
  diag["limit_law"] = {{"draws", ls.draws.size()},
                       {"grid_size", ls.grid_size},
                       {"jitter", ls.jitter},
                       {"truncation_lags_used", ls.truncation_lags_used},
                       {"truncation_remainder", ls.truncation_remainder}};
  diag["mesh_bounds"] = nlohmann::json::array();

  std::vector<double> ks_sl;
  for (std::size_t n : c.n_grid) {
    const double scale = std::sqrt(static_cast<double>(n));
    std::vector<double> sampling(c.outer_replicates);
    std::vector<double> mesh(c.outer_replicates);
    parallel_for(c.outer_replicates, c.threads, [&](std::size_t rep) {
      Engine rng = make_stream(c.seed, StreamTag::Data, n, rep);
      const std::vector<double> x = sample(c.model, n, rng);
      const WeightedKS k = weighted_ks(ecdf(x), *F, phi);
      sampling[rep] = scale * k.value;
      mesh[rep] = scale * k.mesh_bound;
    });

    Engine data_rng = make_stream(c.seed, StreamTag::Data, n, 0);
    const std::vector<double> x0 = sample(c.model, n, data_rng);
    const detail::SortedSample s0(x0);
    std::vector<double> scratch;
    const StepFunction F0 = s0.weighted(WeightVector{std::vector<double>(n, 1.0)}, scratch);
    Engine boot_rng = make_stream(c.seed, StreamTag::Bootstrap, n, 0);
    std::vector<double> boot(c.bootstrap_replicates);
    for (auto& b : boot) {
      const WeightVector w = c.unit_weights ? WeightVector{std::vector<double>(n, 1.0)} : draw_weights(c.scheme, n, boot_rng);
      b = scale * weighted_sup_norm(linear_combine(1.0, s0.weighted(w, scratch), -1.0, F0), phi);
    }

    for (std::size_t i = 0; i < sampling.size(); ++i) report.process_rows.push_back({n, "sampling", i, sampling[i]});
    for (std::size_t i = 0; i < boot.size(); ++i) report.process_rows.push_back({n, "bootstrap", i, boot[i]});

    Aggregate a;
    a.n = n;
    const auto finite_boot = finite_values(boot);
    a.ks_sampling_limit = two_sample_ks(sampling, ls.draws);
    if (finite_boot.size() == boot.size()) {
      a.ks_bootstrap_limit = two_sample_ks(boot, ls.draws);
      a.ks_sampling_bootstrap = two_sample_ks(sampling, boot);
    }
    ks_sl.push_back(a.ks_sampling_limit);
    report.aggregates.push_back(a);
    diag["mesh_bounds"].push_back({{"n", n}, {"max", *std::max_element(mesh.begin(), mesh.end())}});
  }
  for (std::size_t i = 0; i < ls.draws.size(); ++i) report.process_rows.push_back({0, "limit", i, ls.draws[i]});

  report.verdicts.push_back(detail::non_increasing("ks_sampling_limit_non_increasing", c.n_grid, ks_sl));
  if (c.max_process_ks) {
    const double last = ks_sl.back();
    report.verdicts.push_back({"ks_sampling_limit_below_ceiling", last <= *c.max_process_ks,
                               format_double(last) + " <= " + format_double(*c.max_process_ks)});
  }
  diag["runtime_seconds"] = detail::elapsed_seconds(start);
  return report;
}

inline ExperimentReport run_experiment(const ExperimentConfig& c) {
  return c.kind == ExperimentKind::Consistency ? run_consistency(c) : run_process_check(c);
}

}  // namespace bootdelta
