#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bootdelta.hpp"

namespace bootdelta::cli {

enum ExitCode : int { kOk = 0, kVerdictFailed = 1, kUsage = 2, kRuntime = 3 };

/// Input or configuration problem; maps to exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(const std::string& token) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = first + token.size();
  if (first != last && *first == '+') ++first;
  const auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc() || r.ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

/// One real per line; blank lines and text after '#' are ignored.
inline std::vector<double> parse_data(std::istream& in, const std::string& label) {
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string token = trim(line);
    if (token.empty()) continue;
    const auto v = parse_double(token);
    if (!v) throw InputError(label + ":" + std::to_string(line_no) + ": not a finite number: '" + token + "'");
    values.push_back(*v);
  }
  if (values.empty()) throw InputError(label + ": no data values");
  return values;
}

inline std::vector<double> read_data_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open");
  return parse_data(in, path);
}

/// "identity", "avar:A", "power:C", "variance", or "pwl:s0,g0;s1,g1;...".
inline Functional parse_functional(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto number = [&](const std::string& s) {
    const auto v = parse_double(trim(s));
    if (!v) throw InputError("functional '" + spec + "': bad number '" + s + "'");
    return *v;
  };
  try {
    if (name == "identity" && arg.empty()) return DistortionFunction::identity();
    if (name == "variance" && arg.empty()) return variance_kernel();
    if (name == "avar") return DistortionFunction::avar(number(arg));
    if (name == "power") return DistortionFunction::power(number(arg));
    if (name == "pwl") {
      std::vector<std::pair<double, double>> points;
      std::stringstream ss(arg);
      std::string pair;
      while (std::getline(ss, pair, ';')) {
        const auto comma = pair.find(',');
        if (comma == std::string::npos) throw InputError("functional '" + spec + "': expected s,g pairs");
        points.emplace_back(number(pair.substr(0, comma)), number(pair.substr(comma + 1)));
      }
      return DistortionFunction::piecewise_linear(std::move(points));
    }
  } catch (const Error& e) {
    throw InputError(std::string("functional '") + spec + "': " + e.what());
  }
  throw InputError("unknown functional '" + spec + "' (identity, avar:A, power:C, variance, pwl:s,g;...)");
}

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw InputError(where + ": unknown key '" + key + "'");
}

inline double get_number(const nlohmann::json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw InputError(where + ": missing '" + key + "'");
  const auto& v = j.at(key);
  if (v.is_string() && (v == "inf" || v == "infinity")) return std::numeric_limits<double>::infinity();
  if (!v.is_number()) throw InputError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline std::size_t get_count(const nlohmann::json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw InputError(where + "." + key + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

inline DataModel parse_model(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    throw InputError("model: expected an object with a string 'type'");
  const std::string type = j.at("type");
  try {
    if (type == "iid") {
      check_keys(j, "model", {"type", "dist", "params"});
      if (!j.contains("dist") || !j.at("dist").is_string()) throw InputError("model.dist: expected a string");
      const std::string dist = j.at("dist");
      std::vector<double> p;
      if (j.contains("params")) {
        if (!j.at("params").is_array()) throw InputError("model.params: expected an array");
        for (const auto& v : j.at("params")) {
          if (!v.is_number()) throw InputError("model.params: expected numbers");
          p.push_back(v.get<double>());
        }
      }
      auto param = [&](std::size_t i, double fallback) { return i < p.size() ? p[i] : fallback; };
      if (dist == "normal" && p.size() <= 2) return IidModel{ModelCDF::normal(param(0, 0.0), param(1, 1.0))};
      if (dist == "uniform" && p.size() <= 2) return IidModel{ModelCDF::uniform(param(0, 0.0), param(1, 1.0))};
      if (dist == "student_t" && p.size() == 1) return IidModel{ModelCDF::student_t(p[0])};
      throw InputError("model.dist: expected normal[mean,sd], uniform[lo,hi] or student_t[nu]");
    }
    if (type == "ar1") {
      check_keys(j, "model", {"type", "rho"});
      return Ar1Model{get_number(j, "rho", "model")};
    }
    if (type == "garch11") {
      check_keys(j, "model", {"type", "omega", "alpha", "beta"});
      return Garch11Model{get_number(j, "omega", "model"), get_number(j, "alpha", "model"),
                          get_number(j, "beta", "model")};
    }
  } catch (const Error& e) {
    throw InputError(std::string("model: ") + e.what());
  }
  throw InputError("model.type: expected iid, ar1 or garch11");
}

inline BootstrapScheme parse_scheme(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j == "efron") return BootstrapScheme::efron();
    if (j == "bayesian") return BootstrapScheme::bayesian();
    throw InputError("scheme: expected efron, bayesian or an object for circular");
  }
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    throw InputError("scheme: expected a string or an object with a string 'type'");
  const std::string type = j.at("type");
  if (type == "efron" || type == "bayesian") {
    check_keys(j, "scheme", {"type"});
    return type == "efron" ? BootstrapScheme::efron() : BootstrapScheme::bayesian();
  }
  if (type != "circular") throw InputError("scheme.type: expected efron, bayesian or circular");
  check_keys(j, "scheme", {"type", "gamma", "block_length"});
  if (j.contains("gamma") == j.contains("block_length"))
    throw InputError("scheme: circular needs exactly one of 'gamma' and 'block_length'");
  if (j.contains("block_length")) return BootstrapScheme::circular_fixed(get_count(j, "block_length", "scheme"));
  return BootstrapScheme::circular(get_number(j, "gamma", "scheme"));
}

}  // namespace detail

/**
 * Strict JSON experiment configuration. Unknown keys are rejected; the seed
 * is mandatory unless supplied separately.
 */
inline ExperimentConfig parse_config(const nlohmann::json& j, std::optional<std::uint64_t> seed_override = std::nullopt) {
  detail::check_keys(j, "config",
                     {"kind", "model", "functional", "weight_exponent", "scheme", "p", "b", "n_grid", "M", "B",
                      "grid_size", "limit_draws", "truncation_lag", "surrogate_size", "seed", "threads",
                      "max_median_dbl", "max_process_ks", "unit_weights"});
  ExperimentConfig c;
  try {
    if (j.contains("kind")) {
      const auto& k = j.at("kind");
      if (k == "consistency")
        c.kind = ExperimentKind::Consistency;
      else if (k == "process")
        c.kind = ExperimentKind::Process;
      else
        throw InputError("kind: expected consistency or process");
    }
    if (!j.contains("model")) throw InputError("model: missing");
    c.model = detail::parse_model(j.at("model"));
    if (j.contains("functional")) {
      if (!j.at("functional").is_string()) throw InputError("functional: expected a string");
      c.functional = parse_functional(j.at("functional").get<std::string>());
    }
    if (j.contains("weight_exponent")) c.weight_exponent = detail::get_number(j, "weight_exponent", "config");
    if (j.contains("scheme")) c.scheme = detail::parse_scheme(j.at("scheme"));
    if (j.contains("p")) c.moment_order = detail::get_number(j, "p", "config");
    if (j.contains("b")) c.mixing_exponent = detail::get_number(j, "b", "config");
    if (j.contains("n_grid")) {
      if (!j.at("n_grid").is_array()) throw InputError("n_grid: expected an array");
      c.n_grid.clear();
      for (const auto& v : j.at("n_grid")) {
        if (!v.is_number_unsigned()) throw InputError("n_grid: expected non-negative integers");
        c.n_grid.push_back(v.get<std::size_t>());
      }
    }
    if (j.contains("M")) c.outer_replicates = detail::get_count(j, "M", "config");
    if (j.contains("B")) c.bootstrap_replicates = detail::get_count(j, "B", "config");
    if (j.contains("grid_size")) c.grid_size = detail::get_count(j, "grid_size", "config");
    if (j.contains("limit_draws")) c.limit_draws = detail::get_count(j, "limit_draws", "config");
    if (j.contains("truncation_lag")) c.truncation_lag = detail::get_count(j, "truncation_lag", "config");
    if (j.contains("surrogate_size")) c.surrogate_size = detail::get_count(j, "surrogate_size", "config");
    if (j.contains("threads")) c.threads = detail::get_count(j, "threads", "config");
    if (j.contains("max_median_dbl")) c.max_median_dbl = detail::get_number(j, "max_median_dbl", "config");
    if (j.contains("max_process_ks")) c.max_process_ks = detail::get_number(j, "max_process_ks", "config");
    if (j.contains("unit_weights")) {
      if (!j.at("unit_weights").is_boolean()) throw InputError("unit_weights: expected a boolean");
      c.unit_weights = j.at("unit_weights").get<bool>();
    }
    if (seed_override) {
      c.seed = *seed_override;
    } else {
      if (!j.contains("seed")) throw InputError("seed: missing (set it in the config or pass --seed)");
      c.seed = detail::get_count(j, "seed", "config");
    }
  } catch (const Error& e) {
    throw InputError(e.what());
  }
  const auto errors = c.validate();
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw InputError(msg);
  }
  return c;
}

inline ExperimentConfig read_config_file(const std::string& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
  return parse_config(j, seed_override);
}

namespace detail {

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path + ": cannot write");
  out << content;
  if (!out) throw Error(ErrorCode::Unavailable, path + ": write failed");
}

inline void emit(std::ostream& out, const std::optional<std::string>& path, const std::string& content) {
  if (path)
    write_file(*path, content);
  else
    out << content;
}

}  // namespace detail

/**
 * Runs the command line and returns the process exit code: 0 success,
 * 1 an experiment verdict failed, 2 usage, parse or config error, 3 runtime
 * failure.
 */
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bootstrap functional delta method: estimates, intervals, experiments, d_BL"};
  app.require_subcommand(1);

  std::uint64_t seed_value = 0;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string out_value;
  std::optional<std::string> out_path;
  std::string format = "csv";
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", out_value, "Output path (for experiment: prefix of <out>.csv and <out>.json)");
    sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  };

  std::string data_path;
  std::string functional_spec = "identity";
  auto* estimate = app.add_subcommand("estimate", "Plug-in estimate f(F_n) of a data file");
  estimate->add_option("data", data_path, "Data file, one value per line")->required();
  estimate->add_option("--functional,-f", functional_spec, "identity, avar:A, power:C, variance, pwl:s,g;...");
  add_common(estimate);

  std::string scheme_name = "efron";
  std::size_t block_value = 0;
  double gamma_value = 0.0;
  std::optional<std::size_t> block_length;
  std::optional<double> gamma;
  std::size_t B = 1000;
  double level = 0.95;
  auto* ci = app.add_subcommand("bootstrap-ci", "Percentile bootstrap interval for f(F)");
  ci->add_option("data", data_path, "Data file, one value per line")->required();
  ci->add_option("--functional,-f", functional_spec, "identity, avar:A, power:C, variance, pwl:s,g;...");
  ci->add_option("--scheme", scheme_name, "efron, bayesian or circular")
      ->check(CLI::IsMember({"efron", "bayesian", "circular"}));
  ci->add_option("--block-length", block_value, "Circular block length");
  ci->add_option("--gamma", gamma_value, "Circular block exponent: block length ceil(n^gamma)");
  ci->add_option("-B,--replicates", B, "Bootstrap replicates (at least 20)");
  ci->add_option("--level", level, "Confidence level in [0,1); 0 gives the median only");
  ci->add_option("--seed", seed_value, "Random seed")->required();
  ci->add_option("--threads", threads, "Accepted for uniformity; intervals run on one stream");
  add_common(ci);

  std::string config_path;
  auto* experiment = app.add_subcommand("experiment", "Run a Monte Carlo experiment from a JSON config");
  experiment->add_option("config", config_path, "JSON experiment config")->required();
  experiment->add_option("--seed", seed_value, "Seed; overrides the config");
  experiment->add_option("--threads", threads, "Worker threads; results do not depend on it");
  add_common(experiment);

  auto* limit = app.add_subcommand("limit", "Draws of the Gaussian limit law f'_F(xi) for a JSON config");
  limit->add_option("config", config_path, "JSON experiment config")->required();
  limit->add_option("--seed", seed_value, "Seed; overrides the config");
  limit->add_option("--threads", threads, "Worker threads; results do not depend on it");
  add_common(limit);

  std::string file_a;
  std::string file_b;
  auto* bl = app.add_subcommand("bl", "Bounded Lipschitz distance between two samples");
  bl->add_option("a", file_a, "First data file")->required();
  bl->add_option("b", file_b, "Second data file")->required();
  add_common(bl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  for (CLI::App* sub : app.get_subcommands()) {
    if (sub->get_option_no_throw("--seed") && sub->count("--seed")) seed = seed_value;
    if (sub->count("--out")) out_path = out_value;
  }
  if (ci->count("--block-length")) block_length = block_value;
  if (ci->count("--gamma")) gamma = gamma_value;

  try {
    if (*estimate) {
      const auto x = read_data_file(data_path);
      const Functional f = parse_functional(functional_spec);
      const double value = f.evaluate(ecdf(x));
      if (format == "json")
        detail::emit(out, out_path, nlohmann::json{{"functional", f.name()}, {"n", x.size()}, {"estimate", value}}.dump() + "\n");
      else
        detail::emit(out, out_path, "n,estimate\n" + std::to_string(x.size()) + "," + format_double(value) + "\n");
      return kOk;
    }

    if (*ci) {
      if (B < 20) throw InputError("-B: at least 20 replicates are needed for percentile intervals");
      if (!(level >= 0.0 && level < 1.0)) throw InputError("--level: must lie in [0,1)");
      const auto x = read_data_file(data_path);
      const Functional f = parse_functional(functional_spec);
      BootstrapScheme scheme = BootstrapScheme::efron();
      if (scheme_name == "bayesian") scheme = BootstrapScheme::bayesian();
      if (scheme_name == "circular") {
        if (block_length.has_value() == gamma.has_value())
          throw InputError("circular scheme needs exactly one of --block-length and --gamma");
        scheme = block_length ? BootstrapScheme::circular_fixed(*block_length) : BootstrapScheme::circular(*gamma);
        const std::size_t ell = scheme.block_length_for(x.size());
        if (ell < 1 || ell >= x.size()) throw InputError("circular block length must satisfy 1 <= l < n");
      } else if (block_length || gamma) {
        throw InputError("--block-length and --gamma apply only to the circular scheme");
      }
      Engine rng = make_stream(*seed, StreamTag::Bootstrap);
      double center = 0.0;
      const auto draws = bootstrap_draws(x, f, scheme, B, rng, false, &center);
      const double scale = std::sqrt(static_cast<double>(x.size()));
      std::vector<double> values(draws.size());
      for (std::size_t i = 0; i < draws.size(); ++i) values[i] = center + draws[i] / scale;
      const double tail = 0.5 * (1.0 - level);
      const double lower = level == 0.0 ? median(values) : quantile(values, tail);
      const double upper = level == 0.0 ? lower : quantile(values, 1.0 - tail);
      if (format == "json") {
        nlohmann::json j{{"functional", f.name()}, {"n", x.size()},      {"estimate", center},
                         {"lower", lower},         {"upper", upper},     {"level", level},
                         {"B", B},                 {"scheme", to_string(scheme.kind)}, {"seed", *seed}};
        if (scheme.kind == SchemeKind::CircularBlock) j["block_length"] = scheme.block_length_for(x.size());
        detail::emit(out, out_path, j.dump() + "\n");
      } else {
        std::ostringstream os;
        os << "n,estimate,lower,upper,level,B,scheme,seed\n"
           << x.size() << ',' << format_double(center) << ',' << format_double(lower) << ',' << format_double(upper)
           << ',' << format_double(level) << ',' << B << ',' << to_string(scheme.kind) << ',' << *seed << '\n';
        detail::emit(out, out_path, os.str());
      }
      return kOk;
    }

    if (*experiment) {
      ExperimentConfig c = read_config_file(config_path, seed);
      if (experiment->count("--threads")) c.threads = threads;
      const ExperimentReport report = run_experiment(c);
      const std::string json = report.summary().dump(2) + "\n";
      if (out_path) {
        detail::write_file(*out_path + ".csv", report.csv());
        detail::write_file(*out_path + ".json", json);
      } else {
        out << (format == "json" ? json : report.csv());
      }
      for (const auto& v : report.verdicts)
        err << (v.passed ? "PASS " : "FAIL ") << v.name << ": " << v.detail << "\n";
      return report.passed() ? kOk : kVerdictFailed;
    }

    if (*limit) {
      ExperimentConfig c = read_config_file(config_path, seed);
      if (limit->count("--threads")) c.threads = threads;
      const LimitSample ls = limit_law_sample(c);
      if (format == "json") {
        nlohmann::json j{{"draws", ls.draws}, {"grid_size", ls.grid_size}, {"jitter", ls.jitter}};
        if (ls.quadrature_variance) j["quadrature_variance"] = *ls.quadrature_variance;
        detail::emit(out, out_path, j.dump() + "\n");
      } else {
        std::ostringstream os;
        os << "draw,value\n";
        for (std::size_t i = 0; i < ls.draws.size(); ++i) os << i << ',' << format_double(ls.draws[i]) << '\n';
        detail::emit(out, out_path, os.str());
      }
      return kOk;
    }

    if (*bl) {
      const auto a = read_data_file(file_a);
      const auto b = read_data_file(file_b);
      const double d = bl_distance(DiscreteMeasure::uniform(a), DiscreteMeasure::uniform(b));
      if (format == "json")
        detail::emit(out, out_path, nlohmann::json{{"d_bl", d}}.dump() + "\n");
      else
        detail::emit(out, out_path, "d_bl\n" + format_double(d) + "\n");
      return kOk;
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidArgument ? kUsage : kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace bootdelta::cli
