#ifndef QOE_CONFIG_HPP
#define QOE_CONFIG_HPP

// Experiment configuration: a small TOML-subset parser (sections, key =
// value, strings, numbers, booleans, flat arrays, # comments) that lowers to
// JSON, plus the typed ExperimentConfig consumed by the harness. JSON config
// files are accepted directly; the two formats are interchangeable.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qoe/common.hpp"
#include "qoe/qoe.hpp"

namespace qoe {

using json = nlohmann::json;

namespace detail {

[[noreturn]] inline void toml_fail(const std::string& where, std::size_t line,
                                   const std::string& msg) {
  throw config_error(where + ":" + std::to_string(line) + ": " + msg);
}

inline std::string toml_trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Strip a trailing comment that is not inside a quoted string.
inline std::string toml_strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

inline json toml_scalar(const std::string& token, const std::string& where,
                        std::size_t line) {
  if (token.empty()) toml_fail(where, line, "empty value");
  if (token == "true") return true;
  if (token == "false") return false;
  if (token.front() == '"') {
    if (token.size() < 2 || token.back() != '"')
      toml_fail(where, line, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < token.size(); ++i) {
      char c = token[i];
      if (c == '\\' && i + 2 < token.size()) {
        const char n = token[++i];
        c = n == 'n' ? '\n' : n == 't' ? '\t' : n;
      }
      out.push_back(c);
    }
    return out;
  }
  // Number: integer if it parses fully without '.', 'e', 'inf', 'nan'.
  const bool integral =
      token.find_first_of(".eEnN") == std::string::npos || token.find("0x") == 0;
  errno = 0;
  char* end = nullptr;
  if (integral) {
    const long long v = std::strtoll(token.c_str(), &end, 0);
    if (end && *end == '\0' && errno == 0) return v;
  }
  end = nullptr;
  const double d = std::strtod(token.c_str(), &end);
  if (!end || *end != '\0')
    toml_fail(where, line, "cannot parse value '" + token + "'");
  return d;
}

inline json toml_value(const std::string& token, const std::string& where,
                       std::size_t line) {
  if (!token.empty() && token.front() == '[') {
    if (token.back() != ']') toml_fail(where, line, "unterminated array");
    json arr = json::array();
    std::string body = token.substr(1, token.size() - 2);
    std::string item;
    std::stringstream ss(body);
    while (std::getline(ss, item, ',')) {
      const std::string t = toml_trim(item);
      if (t.empty()) continue;
      arr.push_back(toml_scalar(t, where, line));
    }
    return arr;
  }
  return toml_scalar(token, where, line);
}

}  // namespace detail

// Parse the TOML subset into a JSON object tree. Supported: `[a.b]` section
// headers, `key = value` pairs, strings, integers, floats, booleans,
// single-line flat arrays, and `#` comments.
inline json parse_toml(std::istream& is, const std::string& where = "<toml>") {
  json root = json::object();
  json* current = &root;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string s = detail::toml_trim(detail::toml_strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') detail::toml_fail(where, lineno, "unterminated section header");
      const std::string name = detail::toml_trim(s.substr(1, s.size() - 2));
      if (name.empty()) detail::toml_fail(where, lineno, "empty section name");
      current = &root;
      std::stringstream ss(name);
      std::string part;
      while (std::getline(ss, part, '.')) {
        part = detail::toml_trim(part);
        if (part.empty()) detail::toml_fail(where, lineno, "empty section component");
        current = &(*current)[part];
        if (!current->is_object() && !current->is_null())
          detail::toml_fail(where, lineno, "section '" + name + "' collides with a value");
        if (current->is_null()) *current = json::object();
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      detail::toml_fail(where, lineno, "expected 'key = value'");
    const std::string key = detail::toml_trim(s.substr(0, eq));
    const std::string val = detail::toml_trim(s.substr(eq + 1));
    if (key.empty()) detail::toml_fail(where, lineno, "empty key");
    (*current)[key] = detail::toml_value(val, where, lineno);
  }
  return root;
}

// Load a config file; JSON if the first non-space character is '{',
// otherwise the TOML subset.
inline json load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << is.rdbuf();
  const std::string text = buffer.str();
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  if (i < text.size() && text[i] == '{') {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw config_error(path + ": " + e.what());
    }
  }
  std::stringstream ss(text);
  return parse_toml(ss, path);
}

// ---------------------------------------------------------------------------
// Typed experiment configuration
// ---------------------------------------------------------------------------

enum class Experiment {
  CLT,
  ContaminationSweep,
  GeomOracle,
  Functional,
  SampleQuantileRobustness,
  ConcentrationCheck,
  LemmaVCheck,
  BahadurCheck
};

struct ExperimentConfig {
  Experiment experiment = Experiment::CLT;
  std::size_t n = 10000;
  std::size_t replications = 2000;
  std::uint64_t seed = 7;
  int threads = 1;
  std::string out_path;  // JSON report destination ("" = stdout only)
  std::string csv_path;  // optional per-replication CSV

  QoEConfig qoe;
  BaseEstimator estimator;
  ContaminationSpec contamination;
  bool contamination_by_rate = false;  // l = floor(n^gamma) from qoe.gamma

  // Data model.
  std::string model = "normal";  // normal | student_t3 | ols_gaussian
  double sigma = 1.0;
  std::size_t ols_p = 2;          // regressor count for ols_gaussian
  std::vector<double> theta0;     // true parameter; empty = zeros

  // Tolerances recorded in reports (acceptance pins its own copies).
  double var_rel_tol = 0.10;
  double offdiag_abs_tol = 0.10;
  double ks_threshold_coeff = 1.628;  // 1% asymptotic Kolmogorov quantile

  // Sweep.
  std::vector<double> gamma_grid{0.0, 0.1, 0.2, 0.25};
  std::vector<std::size_t> extra_l;  // absolute-l rows (e.g. > k/2 breakdown row)
  std::size_t sweep_replications = 200;

  // Functional.
  std::vector<double> time_grid{0.25, 0.5, 1.0, 2.0};

  // Sample-quantile robustness.
  std::vector<double> squantile_alphas{0.5, 0.75};

  // Concentration check.
  double nu = 0.3;
  double epsilon = 0.35;
  double tau = 0.04;
  std::size_t pilot_blocks = 20000;
  std::size_t conc_block_size = 50;

  // Geometric oracle.
  std::size_t instances = 200;
  std::size_t grid_points = 400;
  std::size_t oracle_max_k = 7;
  double oracle_u_max = 0.7;

  // Bahadur check.
  std::vector<std::size_t> k_grid{50, 100, 200, 400};
  double hessian_h = 0.02;
  std::size_t hessian_samples = 200000;
  double slope_threshold = -0.8;
  double cond_warn = 1e6;
};

namespace detail {

inline const json* config_section(const json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end()) return nullptr;
  if (!it->is_object()) throw config_error(std::string("config: [") + name + "] must be a table");
  return &*it;
}

template <class T>
inline T config_get(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw config_error(std::string("config: field '") + key + "' has the wrong type");
  }
}

inline Experiment parse_experiment_name(const std::string& name) {
  if (name == "clt") return Experiment::CLT;
  if (name == "sweep") return Experiment::ContaminationSweep;
  if (name == "geomq") return Experiment::GeomOracle;
  if (name == "functional") return Experiment::Functional;
  if (name == "squantile") return Experiment::SampleQuantileRobustness;
  if (name == "conc") return Experiment::ConcentrationCheck;
  if (name == "lemv") return Experiment::LemmaVCheck;
  if (name == "bahadur") return Experiment::BahadurCheck;
  throw config_error("config: unknown experiment '" + name + "'");
}

inline const char* experiment_name(Experiment e) {
  switch (e) {
    case Experiment::CLT: return "clt";
    case Experiment::ContaminationSweep: return "sweep";
    case Experiment::GeomOracle: return "geomq";
    case Experiment::Functional: return "functional";
    case Experiment::SampleQuantileRobustness: return "squantile";
    case Experiment::ConcentrationCheck: return "conc";
    case Experiment::LemmaVCheck: return "lemv";
    case Experiment::BahadurCheck: return "bahadur";
  }
  return "?";
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const json& j) {
  ExperimentConfig cfg;
  if (j.contains("experiment"))
    cfg.experiment = detail::parse_experiment_name(j.at("experiment").get<std::string>());
  cfg.n = detail::config_get<std::size_t>(j, "n", cfg.n);
  cfg.replications = detail::config_get<std::size_t>(j, "replications", cfg.replications);
  cfg.seed = detail::config_get<std::uint64_t>(j, "seed", cfg.seed);
  cfg.threads = detail::config_get<int>(j, "threads", cfg.threads);
  cfg.out_path = detail::config_get<std::string>(j, "out", cfg.out_path);
  cfg.csv_path = detail::config_get<std::string>(j, "csv", cfg.csv_path);
  require_config(cfg.replications >= 1, "config: replications must be >= 1");
  require_config(cfg.threads >= 1, "config: threads must be >= 1");

  if (const json* q = detail::config_section(j, "qoe")) {
    cfg.qoe.k = detail::config_get<std::size_t>(*q, "k", cfg.qoe.k);
    cfg.qoe.c = detail::config_get<double>(*q, "c", cfg.qoe.c);
    cfg.qoe.beta = detail::config_get<double>(*q, "beta", cfg.qoe.beta);
    cfg.qoe.beta_star = detail::config_get<double>(*q, "beta_star", cfg.qoe.beta_star);
    cfg.qoe.gamma = detail::config_get<double>(*q, "gamma", cfg.qoe.gamma);
    const std::string method =
        detail::config_get<std::string>(*q, "method", "componentwise");
    if (method == "componentwise")
      cfg.qoe.quantile.method = QuantileSpec::Method::Componentwise;
    else if (method == "geometric")
      cfg.qoe.quantile.method = QuantileSpec::Method::Geometric;
    else
      throw config_error("config: qoe.method must be componentwise or geometric");
    if (q->contains("alpha")) {
      const json& a = q->at("alpha");
      std::vector<double> alphas;
      if (a.is_array())
        alphas = a.get<std::vector<double>>();
      else
        alphas = {a.get<double>()};
      cfg.qoe.quantile.alphas = AlphaVector{alphas};
    }
    if (q->contains("u")) {
      const auto uvec = q->at("u").get<std::vector<double>>();
      cfg.qoe.quantile.u.resize(static_cast<Eigen::Index>(uvec.size()));
      for (std::size_t i = 0; i < uvec.size(); ++i)
        cfg.qoe.quantile.u(static_cast<Eigen::Index>(i)) = uvec[i];
    }
  }

  if (const json* e = detail::config_section(j, "estimator")) {
    const std::string kind = detail::config_get<std::string>(*e, "kind", "mean");
    if (kind == "mean")
      cfg.estimator.kind = BaseEstimator::Kind::Mean;
    else if (kind == "ols")
      cfg.estimator.kind = BaseEstimator::Kind::OLS;
    else if (kind == "variance")
      cfg.estimator.kind = BaseEstimator::Kind::Variance;
    else if (kind == "sample_quantile")
      cfg.estimator.kind = BaseEstimator::Kind::SampleQuantile;
    else
      throw config_error("config: estimator.kind '" + kind + "' is not recognized");
    cfg.estimator.alpha = detail::config_get<double>(*e, "alpha", cfg.estimator.alpha);
  }

  if (const json* c = detail::config_section(j, "contamination")) {
    if (c->contains("count")) {
      cfg.contamination.count = c->at("count").get<std::size_t>();
    } else if (c->contains("gamma")) {
      cfg.qoe.gamma = c->at("gamma").get<double>();
      cfg.contamination_by_rate = true;
    }
    const std::string placement =
        detail::config_get<std::string>(*c, "placement", "worst_case");
    if (placement == "worst_case")
      cfg.contamination.placement = Placement::WorstCaseOnePerBlock;
    else if (placement == "uniform")
      cfg.contamination.placement = Placement::UniformRandom;
    else if (placement == "prefix")
      cfg.contamination.placement = Placement::Prefix;
    else
      throw config_error("config: contamination.placement '" + placement +
                         "' is not recognized");
    const std::string adversary =
        detail::config_get<std::string>(*c, "adversary", "amplitude");
    if (adversary == "fixed")
      cfg.contamination.adversary = AdversaryKind::FixedValue;
    else if (adversary == "amplitude")
      cfg.contamination.adversary = AdversaryKind::Amplitude;
    else if (adversary == "dependent")
      cfg.contamination.adversary = AdversaryKind::Dependent;
    else
      throw config_error("config: contamination.adversary '" + adversary +
                         "' is not recognized");
    cfg.contamination.value = detail::config_get<double>(*c, "value", cfg.contamination.value);
    const std::string pattern =
        detail::config_get<std::string>(*c, "pattern", "all_plus");
    if (pattern == "all_plus")
      cfg.contamination.pattern = SignPattern::AllPlus;
    else if (pattern == "alternating")
      cfg.contamination.pattern = SignPattern::Alternating;
    else if (pattern == "data_sign")
      cfg.contamination.pattern = SignPattern::DataSign;
    else
      throw config_error("config: contamination.pattern '" + pattern + "' is not recognized");
    cfg.contamination.dependent_factor =
        detail::config_get<double>(*c, "dependent_factor", cfg.contamination.dependent_factor);
  }

  if (const json* m = detail::config_section(j, "model")) {
    cfg.model = detail::config_get<std::string>(*m, "name", cfg.model);
    cfg.sigma = detail::config_get<double>(*m, "sigma", cfg.sigma);
    cfg.ols_p = detail::config_get<std::size_t>(*m, "p", cfg.ols_p);
    cfg.theta0 = detail::config_get<std::vector<double>>(*m, "theta0", cfg.theta0);
    if (cfg.model != "normal" && cfg.model != "student_t3" && cfg.model != "ols_gaussian")
      throw config_error("config: model.name '" + cfg.model + "' is not recognized");
  }

  if (const json* t = detail::config_section(j, "tolerances")) {
    cfg.var_rel_tol = detail::config_get<double>(*t, "var_rel", cfg.var_rel_tol);
    cfg.offdiag_abs_tol = detail::config_get<double>(*t, "offdiag_abs", cfg.offdiag_abs_tol);
    cfg.ks_threshold_coeff =
        detail::config_get<double>(*t, "ks_coeff", cfg.ks_threshold_coeff);
  }

  if (const json* s = detail::config_section(j, "sweep")) {
    cfg.gamma_grid = detail::config_get<std::vector<double>>(*s, "gamma_grid", cfg.gamma_grid);
    cfg.extra_l = detail::config_get<std::vector<std::size_t>>(*s, "extra_l", cfg.extra_l);
    cfg.sweep_replications =
        detail::config_get<std::size_t>(*s, "replications", cfg.sweep_replications);
  }

  if (const json* f = detail::config_section(j, "functional"))
    cfg.time_grid = detail::config_get<std::vector<double>>(*f, "time_grid", cfg.time_grid);

  if (const json* s = detail::config_section(j, "squantile"))
    cfg.squantile_alphas =
        detail::config_get<std::vector<double>>(*s, "alphas", cfg.squantile_alphas);

  if (const json* c = detail::config_section(j, "conc")) {
    cfg.nu = detail::config_get<double>(*c, "nu", cfg.nu);
    cfg.epsilon = detail::config_get<double>(*c, "epsilon", cfg.epsilon);
    cfg.tau = detail::config_get<double>(*c, "tau", cfg.tau);
    cfg.pilot_blocks = detail::config_get<std::size_t>(*c, "pilot_blocks", cfg.pilot_blocks);
    cfg.conc_block_size =
        detail::config_get<std::size_t>(*c, "block_size", cfg.conc_block_size);
  }

  if (const json* g = detail::config_section(j, "geomq")) {
    cfg.instances = detail::config_get<std::size_t>(*g, "instances", cfg.instances);
    cfg.grid_points = detail::config_get<std::size_t>(*g, "grid_points", cfg.grid_points);
    cfg.oracle_max_k = detail::config_get<std::size_t>(*g, "max_k", cfg.oracle_max_k);
    cfg.oracle_u_max = detail::config_get<double>(*g, "u_max", cfg.oracle_u_max);
  }

  if (const json* l = detail::config_section(j, "lemv"))
    cfg.instances = detail::config_get<std::size_t>(*l, "instances", cfg.instances);

  if (const json* b = detail::config_section(j, "bahadur")) {
    cfg.k_grid = detail::config_get<std::vector<std::size_t>>(*b, "k_grid", cfg.k_grid);
    cfg.hessian_h = detail::config_get<double>(*b, "h", cfg.hessian_h);
    cfg.hessian_samples =
        detail::config_get<std::size_t>(*b, "hessian_samples", cfg.hessian_samples);
    cfg.slope_threshold = detail::config_get<double>(*b, "slope_threshold", cfg.slope_threshold);
    cfg.cond_warn = detail::config_get<double>(*b, "cond_warn", cfg.cond_warn);
  }

  return cfg;
}

}  // namespace qoe

#endif  // QOE_CONFIG_HPP
