#ifndef QOE_CLI_HPP
#define QOE_CLI_HPP

// Command-line front end. Subcommands run one experiment each from a
// TOML/JSON config (CLI flags override seed/output/threads); `solve` is a
// one-shot geometric-quantile call on a CSV of points. Exit codes: 0 when
// all recorded flags pass, 1 on an acceptance failure, 2 on configuration
// errors (bad flags, malformed config, inadmissible parameters).

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qoe/config.hpp"
#include "qoe/dataset_io.hpp"
#include "qoe/geometry.hpp"
#include "qoe/harness.hpp"
#include "qoe/report.hpp"

namespace qoe {

namespace detail {

inline const char* geo_status_name(GeoStatus s) {
  switch (s) {
    case GeoStatus::Interior: return "interior";
    case GeoStatus::Anchored: return "anchored";
    case GeoStatus::CollinearFallback: return "collinear_fallback";
  }
  return "?";
}

inline Vec parse_direction(const std::string& text, std::size_t dim) {
  if (text.empty()) return Vec::Zero(static_cast<Eigen::Index>(dim));
  std::vector<double> values;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    double v = 0.0;
    if (!parse_double(token, v))
      throw config_error("solve: cannot parse direction component '" + token + "'");
    values.push_back(v);
  }
  if (values.size() != dim)
    throw config_error("solve: direction has " + std::to_string(values.size()) +
                       " components but the points have dimension " + std::to_string(dim));
  Vec u(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) u(static_cast<Eigen::Index>(i)) = values[i];
  return u;
}

inline int run_solve(const std::string& points_path, const std::string& u_text,
                     bool use_l1, const std::string& out_path) {
  const PointSet points = read_points_csv(points_path);
  const auto dim = static_cast<std::size_t>(points.dim());
  const Vec u = parse_direction(u_text, dim);

  Vec solution;
  ordered_json doc;
  if (use_l1) {
    const L1QuantileResult res = l1_geometric_quantile(points, u);
    solution = res.point;
    doc["method"] = "l1";
    doc["point"] = detail::vector_to_json(res.point);
    doc["nonunique"] = res.nonunique;
  } else {
    const GeoQuantileResult res = geometric_quantile(points, u);
    solution = res.point;
    doc["method"] = "euclidean";
    doc["point"] = detail::vector_to_json(res.point);
    doc["status"] = geo_status_name(res.status);
    doc["residual"] = res.residual;
    doc["iterations"] = res.iterations;
    doc["converged"] = res.converged;
    doc["weights"] = res.weights;
  }

  std::string text = "(";
  char buf[32];
  for (Eigen::Index i = 0; i < solution.size(); ++i) {
    if (i) text += ',';
    std::snprintf(buf, sizeof buf, "%.12g", solution(i));
    text += buf;
  }
  text += ")";
  std::cout << text << "\n";
  if (!out_path.empty()) {
    ExperimentReport report;
    report.doc = doc;
    write_report(report, out_path);
  }
  return 0;
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Quantile-of-estimators experiment harness"};
  app.require_subcommand(1);

  std::string config_path, out_path, csv_path;
  std::uint64_t seed = 0;
  int threads = 0;

  struct SubEntry {
    CLI::App* sub;
    Experiment experiment;
  };
  const std::vector<std::pair<std::string, std::pair<Experiment, std::string>>> defs = {
      {"clt", {Experiment::CLT, "Central limit check for the QoE estimator"}},
      {"sweep", {Experiment::ContaminationSweep, "Error vs contamination level grid"}},
      {"geomq", {Experiment::GeomOracle, "Geometric-quantile solver vs brute force"}},
      {"functional", {Experiment::Functional, "Point-wise median of Brownian paths"}},
      {"squantile",
       {Experiment::SampleQuantileRobustness, "Sample-quantile robustness to contamination"}},
      {"conc", {Experiment::ConcentrationCheck, "Finite-sample concentration bound"}},
      {"lemv", {Experiment::LemmaVCheck, "Contamination-absorbing parameter adjustment"}},
      {"bahadur", {Experiment::BahadurCheck, "Linearization residual scaling in k"}}};
  std::vector<SubEntry> subs;
  for (const auto& [name, info] : defs) {
    CLI::App* sub = app.add_subcommand(name, info.second);
    sub->add_option("--config", config_path, "TOML or JSON experiment config");
    sub->add_option("--seed", seed, "Master RNG seed (overrides config)");
    sub->add_option("--out", out_path, "Write the JSON report to this path");
    sub->add_option("--csv", csv_path, "Write per-replication rows to this path");
    sub->add_option("--threads", threads, "Worker threads (overrides config)");
    subs.push_back({sub, info.first});
  }

  std::string points_path, u_text, solve_out;
  bool use_l1 = false;
  CLI::App* solve = app.add_subcommand("solve", "Geometric quantile of a CSV point set");
  solve->add_option("--points", points_path, "CSV file, one point per row")->required();
  solve->add_option("--u", u_text, "Direction vector, comma separated (default 0)");
  solve->add_flag("--l1", use_l1, "Use the l1-norm geometric quantile");
  solve->add_option("--out", solve_out, "Write a JSON result to this path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are configuration errors
  }

  try {
    if (solve->parsed()) return detail::run_solve(points_path, u_text, use_l1, solve_out);

    for (const SubEntry& entry : subs) {
      if (!entry.sub->parsed()) continue;
      ExperimentConfig cfg;
      if (!config_path.empty()) cfg = parse_experiment_config(load_config_file(config_path));
      cfg.experiment = entry.experiment;
      if (entry.sub->count("--seed") > 0) cfg.seed = seed;
      if (entry.sub->count("--out") > 0) cfg.out_path = out_path;
      if (entry.sub->count("--csv") > 0) cfg.csv_path = csv_path;
      if (entry.sub->count("--threads") > 0) {
        require_config(threads >= 1, "threads must be >= 1");
        cfg.threads = threads;
      }

      const ExperimentReport report = run_experiment(cfg);
      if (!report_round_trips(report)) {
        std::cerr << "internal error: report does not round-trip\n";
        return 1;
      }
      if (!cfg.out_path.empty())
        write_report(report, cfg.out_path);
      else
        std::cout << serialize_report(report);
      return report.passed ? 0 : 1;
    }
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const config_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace qoe

#endif  // QOE_CLI_HPP
