#ifndef QOE_REPORT_HPP
#define QOE_REPORT_HPP

// Experiment reports: a JSON document with stable (insertion) field order so
// identical runs produce byte-identical files. Wall-clock time is never
// written into the document — timing goes to stderr — because it would break
// byte-for-byte reproducibility. Every pass/fail flag is stored next to the
// raw statistic and the tolerance it was derived from.

#include <fstream>
#include <string>

#include <json.hpp>

#include "qoe/common.hpp"

namespace qoe {

using ordered_json = nlohmann::ordered_json;

struct ExperimentReport {
  ordered_json doc = ordered_json::object();
  bool passed = true;
};

// Attach a pass/fail flag recomputable from (value, bound): flags hold the
// raw statistic, the tolerance, and the verdict.
inline void add_flag(ordered_json& flags, const std::string& name, double value,
                     double bound, bool pass, const std::string& relation = "<=") {
  ordered_json f;
  f["value"] = value;
  f["bound"] = bound;
  f["relation"] = relation;
  f["pass"] = pass;
  flags[name] = f;
}

inline std::string serialize_report(const ExperimentReport& report) {
  return report.doc.dump(2) + "\n";
}

inline void write_report(const ExperimentReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw config_error("cannot open report path for writing: " + path);
  os << serialize_report(report);
}

// Round-trip identity used by tests and by the CLI self-check: the document
// must survive serialize -> parse unchanged.
inline bool report_round_trips(const ExperimentReport& report) {
  const ordered_json reparsed = ordered_json::parse(serialize_report(report));
  return reparsed == report.doc;
}

}  // namespace qoe

#endif  // QOE_REPORT_HPP
