#include <cstdio>
#include <ostream>

#include "edrvfl/bench.hpp"
#include "edrvfl/errors.hpp"

namespace edrvfl::bench {

namespace {

// 17 significant digits round-trip any finite double exactly; aggregation and
// row order are deterministic, so equal seeds give byte-identical files.
std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_t(double t) {
  // step indices are small integers; print them compactly but exactly
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", t);
  return buf;
}

}  // namespace

void export_csv(const ExperimentReport& report, std::ostream& out) {
  out << "run_id,style,rep,t,series,stat,value\n";
  for (const auto& r : report.rows) {
    out << report.run_id << ',' << r.style << ',' << r.rep << ',' << format_t(r.t) << ','
        << r.series << ',' << r.stat << ',' << format_double(r.value) << '\n';
  }
}

nlohmann::json report_to_json(const ExperimentReport& report) {
  nlohmann::json j;
  j["run_id"] = report.run_id;
  j["library_version"] = report.library_version;
  j["config"] = report.config_echo;
  j["summary"] = report.summary;
  auto rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back(nlohmann::json::array({r.style, r.rep, r.t, r.series, r.stat, r.value}));
  }
  j["rows"] = std::move(rows);
  return j;
}

ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport report;
  report.run_id = j.at("run_id").get<std::string>();
  report.library_version = j.at("library_version").get<std::string>();
  report.config_echo = j.at("config");
  report.summary = j.at("summary");
  for (const auto& r : j.at("rows")) {
    if (!r.is_array() || r.size() != 6) throw ConfigError("report rows must be 6-element arrays");
    ReportRow row;
    row.style = r.at(0).get<std::string>();
    row.rep = r.at(1).get<long>();
    row.t = r.at(2).get<double>();
    row.series = r.at(3).get<std::string>();
    row.stat = r.at(4).get<std::string>();
    row.value = r.at(5).get<double>();
    report.rows.push_back(std::move(row));
  }
  return report;
}

void export_json(const ExperimentReport& report, std::ostream& out) {
  out << report_to_json(report).dump(2) << '\n';
}

}  // namespace edrvfl::bench
