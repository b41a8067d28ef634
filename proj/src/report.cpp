#include "gfm/report.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace gfm {
namespace {

using nlohmann::ordered_json;

void put(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  line += buf;
}

ordered_json settling(const std::optional<double>& tau) { return tau ? ordered_json(*tau) : ordered_json(nullptr); }

ordered_json report_object(const MetricsReport& r) {
  ordered_json j;
  j["nadir"] = r.nadir;
  j["max_rocof"] = r.max_rocof;
  j["f_settling"] = settling(r.f_settling);
  j["p_overshoot"] = r.p_overshoot;
  j["p_settling"] = settling(r.p_settling);
  j["v_overshoot"] = r.v_overshoot;
  j["v_settling"] = settling(r.v_settling);
  j["i_overshoot"] = r.i_overshoot;
  j["i_settling"] = settling(r.i_settling);
  j["observed_after_event"] = r.observed_after_event;
  return j;
}

std::string pct(double v, const std::optional<double>& tau, double observed) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f %%, %s", v, format_settling(tau, observed).c_str());
  return buf;
}

}  // namespace

void write_trace_csv(std::ostream& out, const TimeSeries& ts) {
  const auto& names = TimeSeries::channel_names();
  std::vector<const std::vector<double>*> cols;
  for (const auto& n : names) cols.push_back(&ts.channel(n));
  std::string line;
  out << kTraceHeader << '\n';
  for (std::size_t i = 0; i < ts.t.size(); ++i) {
    line.clear();
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) line += ',';
      put(line, (*cols[c])[i]);
    }
    line += '\n';
    out << line;
  }
}

void write_trace_csv(const std::string& path, const TimeSeries& ts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_trace_csv(out, ts);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::string metrics_json(const MetricsReport& report, const RunConfig& cfg, const std::string& controller,
                         const std::string& scenario) {
  ordered_json j = report_object(report);
  j["controller"] = controller;
  j["scenario"] = scenario;
  ordered_json config = ordered_json::object();
  for (const auto& e : flatten_config(cfg)) {
    config[e.key] = {{"value", e.value}, {"source", e.source == Provenance::User ? "user" : "default"}};
  }
  j["config"] = std::move(config);
  return j.dump(2) + "\n";
}

std::string comparison_table(const std::vector<ComparisonRow>& rows, const std::string& scenario) {
  std::ostringstream out;
  char buf[512];
  out << "scenario: " << scenario << '\n';
  std::snprintf(buf, sizeof buf, "%-10s | %-9s | %-11s | %-10s | %-20s | %-20s | %-20s\n", "controller", "nadir",
                "rocof", "f settling", "P overshoot, settl.", "V overshoot, settl.", "I overshoot, settl.");
  out << buf;
  out << std::string(117, '-') << '\n';
  for (const auto& row : rows) {
    if (!row.report) {
      std::snprintf(buf, sizeof buf, "%-10s | FAILED: %s\n", row.controller.c_str(), row.failure.c_str());
      out << buf;
      continue;
    }
    const auto& r = *row.report;
    const double obs = r.observed_after_event;
    char nadir[32], rocof[32];
    std::snprintf(nadir, sizeof nadir, "%.2f Hz", r.nadir);
    std::snprintf(rocof, sizeof rocof, "%.2f Hz/s", r.max_rocof);
    std::snprintf(buf, sizeof buf, "%-10s | %-9s | %-11s | %-10s | %-20s | %-20s | %-20s\n", row.controller.c_str(),
                  nadir, rocof, format_settling(r.f_settling, obs).c_str(),
                  pct(r.p_overshoot, r.p_settling, obs).c_str(), pct(r.v_overshoot, r.v_settling, obs).c_str(),
                  pct(r.i_overshoot, r.i_settling, obs).c_str());
    out << buf;
  }
  return out.str();
}

std::string comparison_json(const std::vector<ComparisonRow>& rows, const std::string& scenario) {
  ordered_json j;
  j["scenario"] = scenario;
  ordered_json arr = ordered_json::array();
  for (const auto& row : rows) {
    ordered_json r;
    r["controller"] = row.controller;
    if (row.report) {
      r["status"] = "ok";
      r["metrics"] = report_object(*row.report);
    } else {
      r["status"] = "failed";
      r["error"] = row.failure;
    }
    arr.push_back(std::move(r));
  }
  j["rows"] = std::move(arr);
  return j.dump(2) + "\n";
}

void write_modes_csv(std::ostream& out, const std::vector<Mode>& modes) {
  out << "re,im,damping_ratio,freq_hz\n";
  std::string line;
  for (const auto& m : modes) {
    line.clear();
    put(line, m.lambda.real());
    line += ',';
    put(line, m.lambda.imag());
    line += ',';
    put(line, m.damping_ratio);
    line += ',';
    put(line, m.freq_hz);
    line += '\n';
    out << line;
  }
}

}  // namespace gfm
