#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gfm/config.hpp"
#include "gfm/metrics.hpp"
#include "gfm/simulator.hpp"

namespace gfm {

/// Header line of every trace file.
inline constexpr const char* kTraceHeader = "t,p,q,f_ctrl,v_od,v_oq,v_mag,i_od,i_oq,i_mag";

/// Nine significant digits, LF endings, header first.
void write_trace_csv(std::ostream& out, const TimeSeries& ts);
void write_trace_csv(const std::string& path, const TimeSeries& ts);

/// JSON object keyed by the MetricsReport field names; unsettled times are null.
std::string metrics_json(const MetricsReport& report, const RunConfig& cfg, const std::string& controller,
                         const std::string& scenario);

/// One line of a comparison. report is empty when the run failed.
struct ComparisonRow {
  std::string controller;
  std::optional<MetricsReport> report;
  std::string failure;
};

std::string comparison_table(const std::vector<ComparisonRow>& rows, const std::string& scenario);
std::string comparison_json(const std::vector<ComparisonRow>& rows, const std::string& scenario);

/// re,im,damping_ratio,freq_hz per mode.
void write_modes_csv(std::ostream& out, const std::vector<Mode>& modes);

}  // namespace gfm
