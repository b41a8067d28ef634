#pragma once

#include <optional>
#include <span>
#include <string>

#include "gfm/simulator.hpp"

namespace gfm {

/// Extraction settings. Band and floor apply in the unit of each channel.
struct MetricSettings {
  double rocof_window = 0.02;  // s
  double band_pct = 5.0;       // percent of the post-event excursion
  double band_floor = 0.005;   // minimum excursion the band is computed from
  double pre_window = 0.05;    // s averaged before the event
  double final_window = 0.1;   // s averaged at the end of the trace
  double settle_dwell = 0.05;  // s a settled trace must be observed inside the band
  bool operator==(const MetricSettings&) const = default;
};

/// Minimum of f over t >= event_time. Throws EmptyWindow.
double frequency_nadir(std::span<const double> t, std::span<const double> f, double event_time);

/// max over t >= event_time of |f(t + window) - f(t)| / window. Throws EmptyWindow.
double max_rocof(std::span<const double> t, std::span<const double> f, double event_time, double window);

/// Signed peak excursion after the event, in percent of |pre_value|. Falls
/// back to the pre-to-final change when pre_value is zero. Throws DegenerateBaseline.
double overshoot_pct(std::span<const double> t, std::span<const double> x, double event_time, double pre_value,
                     double final_value);

/// Time after the event from which |x - final_value| stays within
/// band_pct/100 * max(peak excursion from final_value, floor). Empty unless
/// the trace stays inside the band for at least min_dwell before it ends.
std::optional<double> settling_time(std::span<const double> t, std::span<const double> x, double event_time,
                                    double final_value, double band_pct, double floor = 0.0,
                                    double min_dwell = 0.05);

/// Mean of x over samples with t in [from, to).
double window_mean(std::span<const double> t, std::span<const double> x, double from, double to);

struct MetricsReport {
  double nadir = 0.0;      // Hz
  double max_rocof = 0.0;  // Hz/s
  std::optional<double> f_settling;
  double p_overshoot = 0.0;  // percent
  std::optional<double> p_settling;
  double v_overshoot = 0.0;
  std::optional<double> v_settling;
  double i_overshoot = 0.0;
  std::optional<double> i_settling;
  double observed_after_event = 0.0;  // s of trace after the event; bound for unsettled entries
};

MetricsReport build_report(const TimeSeries& ts, const ScenarioSpec& spec, const MetricSettings& cfg = {});

/// "0.25 s" or ">2 s" style rendering used in comparison tables.
std::string format_settling(const std::optional<double>& tau, double observed_after_event);

}  // namespace gfm
