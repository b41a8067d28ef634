#include "gfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace gfm {

namespace {

std::size_t first_at_or_after(std::span<const double> t, double time) {
  // Sample times are k*dt; tolerate rounding when comparing with the event time.
  const double eps = 1e-9;
  return static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), time - eps) - t.begin());
}

void check_sizes(std::span<const double> t, std::span<const double> x) {
  if (t.size() != x.size()) {
    throw std::invalid_argument("time and value traces differ in length");
  }
}

}  // namespace

double frequency_nadir(std::span<const double> t, std::span<const double> f, double event_time) {
  check_sizes(t, f);
  const std::size_t start = first_at_or_after(t, event_time);
  if (start >= f.size()) {
    throw EmptyWindow("trace has no samples after the event");
  }
  return *std::min_element(f.begin() + static_cast<std::ptrdiff_t>(start), f.end());
}

double max_rocof(std::span<const double> t, std::span<const double> f, double event_time, double window) {
  check_sizes(t, f);
  if (t.size() < 2) {
    throw EmptyWindow("trace too short for a rate of change");
  }
  const double dt = t[1] - t[0];
  if (!(window >= dt * (1.0 - 1e-9))) {
    throw std::invalid_argument("ROCOF window must be at least one sample");
  }
  const auto lag = static_cast<std::size_t>(std::llround(window / dt));
  const std::size_t start = first_at_or_after(t, event_time);
  if (start + lag >= f.size()) {
    throw EmptyWindow("trace ends before one ROCOF window after the event");
  }
  double best = 0.0;
  for (std::size_t i = start; i + lag < f.size(); ++i) {
    best = std::max(best, std::abs(f[i + lag] - f[i]) / (t[i + lag] - t[i]));
  }
  return best;
}

double overshoot_pct(std::span<const double> t, std::span<const double> x, double event_time, double pre_value,
                     double final_value) {
  check_sizes(t, x);
  const std::size_t start = first_at_or_after(t, event_time);
  if (start >= x.size()) {
    throw EmptyWindow("trace has no samples after the event");
  }
  double extremum = pre_value;
  for (std::size_t i = start; i < x.size(); ++i) {
    if (std::abs(x[i] - pre_value) > std::abs(extremum - pre_value)) {
      extremum = x[i];
    }
  }
  double denom = std::abs(pre_value);
  if (denom <= 1e-9) {
    denom = std::abs(final_value - pre_value);
    if (denom <= 1e-9) {
      throw DegenerateBaseline("pre-event value and steady-state change are both zero");
    }
  }
  return 100.0 * (extremum - pre_value) / denom;
}

std::optional<double> settling_time(std::span<const double> t, std::span<const double> x, double event_time,
                                    double final_value, double band_pct, double floor, double min_dwell) {
  check_sizes(t, x);
  if (!(band_pct > 0.0)) {
    throw std::invalid_argument("settling band must be positive");
  }
  const std::size_t start = first_at_or_after(t, event_time);
  if (start >= x.size()) {
    throw EmptyWindow("trace has no samples after the event");
  }
  double excursion = 0.0;
  for (std::size_t i = start; i < x.size(); ++i) {
    excursion = std::max(excursion, std::abs(x[i] - final_value));
  }
  const double band = band_pct / 100.0 * std::max(excursion, floor);

  // Last sample outside the band.
  std::size_t last_out = x.size();
  for (std::size_t i = x.size(); i-- > start;) {
    if (std::abs(x[i] - final_value) > band) {
      last_out = i;
      break;
    }
  }
  if (last_out == x.size()) {
    return 0.0;
  }
  if (last_out + 1 >= x.size() || t.back() - t[last_out + 1] < min_dwell - 1e-12) {
    return std::nullopt;
  }
  // Interpolate the band crossing between the last outside and first inside sample.
  const double e0 = std::abs(x[last_out] - final_value);
  const double e1 = std::abs(x[last_out + 1] - final_value);
  const double frac = e0 > e1 ? (e0 - band) / (e0 - e1) : 1.0;
  const double crossing = t[last_out] + frac * (t[last_out + 1] - t[last_out]);
  return std::max(0.0, crossing - event_time);
}

double window_mean(std::span<const double> t, std::span<const double> x, double from, double to) {
  check_sizes(t, x);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= from - 1e-9 && t[i] < to - 1e-9) {
      sum += x[i];
      ++n;
    }
  }
  if (n == 0) {
    throw EmptyWindow("averaging window contains no samples");
  }
  return sum / static_cast<double>(n);
}

MetricsReport build_report(const TimeSeries& ts, const ScenarioSpec& spec, const MetricSettings& cfg) {
  if (ts.size() < 2) {
    throw EmptyWindow("trace too short for metrics");
  }
  const double te = spec.event_time;
  const double t_end = ts.t.back();
  const double pre_from = std::max(ts.t.front(), te - cfg.pre_window);
  const double final_from = t_end - cfg.final_window;

  auto pre = [&](const std::vector<double>& x) { return window_mean(ts.t, x, pre_from, te); };
  auto fin = [&](const std::vector<double>& x) { return window_mean(ts.t, x, final_from, t_end + ts.dt); };
  auto settle = [&](const std::vector<double>& x) {
    return settling_time(ts.t, x, te, fin(x), cfg.band_pct, cfg.band_floor, cfg.settle_dwell);
  };

  MetricsReport r;
  r.observed_after_event = t_end - te;
  r.nadir = frequency_nadir(ts.t, ts.f_ctrl, te);
  r.max_rocof = max_rocof(ts.t, ts.f_ctrl, te, cfg.rocof_window);
  r.f_settling = settle(ts.f_ctrl);
  r.p_overshoot = overshoot_pct(ts.t, ts.p, te, pre(ts.p), fin(ts.p));
  r.p_settling = settle(ts.p);
  r.v_overshoot = overshoot_pct(ts.t, ts.v_mag, te, pre(ts.v_mag), fin(ts.v_mag));
  r.v_settling = settle(ts.v_mag);
  r.i_overshoot = overshoot_pct(ts.t, ts.i_mag, te, pre(ts.i_mag), fin(ts.i_mag));
  r.i_settling = settle(ts.i_mag);
  return r;
}

std::string format_settling(const std::optional<double>& tau, double observed_after_event) {
  char buf[64];
  if (tau) {
    std::snprintf(buf, sizeof buf, "%.3f s", *tau);
  } else {
    std::snprintf(buf, sizeof buf, ">%g s", observed_after_event);
  }
  return buf;
}

}  // namespace gfm
