#pragma once

// Verification helpers shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "gfm/simulator.hpp"

namespace gfm::testing {

inline ScenarioSpec default_spec(ControllerKind kind, Event event = NoEvent{}) {
  ScenarioSpec s;
  s.controller = ControllerSpec::defaults(kind);
  s.event = event;
  return s;
}

/// Channels compared in pu: frequency is divided by f_n.
inline double channel_scale(const std::string& name, const ScenarioSpec& spec) {
  return name == "f_ctrl" ? 1.0 / spec.system.base.f_n() : 1.0;
}

struct HalvingResult {
  double worst_rms = 0.0;
  std::string worst_channel;
};

/// RMS difference per channel between dt and dt/2 on the coarse sample grid.
inline HalvingResult step_halving(const ScenarioSpec& spec) {
  const ScenarioResult coarse = run_scenario(spec);
  ScenarioSpec fine_spec = spec;
  fine_spec.dt = spec.dt / 2.0;
  fine_spec.decimation = spec.decimation * 2;
  const ScenarioResult fine = run_scenario(fine_spec);
  HalvingResult out;
  for (const auto& name : TimeSeries::channel_names()) {
    if (name == "t") continue;
    const auto& a = coarse.trace.channel(name);
    const auto& b = fine.trace.channel(name);
    const std::size_t n = std::min(a.size(), b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    const double rms = std::sqrt(acc / static_cast<double>(n)) * channel_scale(name, spec);
    if (rms > out.worst_rms || out.worst_channel.empty()) {
      out.worst_rms = rms;
      out.worst_channel = name;
    }
  }
  return out;
}

/// Amplitude of the fundamental-frequency component of the PR voltage
/// tracking error over the last `window` seconds of a recorded run. The
/// alpha-beta error e = A+ e^{jwt} + A- e^{-jwt} + rest, so |A+| + |A-|
/// bounds the per-axis fundamental amplitude.
inline double pr_tracking_amplitude(const ScenarioSpec& spec, const ScenarioResult& result, double window) {
  const ClosedLoopModel model(spec.controller, result.post_event_system, result.post_event_setpoints);
  const double w = spec.system.base.omega_n();
  const double t_end = result.trace.t.back();
  std::complex<double> pos{0.0, 0.0}, neg{0.0, 0.0};
  std::size_t n = 0;
  for (std::size_t i = 0; i < result.states.size(); ++i) {
    const double t = result.trace.t[i];
    if (t < t_end - window) continue;
    const ComplexPu e = model.evaluate(t, result.states[i]).ctrl.tracking_error;
    pos += e * std::polar(1.0, -w * t);
    neg += e * std::polar(1.0, w * t);
    ++n;
  }
  if (n == 0) return 0.0;
  return std::abs(pos) / static_cast<double>(n) + std::abs(neg) / static_cast<double>(n);
}

/// Largest |x(t) - x(0)| over a channel.
inline double max_drift(const std::vector<double>& x) {
  double d = 0.0;
  for (double v : x) d = std::max(d, std::abs(v - x.front()));
  return d;
}

/// Mean of the last `window` seconds of a channel.
inline double tail_mean(const TimeSeries& ts, const std::vector<double>& x, double window) {
  const double t_end = ts.t.back();
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (ts.t[i] >= t_end - window - 1e-12) {
      acc += x[i];
      ++n;
    }
  }
  return acc / static_cast<double>(n);
}

}  // namespace gfm::testing
