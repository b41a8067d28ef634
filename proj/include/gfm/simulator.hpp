#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gfm/controllers.hpp"
#include "gfm/errors.hpp"
#include "gfm/network.hpp"

namespace gfm {

struct NoEvent {
  bool operator==(const NoEvent&) const = default;
};
/// Connects the PCC load with the given rated power.
struct LoadStep {
  double p_load = 0.2;
  bool operator==(const LoadStep&) const = default;
};
/// Adds delta to the grid source angle.
struct PhaseJump {
  double delta = -kPi / 40.0;
  bool operator==(const PhaseJump&) const = default;
};
/// Adds dp to the active power reference.
struct SetpointStep {
  double dp = 1e-4;
  bool operator==(const SetpointStep&) const = default;
};
using Event = std::variant<NoEvent, LoadStep, PhaseJump, SetpointStep>;

std::string event_name(const Event& e);

/// Operating point the converters are matched to before the event.
struct OperatingTargets {
  double p = 1.0;
  double v_pcc = 1.0;
  bool operator==(const OperatingTargets&) const = default;
};

struct ScenarioSpec {
  double duration = 3.0;
  double dt = 5e-5;
  double event_time = 1.0;
  Event event = NoEvent{};
  ControllerSpec controller = ControllerSpec::defaults(ControllerKind::Droop);
  SystemParams system{};
  OperatingTargets targets{};
  std::size_t decimation = 1;

  void validate() const;
  std::size_t steps() const { return static_cast<std::size_t>(std::llround(duration / dt)); }
  std::size_t event_step() const { return static_cast<std::size_t>(std::llround(event_time / dt)); }
};

/// Offsets of each state block in the flat integration vector; -1 if absent.
struct StateLayout {
  int i_l = 0;
  int v_o = 2;
  int i_g = 4;
  int v_act = -1;
  int theta = -1;
  int omega_dev = -1;
  int v_pi = -1;
  int c_pi = -1;
  int i_y = -1;
  int pr_x1 = -1;
  int pr_x2 = -1;
  std::size_t size = 6;

  static StateLayout for_variant(ControllerKind kind, bool actuation_lag);
};

struct SimState {
  NetworkState network;
  ComplexPu v_act;  // lagged terminal voltage, used only with an actuation lag
  ControllerState controller;
  double t = 0.0;
};

/// Instantaneous quantities recorded per sample.
struct Channels {
  double p, q, f_ctrl, v_od, v_oq, v_mag, i_od, i_oq, i_mag;
};

/// Network and controller coupled into one ODE on a flat state vector.
class ClosedLoopModel {
 public:
  ClosedLoopModel(ControllerSpec spec, SystemParams system, Setpoints setpoints);

  const StateLayout& layout() const { return layout_; }
  std::size_t dimension() const { return layout_.size; }
  const ControllerSpec& controller() const { return spec_; }
  const SystemParams& system() const { return system_; }
  SystemParams& system() { return system_; }
  const Setpoints& setpoints() const { return setpoints_; }
  Setpoints& setpoints() { return setpoints_; }

  std::vector<double> pack(const SimState& s) const;
  SimState unpack(std::span<const double> x, double t) const;

  void derivatives(double t, std::span<const double> x, std::span<double> dx) const;

  /// Converter terminal voltage and controller output at (t, x).
  struct Evaluation {
    SimState state;
    Measurements meas;
    ControllerOutput ctrl;
    ComplexPu v_terminal;
  };
  Evaluation evaluate(double t, std::span<const double> x) const;
  Channels channels(double t, std::span<const double> x) const;

  // The PR resonator states oscillate at omega_n in the stationary frame.
  // Expressing them in the common frame gives autonomous coordinates in which
  // every operating point is a fixed point; both coordinate sets coincide at t = 0.
  std::vector<double> to_rotating(double t, std::span<const double> x) const;
  std::vector<double> from_rotating(double t, std::span<const double> y) const;
  void rotating_derivatives(std::span<const double> y, std::span<double> dy) const;

 private:
  ControllerSpec spec_;
  SystemParams system_;
  Setpoints setpoints_;
  StateLayout layout_;
};

/// Classical fourth-order Runge-Kutta step, in place. Throws Diverged if any
/// component leaves [-1e6, 1e6] or becomes non-finite.
struct Rk4Workspace {
  std::vector<double> k1, k2, k3, k4, tmp;
};

inline constexpr double kDivergenceLimit = 1e6;

template <class F>
void rk4_step(std::vector<double>& x, double t, double dt, F&& f, Rk4Workspace& ws) {
  const std::size_t n = x.size();
  ws.k1.resize(n);
  ws.k2.resize(n);
  ws.k3.resize(n);
  ws.k4.resize(n);
  ws.tmp.resize(n);
  f(t, std::span<const double>(x), std::span<double>(ws.k1));
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = x[i] + 0.5 * dt * ws.k1[i];
  f(t + 0.5 * dt, std::span<const double>(ws.tmp), std::span<double>(ws.k2));
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = x[i] + 0.5 * dt * ws.k2[i];
  f(t + 0.5 * dt, std::span<const double>(ws.tmp), std::span<double>(ws.k3));
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = x[i] + dt * ws.k3[i];
  f(t + dt, std::span<const double>(ws.tmp), std::span<double>(ws.k4));
  for (std::size_t i = 0; i < n; ++i) {
    ws.tmp[i] = x[i] + dt / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
    if (!std::isfinite(ws.tmp[i]) || std::abs(ws.tmp[i]) > kDivergenceLimit) {
      throw Diverged("integration diverged at t = " + std::to_string(t + dt) + " s (state " + std::to_string(i) + ")",
                     t + dt, x);
    }
  }
  x.swap(ws.tmp);
}

template <class F>
std::vector<double> rk4_step(std::span<const double> x, double t, double dt, F&& f) {
  std::vector<double> out(x.begin(), x.end());
  Rk4Workspace ws;
  rk4_step(out, t, dt, f, ws);
  return out;
}

/// Uniform-rate traces.
struct TimeSeries {
  double dt = 0.0;
  std::vector<double> t, p, q, f_ctrl, v_od, v_oq, v_mag, i_od, i_oq, i_mag;

  std::size_t size() const { return t.size(); }
  void push(double time, const Channels& c);
  static const std::vector<std::string>& channel_names();
  /// Channel by CSV name; throws std::out_of_range for unknown names.
  const std::vector<double>& channel(const std::string& name) const;
};

/// Matched initial condition of a scenario.
struct Equilibrium {
  SimState state;
  Setpoints setpoints;
  OperatingPoint op;
  double residual = 0.0;  // norm of the autonomous derivative
};

/// steady_state_solve + init_controller_state for the scenario's controller.
Equilibrium initialize(const ScenarioSpec& spec);

struct RunOptions {
  bool record_states = false;
  double equilibrium_tolerance = 1e-6;
};

struct ScenarioResult {
  TimeSeries trace;
  Equilibrium equilibrium;
  // Flat states per recorded sample (when requested) and the system after the event.
  std::vector<std::vector<double>> states;
  SystemParams post_event_system;
  Setpoints post_event_setpoints;
};

ScenarioResult run_scenario(const ScenarioSpec& spec, const RunOptions& opts = {});

/// Largest |power-balance residual| over the recorded states of a run.
double max_power_balance_residual(const ScenarioSpec& spec, const ScenarioResult& result);

struct Linearization {
  Eigen::MatrixXd a;                 // d(dy)/dy in autonomous coordinates
  Eigen::VectorXd b;                 // d(dy)/dP*
  Eigen::MatrixXd c;                 // outputs p, q, f_ctrl, v_mag, i_mag
  Eigen::VectorXd d;                 // output feed-through of P*
  Eigen::VectorXd y0;
  double richardson_discrepancy = 0.0;  // max |A(1e-6) - A(1e-5)| / max(1, |A|)
};

inline constexpr const char* kLinearOutputs[] = {"p", "q", "f_ctrl", "v_mag", "i_mag"};

/// Central finite-difference linearization at an equilibrium. Throws NotAnEquilibrium.
Linearization linearize(const ScenarioSpec& spec, const Equilibrium& eq, double tolerance = 1e-6);

struct Mode {
  std::complex<double> lambda;
  double damping_ratio = 0.0;
  double freq_hz = 0.0;
  double residual = 0.0;  // |A v - lambda v| / (|A| |v|)
};

/// Eigenvalues of a dense matrix, each checked against A v = lambda v.
std::vector<Mode> eigen_modes(const Eigen::MatrixXd& a);

/// Least-damped complex pair above min_freq_hz; throws std::runtime_error if none.
Mode dominant_oscillatory_mode(const std::vector<Mode>& modes, double min_freq_hz = 0.1);

struct SmallSignalReport {
  double perturbation = 0.0;
  double rms_relative_deviation = 0.0;
  std::vector<double> per_channel;  // same order as kLinearOutputs
  bool within_linear_range = true;  // perturbation <= 1e-3 pu
};

/// Nonlinear response to a P* step of the given size versus the linearized
/// model over `window` seconds.
SmallSignalReport small_signal_oracle(const ScenarioSpec& spec, double perturbation, double window = 0.5);

}  // namespace gfm
