#include "gfm/network.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gfm/errors.hpp"

namespace gfm {

namespace {

constexpr ComplexPu kJ{0.0, 1.0};

struct CircuitSolution {
  NetworkState state;
  double p;
  double q;
};

// Sinusoidal steady state of the linear circuit for a given converter voltage.
struct PhasorCircuit {
  ComplexPu z_f;
  ComplexPu z_g;
  ComplexPu y_c;
  double y_load;
  ComplexPu v_src;
  ComplexPu gain;    // dv_o / dv_inv
  ComplexPu offset;  // v_o at v_inv = 0

  PhasorCircuit(const GridParams& grid, const FilterParams& filt, const LoadParams& load)
      : z_f(filt.r_f, filt.l_f),
        z_g(grid.z_grid),
        y_c(0.0, filt.c_f),
        y_load(load.conductance()),
        v_src(grid.source_voltage()) {
    const ComplexPu y_tot = 1.0 / z_f + y_c + y_load + 1.0 / z_g;
    gain = (1.0 / z_f) / y_tot;
    offset = (v_src / z_g) / y_tot;
  }

  CircuitSolution solve(ComplexPu v_inv) const {
    CircuitSolution out{};
    const ComplexPu v_o = gain * v_inv + offset;
    out.state.v_o = v_o;
    out.state.i_l = (v_inv - v_o) / z_f;
    out.state.i_g = (v_o - v_src) / z_g;
    const ComplexPu i_o = out.state.i_g + y_load * v_o;
    const ComplexPu s = v_o * std::conj(i_o);
    out.p = s.real();
    out.q = s.imag();
    return out;
  }

  ComplexPu output_admittance() const { return 1.0 / z_g + y_load; }
};

}  // namespace

void FilterParams::validate() const {
  if (!(l_f > 0.0) || !(c_f > 0.0) || !(r_f >= 0.0)) {
    throw std::invalid_argument("filter requires l_f > 0, c_f > 0, r_f >= 0");
  }
}

void GridParams::validate() const {
  if (!is_finite(z_grid) || !(std::abs(z_grid) > 0.0)) {
    throw ZeroImpedance("grid impedance must be finite and non-zero");
  }
  if (!(z_grid.imag() > 0.0) || z_grid.real() < 0.0) {
    throw std::invalid_argument("grid impedance needs positive reactance and non-negative resistance");
  }
  if (!(v_mag > 0.0) || !std::isfinite(phase)) {
    throw std::invalid_argument("grid source needs v_mag > 0 and a finite phase");
  }
}

ComplexPu GridParams::source_voltage() const { return rotate_from_frame(ComplexPu{v_mag, 0.0}, phase); }

void LoadParams::validate() const {
  if (!(p_load >= 0.0) || !std::isfinite(p_load)) {
    throw std::invalid_argument("load power must be non-negative");
  }
}

void SystemParams::validate() const {
  filter.validate();
  grid.validate();
  load.validate();
  if (!(actuation_lag >= 0.0)) {
    throw std::invalid_argument("actuation lag must be non-negative");
  }
}

ComplexPu output_current(const NetworkState& s, const LoadParams& load) {
  return s.i_g + load.conductance() * s.v_o;
}

NetworkState network_derivatives(const NetworkState& state, ComplexPu v_inv, const GridParams& grid,
                                 const FilterParams& filt, const LoadParams& load,
                                 const PerUnitBase& base) {
  const double w = base.omega_n();
  const double l_g = grid.z_grid.imag();
  const double r_g = grid.z_grid.real();
  const ComplexPu i_load = load.conductance() * state.v_o;

  NetworkState d;
  d.i_l = (w / filt.l_f) * (v_inv - state.v_o - filt.r_f * state.i_l - kJ * filt.l_f * state.i_l);
  d.v_o = (w / filt.c_f) * (state.i_l - i_load - state.i_g - kJ * filt.c_f * state.v_o);
  d.i_g = (w / l_g) * (state.v_o - grid.source_voltage() - r_g * state.i_g - kJ * l_g * state.i_g);
  return d;
}

ComplexPu actuation_lag_derivative(ComplexPu v_act, ComplexPu v_cmd, double tau, const PerUnitBase& base) {
  return (v_cmd - v_act) / tau - kJ * base.omega_n() * v_act;
}

OperatingPoint steady_state_solve(const GridParams& grid, const FilterParams& filt, const LoadParams& load,
                                  double p_target, double v_target, const SteadyStateOptions& opts) {
  grid.validate();
  filt.validate();
  load.validate();
  if (!std::isfinite(p_target) || !(v_target > 0.0)) {
    throw std::invalid_argument("steady-state targets need finite p and positive v");
  }
  const PhasorCircuit circuit(grid, filt, load);

  auto residual = [&](const CircuitSolution& s) {
    return std::array<double, 2>{s.p - p_target, std::abs(s.state.v_o) - v_target};
  };
  auto norm = [](const std::array<double, 2>& r) { return std::hypot(r[0], r[1]); };

  // Start from the source voltage plus the drop of the target current over
  // both series impedances.
  const ComplexPu src = circuit.v_src;
  const ComplexPu unit = src / std::abs(src);
  ComplexPu v_inv = v_target * unit + (circuit.z_f + circuit.z_g) * (p_target / v_target) * unit;

  CircuitSolution sol = circuit.solve(v_inv);
  auto r = residual(sol);
  double rn = norm(r);
  const ComplexPu y_o = circuit.output_admittance();

  int it = 0;
  for (; it < opts.max_iterations && rn > opts.tolerance; ++it) {
    // Columns: derivative with respect to Re(v_inv) and Im(v_inv).
    double jac[2][2];
    const ComplexPu dirs[2] = {ComplexPu{1.0, 0.0}, kJ};
    const ComplexPu v_o = sol.state.v_o;
    const ComplexPu i_o = sol.state.i_g + circuit.y_load * v_o;
    const double v_abs = std::abs(v_o);
    for (int k = 0; k < 2; ++k) {
      const ComplexPu dv = circuit.gain * dirs[k];
      const ComplexPu di = y_o * dv;
      jac[0][k] = (dv * std::conj(i_o) + v_o * std::conj(di)).real();
      jac[1][k] = v_abs > 0.0 ? (std::conj(v_o) * dv).real() / v_abs : 0.0;
    }
    const double det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    if (!std::isfinite(det) || std::abs(det) < 1e-300) {
      break;
    }
    const double dx = (jac[1][1] * r[0] - jac[0][1] * r[1]) / det;
    const double dy = (-jac[1][0] * r[0] + jac[0][0] * r[1]) / det;

    // Backtracking keeps the residual monotone; a collapsed step means the
    // targets lie outside the reachable set.
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      const ComplexPu trial = v_inv - step * ComplexPu{dx, dy};
      const CircuitSolution trial_sol = circuit.solve(trial);
      const auto trial_r = residual(trial_sol);
      if (norm(trial_r) < rn) {
        v_inv = trial;
        sol = trial_sol;
        r = trial_r;
        rn = norm(trial_r);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      break;
    }
  }

  if (!(rn <= opts.tolerance) && !(rn < 1e-10)) {
    throw NoConvergence("steady-state solve did not converge (residual " + std::to_string(rn) +
                            "); operating point likely exceeds the transfer capability",
                        rn, it);
  }

  OperatingPoint op;
  op.state = sol.state;
  op.v_inv = v_inv;
  op.p = sol.p;
  op.q = sol.q;
  op.residual = rn;
  op.iterations = it;
  return op;
}

GridParams apply_phase_jump(GridParams grid, double delta) {
  grid.phase += delta;
  return grid;
}

LoadParams apply_load_switch(LoadParams load, bool on) {
  load.connected = on;
  return load;
}

PowerBalance power_balance(const NetworkState& s, const NetworkState& d, ComplexPu v_inv,
                           const SystemParams& sys) {
  const double w = sys.base.omega_n();
  const double l_g = sys.grid.z_grid.imag();
  const double r_g = sys.grid.z_grid.real();
  PowerBalance b;
  b.converter = (v_inv * std::conj(s.i_l)).real();
  b.filter_loss = sys.filter.r_f * std::norm(s.i_l);
  b.grid_loss = r_g * std::norm(s.i_g);
  b.stored_rate = (sys.filter.l_f / w) * (std::conj(s.i_l) * d.i_l).real() +
                  (sys.filter.c_f / w) * (std::conj(s.v_o) * d.v_o).real() +
                  (l_g / w) * (std::conj(s.i_g) * d.i_g).real();
  b.load = sys.load.conductance() * std::norm(s.v_o);
  b.grid_source = (sys.grid.source_voltage() * std::conj(s.i_g)).real();
  return b;
}

}  // namespace gfm
