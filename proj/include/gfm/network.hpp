#pragma once

#include "gfm/perunit.hpp"

namespace gfm {

// Inductances and capacitances are per-unit reactance/susceptance at nominal
// frequency. In a frame rotating at omega_n an inductor obeys
//   (l / omega_n) di/dt = v - r i - j l i
// with time in seconds.

struct FilterParams {
  double l_f = 0.10;
  double c_f = 0.05;
  double r_f = 0.02;

  void validate() const;
  bool operator==(const FilterParams&) const = default;
};

/// Thevenin grid: stiff source v_mag at angle phase behind z_grid.
struct GridParams {
  ComplexPu z_grid{0.1178, 0.5891};
  double v_mag = 1.0;
  double phase = 0.0;

  void validate() const;
  ComplexPu source_voltage() const;
  bool operator==(const GridParams&) const = default;
};

/// Constant-resistance load sized at 1 pu voltage: r_load = 1 / p_load.
struct LoadParams {
  double p_load = 0.2;
  bool connected = false;

  void validate() const;
  /// Admittance seen at the PCC; zero when disconnected or p_load = 0.
  double conductance() const { return connected ? p_load : 0.0; }
  bool operator==(const LoadParams&) const = default;
};

struct SystemParams {
  PerUnitBase base{};
  FilterParams filter{};
  GridParams grid{};
  LoadParams load{};
  // First-order lag between the controller command and the converter
  // terminal voltage, in seconds. Zero disables it.
  double actuation_lag = 0.0;

  void validate() const;
  bool operator==(const SystemParams&) const = default;
};

struct NetworkState {
  ComplexPu i_l;  // converter-side filter current
  ComplexPu v_o;  // capacitor / PCC voltage
  ComplexPu i_g;  // current from PCC into the grid branch
};

/// Current leaving the PCC towards load and grid (i_l minus capacitor current).
ComplexPu output_current(const NetworkState& s, const LoadParams& load);

NetworkState network_derivatives(const NetworkState& state, ComplexPu v_inv, const GridParams& grid,
                                 const FilterParams& filt, const LoadParams& load,
                                 const PerUnitBase& base);

/// Rotating-frame derivative of the lagged converter voltage.
ComplexPu actuation_lag_derivative(ComplexPu v_act, ComplexPu v_cmd, double tau, const PerUnitBase& base);

struct OperatingPoint {
  NetworkState state;
  ComplexPu v_inv;  // converter terminal voltage
  double p = 0.0;   // active power delivered at the PCC
  double q = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

struct SteadyStateOptions {
  int max_iterations = 50;
  double tolerance = 1e-12;
};

/// Newton solve on the phasor circuit for the converter voltage that delivers
/// p_target at the PCC with |v_o| = v_target. Throws NoConvergence.
OperatingPoint steady_state_solve(const GridParams& grid, const FilterParams& filt, const LoadParams& load,
                                  double p_target, double v_target, const SteadyStateOptions& opts = {});

GridParams apply_phase_jump(GridParams grid, double delta);
LoadParams apply_load_switch(LoadParams load, bool on);

/// Terms of the instantaneous energy balance of the circuit. The residual
/// vanishes identically for derivatives produced by network_derivatives.
struct PowerBalance {
  double converter = 0.0;    // Re(v_inv conj i_l)
  double filter_loss = 0.0;  // r_f |i_l|^2
  double grid_loss = 0.0;    // r_g |i_g|^2
  double stored_rate = 0.0;  // d/dt of energy in l_f, c_f, l_g
  double load = 0.0;
  double grid_source = 0.0;  // absorbed by the stiff source
  double residual() const {
    return converter - filter_loss - stored_rate - load - grid_source - grid_loss;
  }
};

PowerBalance power_balance(const NetworkState& state, const NetworkState& derivative, ComplexPu v_inv,
                           const SystemParams& sys);

}  // namespace gfm
