#pragma once

#include <complex>
#include <numbers>

namespace gfm {

/// Per-unit complex quantity. Used for dq and alpha-beta pairs alike.
using ComplexPu = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

bool is_finite(ComplexPu v);

/// Nominal frequency and informational physical bases.
class PerUnitBase {
 public:
  explicit PerUnitBase(double f_n = 50.0, double s_base = 1.0e6, double v_base = 690.0);

  double f_n() const { return f_n_; }
  double omega_n() const { return omega_n_; }
  double s_base() const { return s_base_; }
  double v_base() const { return v_base_; }

  bool operator==(const PerUnitBase&) const = default;

 private:
  double f_n_;
  double omega_n_;
  double s_base_;
  double v_base_;
};

struct GridStrength {
  ComplexPu z_grid;
  double scr = 0.0;
  double xr_ratio = 0.0;
  bool xr_infinite = false;  // purely reactive impedance
};

struct PowerPu {
  double p = 0.0;
  double q = 0.0;
};

/// v * e^{-j theta}: expresses a common-frame phasor in a frame leading by theta.
ComplexPu rotate_to_frame(ComplexPu v, double theta);

/// v * e^{+j theta}: inverse of rotate_to_frame.
ComplexPu rotate_from_frame(ComplexPu v, double theta);

/// Throws ZeroImpedance for |z| = 0.
GridStrength compute_grid_strength(ComplexPu z_grid);

/// Impedance with |z| = 1/scr and angle atan(xr).
ComplexPu impedance_from_scr_xr(double scr, double xr_ratio);

/// p + jq = v * conj(i), magnitude-invariant dq scaling.
PowerPu complex_power(ComplexPu v, ComplexPu i);

}  // namespace gfm
