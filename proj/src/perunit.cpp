#include "gfm/perunit.hpp"

#include <cmath>
#include <stdexcept>

#include "gfm/errors.hpp"

namespace gfm {

namespace {

// Angles are kept unwrapped by callers; reduce only before sin/cos.
ComplexPu unit_phasor(double theta) {
  const double wrapped = std::remainder(theta, 2.0 * kPi);
  return {std::cos(wrapped), std::sin(wrapped)};
}

}  // namespace

bool is_finite(ComplexPu v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

PerUnitBase::PerUnitBase(double f_n, double s_base, double v_base)
    : f_n_(f_n), omega_n_(2.0 * kPi * f_n), s_base_(s_base), v_base_(v_base) {
  if (!(f_n > 0.0) || !std::isfinite(f_n)) {
    throw std::invalid_argument("nominal frequency must be positive and finite");
  }
}

ComplexPu rotate_to_frame(ComplexPu v, double theta) { return v * std::conj(unit_phasor(theta)); }

ComplexPu rotate_from_frame(ComplexPu v, double theta) { return v * unit_phasor(theta); }

GridStrength compute_grid_strength(ComplexPu z_grid) {
  const double mag = std::abs(z_grid);
  if (!(mag > 0.0)) {
    throw ZeroImpedance("grid impedance magnitude is zero");
  }
  GridStrength out;
  out.z_grid = z_grid;
  out.scr = 1.0 / mag;
  if (z_grid.real() == 0.0) {
    out.xr_infinite = true;
    out.xr_ratio = std::copysign(INFINITY, z_grid.imag());
  } else {
    out.xr_ratio = z_grid.imag() / z_grid.real();
  }
  return out;
}

ComplexPu impedance_from_scr_xr(double scr, double xr_ratio) {
  if (!(scr > 0.0)) {
    throw std::invalid_argument("scr must be positive");
  }
  const double phi = std::atan(xr_ratio);
  return std::polar(1.0 / scr, phi);
}

PowerPu complex_power(ComplexPu v, ComplexPu i) {
  const ComplexPu s = v * std::conj(i);
  return {s.real(), s.imag()};
}

}  // namespace gfm
