#pragma once

#include <string_view>
#include <variant>

#include "gfm/network.hpp"
#include "gfm/perunit.hpp"

namespace gfm {

/// Power-loop references P*, Q*, V_n*.
struct Setpoints {
  double p_ref = 1.0;
  double q_ref = 0.0;
  double v_ref = 1.0;
  bool operator==(const Setpoints&) const = default;
};

/// omega = omega_n + k_p (P* - P), v_od* = V* - k_q (Q* - Q).
struct DroopGains {
  double k_p = 0.01 * 2.0 * kPi * 50.0;  // rad/s per pu
  double k_q = 0.01;
  bool operator==(const DroopGains&) const = default;
};

/// Swing-equation power loop: J d(omega_dev)/dt = (P* - P) - D_p omega_dev.
struct VsmGains {
  double j_inertia = 0.02;                     // pu power per rad/s^2
  double d_p = 1.0 / (0.01 * 2.0 * kPi * 50.0);  // pu power per rad/s
  double k_q = 0.01;
  bool operator==(const VsmGains&) const = default;
};

/// Cascaded dq PI gains. Proportional gains are pu/pu, integral gains 1/s.
struct InnerLoopGains {
  double k_pv = 2.0;
  double k_iv = 400.0;
  double k_pc = 0.8;
  double k_ic = 8.0;
  bool operator==(const InnerLoopGains&) const = default;
};

/// Y_virt(s) = 1 / (s L_v + R_v) with L_v as per-unit reactance at omega_n.
struct VirtualAdmittanceParams {
  double l_v = 1.0;
  double r_v = 1.0;
  bool operator==(const VirtualAdmittanceParams&) const = default;
};

/// Stationary-frame PR voltage loop, proportional current loop and the
/// virtual resistance used when generating the voltage reference.
struct PrGains {
  double k_p_ab = 1.0;
  double k_r_ab = 200.0;
  double omega_res = 2.0 * kPi * 50.0;
  double k_i_ab = 0.8;
  double r_virt = 0.02;
  double omega_c = 0.0;  // optional resonator damping, rad/s
  bool operator==(const PrGains&) const = default;
};

enum class ControllerKind { Droop, VsmOuter, VsmInner, VirtualAdmittance, ProportionalResonant };

std::string_view controller_id(ControllerKind kind);
/// Accepts droop, vsm-outer, vsm-inner, vadm, pr. Throws UnknownVariant.
ControllerKind parse_controller_id(std::string_view id);
inline constexpr ControllerKind kAllControllers[] = {
    ControllerKind::Droop, ControllerKind::VsmOuter, ControllerKind::VsmInner,
    ControllerKind::VirtualAdmittance, ControllerKind::ProportionalResonant};

struct DroopControl {
  DroopGains power;
  InnerLoopGains inner;
  bool operator==(const DroopControl&) const = default;
};
struct VsmOuterControl {
  VsmGains power;
  bool operator==(const VsmOuterControl&) const = default;
};
struct VsmInnerControl {
  VsmGains power;
  InnerLoopGains inner;
  bool operator==(const VsmInnerControl&) const = default;
};
struct VirtualAdmittanceControl {
  VsmGains power;
  VirtualAdmittanceParams admittance;
  InnerLoopGains inner;  // only the current-loop gains are used
  bool operator==(const VirtualAdmittanceControl&) const = default;
};
struct PrControl {
  VsmGains power;
  PrGains pr;
  bool operator==(const PrControl&) const = default;
};

using ControlLaw = std::variant<DroopControl, VsmOuterControl, VsmInnerControl, VirtualAdmittanceControl, PrControl>;

struct ControllerSpec {
  ControlLaw law;
  // +1 applies the reactive droop as V* - k_q (Q* - Q); -1 flips it.
  double reactive_sign = 1.0;

  ControllerKind kind() const;
  void validate() const;
  bool operator==(const ControllerSpec&) const = default;

  /// Default gain set of the given variant.
  static ControllerSpec defaults(ControllerKind kind, const PerUnitBase& base = PerUnitBase{});
};

/// Internal controller states. Only those used by the active variant move.
struct ControllerState {
  double theta = 0.0;      // controller frame angle relative to the common frame, unwrapped
  double omega_dev = 0.0;  // VSM frequency deviation, rad/s
  ComplexPu v_pi;          // voltage PI integrators (controller dq)
  ComplexPu c_pi;          // current PI integrators (controller dq)
  ComplexPu i_y;           // virtual admittance current (controller dq)
  ComplexPu pr_x1;         // resonator first states, alpha + j beta
  ComplexPu pr_x2;         // resonator second states, alpha + j beta
};

/// Measurements in the common frame rotating at omega_n.
struct Measurements {
  double t = 0.0;
  ComplexPu v_o;
  ComplexPu i_l;
  ComplexPu i_o;
  double p = 0.0;
  double q = 0.0;
};

Measurements measure(double t, const NetworkState& net, const LoadParams& load);

struct PowerLoopOutput {
  double omega = 0.0;  // rad/s
  double v_od_ref = 0.0;
};

PowerLoopOutput droop_power_loop(const Setpoints& sp, double p_meas, double q_meas, const DroopGains& g,
                                 const PerUnitBase& base, double reactive_sign = 1.0);

struct VsmPowerLoopOutput {
  double d_omega_dev = 0.0;
  double omega = 0.0;
  double v_od_ref = 0.0;
};

VsmPowerLoopOutput vsm_power_loop(const Setpoints& sp, double p_meas, double q_meas, double omega_dev,
                                  const VsmGains& g, const PerUnitBase& base, double reactive_sign = 1.0);

/// Reference produced by an inner loop together with the derivative of its state.
struct LoopOutput {
  ComplexPu reference;
  ComplexPu d_state;
};

/// i_l* = i_o + G_PIv (v* - v) + j c_f v, all in controller dq.
LoopOutput voltage_pi_loop(ComplexPu v_ref, ComplexPu v_meas, ComplexPu i_o, ComplexPu integrator,
                           const InnerLoopGains& g, double c_f);

/// v_inv* = v_ff + G_PIc (i_l* - i_l) + j l_f i_l, all in controller dq.
LoopOutput current_pi_loop(ComplexPu i_l_ref, ComplexPu i_l_meas, ComplexPu v_ff, ComplexPu integrator,
                           const InnerLoopGains& g, double l_f);

/// i_l* = i_o + i_y with (l_v / omega_n) di_y/dt = (v* - v) - r_v i_y - j l_v i_y.
LoopOutput virtual_admittance_loop(ComplexPu v_ref, ComplexPu v_meas, ComplexPu i_o, ComplexPu i_y,
                                   const VirtualAdmittanceParams& p, const PerUnitBase& base);

/// v_o_ab* = r_virt i_o_ab + v_od* e^{j theta}; theta is the absolute angle.
ComplexPu pr_reference_gen(double v_od_ref, double theta, ComplexPu i_o_ab, double r_virt);

struct PrLoopOutput {
  ComplexPu i_l_ref;
  ComplexPu d_x1;
  ComplexPu d_x2;
};

/// Per axis: i_l* = i_o + k_p e + x1, x1' = x2 + k_r e - 2 omega_c x1, x2' = -omega_res^2 x1.
PrLoopOutput pr_voltage_loop(ComplexPu v_ref_ab, ComplexPu v_meas_ab, ComplexPu i_o_ab, ComplexPu x1,
                             ComplexPu x2, const PrGains& g);

/// v_inv* = v_ff + k_i (i_l* - i_l).
ComplexPu p_current_loop(ComplexPu i_l_ref_ab, ComplexPu i_l_meas_ab, ComplexPu v_ff_ab, double k_i_ab);

struct ControllerOutput {
  ComplexPu v_inv;  // common frame
  ControllerState derivative;
  double omega = 0.0;     // controller frequency, rad/s
  double v_od_ref = 0.0;  // output of the reactive loop
  ComplexPu tracking_error;  // voltage error seen by the inner voltage regulator (PR: alpha-beta)
};

ControllerOutput controller_step(const ControllerSpec& spec, const Measurements& meas, const ControllerState& state,
                                 const Setpoints& sp, const PerUnitBase& base, const FilterParams& filt);

struct ControllerInit {
  ControllerState state;
  Setpoints setpoints;
};

/// Back-solves states and setpoints so that controller_step reproduces the
/// operating point with zero derivatives. v_cmd is the converter command
/// needed to hold it (the terminal voltage unless an actuation lag is used).
/// Throws InitInfeasible.
ControllerInit init_controller_state(const ControllerSpec& spec, const NetworkState& net, const LoadParams& load,
                                     ComplexPu v_cmd, const PerUnitBase& base, const FilterParams& filt,
                                     double t0 = 0.0);

}  // namespace gfm
