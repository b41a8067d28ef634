#include "gfm/controllers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gfm/errors.hpp"

namespace gfm {

namespace {

constexpr ComplexPu kJ{0.0, 1.0};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double reactive_droop(double v_ref, double k_q, double q_ref, double q_meas, double sign) {
  return v_ref - sign * k_q * (q_ref - q_meas);
}

void require(bool ok, const char* what) {
  if (!ok) {
    throw std::invalid_argument(what);
  }
}

void validate_vsm(const VsmGains& g) {
  require(g.j_inertia > 0.0 && g.d_p > 0.0, "VSM needs j_inertia > 0 and d_p > 0");
  require(g.k_q >= 0.0, "reactive droop gain must be non-negative");
}

void validate_inner(const InnerLoopGains& g, bool voltage_loop) {
  require(g.k_pv >= 0.0 && g.k_iv >= 0.0 && g.k_pc >= 0.0 && g.k_ic >= 0.0, "inner-loop gains must be non-negative");
  if (voltage_loop) {
    require(g.k_pv > 0.0 || g.k_iv > 0.0, "voltage loop needs k_pv or k_iv positive");
  }
  require(g.k_pc > 0.0 || g.k_ic > 0.0, "current loop needs k_pc or k_ic positive");
}

}  // namespace

std::string_view controller_id(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::Droop:
      return "droop";
    case ControllerKind::VsmOuter:
      return "vsm-outer";
    case ControllerKind::VsmInner:
      return "vsm-inner";
    case ControllerKind::VirtualAdmittance:
      return "vadm";
    case ControllerKind::ProportionalResonant:
      return "pr";
  }
  return "unknown";
}

ControllerKind parse_controller_id(std::string_view id) {
  for (ControllerKind k : kAllControllers) {
    if (controller_id(k) == id) {
      return k;
    }
  }
  throw UnknownVariant("unknown controller '" + std::string(id) + "' (expected droop, vsm-outer, vsm-inner, vadm, pr)");
}

ControllerKind ControllerSpec::kind() const {
  return std::visit(Overloaded{
                        [](const DroopControl&) { return ControllerKind::Droop; },
                        [](const VsmOuterControl&) { return ControllerKind::VsmOuter; },
                        [](const VsmInnerControl&) { return ControllerKind::VsmInner; },
                        [](const VirtualAdmittanceControl&) { return ControllerKind::VirtualAdmittance; },
                        [](const PrControl&) { return ControllerKind::ProportionalResonant; },
                    },
                    law);
}

void ControllerSpec::validate() const {
  require(reactive_sign == 1.0 || reactive_sign == -1.0, "reactive_sign must be +1 or -1");
  std::visit(Overloaded{
                 [](const DroopControl& c) {
                   require(c.power.k_p > 0.0 && c.power.k_q >= 0.0, "droop needs k_p > 0 and k_q >= 0");
                   validate_inner(c.inner, true);
                 },
                 [](const VsmOuterControl& c) { validate_vsm(c.power); },
                 [](const VsmInnerControl& c) {
                   validate_vsm(c.power);
                   validate_inner(c.inner, true);
                 },
                 [](const VirtualAdmittanceControl& c) {
                   validate_vsm(c.power);
                   validate_inner(c.inner, false);
                   require(c.admittance.l_v > 0.0 && c.admittance.r_v >= 0.0, "virtual admittance needs l_v > 0, r_v >= 0");
                 },
                 [](const PrControl& c) {
                   validate_vsm(c.power);
                   require(c.pr.k_r_ab >= 0.0 && c.pr.omega_res > 0.0 && c.pr.omega_c >= 0.0,
                           "PR needs k_r >= 0, omega_res > 0, omega_c >= 0");
                   require(c.pr.k_p_ab >= 0.0 && c.pr.k_i_ab >= 0.0, "PR proportional gains must be non-negative");
                 },
             },
             law);
}

ControllerSpec ControllerSpec::defaults(ControllerKind kind, const PerUnitBase& base) {
  DroopGains droop;
  droop.k_p = 0.01 * base.omega_n();
  VsmGains vsm;
  vsm.d_p = 1.0 / droop.k_p;
  vsm.k_q = droop.k_q;
  PrGains pr;
  pr.omega_res = base.omega_n();

  ControllerSpec spec;
  switch (kind) {
    case ControllerKind::Droop:
      spec.law = DroopControl{droop, InnerLoopGains{}};
      break;
    case ControllerKind::VsmOuter:
      spec.law = VsmOuterControl{vsm};
      break;
    case ControllerKind::VsmInner:
      spec.law = VsmInnerControl{vsm, InnerLoopGains{}};
      break;
    case ControllerKind::VirtualAdmittance:
      spec.law = VirtualAdmittanceControl{vsm, VirtualAdmittanceParams{}, InnerLoopGains{}};
      break;
    case ControllerKind::ProportionalResonant:
      spec.law = PrControl{vsm, pr};
      break;
  }
  return spec;
}

Measurements measure(double t, const NetworkState& net, const LoadParams& load) {
  Measurements m;
  m.t = t;
  m.v_o = net.v_o;
  m.i_l = net.i_l;
  m.i_o = output_current(net, load);
  const PowerPu s = complex_power(m.v_o, m.i_o);
  m.p = s.p;
  m.q = s.q;
  return m;
}

PowerLoopOutput droop_power_loop(const Setpoints& sp, double p_meas, double q_meas, const DroopGains& g,
                                 const PerUnitBase& base, double reactive_sign) {
  return {base.omega_n() + g.k_p * (sp.p_ref - p_meas),
          reactive_droop(sp.v_ref, g.k_q, sp.q_ref, q_meas, reactive_sign)};
}

VsmPowerLoopOutput vsm_power_loop(const Setpoints& sp, double p_meas, double q_meas, double omega_dev,
                                  const VsmGains& g, const PerUnitBase& base, double reactive_sign) {
  VsmPowerLoopOutput out;
  out.d_omega_dev = ((sp.p_ref - p_meas) - g.d_p * omega_dev) / g.j_inertia;
  out.omega = base.omega_n() + omega_dev;
  out.v_od_ref = reactive_droop(sp.v_ref, g.k_q, sp.q_ref, q_meas, reactive_sign);
  return out;
}

LoopOutput voltage_pi_loop(ComplexPu v_ref, ComplexPu v_meas, ComplexPu i_o, ComplexPu integrator,
                           const InnerLoopGains& g, double c_f) {
  const ComplexPu e = v_ref - v_meas;
  return {i_o + g.k_pv * e + g.k_iv * integrator + kJ * c_f * v_meas, e};
}

LoopOutput current_pi_loop(ComplexPu i_l_ref, ComplexPu i_l_meas, ComplexPu v_ff, ComplexPu integrator,
                           const InnerLoopGains& g, double l_f) {
  const ComplexPu e = i_l_ref - i_l_meas;
  return {v_ff + g.k_pc * e + g.k_ic * integrator + kJ * l_f * i_l_meas, e};
}

LoopOutput virtual_admittance_loop(ComplexPu v_ref, ComplexPu v_meas, ComplexPu i_o, ComplexPu i_y,
                                   const VirtualAdmittanceParams& p, const PerUnitBase& base) {
  const ComplexPu d_i_y = (base.omega_n() / p.l_v) * ((v_ref - v_meas) - p.r_v * i_y - kJ * p.l_v * i_y);
  return {i_o + i_y, d_i_y};
}

ComplexPu pr_reference_gen(double v_od_ref, double theta, ComplexPu i_o_ab, double r_virt) {
  return r_virt * i_o_ab + rotate_from_frame(ComplexPu{v_od_ref, 0.0}, theta);
}

PrLoopOutput pr_voltage_loop(ComplexPu v_ref_ab, ComplexPu v_meas_ab, ComplexPu i_o_ab, ComplexPu x1,
                             ComplexPu x2, const PrGains& g) {
  // Both axes share one real-coefficient resonator, so the alpha-beta pair is
  // carried as a single complex value.
  const ComplexPu e = v_ref_ab - v_meas_ab;
  PrLoopOutput out;
  out.i_l_ref = i_o_ab + g.k_p_ab * e + x1;
  out.d_x1 = x2 + g.k_r_ab * e - 2.0 * g.omega_c * x1;
  out.d_x2 = -g.omega_res * g.omega_res * x1;
  return out;
}

ComplexPu p_current_loop(ComplexPu i_l_ref_ab, ComplexPu i_l_meas_ab, ComplexPu v_ff_ab, double k_i_ab) {
  return v_ff_ab + k_i_ab * (i_l_ref_ab - i_l_meas_ab);
}

ControllerOutput controller_step(const ControllerSpec& spec, const Measurements& meas, const ControllerState& state,
                                 const Setpoints& sp, const PerUnitBase& base, const FilterParams& filt) {
  ControllerOutput out;
  const double sign = spec.reactive_sign;
  const double theta = state.theta;

  // Controller-frame view of the measurements.
  const ComplexPu v = rotate_to_frame(meas.v_o, theta);
  const ComplexPu i_l = rotate_to_frame(meas.i_l, theta);
  const ComplexPu i_o = rotate_to_frame(meas.i_o, theta);

  auto cascade = [&](double v_od_ref, const InnerLoopGains& g) {
    const ComplexPu v_ref{v_od_ref, 0.0};
    const LoopOutput vl = voltage_pi_loop(v_ref, v, i_o, state.v_pi, g, filt.c_f);
    const LoopOutput cl = current_pi_loop(vl.reference, i_l, v, state.c_pi, g, filt.l_f);
    out.derivative.v_pi = vl.d_state;
    out.derivative.c_pi = cl.d_state;
    out.tracking_error = v_ref - v;
    return rotate_from_frame(cl.reference, theta);
  };

  auto vsm = [&](const VsmGains& g) {
    const VsmPowerLoopOutput pl = vsm_power_loop(sp, meas.p, meas.q, state.omega_dev, g, base, sign);
    out.derivative.omega_dev = pl.d_omega_dev;
    out.derivative.theta = state.omega_dev;
    out.omega = pl.omega;
    out.v_od_ref = pl.v_od_ref;
    return pl;
  };

  std::visit(Overloaded{
                 [&](const DroopControl& c) {
                   const PowerLoopOutput pl = droop_power_loop(sp, meas.p, meas.q, c.power, base, sign);
                   out.omega = pl.omega;
                   out.v_od_ref = pl.v_od_ref;
                   out.derivative.theta = pl.omega - base.omega_n();
                   out.v_inv = cascade(pl.v_od_ref, c.inner);
                 },
                 [&](const VsmOuterControl& c) {
                   const VsmPowerLoopOutput pl = vsm(c.power);
                   out.tracking_error = ComplexPu{pl.v_od_ref, 0.0} - v;
                   out.v_inv = rotate_from_frame(ComplexPu{pl.v_od_ref, 0.0}, theta);
                 },
                 [&](const VsmInnerControl& c) {
                   const VsmPowerLoopOutput pl = vsm(c.power);
                   out.v_inv = cascade(pl.v_od_ref, c.inner);
                 },
                 [&](const VirtualAdmittanceControl& c) {
                   const VsmPowerLoopOutput pl = vsm(c.power);
                   const ComplexPu v_ref{pl.v_od_ref, 0.0};
                   const LoopOutput al = virtual_admittance_loop(v_ref, v, i_o, state.i_y, c.admittance, base);
                   const LoopOutput cl = current_pi_loop(al.reference, i_l, v, state.c_pi, c.inner, filt.l_f);
                   out.derivative.i_y = al.d_state;
                   out.derivative.c_pi = cl.d_state;
                   out.tracking_error = v_ref - v;
                   out.v_inv = rotate_from_frame(cl.reference, theta);
                 },
                 [&](const PrControl& c) {
                   const VsmPowerLoopOutput pl = vsm(c.power);
                   // Stationary frame: the common frame leads it by omega_n t.
                   const double frame = base.omega_n() * meas.t;
                   const ComplexPu v_ab = rotate_from_frame(meas.v_o, frame);
                   const ComplexPu i_l_ab = rotate_from_frame(meas.i_l, frame);
                   const ComplexPu i_o_ab = rotate_from_frame(meas.i_o, frame);
                   const ComplexPu v_ref_ab = pr_reference_gen(pl.v_od_ref, frame + theta, i_o_ab, c.pr.r_virt);
                   const PrLoopOutput vl = pr_voltage_loop(v_ref_ab, v_ab, i_o_ab, state.pr_x1, state.pr_x2, c.pr);
                   const ComplexPu v_inv_ab = p_current_loop(vl.i_l_ref, i_l_ab, v_ab, c.pr.k_i_ab);
                   out.derivative.pr_x1 = vl.d_x1;
                   out.derivative.pr_x2 = vl.d_x2;
                   out.tracking_error = v_ref_ab - v_ab;
                   out.v_inv = rotate_to_frame(v_inv_ab, frame);
                 },
             },
             spec.law);
  return out;
}

ControllerInit init_controller_state(const ControllerSpec& spec, const NetworkState& net, const LoadParams& load,
                                     ComplexPu v_cmd, const PerUnitBase& base, const FilterParams& filt, double t0) {
  ControllerInit init;
  const Measurements m = measure(t0, net, load);
  init.setpoints.p_ref = m.p;
  init.setpoints.q_ref = m.q;

  // Aligns the controller frame with a common-frame phasor and returns the
  // voltage magnitude reference that reproduces it.
  auto align = [&](ComplexPu target) {
    init.state.theta = std::arg(target);
    init.setpoints.v_ref = std::abs(target);
  };

  // Current PI bias: v_cmd = v + k_ic xi + j l_f i_l in controller dq.
  auto current_bias = [&](const InnerLoopGains& g) {
    const double th = init.state.theta;
    const ComplexPu bias =
        rotate_to_frame(v_cmd, th) - rotate_to_frame(m.v_o, th) - kJ * filt.l_f * rotate_to_frame(m.i_l, th);
    if (g.k_ic > 0.0) {
      init.state.c_pi = bias / g.k_ic;
    } else if (std::abs(bias) > 1e-12) {
      throw InitInfeasible("current loop without integral gain cannot hold the operating point (bias " +
                           std::to_string(std::abs(bias)) + " pu)");
    }
  };

  // Voltage PI bias: i_l = i_o + k_iv xi + j c_f v.
  auto voltage_bias = [&](const InnerLoopGains& g) {
    const double th = init.state.theta;
    const ComplexPu bias = rotate_to_frame(m.i_l - m.i_o, th) - kJ * filt.c_f * rotate_to_frame(m.v_o, th);
    if (g.k_iv > 0.0) {
      init.state.v_pi = bias / g.k_iv;
    } else if (std::abs(bias) > 1e-12) {
      throw InitInfeasible("voltage loop without integral gain cannot hold the operating point");
    }
  };

  std::visit(Overloaded{
                 [&](const DroopControl& c) {
                   align(m.v_o);
                   voltage_bias(c.inner);
                   current_bias(c.inner);
                 },
                 [&](const VsmOuterControl&) { align(v_cmd); },
                 [&](const VsmInnerControl& c) {
                   align(m.v_o);
                   voltage_bias(c.inner);
                   current_bias(c.inner);
                 },
                 [&](const VirtualAdmittanceControl& c) {
                   // i_y carries the capacitor current; the reference sits that
                   // current's drop across the virtual impedance above v_o.
                   const ComplexPu i_y = m.i_l - m.i_o;
                   const ComplexPu z_v{c.admittance.r_v, c.admittance.l_v};
                   align(m.v_o + z_v * i_y);
                   init.state.i_y = rotate_to_frame(i_y, init.state.theta);
                   current_bias(c.inner);
                 },
                 [&](const PrControl& c) {
                   align(m.v_o - c.pr.r_virt * m.i_o);
                   if (c.pr.k_i_ab <= 0.0 && std::abs(v_cmd - m.v_o) > 1e-12) {
                     throw InitInfeasible("PR current loop needs k_i_ab > 0 to hold the operating point");
                   }
                   const ComplexPu i_l_ref = m.i_l + (c.pr.k_i_ab > 0.0 ? (v_cmd - m.v_o) / c.pr.k_i_ab : ComplexPu{});
                   const ComplexPu x1 = i_l_ref - m.i_o;  // common frame
                   const double w = c.pr.omega_res;
                   if (std::abs(w - base.omega_n()) > 1e-9 * base.omega_n() || c.pr.omega_c > 0.0) {
                     if (std::abs(x1) > 1e-12) {
                       throw InitInfeasible("PR resonator must be undamped and tuned to omega_n to hold a bias");
                     }
                   }
                   // Periodic steady state: x1 rotates at omega_n, x2 = j omega_n x1.
                   const double frame = base.omega_n() * t0;
                   init.state.pr_x1 = rotate_from_frame(x1, frame);
                   init.state.pr_x2 = kJ * w * init.state.pr_x1;
                 },
             },
             spec.law);
  return init;
}

}  // namespace gfm
