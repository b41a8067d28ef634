#include <doctest.h>

#include <cmath>
#include <vector>

#include "gfm/controllers.hpp"
#include "gfm/errors.hpp"
#include "gfm/network.hpp"

using namespace gfm;

namespace {
const PerUnitBase kBase{};
const ComplexPu kJ{0.0, 1.0};
}  // namespace

TEST_SUITE("controllers") {
  TEST_CASE("variant identifiers") {
    for (auto k : kAllControllers) {
      CHECK(parse_controller_id(controller_id(k)) == k);
      CHECK(ControllerSpec::defaults(k).kind() == k);
    }
    CHECK(controller_id(ControllerKind::VirtualAdmittance) == "vadm");
    CHECK_THROWS_AS(parse_controller_id("voc"), UnknownVariant);
  }

  TEST_CASE("droop power loop") {
    Setpoints sp;
    DroopGains g;
    CHECK(droop_power_loop(sp, sp.p_ref, 0.0, g, kBase).omega == kBase.omega_n());
    g.k_p = 1.0;
    sp.p_ref = 1.0;
    CHECK(droop_power_loop(sp, 0.8, 0.0, g, kBase).omega == doctest::Approx(kBase.omega_n() + 0.2).epsilon(1e-15));
    g.k_q = 0.05;
    sp.q_ref = 0.0;
    sp.v_ref = 1.0;
    CHECK(droop_power_loop(sp, 1.0, 0.1, g, kBase).v_od_ref == doctest::Approx(1.005).epsilon(1e-15));
    CHECK(droop_power_loop(sp, 1.0, 0.1, g, kBase, -1.0).v_od_ref == doctest::Approx(0.995).epsilon(1e-15));
  }

  TEST_CASE("vsm power loop") {
    Setpoints sp;
    VsmGains g;
    g.j_inertia = 0.2;
    auto out = vsm_power_loop(sp, sp.p_ref - 0.2, 0.0, 0.0, g, kBase);
    CHECK(out.d_omega_dev == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(out.omega == kBase.omega_n());
    // Fixed point: no acceleration at omega_n requires P = P*.
    auto eq = vsm_power_loop(sp, sp.p_ref, 0.0, 0.0, g, kBase);
    CHECK(eq.d_omega_dev == 0.0);
    CHECK(eq.omega == kBase.omega_n());
  }

  TEST_CASE("vsm frequency deviation follows the first-order step response") {
    Setpoints sp;
    VsmGains g;
    g.j_inertia = 0.05;
    g.d_p = 2.0;
    const double dp = 0.1;
    const double tau = g.j_inertia / g.d_p;
    const double dt = 1e-5;
    double w = 0.0;
    const int n = static_cast<int>(std::llround(tau / dt));
    auto f = [&](double x) { return vsm_power_loop(sp, sp.p_ref - dp, 0.0, x, g, kBase).d_omega_dev; };
    for (int k = 0; k < n; ++k) {
      const double k1 = f(w), k2 = f(w + 0.5 * dt * k1), k3 = f(w + 0.5 * dt * k2), k4 = f(w + dt * k3);
      w += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    CHECK(w == doctest::Approx(dp / g.d_p * (1.0 - std::exp(-1.0))).epsilon(1e-9));
  }

  TEST_CASE("voltage PI loop") {
    InnerLoopGains g{0.0, 0.0, 0.0, 0.0};
    CHECK(voltage_pi_loop({1, 0}, {1, 0}, {0.5, 0}, {0, 0}, g, 0.0).reference == ComplexPu(0.5, 0.0));
    g.k_pv = 2.0;
    auto p = voltage_pi_loop({1.01, 0}, {1, 0}, {0, 0}, {0, 0}, g, 0.0);
    CHECK(p.reference.real() == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(p.reference.imag() == 0.0);
    CHECK(p.d_state.real() == doctest::Approx(0.01).epsilon(1e-12));
    g.k_pv = 0.0;
    auto ff = voltage_pi_loop({1, 0}, {1, 0}, {0, 0}, {0, 0}, g, 0.05);
    CHECK(std::abs(ff.reference - ComplexPu(0.0, 0.05)) < 1e-15);
    g.k_iv = 400.0;
    CHECK(voltage_pi_loop({1, 0}, {1, 0}, {0, 0}, {1e-3, 2e-3}, g, 0.0).reference == ComplexPu(0.4, 0.8));
  }

  TEST_CASE("current PI loop") {
    InnerLoopGains g{0.0, 0.0, 0.0, 0.0};
    CHECK(current_pi_loop({1, 0}, {1, 0}, {0.9, 0.1}, {0, 0}, g, 0.0).reference == ComplexPu(0.9, 0.1));
    g.k_pc = 0.5;
    auto p = current_pi_loop({0.1, 0}, {0, 0}, {0, 0}, {0, 0}, g, 0.0);
    CHECK(std::abs(p.reference - ComplexPu(0.05, 0.0)) < 1e-15);
    g.k_pc = 0.0;
    auto ff = current_pi_loop({1, 0}, {1, 0}, {0, 0}, {0, 0}, g, 0.1);
    CHECK(std::abs(ff.reference - ComplexPu(0.0, 0.1)) < 1e-15);
  }

  TEST_CASE("virtual admittance loop") {
    VirtualAdmittanceParams p{0.05, 0.1};
    // Per-unit time (tau = omega_n t): di_y/dtau = dv / l_v = 0.2.
    auto a = virtual_admittance_loop({1.01, 0}, {1, 0}, {0, 0}, {0, 0}, p, kBase);
    CHECK(a.d_state.real() / kBase.omega_n() == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(a.d_state.imag() == doctest::Approx(0.0));

    auto z = virtual_admittance_loop({1, 0}, {1, 0}, {0.3, -0.2}, {0, 0}, p, kBase);
    CHECK(z.reference == ComplexPu(0.3, -0.2));

    // Phasor division oracle: the admittance current settles at dv / (r_v + j l_v).
    const ComplexPu dv{0.01, -0.004};
    const ComplexPu expected = dv / ComplexPu(p.r_v, p.l_v);
    auto fixed = virtual_admittance_loop(ComplexPu(1.0, 0.0) + dv, {1, 0}, {0, 0}, expected, p, kBase);
    CHECK(std::abs(fixed.d_state) < 1e-12);
    ComplexPu iy{0, 0};
    const double dt = 1e-5;
    for (int k = 0; k < 20000; ++k) {
      auto f = [&](ComplexPu x) {
        return virtual_admittance_loop(ComplexPu(1.0, 0.0) + dv, {1, 0}, {0, 0}, x, p, kBase).d_state;
      };
      const ComplexPu k1 = f(iy), k2 = f(iy + 0.5 * dt * k1), k3 = f(iy + 0.5 * dt * k2), k4 = f(iy + dt * k3);
      iy += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    CHECK(std::abs(iy - expected) < 1e-9);
  }

  TEST_CASE("PR reference generation") {
    CHECK(pr_reference_gen(1.0, 0.0, {0, 0}, 0.0) == ComplexPu(1.0, 0.0));
    CHECK(std::abs(pr_reference_gen(1.0, kPi / 2.0, {0, 0}, 0.0) - ComplexPu(0.0, 1.0)) < 1e-15);
    CHECK(std::abs(pr_reference_gen(1.0, 0.0, {1, 0}, 0.02) - ComplexPu(1.02, 0.0)) < 1e-15);
  }

  TEST_CASE("PR voltage loop static paths") {
    PrGains g;
    g.k_p_ab = 1.0;
    auto dc = pr_voltage_loop({1.1, -0.05}, {1, 0}, {0.2, 0.1}, {0, 0}, {0, 0}, g);
    CHECK(std::abs(dc.i_l_ref - ComplexPu(0.3, 0.05)) < 1e-15);
    auto zero = pr_voltage_loop({1, 0}, {1, 0}, {0.2, 0.1}, {0, 0}, {0, 0}, g);
    CHECK(zero.i_l_ref == ComplexPu(0.2, 0.1));
    CHECK(zero.d_x1 == ComplexPu(0, 0));
    CHECK(zero.d_x2 == ComplexPu(0, 0));
  }

  TEST_CASE("resonator grows as t sin(w t) under resonant excitation") {
    PrGains g;
    g.k_p_ab = 0.0;
    g.k_r_ab = 50.0;
    const double w = g.omega_res;
    const double dt = 1e-6;
    const double period = 2.0 * kPi / w;
    const int n = static_cast<int>(std::llround(5.0 * period / dt));
    ComplexPu x1{0, 0}, x2{0, 0};
    auto rhs = [&](double t, ComplexPu a, ComplexPu b) {
      auto o = pr_voltage_loop({std::sin(w * t), 0.0}, {0, 0}, {0, 0}, a, b, g);
      return std::pair{o.d_x1, o.d_x2};
    };
    double max_err = 0.0;
    std::vector<double> peaks;
    for (int k = 0; k < n; ++k) {
      const double t = k * dt;
      auto [a1, b1] = rhs(t, x1, x2);
      auto [a2, b2] = rhs(t + dt / 2, x1 + dt / 2 * a1, x2 + dt / 2 * b1);
      auto [a3, b3] = rhs(t + dt / 2, x1 + dt / 2 * a2, x2 + dt / 2 * b2);
      auto [a4, b4] = rhs(t + dt, x1 + dt * a3, x2 + dt * b3);
      x1 += dt / 6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
      x2 += dt / 6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
      const double tt = t + dt;
      const double exact = 0.5 * g.k_r_ab * tt * std::sin(w * tt);
      max_err = std::max(max_err, std::abs(x1.real() - exact));
    }
    const double final_amp = 0.5 * g.k_r_ab * 5.0 * period;
    CHECK(max_err < 1e-6 * final_amp);
    CHECK(x1.imag() == 0.0);
  }

  TEST_CASE("proportional current loop") {
    CHECK(p_current_loop({1, 0}, {1, 0}, {0.9, 0.2}, 0.8) == ComplexPu(0.9, 0.2));
    CHECK(std::abs(p_current_loop({0.1, 0}, {0, 0}, {1, 0}, 0.8) - ComplexPu(1.08, 0.0)) < 1e-15);
    auto one = p_current_loop({0.1, 0.05}, {0, 0}, {0, 0}, 0.8);
    auto two = p_current_loop({0.2, 0.1}, {0, 0}, {0, 0}, 0.8);
    CHECK(std::abs(two - 2.0 * one) < 1e-15);
  }

  TEST_CASE("every variant reproduces the matched operating point") {
    FilterParams filt;
    GridParams grid;
    LoadParams load;
    auto op = steady_state_solve(grid, filt, load, 1.0, 1.0);
    for (auto kind : kAllControllers) {
      CAPTURE(controller_id(kind));
      const ControllerSpec spec = ControllerSpec::defaults(kind);
      const double t0 = 0.37;
      auto init = init_controller_state(spec, op.state, load, op.v_inv, kBase, filt, t0);
      auto out = controller_step(spec, measure(t0, op.state, load), init.state, init.setpoints, kBase, filt);
      CHECK(std::abs(out.v_inv - op.v_inv) < 1e-9);
      CHECK(std::abs(out.derivative.theta) < 1e-9);
      CHECK(std::abs(out.derivative.omega_dev) < 1e-8);
      CHECK(std::abs(out.derivative.v_pi) < 1e-9);
      CHECK(std::abs(out.derivative.c_pi) < 1e-9);
      CHECK(std::abs(out.derivative.i_y) < 1e-8);
      // Resonator states rotate at omega_n in the stationary frame.
      const ComplexPu jw = kJ * kBase.omega_n();
      CHECK(std::abs(out.derivative.pr_x1 - jw * init.state.pr_x1) < 1e-8);
      CHECK(std::abs(out.derivative.pr_x2 - jw * init.state.pr_x2) < 1e-6);
      CHECK(init.setpoints.p_ref == doctest::Approx(1.0).epsilon(1e-9));
      // Reactive droop consistency at the settled point.
      CHECK(std::abs(out.v_od_ref - init.setpoints.v_ref) < 1e-9);
    }
  }

  TEST_CASE("droop initialization aligns the frame with the PCC voltage") {
    FilterParams filt;
    auto op = steady_state_solve(GridParams{}, filt, LoadParams{}, 1.0, 1.0);
    auto init = init_controller_state(ControllerSpec::defaults(ControllerKind::Droop), op.state, LoadParams{},
                                      op.v_inv, kBase, filt);
    CHECK(init.state.theta == doctest::Approx(std::arg(op.state.v_o)).epsilon(1e-12));
    CHECK(std::abs(init.state.c_pi) > 0.0);
  }

  TEST_CASE("null operating point leaves every state at zero") {
    FilterParams filt;
    filt.r_f = 0.0;
    auto op = steady_state_solve(GridParams{}, filt, LoadParams{}, 0.0, 1.0);
    auto init = init_controller_state(ControllerSpec::defaults(ControllerKind::Droop), op.state, LoadParams{},
                                      op.v_inv, kBase, filt);
    CHECK(std::abs(init.state.theta) < 1e-12);
    CHECK(std::abs(init.state.v_pi) < 1e-12);
    CHECK(std::abs(init.state.c_pi) < 1e-12);
    CHECK(init.state.omega_dev == 0.0);
  }

  TEST_CASE("missing integral action is reported as infeasible") {
    FilterParams filt;
    auto op = steady_state_solve(GridParams{}, filt, LoadParams{}, 1.0, 1.0);
    auto spec = ControllerSpec::defaults(ControllerKind::Droop);
    std::get<DroopControl>(spec.law).inner.k_ic = 0.0;
    CHECK_THROWS_AS(init_controller_state(spec, op.state, LoadParams{}, op.v_inv, kBase, filt), InitInfeasible);
    auto pr = ControllerSpec::defaults(ControllerKind::ProportionalResonant);
    std::get<PrControl>(pr.law).pr.omega_c = 5.0;
    CHECK_THROWS_AS(init_controller_state(pr, op.state, LoadParams{}, op.v_inv, kBase, filt), InitInfeasible);
  }

  TEST_CASE("gain validation") {
    auto spec = ControllerSpec::defaults(ControllerKind::VsmInner);
    CHECK_NOTHROW(spec.validate());
    std::get<VsmInnerControl>(spec.law).power.j_inertia = 0.0;
    CHECK_THROWS(spec.validate());
    auto vadm = ControllerSpec::defaults(ControllerKind::VirtualAdmittance);
    std::get<VirtualAdmittanceControl>(vadm.law).admittance.l_v = 0.0;
    CHECK_THROWS(vadm.validate());
  }
}
