#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gfm/errors.hpp"
#include "gfm/network.hpp"
#include "gfm/parallel.hpp"

using namespace gfm;

namespace {

double norm(const NetworkState& d) {
  return std::sqrt(std::norm(d.i_l) + std::norm(d.v_o) + std::norm(d.i_g));
}

// Phasor solution of the circuit for a given converter voltage, computed by
// nodal analysis at the PCC.
struct Phasors {
  ComplexPu v_o, i_l, i_g, i_o;
  double p, q;
};
Phasors solve_circuit(ComplexPu v_inv, const GridParams& g, const FilterParams& f, const LoadParams& load) {
  const ComplexPu zf{f.r_f, f.l_f};
  const ComplexPu yl = load.connected ? ComplexPu(load.p_load, 0.0) : ComplexPu(0.0, 0.0);
  const ComplexPu vs = std::polar(g.v_mag, g.phase);
  const ComplexPu v_o = (v_inv / zf + vs / g.z_grid) / (1.0 / zf + ComplexPu(0.0, f.c_f) + yl + 1.0 / g.z_grid);
  Phasors out;
  out.v_o = v_o;
  out.i_l = (v_inv - v_o) / zf;
  out.i_g = (v_o - vs) / g.z_grid;
  out.i_o = out.i_g + yl * v_o;
  const ComplexPu s = v_o * std::conj(out.i_o);
  out.p = s.real();
  out.q = s.imag();
  return out;
}

}  // namespace

TEST_SUITE("network") {
  TEST_CASE("flat network has zero derivatives") {
    FilterParams f;
    f.r_f = 0.0;
    GridParams g;
    LoadParams load;
    NetworkState s{{0, 0}, {1, 0}, {0, 0}};
    // The capacitor draws j c_f v in the rotating frame; with i_l = j c_f v the node is balanced.
    s.i_l = ComplexPu(0.0, f.c_f);
    const ComplexPu v_inv = s.v_o + ComplexPu(0.0, f.l_f) * s.i_l;
    auto d = network_derivatives(s, v_inv, g, f, load, PerUnitBase{});
    CHECK(norm(d) < 1e-12);
  }

  TEST_CASE("flat network with zero capacitance is exactly at rest") {
    FilterParams f;
    f.r_f = 0.0;
    f.c_f = 1e-300;  // validate() needs c_f > 0; the shunt current is negligible
    GridParams g;
    NetworkState s{{0, 0}, {1, 0}, {0, 0}};
    auto d = network_derivatives(s, {1, 0}, g, f, LoadParams{}, PerUnitBase{});
    CHECK(std::abs(d.i_l) == 0.0);
    CHECK(std::abs(d.i_g) == 0.0);
  }

  TEST_CASE("load switching changes the capacitor balance by the load current") {
    FilterParams f;
    GridParams g;
    PerUnitBase base;
    LoadParams off;
    LoadParams on = apply_load_switch(off, true);
    NetworkState s{{1, 0}, {1, 0}, {1, 0}};
    CHECK(std::abs(output_current(s, on) - output_current(s, off) - ComplexPu(0.2, 0.0)) < 1e-15);
    auto d0 = network_derivatives(s, {1, 0}, g, f, off, base);
    auto d1 = network_derivatives(s, {1, 0}, g, f, on, base);
    const double expected = -0.2 * base.omega_n() / f.c_f;
    CHECK((d1.v_o - d0.v_o).real() == doctest::Approx(expected).epsilon(1e-12));
    CHECK((d1.v_o - d0.v_o).imag() == doctest::Approx(0.0));
    CHECK(d1.i_l == d0.i_l);
    CHECK(d1.i_g == d0.i_g);
  }

  TEST_CASE("apply_load_switch is idempotent and a null load is inert") {
    LoadParams l;
    CHECK_FALSE(l.connected);
    auto a = apply_load_switch(l, true);
    CHECK(a.connected);
    CHECK(apply_load_switch(a, true) == a);
    LoadParams zero{0.0, false};
    auto z_on = apply_load_switch(zero, true);
    NetworkState s{{0.3, -0.1}, {0.98, 0.05}, {0.7, 0.2}};
    auto d0 = network_derivatives(s, {1.05, 0.2}, GridParams{}, FilterParams{}, zero, PerUnitBase{});
    auto d1 = network_derivatives(s, {1.05, 0.2}, GridParams{}, FilterParams{}, z_on, PerUnitBase{});
    CHECK(d0.i_l == d1.i_l);
    CHECK(d0.v_o == d1.v_o);
    CHECK(d0.i_g == d1.i_g);
  }

  TEST_CASE("apply_phase_jump") {
    GridParams g;
    CHECK(apply_phase_jump(g, kPi / 40.0).phase == kPi / 40.0);
    CHECK(apply_phase_jump(g, 0.0) == g);
    g.phase = 0.3;
    auto back = apply_phase_jump(apply_phase_jump(g, kPi / 40.0), -kPi / 40.0);
    CHECK(std::abs(back.phase - 0.3) < 1e-15);
  }

  TEST_CASE("steady state on the benchmark grid") {
    GridParams g;
    FilterParams f;
    LoadParams load;
    auto op = steady_state_solve(g, f, load, 1.0, 1.0);
    CHECK(op.p == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(op.state.v_o) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(op.residual < 1e-10);
    auto d = network_derivatives(op.state, op.v_inv, g, f, load, PerUnitBase{});
    CHECK(norm(d) < 1e-9);

    // Independent check: the nodal phasor solution for the returned v_inv.
    auto ph = solve_circuit(op.v_inv, g, f, load);
    CHECK(std::abs(ph.v_o - op.state.v_o) < 1e-9);
    CHECK(std::abs(ph.i_g - op.state.i_g) < 1e-9);
    CHECK(ph.q == doctest::Approx(op.q).epsilon(1e-9));
  }

  TEST_CASE("steady state agrees with a brute-force grid search") {
    GridParams g;
    FilterParams f;
    LoadParams load;
    auto op = steady_state_solve(g, f, load, 1.0, 1.0);

    // Zooming grid search over (|v_inv|, angle) minimising the target mismatch.
    double m_lo = 0.8, m_hi = 1.4, a_lo = 0.0, a_hi = 1.2;
    double best_m = 0, best_a = 0;
    for (int round = 0; round < 12; ++round) {
      double best = 1e300;
      const int n = 40;
      for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
          const double m = m_lo + (m_hi - m_lo) * i / n;
          const double a = a_lo + (a_hi - a_lo) * j / n;
          auto ph = solve_circuit(std::polar(m, a), g, f, load);
          const double e = std::pow(ph.p - 1.0, 2) + std::pow(std::abs(ph.v_o) - 1.0, 2);
          if (e < best) {
            best = e;
            best_m = m;
            best_a = a;
          }
        }
      }
      const double dm = (m_hi - m_lo) / 8, da = (a_hi - a_lo) / 8;
      m_lo = best_m - dm;
      m_hi = best_m + dm;
      a_lo = best_a - da;
      a_hi = best_a + da;
    }
    CHECK(std::abs(op.v_inv) == doctest::Approx(best_m).epsilon(1e-6));
    CHECK(std::arg(op.v_inv) == doctest::Approx(best_a).epsilon(1e-6));
  }

  TEST_CASE("no-flow operating point") {
    GridParams g;
    FilterParams f;
    auto op = steady_state_solve(g, f, LoadParams{}, 0.0, 1.0);
    CHECK(std::abs(op.state.i_g) < 1e-10);
    CHECK(std::abs(op.state.v_o - g.source_voltage()) < 1e-10);
    CHECK(std::abs(output_current(op.state, LoadParams{})) < 1e-10);
    // Only the capacitor current flows through the filter.
    const ComplexPu expected = op.state.v_o * ComplexPu(1.0 - f.l_f * f.c_f, f.r_f * f.c_f);
    CHECK(std::abs(op.v_inv - expected) < 1e-10);
  }

  TEST_CASE("infeasible power target is reported") {
    CHECK_THROWS_AS(steady_state_solve(GridParams{}, FilterParams{}, LoadParams{}, 5.0, 1.0), NoConvergence);
  }

  TEST_CASE("steady state is frame consistent") {
    GridParams g0, g1;
    g1.phase = 0.7;
    FilterParams f;
    auto a = steady_state_solve(g0, f, LoadParams{}, 1.0, 1.0);
    auto b = steady_state_solve(g1, f, LoadParams{}, 1.0, 1.0);
    CHECK(b.p == doctest::Approx(a.p).epsilon(1e-10));
    CHECK(b.q == doctest::Approx(a.q).epsilon(1e-10));
    CHECK(std::abs(b.v_inv - a.v_inv * std::polar(1.0, 0.7)) < 1e-10);
  }

  TEST_CASE("power balance holds for arbitrary states") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    SystemParams sys;
    for (int k = 0; k < 200; ++k) {
      sys.load.connected = (k % 2) == 0;
      sys.grid.phase = u(rng);
      NetworkState s{{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}};
      ComplexPu v_inv{u(rng), u(rng)};
      auto d = network_derivatives(s, v_inv, sys.grid, sys.filter, sys.load, sys.base);
      auto pb = power_balance(s, d, v_inv, sys);
      CHECK(std::abs(pb.residual()) < 1e-11);
    }
  }

  TEST_CASE("frozen-input network poles match the analytic RLC poles") {
    GridParams g;
    FilterParams f;
    PerUnitBase base;
    const double w = base.omega_n();

    auto field = [&](std::span<const double> y, std::span<double> dy) {
      NetworkState s{{y[0], y[1]}, {y[2], y[3]}, {y[4], y[5]}};
      auto d = network_derivatives(s, {1.0, 0.0}, g, f, LoadParams{}, base);
      dy[0] = d.i_l.real();
      dy[1] = d.i_l.imag();
      dy[2] = d.v_o.real();
      dy[3] = d.v_o.imag();
      dy[4] = d.i_g.real();
      dy[5] = d.i_g.imag();
    };
    Eigen::VectorXd y0 = Eigen::VectorXd::Zero(6);
    auto a = finite_difference_jacobian(field, y0, 1e-6, Execution::Serial);
    Eigen::EigenSolver<Eigen::MatrixXd> es(a);
    std::vector<std::complex<double>> got(es.eigenvalues().data(), es.eigenvalues().data() + 6);

    // Stationary-frame nodal polynomial in physical inductances L = l / omega_n:
    // C Lf Lg s^3 + C (rf Lg + rg Lf) s^2 + (Lf + Lg + C rf rg) s + (rf + rg) = 0.
    const double lf = f.l_f / w, lg = g.z_grid.imag() / w, c = f.c_f / w;
    const double rf = f.r_f, rg = g.z_grid.real();
    const double a3 = c * lf * lg, a2 = c * (rf * lg + rg * lf), a1 = lf + lg + c * rf * rg, a0 = rf + rg;
    Eigen::Matrix3d comp;
    comp << -a2 / a3, -a1 / a3, -a0 / a3, 1, 0, 0, 0, 1, 0;
    Eigen::EigenSolver<Eigen::Matrix3d> cs(comp);
    std::vector<std::complex<double>> expected;
    for (int k = 0; k < 3; ++k) {
      auto s = cs.eigenvalues()[k];
      expected.push_back(s + std::complex<double>(0, w));
      expected.push_back(s - std::complex<double>(0, w));
    }
    for (const auto& e : expected) {
      double best = 1e300;
      for (const auto& v : got) best = std::min(best, std::abs(v - e));
      CHECK(best < 1e-3 * std::abs(e));
    }
  }
}
