#include "gfm/simulator.hpp"

#include <algorithm>
#include <stdexcept>

#include "gfm/parallel.hpp"

namespace gfm {

namespace {

constexpr ComplexPu kJ{0.0, 1.0};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

ComplexPu get(std::span<const double> x, int at) { return {x[at], x[at + 1]}; }

void put(std::span<double> x, int at, ComplexPu v) {
  x[at] = v.real();
  x[at + 1] = v.imag();
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

void apply_event(const Event& event, SystemParams& sys, Setpoints& sp) {
  std::visit(Overloaded{
                 [](const NoEvent&) {},
                 [&](const LoadStep& e) {
                   sys.load.p_load = e.p_load;
                   sys.load = apply_load_switch(sys.load, true);
                 },
                 [&](const PhaseJump& e) { sys.grid = apply_phase_jump(sys.grid, e.delta); },
                 [&](const SetpointStep& e) { sp.p_ref += e.dp; },
             },
             event);
}

}  // namespace

std::string event_name(const Event& e) {
  return std::visit(Overloaded{
                        [](const NoEvent&) { return std::string("none"); },
                        [](const LoadStep&) { return std::string("load-step"); },
                        [](const PhaseJump&) { return std::string("phase-jump"); },
                        [](const SetpointStep&) { return std::string("p-step"); },
                    },
                    e);
}

void ScenarioSpec::validate() const {
  if (!(dt > 0.0) || dt > 2e-4) {
    throw std::invalid_argument("dt must lie in (0, 2e-4] s");
  }
  if (!(duration > 0.0) || !(event_time > 0.0) || !(event_time < duration)) {
    throw std::invalid_argument("event_time must lie inside (0, duration)");
  }
  if (decimation < 1) {
    throw std::invalid_argument("decimation must be at least 1");
  }
  if (!std::isfinite(targets.p) || !(targets.v_pcc > 0.0)) {
    throw std::invalid_argument("operating targets need finite p and positive v_pcc");
  }
  system.validate();
  controller.validate();
}

StateLayout StateLayout::for_variant(ControllerKind kind, bool actuation_lag) {
  StateLayout l;
  int next = 6;
  auto take = [&](int width) {
    const int at = next;
    next += width;
    return at;
  };
  if (actuation_lag) l.v_act = take(2);
  l.theta = take(1);
  switch (kind) {
    case ControllerKind::Droop:
      l.v_pi = take(2);
      l.c_pi = take(2);
      break;
    case ControllerKind::VsmOuter:
      l.omega_dev = take(1);
      break;
    case ControllerKind::VsmInner:
      l.omega_dev = take(1);
      l.v_pi = take(2);
      l.c_pi = take(2);
      break;
    case ControllerKind::VirtualAdmittance:
      l.omega_dev = take(1);
      l.i_y = take(2);
      l.c_pi = take(2);
      break;
    case ControllerKind::ProportionalResonant:
      l.omega_dev = take(1);
      l.pr_x1 = take(2);
      l.pr_x2 = take(2);
      break;
  }
  l.size = static_cast<std::size_t>(next);
  return l;
}

ClosedLoopModel::ClosedLoopModel(ControllerSpec spec, SystemParams system, Setpoints setpoints)
    : spec_(std::move(spec)),
      system_(std::move(system)),
      setpoints_(setpoints),
      layout_(StateLayout::for_variant(spec_.kind(), system_.actuation_lag > 0.0)) {}

std::vector<double> ClosedLoopModel::pack(const SimState& s) const {
  std::vector<double> x(layout_.size, 0.0);
  std::span<double> v(x);
  put(v, layout_.i_l, s.network.i_l);
  put(v, layout_.v_o, s.network.v_o);
  put(v, layout_.i_g, s.network.i_g);
  if (layout_.v_act >= 0) put(v, layout_.v_act, s.v_act);
  v[layout_.theta] = s.controller.theta;
  if (layout_.omega_dev >= 0) v[layout_.omega_dev] = s.controller.omega_dev;
  if (layout_.v_pi >= 0) put(v, layout_.v_pi, s.controller.v_pi);
  if (layout_.c_pi >= 0) put(v, layout_.c_pi, s.controller.c_pi);
  if (layout_.i_y >= 0) put(v, layout_.i_y, s.controller.i_y);
  if (layout_.pr_x1 >= 0) put(v, layout_.pr_x1, s.controller.pr_x1);
  if (layout_.pr_x2 >= 0) put(v, layout_.pr_x2, s.controller.pr_x2);
  return x;
}

SimState ClosedLoopModel::unpack(std::span<const double> x, double t) const {
  SimState s;
  s.t = t;
  s.network.i_l = get(x, layout_.i_l);
  s.network.v_o = get(x, layout_.v_o);
  s.network.i_g = get(x, layout_.i_g);
  if (layout_.v_act >= 0) s.v_act = get(x, layout_.v_act);
  s.controller.theta = x[layout_.theta];
  if (layout_.omega_dev >= 0) s.controller.omega_dev = x[layout_.omega_dev];
  if (layout_.v_pi >= 0) s.controller.v_pi = get(x, layout_.v_pi);
  if (layout_.c_pi >= 0) s.controller.c_pi = get(x, layout_.c_pi);
  if (layout_.i_y >= 0) s.controller.i_y = get(x, layout_.i_y);
  if (layout_.pr_x1 >= 0) s.controller.pr_x1 = get(x, layout_.pr_x1);
  if (layout_.pr_x2 >= 0) s.controller.pr_x2 = get(x, layout_.pr_x2);
  return s;
}

ClosedLoopModel::Evaluation ClosedLoopModel::evaluate(double t, std::span<const double> x) const {
  Evaluation ev;
  ev.state = unpack(x, t);
  ev.meas = measure(t, ev.state.network, system_.load);
  ev.ctrl = controller_step(spec_, ev.meas, ev.state.controller, setpoints_, system_.base, system_.filter);
  ev.v_terminal = layout_.v_act >= 0 ? ev.state.v_act : ev.ctrl.v_inv;
  return ev;
}

void ClosedLoopModel::derivatives(double t, std::span<const double> x, std::span<double> dx) const {
  const Evaluation ev = evaluate(t, x);
  const NetworkState dn = network_derivatives(ev.state.network, ev.v_terminal, system_.grid, system_.filter,
                                              system_.load, system_.base);
  std::fill(dx.begin(), dx.end(), 0.0);
  put(dx, layout_.i_l, dn.i_l);
  put(dx, layout_.v_o, dn.v_o);
  put(dx, layout_.i_g, dn.i_g);
  if (layout_.v_act >= 0) {
    put(dx, layout_.v_act,
        actuation_lag_derivative(ev.state.v_act, ev.ctrl.v_inv, system_.actuation_lag, system_.base));
  }
  const ControllerState& d = ev.ctrl.derivative;
  dx[layout_.theta] = d.theta;
  if (layout_.omega_dev >= 0) dx[layout_.omega_dev] = d.omega_dev;
  if (layout_.v_pi >= 0) put(dx, layout_.v_pi, d.v_pi);
  if (layout_.c_pi >= 0) put(dx, layout_.c_pi, d.c_pi);
  if (layout_.i_y >= 0) put(dx, layout_.i_y, d.i_y);
  if (layout_.pr_x1 >= 0) put(dx, layout_.pr_x1, d.pr_x1);
  if (layout_.pr_x2 >= 0) put(dx, layout_.pr_x2, d.pr_x2);
}

Channels ClosedLoopModel::channels(double t, std::span<const double> x) const {
  const Evaluation ev = evaluate(t, x);
  const double theta = ev.state.controller.theta;
  const ComplexPu v_dq = rotate_to_frame(ev.meas.v_o, theta);
  const ComplexPu i_dq = rotate_to_frame(ev.meas.i_o, theta);
  Channels c;
  c.p = ev.meas.p;
  c.q = ev.meas.q;
  c.f_ctrl = ev.ctrl.omega / (2.0 * kPi);
  c.v_od = v_dq.real();
  c.v_oq = v_dq.imag();
  c.v_mag = std::abs(ev.meas.v_o);
  c.i_od = i_dq.real();
  c.i_oq = i_dq.imag();
  c.i_mag = std::abs(ev.meas.i_o);
  return c;
}

std::vector<double> ClosedLoopModel::to_rotating(double t, std::span<const double> x) const {
  std::vector<double> y(x.begin(), x.end());
  if (layout_.pr_x1 >= 0) {
    const double frame = system_.base.omega_n() * t;
    put(y, layout_.pr_x1, rotate_to_frame(get(x, layout_.pr_x1), frame));
    put(y, layout_.pr_x2, rotate_to_frame(get(x, layout_.pr_x2), frame));
  }
  return y;
}

std::vector<double> ClosedLoopModel::from_rotating(double t, std::span<const double> y) const {
  std::vector<double> x(y.begin(), y.end());
  if (layout_.pr_x1 >= 0) {
    const double frame = system_.base.omega_n() * t;
    put(x, layout_.pr_x1, rotate_from_frame(get(y, layout_.pr_x1), frame));
    put(x, layout_.pr_x2, rotate_from_frame(get(y, layout_.pr_x2), frame));
  }
  return x;
}

void ClosedLoopModel::rotating_derivatives(std::span<const double> y, std::span<double> dy) const {
  derivatives(0.0, y, dy);
  if (layout_.pr_x1 >= 0) {
    const double w = system_.base.omega_n();
    put(dy, layout_.pr_x1, get(dy, layout_.pr_x1) - kJ * w * get(y, layout_.pr_x1));
    put(dy, layout_.pr_x2, get(dy, layout_.pr_x2) - kJ * w * get(y, layout_.pr_x2));
  }
}

void TimeSeries::push(double time, const Channels& c) {
  t.push_back(time);
  p.push_back(c.p);
  q.push_back(c.q);
  f_ctrl.push_back(c.f_ctrl);
  v_od.push_back(c.v_od);
  v_oq.push_back(c.v_oq);
  v_mag.push_back(c.v_mag);
  i_od.push_back(c.i_od);
  i_oq.push_back(c.i_oq);
  i_mag.push_back(c.i_mag);
}

const std::vector<std::string>& TimeSeries::channel_names() {
  static const std::vector<std::string> names{"t",    "p",    "q",    "f_ctrl", "v_od",
                                              "v_oq", "v_mag", "i_od", "i_oq",  "i_mag"};
  return names;
}

const std::vector<double>& TimeSeries::channel(const std::string& name) const {
  if (name == "t") return t;
  if (name == "p") return p;
  if (name == "q") return q;
  if (name == "f_ctrl") return f_ctrl;
  if (name == "v_od") return v_od;
  if (name == "v_oq") return v_oq;
  if (name == "v_mag") return v_mag;
  if (name == "i_od") return i_od;
  if (name == "i_oq") return i_oq;
  if (name == "i_mag") return i_mag;
  throw std::out_of_range("unknown channel '" + name + "'");
}

Equilibrium initialize(const ScenarioSpec& spec) {
  const SystemParams& sys = spec.system;
  Equilibrium eq;
  eq.op = steady_state_solve(sys.grid, sys.filter, sys.load, spec.targets.p, spec.targets.v_pcc);

  // With a lag the command must lead the terminal voltage: 0 = (v_cmd - v)/tau - j w v.
  ComplexPu v_cmd = eq.op.v_inv;
  if (sys.actuation_lag > 0.0) {
    v_cmd = eq.op.v_inv + sys.actuation_lag * kJ * sys.base.omega_n() * eq.op.v_inv;
  }
  const ControllerInit init =
      init_controller_state(spec.controller, eq.op.state, sys.load, v_cmd, sys.base, sys.filter, 0.0);
  eq.setpoints = init.setpoints;
  eq.state.network = eq.op.state;
  eq.state.v_act = eq.op.v_inv;
  eq.state.controller = init.state;
  eq.state.t = 0.0;

  const ClosedLoopModel model(spec.controller, sys, eq.setpoints);
  const std::vector<double> y = model.to_rotating(0.0, model.pack(eq.state));
  std::vector<double> dy(y.size());
  model.rotating_derivatives(y, dy);
  eq.residual = norm2(dy);
  return eq;
}

ScenarioResult run_scenario(const ScenarioSpec& spec, const RunOptions& opts) {
  spec.validate();
  ScenarioResult result;
  result.equilibrium = initialize(spec);
  if (!(result.equilibrium.residual < opts.equilibrium_tolerance)) {
    throw NotAnEquilibrium("initial state is not an equilibrium (derivative norm " +
                               std::to_string(result.equilibrium.residual) + ")",
                           result.equilibrium.residual);
  }

  ClosedLoopModel model(spec.controller, spec.system, result.equilibrium.setpoints);
  std::vector<double> x = model.pack(result.equilibrium.state);
  const std::size_t n_steps = spec.steps();
  const std::size_t k_event = spec.event_step();
  const double dt = spec.dt;

  result.trace.dt = dt * static_cast<double>(spec.decimation);
  const std::size_t n_samples = n_steps / spec.decimation + 1;
  for (auto* ch : {&result.trace.t, &result.trace.p, &result.trace.q, &result.trace.f_ctrl, &result.trace.v_od,
                   &result.trace.v_oq, &result.trace.v_mag, &result.trace.i_od, &result.trace.i_oq,
                   &result.trace.i_mag}) {
    ch->reserve(n_samples);
  }

  auto f = [&model](double t, std::span<const double> s, std::span<double> ds) { model.derivatives(t, s, ds); };
  Rk4Workspace ws;
  for (std::size_t k = 0; k <= n_steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (k == k_event) {
      apply_event(spec.event, model.system(), model.setpoints());
    }
    if (k % spec.decimation == 0) {
      result.trace.push(t, model.channels(t, x));
      if (opts.record_states) {
        result.states.push_back(x);
      }
    }
    if (k < n_steps) {
      rk4_step(x, t, dt, f, ws);
    }
  }
  result.post_event_system = model.system();
  result.post_event_setpoints = model.setpoints();
  return result;
}

double max_power_balance_residual(const ScenarioSpec& spec, const ScenarioResult& result) {
  if (result.states.size() != result.trace.size()) {
    throw std::invalid_argument("power balance check needs a run with recorded states");
  }
  const ClosedLoopModel pre(spec.controller, spec.system, result.equilibrium.setpoints);
  const ClosedLoopModel post(spec.controller, result.post_event_system, result.post_event_setpoints);
  const std::size_t k_event = spec.event_step();
  double worst = 0.0;
  for (std::size_t i = 0; i < result.states.size(); ++i) {
    const std::size_t step = i * spec.decimation;
    const ClosedLoopModel& model = step >= k_event ? post : pre;
    const double t = result.trace.t[i];
    const auto ev = model.evaluate(t, result.states[i]);
    const NetworkState dn = network_derivatives(ev.state.network, ev.v_terminal, model.system().grid,
                                                model.system().filter, model.system().load, model.system().base);
    const PowerBalance b = power_balance(ev.state.network, dn, ev.v_terminal, model.system());
    worst = std::max(worst, std::abs(b.residual()));
  }
  return worst;
}

namespace {

std::vector<double> linear_outputs(const ClosedLoopModel& model, std::span<const double> y) {
  const Channels c = model.channels(0.0, y);
  return {c.p, c.q, c.f_ctrl, c.v_mag, c.i_mag};
}

}  // namespace

Linearization linearize(const ScenarioSpec& spec, const Equilibrium& eq, double tolerance) {
  const ClosedLoopModel model(spec.controller, spec.system, eq.setpoints);
  const std::vector<double> y0 = model.to_rotating(eq.state.t, model.pack(eq.state));
  const auto n = static_cast<Eigen::Index>(y0.size());

  std::vector<double> dy0(y0.size());
  model.rotating_derivatives(y0, dy0);
  const double residual = norm2(dy0);
  if (!(residual < tolerance)) {
    throw NotAnEquilibrium("linearization point is not an equilibrium (derivative norm " +
                               std::to_string(residual) + ")",
                           residual);
  }

  Linearization lin;
  lin.y0 = Eigen::Map<const Eigen::VectorXd>(y0.data(), n);
  const VectorField field = [&model](std::span<const double> y, std::span<double> dy) {
    model.rotating_derivatives(y, dy);
  };
  lin.a = finite_difference_jacobian(field, lin.y0, 1e-6);
  const Eigen::MatrixXd coarse = finite_difference_jacobian(field, lin.y0, 1e-5);
  lin.richardson_discrepancy = (lin.a - coarse).cwiseAbs().maxCoeff() / std::max(1.0, lin.a.cwiseAbs().maxCoeff());

  // Input: active power reference.
  const double h = 1e-6;
  ClosedLoopModel plus = model;
  ClosedLoopModel minus = model;
  plus.setpoints().p_ref += h;
  minus.setpoints().p_ref -= h;
  std::vector<double> fp(y0.size()), fm(y0.size());
  plus.rotating_derivatives(y0, fp);
  minus.rotating_derivatives(y0, fm);
  lin.b.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) lin.b(i) = (fp[i] - fm[i]) / (2.0 * h);

  constexpr Eigen::Index kOut = 5;
  lin.c.resize(kOut, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    std::vector<double> yp = y0, ym = y0;
    yp[k] += h;
    ym[k] -= h;
    const auto op = linear_outputs(model, yp);
    const auto om = linear_outputs(model, ym);
    for (Eigen::Index i = 0; i < kOut; ++i) lin.c(i, k) = (op[i] - om[i]) / (2.0 * h);
  }
  const auto zp = linear_outputs(plus, y0);
  const auto zm = linear_outputs(minus, y0);
  lin.d.resize(kOut);
  for (Eigen::Index i = 0; i < kOut; ++i) lin.d(i) = (zp[i] - zm[i]) / (2.0 * h);
  return lin;
}

std::vector<Mode> eigen_modes(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, true);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigenvalue decomposition failed");
  }
  const Eigen::MatrixXcd ac = a.cast<std::complex<double>>();
  const double a_norm = std::max(ac.norm(), 1e-300);
  std::vector<Mode> modes;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Mode m;
    m.lambda = solver.eigenvalues()(i);
    const Eigen::VectorXcd v = solver.eigenvectors().col(i);
    m.residual = (ac * v - m.lambda * v).norm() / (a_norm * v.norm());
    const double mag = std::abs(m.lambda);
    m.damping_ratio = mag > 0.0 ? -m.lambda.real() / mag : 1.0;
    m.freq_hz = std::abs(m.lambda.imag()) / (2.0 * kPi);
    modes.push_back(m);
  }
  std::sort(modes.begin(), modes.end(), [](const Mode& l, const Mode& r) {
    if (l.lambda.real() != r.lambda.real()) return l.lambda.real() > r.lambda.real();
    return l.lambda.imag() > r.lambda.imag();
  });
  return modes;
}

Mode dominant_oscillatory_mode(const std::vector<Mode>& modes, double min_freq_hz) {
  const Mode* best = nullptr;
  for (const Mode& m : modes) {
    if (m.freq_hz > min_freq_hz && (best == nullptr || m.damping_ratio < best->damping_ratio)) {
      best = &m;
    }
  }
  if (best == nullptr) {
    throw std::runtime_error("no oscillatory mode above " + std::to_string(min_freq_hz) + " Hz");
  }
  return *best;
}

SmallSignalReport small_signal_oracle(const ScenarioSpec& spec, double perturbation, double window) {
  ScenarioSpec s = spec;
  s.event = SetpointStep{perturbation};
  s.event_time = std::min(spec.event_time, 0.1);
  s.duration = s.event_time + window;
  s.decimation = 1;
  const ScenarioResult nl = run_scenario(s);
  const Linearization lin = linearize(s, nl.equilibrium);

  const ClosedLoopModel model(s.controller, s.system, nl.equilibrium.setpoints);
  const auto z0 = linear_outputs(model, std::vector<double>(lin.y0.data(), lin.y0.data() + lin.y0.size()));

  const std::size_t k_event = s.event_step();
  const std::size_t n_steps = s.steps();
  const Eigen::Index n = lin.y0.size();
  std::vector<double> dy(static_cast<std::size_t>(n), 0.0);
  auto f = [&](double, std::span<const double> x, std::span<double> dx) {
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
    Eigen::Map<Eigen::VectorXd> dxv(dx.data(), n);
    dxv = lin.a * xv + lin.b * perturbation;
  };

  constexpr std::size_t kOut = 5;
  std::vector<double> err(kOut, 0.0), ref(kOut, 0.0);
  const std::vector<const std::vector<double>*> traces{&nl.trace.p, &nl.trace.q, &nl.trace.f_ctrl,
                                                       &nl.trace.v_mag, &nl.trace.i_mag};
  Rk4Workspace ws;
  for (std::size_t k = k_event; k <= n_steps; ++k) {
    const Eigen::Map<const Eigen::VectorXd> dyv(dy.data(), n);
    const Eigen::VectorXd dz = lin.c * dyv + lin.d * perturbation;
    for (std::size_t c = 0; c < kOut; ++c) {
      const double dz_nl = (*traces[c])[k] - z0[c];
      err[c] += (dz_nl - dz(static_cast<Eigen::Index>(c))) * (dz_nl - dz(static_cast<Eigen::Index>(c)));
      ref[c] += dz(static_cast<Eigen::Index>(c)) * dz(static_cast<Eigen::Index>(c));
    }
    if (k < n_steps) {
      rk4_step(dy, static_cast<double>(k) * s.dt, s.dt, f, ws);
    }
  }

  SmallSignalReport report;
  report.perturbation = perturbation;
  report.within_linear_range = std::abs(perturbation) <= 1e-3;
  double err_total = 0.0, ref_total = 0.0;
  for (std::size_t c = 0; c < kOut; ++c) {
    report.per_channel.push_back(ref[c] > 0.0 ? std::sqrt(err[c] / ref[c]) : std::sqrt(err[c]));
    err_total += err[c];
    ref_total += ref[c];
  }
  report.rms_relative_deviation = ref_total > 0.0 ? std::sqrt(err_total / ref_total) : std::sqrt(err_total);
  return report;
}

}  // namespace gfm
