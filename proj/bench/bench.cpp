// Serial reference path versus the OpenMP path for the two parallel kernels.

#include <benchmark/benchmark.h>

#include <vector>

#include "gfm/parallel.hpp"

using namespace gfm;

namespace {

std::vector<ScenarioSpec> matrix_specs(double duration) {
  std::vector<ScenarioSpec> specs;
  for (auto kind : kAllControllers) {
    for (const Event& ev : {Event{LoadStep{}}, Event{PhaseJump{}}}) {
      ScenarioSpec s;
      s.controller = ControllerSpec::defaults(kind);
      s.event = ev;
      s.duration = duration;
      s.event_time = duration / 2.0;
      specs.push_back(s);
    }
  }
  return specs;
}

void run_matrix_bench(benchmark::State& state, Execution exec) {
  const auto specs = matrix_specs(0.5);
  for (auto _ : state) {
    auto out = run_matrix(specs, exec);
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["scenarios"] = static_cast<double>(specs.size());
  state.counters["threads"] = exec == Execution::Parallel ? max_threads() : 1;
}

void jacobian_bench(benchmark::State& state, Execution exec) {
  ScenarioSpec s;
  s.controller = ControllerSpec::defaults(ControllerKind::ProportionalResonant);
  const Equilibrium eq = initialize(s);
  const ClosedLoopModel model(s.controller, s.system, eq.setpoints);
  const auto y = model.to_rotating(0.0, model.pack(eq.state));
  const Eigen::VectorXd y0 = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  const VectorField f = [&model](std::span<const double> a, std::span<double> da) { model.rotating_derivatives(a, da); };
  for (auto _ : state) {
    Eigen::MatrixXd j = finite_difference_jacobian(f, y0, 1e-6, exec);
    benchmark::DoNotOptimize(j.data());
  }
  state.counters["columns"] = static_cast<double>(y.size());
  state.counters["threads"] = exec == Execution::Parallel ? max_threads() : 1;
}

}  // namespace

BENCHMARK_CAPTURE(run_matrix_bench, serial, Execution::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(run_matrix_bench, parallel, Execution::Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(jacobian_bench, serial, Execution::Serial)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(jacobian_bench, parallel, Execution::Parallel)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
