#pragma once

// Data-parallel kernels. Each has a serial reference path kept for testing;
// both paths perform identical floating-point work per element, so results
// match bit for bit.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gfm/simulator.hpp"

namespace gfm {

enum class Execution { Serial, Parallel };

int max_threads();

using VectorField = std::function<void(std::span<const double>, std::span<double>)>;

/// Central differences, one column per state: (f(y + h e_k) - f(y - h e_k)) / 2h.
Eigen::MatrixXd finite_difference_jacobian(const VectorField& f, const Eigen::VectorXd& y0, double h,
                                           Execution exec = Execution::Parallel);

/// Outcome of one scenario in a batch. Failures are captured, not thrown.
struct RunOutcome {
  enum class Status { Ok, NoConvergence, Diverged, Error };
  Status status = Status::Ok;
  std::optional<ScenarioResult> result;
  std::string message;
  double diverged_at = 0.0;
};

std::vector<RunOutcome> run_matrix(const std::vector<ScenarioSpec>& specs, Execution exec = Execution::Parallel,
                                   const RunOptions& opts = {});

}  // namespace gfm
