#include "gfm/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gfm {

namespace {

void jacobian_column(const VectorField& f, const Eigen::VectorXd& y0, double h, Eigen::Index k,
                     Eigen::MatrixXd& jac) {
  const auto n = y0.size();
  std::vector<double> yp(y0.data(), y0.data() + n);
  std::vector<double> ym = yp;
  yp[k] += h;
  ym[k] -= h;
  std::vector<double> fp(n), fm(n);
  f(yp, fp);
  f(ym, fm);
  for (Eigen::Index i = 0; i < n; ++i) {
    jac(i, k) = (fp[i] - fm[i]) / (2.0 * h);
  }
}

RunOutcome run_one(const ScenarioSpec& spec, const RunOptions& opts) {
  RunOutcome out;
  try {
    out.result = run_scenario(spec, opts);
  } catch (const Diverged& e) {
    out.status = RunOutcome::Status::Diverged;
    out.message = e.what();
    out.diverged_at = e.time();
  } catch (const NoConvergence& e) {
    out.status = RunOutcome::Status::NoConvergence;
    out.message = e.what();
  } catch (const InitInfeasible& e) {
    out.status = RunOutcome::Status::NoConvergence;
    out.message = e.what();
  } catch (const NotAnEquilibrium& e) {
    out.status = RunOutcome::Status::NoConvergence;
    out.message = e.what();
  } catch (const std::exception& e) {
    out.status = RunOutcome::Status::Error;
    out.message = e.what();
  }
  return out;
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

Eigen::MatrixXd finite_difference_jacobian(const VectorField& f, const Eigen::VectorXd& y0, double h,
                                           Execution exec) {
  const Eigen::Index n = y0.size();
  Eigen::MatrixXd jac(n, n);
  if (exec == Execution::Serial) {
    for (Eigen::Index k = 0; k < n; ++k) {
      jacobian_column(f, y0, h, k, jac);
    }
    return jac;
  }
#pragma omp parallel for schedule(static)
  for (Eigen::Index k = 0; k < n; ++k) {
    jacobian_column(f, y0, h, k, jac);
  }
  return jac;
}

std::vector<RunOutcome> run_matrix(const std::vector<ScenarioSpec>& specs, Execution exec, const RunOptions& opts) {
  const auto n = static_cast<std::ptrdiff_t>(specs.size());
  std::vector<RunOutcome> out(specs.size());
  if (exec == Execution::Serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      out[i] = run_one(specs[i], opts);
    }
    return out;
  }
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = run_one(specs[i], opts);
  }
  return out;
}

}  // namespace gfm
