#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gfm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroImpedance : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

class InitInfeasible : public Error {
 public:
  using Error::Error;
};

class UnknownVariant : public Error {
 public:
  using Error::Error;
};

// Raised when a state component leaves the admissible range during integration.
// Carries the time of divergence and the last finite state for post-mortem.
class Diverged : public Error {
 public:
  Diverged(const std::string& what, double time, std::vector<double> state)
      : Error(what), time_(time), state_(std::move(state)) {}
  double time() const { return time_; }
  const std::vector<double>& state() const { return state_; }

 private:
  double time_;
  std::vector<double> state_;
};

class NotAnEquilibrium : public Error {
 public:
  NotAnEquilibrium(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class EmptyWindow : public Error {
 public:
  using Error::Error;
};

class DegenerateBaseline : public Error {
 public:
  using Error::Error;
};

}  // namespace gfm
