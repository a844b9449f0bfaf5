// Adaptive explicit Runge-Kutta core (Dormand-Prince 5(4), PI step control).
//
// This is the one integrator in the library; the damped-system driver and
// the 1D worst-case-curve solver both sit on top of it. Dense output is the
// caller's business: the per-step callback hands over both endpoints and
// their derivatives, which is exactly what cubic Hermite interpolation
// needs.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "klflow/errors.hpp"

namespace klflow {

using OdeRhs =
    std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct OdeOptions {
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  // Steps shorter than this abort the run (thrown as StepUnderflowError).
  double h_min = 0.0;
  double h_max = 0.0;  // 0 means unrestricted
  std::uint64_t max_steps = 50000000;
};

struct StepUnderflowError : Error {
  double t;
  explicit StepUnderflowError(double t_)
      : Error("step size underflow at t = " + std::to_string(t_)), t(t_) {}
};

struct StepLimitError : Error {
  double t;
  explicit StepLimitError(double t_)
      : Error("step budget exhausted at t = " + std::to_string(t_)), t(t_) {}
};

enum class StepControl { kContinue, kStop };

// Called after each accepted step with the step's endpoints and slopes.
using StepCallback = std::function<StepControl(
    double t0, const Eigen::VectorXd& y0, const Eigen::VectorXd& f0, double t1,
    const Eigen::VectorXd& y1, const Eigen::VectorXd& f1)>;

// Integrates y' = f(t, y) from (t0, y0) until t_end or until the callback
// stops the run. The callback sees every accepted step exactly once.
void integrate_adaptive(const OdeRhs& f, double t0,
                        const Eigen::VectorXd& y0, double t_end,
                        const OdeOptions& opts, const StepCallback& cb);

// Cubic Hermite interpolation on one step.
Eigen::VectorXd hermite(double t0, const Eigen::VectorXd& y0,
                        const Eigen::VectorXd& f0, double t1,
                        const Eigen::VectorXd& y1, const Eigen::VectorXd& f1,
                        double t);

}  // namespace klflow
