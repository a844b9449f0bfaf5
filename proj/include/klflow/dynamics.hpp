// Trajectories of u'' + gamma u' + grad G(u) = 0 (and of the plain gradient
// flow u' = -grad G(u), which several diagnostics use as a reference).
//
// The integrator records every accepted step together with its derivative,
// so dense output is cubic Hermite interpolation with no extra right-hand
// side evaluations. Classification follows the asymptotic alternative:
// either the state settles onto a rest point (velocity and gradient small
// over a trailing window) or it leaves every bounded set.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "klflow/errors.hpp"
#include "klflow/potential.hpp"

namespace klflow {

enum class FlowKind { kSecondOrder, kGradientFlow };

struct DynamicsConfig {
  double gamma = 1.0;
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  double t_max = 1e4;
  double r_escape = 1e6;
  // convergence detector: both thresholds must hold over the trailing window
  double conv_tol_v = 1e-8;
  double conv_tol_g = 1e-8;
  double conv_window = 1.0;
  FlowKind mode = FlowKind::kSecondOrder;
  std::uint64_t max_steps = 20000000;
};

struct PhaseState {
  Eigen::VectorXd u;
  Eigen::VectorXd v;
};

struct Classification {
  enum Kind { kConverged, kEscaped, kUndetermined };
  Kind kind = kUndetermined;
  Eigen::VectorXd limit;  // final u; the limit estimate when converged
  double time = 0.0;      // detection time / escape time / horizon
};

class Trajectory {
 public:
  int dimension = 0;
  FlowKind mode = FlowKind::kSecondOrder;
  double gamma = 0.0;
  // per accepted step: time, stacked state, stacked state derivative
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;  // (u, v) stacked; u only in gradient-flow mode
  std::vector<Eigen::VectorXd> derivs;
  std::vector<double> energies;    // G + 0.5||v||^2, or G for gradient flow
  std::vector<double> grad_norms;  // ||grad G(u)||
  Classification classification;

  std::size_t size() const { return times.size(); }
  Eigen::VectorXd u_at(std::size_t i) const;
  Eigen::VectorXd v_at(std::size_t i) const;
  // dense output at any time inside the recorded range
  PhaseState sample(double t) const;
};

// Integration failure; carries whatever was computed before the abort.
struct IntegrationError : Error {
  Trajectory partial;
  double t = 0.0;
  IntegrationError(const std::string& msg, Trajectory partial_, double t_)
      : Error(msg), partial(std::move(partial_)), t(t_) {}
};

// Right-hand side of the phase-space system: (u, v)' = (v, -gamma v - grad G).
PhaseState second_order_field(const PotentialSpec& spec,
                              const DynamicsConfig& cfg,
                              const PhaseState& state);

// Integrates from (u0, v0) until convergence, escape, or cfg.t_max.
// v0 is ignored in gradient-flow mode. Steps below 1e-14 * t_max abort with
// IntegrationError.
Trajectory integrate(const PotentialSpec& spec, const DynamicsConfig& cfg,
                     const Eigen::VectorXd& u0, const Eigen::VectorXd& v0);

// Applies the classification rules to an already recorded trajectory.
Classification classify_asymptotics(const Trajectory& traj,
                                    const DynamicsConfig& cfg);

struct VelocityL1 {
  double total = 0.0;  // integral of ||u'|| over the whole recorded range
  double tail = 0.0;   // same integral from t_tail on
};

// Trapezoidal integral of ||u'|| on a Hermite-refined grid. Requires a
// converged trajectory; finiteness of this integral is exactly what
// separates settling from creeping.
VelocityL1 velocity_l1(const Trajectory& traj, double t_tail);

// Partial integral over [0, T]; no convergence requirement (used for
// Cauchy checks on growing horizons).
double velocity_l1_upto(const Trajectory& traj, double T);

// CSV artifact: one row per accepted step,
// t,u_1..u_N,v_1..v_N,E_total,grad_norm at 17 significant digits.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

}  // namespace klflow
