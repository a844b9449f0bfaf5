// Convergence-rate verification against integrated trajectories.
//
// Three envelope checks, one per estimate:
//   * distance vs (1/alpha) phi(energy gap)      (the straightened descent)
//   * energy gap vs c psi(gamma(c_time t + t0))  (value decay)
//   * distance vs d gamma(c_time t + t0)         (worst-case curve)
// The theory guarantees the envelopes exist with *some* constants; the
// checks fit the constants on an alignment window and then require
// dominance on the remaining horizon, which is falsifiable: inflating
// alpha or steepening the curve makes them fail.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "klflow/deformation.hpp"
#include "klflow/desingularize.hpp"
#include "klflow/dynamics.hpp"
#include "klflow/potential.hpp"

namespace klflow {

struct EnvelopeVerdict {
  bool pass = false;
  double max_violation = 0.0;  // max of lhs - rhs over checked samples
  double t_start = 0.0;
  int n_checked = 0;
  int n_excluded = 0;  // non-positive or out-of-domain energy gaps
};

// Verifies ||U(t) - U_inf|| <= (1/alpha) phi(E_lambda(U(t)) - E_lambda(U_inf))
// + 1e-9 for all output times past the entry into B(u_inf, 1e-2 d0), in the
// phase-space norm. Gradient-flow trajectories use E = G and the plain
// distance.
EnvelopeVerdict check_distance_envelope(const Trajectory& traj,
                                        const Eigen::VectorXd& u_inf,
                                        const Desingularizer& desing,
                                        double alpha,
                                        const DeformedEnergy& energy);

struct WorstCaseEnvelope {
  double c_time = 0.0;  // time rescaling, a power of two
  double scale = 0.0;   // multiplicative constant (d or c in the reports)
  double t0 = 0.0;      // affine time shift
  bool pass = false;
  double max_violation = 0.0;
  double t_start = 0.0;
  int n_checked = 0;
  int n_excluded = 0;
};

// Fits (c_time, d, t0) with c_time on a power-of-two grid, t0 by aligning
// the worst-case curve with the first checked sample, d as the max ratio
// over the alignment window; pass requires dominance of d gamma(c_time t +
// t0) over ||u(t) - u_inf|| for all later output times.
WorstCaseEnvelope check_worstcase_envelope(const Trajectory& traj,
                                           const Eigen::VectorXd& u_inf,
                                           const Desingularizer& desing);

// Same engine for the value estimate: the energy gap against
// scale * psi(gamma(c_time t + t0)).
WorstCaseEnvelope check_energy_envelope(const Trajectory& traj,
                                        const Eigen::VectorXd& u_inf,
                                        const Desingularizer& desing,
                                        const DeformedEnergy& energy);

struct EmpiricalLaw {
  enum class Kind { kPower, kExponential, kAmbiguous };
  Kind kind = Kind::kAmbiguous;
  double parameter = 0.0;  // exponent p or rate rho of the better model
  double power_exponent = 0.0;
  double exponential_rate = 0.0;
  double residual_power = 0.0;        // RMS in log space
  double residual_exponential = 0.0;  // RMS in log space
  int n_used = 0;
};

// Least-squares fits of log dist against log t (power) and against t
// (exponential) over the window; Ambiguous when the residuals are within
// 10% of each other. Distances below 100 * machine epsilon trip a
// rounding-floor error suggesting a narrower window.
EmpiricalLaw fit_decay(const Trajectory& traj, const Eigen::VectorXd& u_inf,
                       std::pair<double, double> window);

struct RatesOptions {
  std::optional<Desingularizer> desing;  // estimated from the tail if absent
  std::pair<double, double> fit_window = {0.0, 0.0};  // {0,0} = automatic
  int certify_budget = 2048;
  std::uint64_t seed = 0;
};

struct RateReport {
  std::string potential;
  double gamma = 0.0;
  Classification classification;
  bool analyzed = false;  // envelopes ran (requires convergence + Hessian)
  std::string note;       // reason when analysis stopped early
  Eigen::VectorXd limit_point;
  std::string desingularizer;  // description of the one the checks used
  bool desing_estimated = false;
  double theta_hat = 0.0;  // tail exponent estimate; NaN when unavailable
  double c_hat = 0.0;
  double loj_residual = 0.0;
  AngleCertificate certificate;
  AsfastBound asfast;
  SqrtBoundCheck sqrt_check;
  double alpha_used = 0.0;
  EnvelopeVerdict automaj;
  WorstCaseEnvelope majval;
  WorstCaseEnvelope majgrad1;
  bool law_fitted = false;
  EmpiricalLaw law;
  double velocity_l1_total = 0.0;
  std::pair<double, double> fit_window_used = {0.0, 0.0};
};

// Full pipeline: integrate, classify, and (when the trajectory converges)
// certify the angle on the covering ball, select or estimate the
// desingularizer, run the sqrt lower-bound check and all three envelopes,
// and fit the decay law. Escaped or undetermined runs return a report with
// only the classification filled in.
RateReport end_to_end(const PotentialSpec& spec, const DynamicsConfig& cfg,
                      const Eigen::VectorXd& u0, const Eigen::VectorXd& v0,
                      const RatesOptions& opts = {});

}  // namespace klflow
