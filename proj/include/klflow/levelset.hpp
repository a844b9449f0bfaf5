// Minimal-gradient profile over level sets of a potential.
//
// psi(r) = min { 0.5 ||grad G(u)||^2 : G(u) - G(u_bar) = r } together with
// the multiplier of the constrained problem. For C^2 potentials psi(r)
// stays below lambda_bar * r, which is what forces any desingularizing
// reparameterization to grow at least like sqrt(s). A ratio psi(r)/r that
// blows up as r shrinks is the signature of a potential that is not C^2
// at its critical point.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "klflow/potential.hpp"

namespace klflow {

struct LevelPoint {
  Eigen::VectorXd u_star;
  double psi = 0.0;         // 0.5 ||grad G(u_star)||^2
  double multiplier = 0.0;  // NaN when no Hessian and FD not requested
  bool multiplier_is_fd = false;
  bool converged = false;   // step tolerance reached and level residual ok
};

struct LevelOptions {
  int starts = 16;
  std::uint64_t seed = 0;
  int max_iterations = 10000;
  double step_tol = 1e-10;
  // estimate the multiplier by a finite-difference Rayleigh quotient when
  // the Hessian is unavailable (default: report NaN instead)
  bool fd_multiplier = false;
};

// Multi-start projected-gradient solve of the constrained problem at level
// G(u_bar) + r. Directions come from a deterministic sphere covering whose
// first 2N entries are the coordinate axes. Each start root-finds a level
// point along its ray, then descends on 0.5 ||grad G||^2 tangentially with
// scalar Newton restoration back to the level after every step.
LevelPoint minimize_on_level(const PotentialSpec& spec,
                             const Eigen::VectorXd& u_bar, double r,
                             const LevelOptions& opts = {});

struct LevelSetProfile {
  std::vector<double> r_grid;  // decreasing
  std::vector<double> psi_values;
  std::vector<Eigen::VectorXd> minimizers;
  std::vector<double> multipliers;
  std::vector<bool> converged;  // per-point solve status
  double lambda_bar = 0.0;      // max multiplier over converged points
  double ratio_max = 0.0;       // max psi(r)/r
  // ratio at the smallest r is within a factor 2 of the ratio at the
  // largest r; false flags a growing ratio (non-C^2 signature)
  bool ratio_bounded = false;
};

// Geometric grid from r_hi down to r_lo with points_per_decade points per
// decade; one minimize_on_level call per level. Failed points are kept in
// the grid with converged = false and excluded from the aggregates.
LevelSetProfile psi_profile(const PotentialSpec& spec,
                            const Eigen::VectorXd& u_bar, double r_hi,
                            double r_lo, int points_per_decade,
                            const LevelOptions& opts = {});

// Pointwise lower bound r -> 1/sqrt(2 psi(r)) on the derivative of any
// valid desingularizer. Needs at least 2 converged profile points.
std::vector<std::pair<double, double>> implied_desingularizer_bound(
    const LevelSetProfile& profile);

// CSV with header r,psi,ratio,multiplier,converged and a trailing verdict
// footer line "# verdict: bounded|unbounded".
void write_profile_csv(const std::string& path, const LevelSetProfile& p);

}  // namespace klflow
