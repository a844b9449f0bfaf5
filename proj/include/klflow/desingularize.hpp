// Desingularizing functions and the calculus built on them.
//
// A desingularizer is the concave reparameterization phi that turns a
// Kurdyka-Lojasiewicz inequality phi'(|G - G(bar u)|) * ||grad G|| >= 1
// into a straightened descent estimate. This module owns:
//   * the two representations (exact power laws, monotone tables),
//   * phi / phi' / psi = phi^{-1} / psi' / mu = antiderivative of phi'^2,
//   * the worst-case decay curve gamma' + psi'(gamma) = 0,
//   * the sqrt lower-bound test that separates the C^2 world (theta <= 1/2)
//     from counterexamples like |u|^{3/2},
//   * the log-log exponent estimator for (value gap, gradient norm) pairs,
//   * a sampled check of the KL inequality itself.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "klflow/errors.hpp"

namespace klflow {

struct PotentialSpec;

class Desingularizer {
 public:
  // phi(s) = c * s^theta on [0, domain_radius). Requires c > 0 and
  // 0 < theta <= 1.
  static Desingularizer power(double c, double theta,
                              double domain_radius = 1e12);

  // Monotone cubic (Fritsch-Carlson) interpolant through (s_i, phi_i).
  // Grid must be strictly increasing with s_0 > 0 and phi strictly
  // increasing; the domain is [s_0, s_last].
  static Desingularizer tabulated(std::vector<double> s,
                                  std::vector<double> phi);

  bool is_power() const { return power_; }
  double c() const;
  double theta() const;
  double domain_radius() const { return r0_; }
  // Smallest admissible argument: 0 for power laws, the first grid node for
  // tables.
  double domain_min() const { return power_ ? 0.0 : s_.front(); }
  std::string describe() const;

  double phi(double s) const;
  double phi_prime(double s) const;
  // Inverse of phi; defined on (phi(domain_min), phi(r0)).
  double psi(double y) const;
  double psi_prime(double y) const;
  // Antiderivative of (phi')^2. Anchored at an arbitrary constant per
  // representation; only differences of mu are meaningful.
  double mu(double s) const;

 private:
  Desingularizer() = default;
  void check_domain(double s) const;

  bool power_ = true;
  double c_ = 1.0, theta_ = 0.5, r0_ = 1e12;
  // tabulated representation
  std::vector<double> s_, phi_, slope_;
};

struct SqrtBoundCheck {
  double beta_best = 0.0;
  bool pass = false;
};

// Checks phi'(s) >= beta / sqrt(s) on the given grid. For power laws the
// verdict is analytic (theta <= 1/2); the grid only feeds the reported
// constant.
SqrtBoundCheck check_sqrt_lower_bound(const Desingularizer& d,
                                      const std::vector<double>& s_grid);

// Solution of gamma' + psi'(gamma) = 0, gamma(0) = gamma0, at the requested
// times. Power laws use the closed forms
//   theta < 1/2 : gamma(t) = [gamma0^b + ((1-2 theta)/theta^2) c^{-1/theta} t]^{1/b},
//                 b = (2 theta - 1)/theta,
//   theta = 1/2 : gamma(t) = gamma0 * exp(-2 t / c^2);
// tables fall back to the adaptive RK integrator. Requires the sqrt
// lower-bound check to pass (theta <= 1/2), gamma0 in the range of phi, and
// an ascending non-negative t_grid.
std::vector<double> worst_case_curve(const Desingularizer& d, double gamma0,
                                     const std::vector<double>& t_grid);

// gamma(t) at a single time; same preconditions as worst_case_curve.
double worst_case_value(const Desingularizer& d, double gamma0, double t);

// Inverse of the curve: the time at which gamma reaches g in (0, gamma0].
// Uses the identity t = mu(psi(gamma0)) - mu(psi(g)), exact for every
// representation.
double worst_case_inverse(const Desingularizer& d, double gamma0, double g);

struct LojasiewiczFit {
  double theta_hat = 0.0;
  double c_hat = 0.0;
  double residual = 0.0;  // RMS misfit of log ||grad G|| in the window
  int n_used = 0;
};

// Least-squares fit of log n = (1 - theta) log g + const over pairs
// (g_i, n_i) = (value gap, gradient norm) with g inside `window`.
// Throws InsufficientDataError below 10 usable pairs.
LojasiewiczFit estimate_lojasiewicz(
    const std::vector<std::pair<double, double>>& pairs,
    std::pair<double, double> window = {1e-8, 1e-2});

struct KlCheck {
  double margin = 0.0;  // min over samples of phi'(|dG|) * ||grad G||
  bool pass = false;    // margin >= 1 - 1e-6
  int n_used = 0;
  int n_zero_gap = 0;         // samples on the level set of u_bar, skipped
  int n_outside_domain = 0;   // value gaps beyond phi's domain, skipped
};

// Samples B(u_bar, eta) and evaluates the KL margin. u_bar must be critical
// (gradient norm <= 1e-10). Throws DegenerateSampleError when every sample
// lands on the level set of u_bar.
KlCheck check_kl_inequality(const PotentialSpec& spec,
                            const Eigen::VectorXd& u_bar,
                            const Desingularizer& d, double eta, int budget,
                            std::uint64_t seed = 0);

// Convenience: n log-spaced points from lo to hi inclusive.
std::vector<double> logspace(double lo, double hi, int n);

}  // namespace klflow
