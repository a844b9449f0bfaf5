// Potential specifications and the built-in catalog.
//
// A PotentialSpec bundles G, grad G, and (when it exists) the Hessian as
// plain callables, together with a critical point to anchor value gaps and,
// for catalog entries, the desingularizer that is known to straighten the
// potential near that point. Everything downstream (integration, angle
// certificates, level-set profiles, rate envelopes) consumes this struct
// and nothing else, so user-supplied potentials are first-class.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "klflow/desingularize.hpp"
#include "klflow/errors.hpp"

namespace klflow {

struct PotentialSpec {
  std::string name;
  int dimension = 1;
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  // Empty when the potential is not twice differentiable everywhere
  // (nonsmooth_32); callers must check has_hessian() first.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;
  Eigen::VectorXd known_critical_point;
  std::optional<Desingularizer> known_desingularizer;
  // Largest level value the level-set machinery will accept for this spec.
  double level_r_max = 1e3;

  bool has_hessian() const { return static_cast<bool>(hessian); }
};

// ---- catalog ----

// G(u) = 0.5 <Au, u> for symmetric A.
PotentialSpec quadratic_potential(const Eigen::MatrixXd& A);
// G(u1, u2) = u1^2 - u2^2.
PotentialSpec saddle_potential();
// G(u) = ||u||^(2p), p >= 1.
PotentialSpec power_potential(int dim, double p);
// G(u) = psi(||u - center||) with psi = phi^{-1}, phi(s) = c s^theta.
// Needs theta <= 1/2 so the profile is C^1 at the center and C^2 away
// from it; by construction ||u(t) - center|| rides the worst-case curve
// exactly under gradient flow.
PotentialSpec radial_potential(int dim, double c, double theta,
                               const Eigen::VectorXd& center);
// G(u) = ||u||^r, r >= 2 (the model convex function with r-th order growth).
PotentialSpec convex_growth_potential(int dim, double r);
// G(u) = |u|^(3/2) in one dimension; C^1 but not C^2, no Hessian.
PotentialSpec nonsmooth_32_potential();
// G(u) = -0.5 ||u||^2; every trajectory escapes.
PotentialSpec neg_quadratic_potential(int dim);

struct CatalogParams {
  int dimension = 1;
  double p = 2.0;      // power
  double r = 3.0;      // convex_growth
  double c = 1.0;      // radial
  double theta = 0.5;  // radial
  Eigen::VectorXd a_diag;  // quadratic, diagonal entries
  Eigen::MatrixXd a_full;  // quadratic, full symmetric matrix
  Eigen::VectorXd center;  // radial
};

std::vector<std::string> catalog_names();
PotentialSpec make_catalog_potential(const std::string& name,
                                     const CatalogParams& params = {});

// ---- operations ----

struct Evaluation {
  double value = 0.0;
  Eigen::VectorXd gradient;
  std::optional<Eigen::MatrixXd> hessian;
};

// Evaluates value/gradient (and Hessian when available and requested).
// Dimension mismatches are input errors; non-finite results are domain
// errors naming the offending point.
Evaluation evaluate(const PotentialSpec& spec, const Eigen::VectorXd& u,
                    bool want_hessian = false);

struct DerivativeCheck {
  double max_err_gradient = 0.0;
  double max_err_hessian = 0.0;
  bool hessian_checked = false;
  bool pass = false;
};

// Central-difference consistency of gradient (against G) and Hessian
// (against grad G) at the given points. Errors are relative to
// 1 + norm of the analytic quantity.
DerivativeCheck check_derivatives(const PotentialSpec& spec,
                                  const std::vector<Eigen::VectorXd>& points,
                                  double tol = 1e-5);

// Sampled sup of the Hessian spectral norm over the closed ball B(0, R).
// The family contains the center, the points R*e_i and -R*e_i, and a scaled
// low-discrepancy filling, so it is monotone in R for radially monotone
// Hessians and exact for quadratics. Always a lower bound on the true sup.
double hessian_bound(const PotentialSpec& spec, double R, int budget = 4096,
                     std::uint64_t seed = 0);

struct ValueGradientBound {
  double c_best = 0.0;  // min over samples of |G - G(u_bar)| / ||grad G||^2
  bool pass = false;    // c_best >= 1e-6
  int n_used = 0;
  int n_zero_gap = 0;   // samples with G(u) = G(u_bar) exactly, skipped
  int n_zero_grad = 0;  // critical samples, skipped
};

// Sampled version of the one-sided bound |G(u) - G(u_bar)| >= c ||grad G||^2
// near a critical point. Radii descend geometrically over twelve decades
// below eps, so potentials whose best constant degenerates at the critical
// point (e.g. |u|^(3/2)) genuinely fail.
ValueGradientBound check_value_gradient_bound(const PotentialSpec& spec,
                                              const Eigen::VectorXd& u_bar,
                                              double eps, int budget = 4096,
                                              std::uint64_t seed = 0);

}  // namespace klflow
