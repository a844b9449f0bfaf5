// The tilted total energy and the quasi-gradient angle certificate.
//
// E_lambda(u, v) = 0.5 ||v||^2 + G(u) + lambda <grad G(u), v> is the small
// deformation of the mechanical energy that breaks the degeneracy of
// <grad E_T, F> = gamma ||v||^2 on the set v = 0. For lambda below an
// explicit threshold the field F(u, v) = (-v, gamma v + grad G) makes a
// uniformly positive angle with grad E_lambda on bounded sets, and the
// angle admits a closed-form lower bound built from the Hessian sup norm.
#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "klflow/dynamics.hpp"
#include "klflow/potential.hpp"

namespace klflow {

struct DeformedEnergy {
  PotentialSpec spec;
  double gamma = 1.0;
  double lambda = 0.0;  // admissible range [0, lambda_zero)
};

// Largest structurally safe tilt: gamma / (2 (M + gamma^2/2 + eps0)) with
// eps0 = 1e-12 keeping the strict inequality strict in floating point.
double lambda_zero(double gamma, double M);

// Tilt below which ||grad E_lambda|| is comparable with (||v||, ||grad G||):
// min{1/4, 1/(2 (M^2 + 1))}.
double lambda_one(double M);

// Coefficient of the quadratic lower bound
// <grad E_lambda, F> >= alpha0 (||v||^2 + ||grad G||^2) on the ball where
// ||Hess G|| <= M. Requires 0 < lambda < lambda_zero(gamma, M).
double alpha_quadratic_bound(double gamma, double M, double lambda);

// C with ||grad E_lambda|| ||F|| <= C (||v||^2 + ||grad G||^2):
// max{(3 + 2 lambda^2 M^2 + 2 gamma^2) / 2, 2 + lambda^2}.
double angle_normalization(double gamma, double M, double lambda);

struct EnergyEval {
  double value = 0.0;
  Eigen::VectorXd grad_u;  // grad G + lambda Hess G * v
  Eigen::VectorXd grad_v;  // v + lambda grad G
};

// Needs the Hessian whenever lambda > 0.
EnergyEval energy_value_and_gradient(const DeformedEnergy& de,
                                     const PhaseState& state);

// Value only; works without a Hessian.
double deformed_energy_value(const DeformedEnergy& de,
                             const Eigen::VectorXd& u,
                             const Eigen::VectorXd& v);

struct AngleCertificate {
  double R = 0.0;
  double gamma = 0.0;
  double lambda = 0.0;
  double alpha_certified = 0.0;  // alpha0 / C; 0 when lambda = 0
  double alpha_sampled = 0.0;    // min cosine over the sample family
  double M = 0.0;                // sampled Hessian sup norm on B(0, R)
  double C = 0.0;
  int sample_count = 0;
  // true iff ||grad E_lambda|| <= 1e-10 and ||F|| <= 1e-10 agreed at every
  // sample (rest points of the field are critical points of the energy)
  bool rest_point_equivalence_checked = false;
};

// Samples B(0,R) x B(0,R) plus the degeneracy-probing slices v = 0 and
// u = critical point, and reports the sampled and certified angle bounds.
// lambda = 0 is admitted as a pure degeneracy probe (certified bound 0).
AngleCertificate certify_quasigradient(const DeformedEnergy& de, double R,
                                       int budget, std::uint64_t seed = 0);

struct AsfastBound {
  double b_sampled = 0.0;    // sup ||grad E_lambda|| / ||F|| over samples
  double b_algebraic = 0.0;  // sqrt(k1 / k2)
  double b = 0.0;            // the certified value: max of the two
  int sample_count = 0;
};

// Upper bound ||grad E_lambda|| <= b ||F|| on the sampled ball, with
// k1 = 2 + 2 lambda^2 max{1, M^2} and k2 = min{1/2, 1/(1 + 2 gamma^2)}.
AsfastBound asfast_bound(const DeformedEnergy& de, double R, int budget,
                         std::uint64_t seed = 0);

}  // namespace klflow
