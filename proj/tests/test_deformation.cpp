#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "klflow/deformation.hpp"
#include "klflow/dynamics.hpp"
#include "klflow/errors.hpp"
#include "klflow/potential.hpp"
#include "klflow/sampling.hpp"
#include "oracles.hpp"

using namespace klflow;

TEST_CASE("lambda thresholds") {
  // gamma = 1, M = 1: lambda0 = 1/(2 (1 + 1/2)) = 1/3
  CHECK(lambda_zero(1.0, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  // gamma = 1, M = 1/2: lambda0 = 1/(2 (1/2 + 1/2)) = 1/2
  CHECK(lambda_zero(1.0, 0.5) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(lambda_one(1.0) == doctest::Approx(0.25));
  CHECK(lambda_one(3.0) == doctest::Approx(1.0 / 20.0));
  CHECK_THROWS_AS(lambda_zero(0.0, 1.0), InputError);
  CHECK_THROWS_AS(lambda_zero(1.0, -1.0), InputError);
}

TEST_CASE("quadratic angle lower bound") {
  // gamma = 1, M = 1, lambda = 1/6: min(1 - (3/2)(1/6), 1/12) = 1/12
  CHECK(alpha_quadratic_bound(1.0, 1.0, 1.0 / 6.0) ==
        doctest::Approx(1.0 / 12.0).epsilon(1e-12));
  // gamma = 1, M = 1/2, lambda = 1/4: min(1 - 1/4, 1/8) = 1/8
  CHECK(alpha_quadratic_bound(1.0, 0.5, 0.25) ==
        doctest::Approx(1.0 / 8.0).epsilon(1e-12));
  CHECK_THROWS_AS(alpha_quadratic_bound(1.0, 1.0, 0.34), InputError);
  CHECK_THROWS_AS(alpha_quadratic_bound(1.0, 1.0, 0.0), InputError);
}

TEST_CASE("deformed energy value and gradient against hand formulas") {
  Eigen::MatrixXd A(2, 2);
  A << 2.0, 1.0, 1.0, 3.0;
  DeformedEnergy de{quadratic_potential(A), 1.0, 0.2};
  Eigen::Vector2d u(0.4, -0.3), v(-0.1, 0.7);
  PhaseState st;
  st.u = u;
  st.v = v;
  const EnergyEval ev = energy_value_and_gradient(de, st);
  const Eigen::Vector2d g = A * u;
  CHECK(ev.value == doctest::Approx(0.5 * v.squaredNorm() + 0.5 * u.dot(g) +
                                    0.2 * g.dot(v))
                        .epsilon(1e-14));
  CHECK((ev.grad_u - (g + 0.2 * (A * v))).norm() <= 1e-14);
  CHECK((ev.grad_v - (v + 0.2 * g)).norm() <= 1e-14);
  CHECK(deformed_energy_value(de, u, v) == doctest::Approx(ev.value));

  SUBCASE("lambda = 0 reduces to the total energy") {
    DeformedEnergy flat{quadratic_potential(A), 1.0, 0.0};
    const EnergyEval e0 = energy_value_and_gradient(flat, st);
    CHECK(e0.value ==
          doctest::Approx(0.5 * v.squaredNorm() + 0.5 * u.dot(g)));
    CHECK((e0.grad_u - g).norm() <= 1e-15);
    CHECK((e0.grad_v - v).norm() <= 1e-15);
  }
}

TEST_CASE("deformed energy decays along trajectories at lambda below lambda0") {
  Eigen::MatrixXd A(2, 2);
  A << 2.0, 1.0, 1.0, 3.0;
  const PotentialSpec spec = quadratic_potential(A);
  DynamicsConfig cfg;
  cfg.gamma = 1.0;
  cfg.t_max = 6.0;
  cfg.conv_tol_v = 1e-14;
  cfg.conv_tol_g = 1e-14;
  Eigen::VectorXd u0(2), v0(2);
  u0 << 1.0, -0.4;
  v0 << 0.2, 0.3;
  const Trajectory traj = integrate(spec, cfg, u0, v0);
  const double M = hessian_bound(spec, 2.0);
  DeformedEnergy de{spec, cfg.gamma, 0.5 * lambda_zero(cfg.gamma, M)};
  double prev = std::numeric_limits<double>::infinity();
  for (double t = 0.0; t <= 6.0; t += 0.05) {
    const PhaseState st = traj.sample(t);
    const double e = deformed_energy_value(de, st.u, st.v);
    CHECK(e <= prev + 1e-9);
    prev = e;
  }
}

TEST_CASE("certificate on the isotropic quadratic") {
  const PotentialSpec spec =
      quadratic_potential(Eigen::MatrixXd::Identity(2, 2));
  DeformedEnergy de{spec, 1.0, 1.0 / 6.0};
  const AngleCertificate cert = certify_quasigradient(de, 1.0, 8192);
  CHECK(cert.M == doctest::Approx(1.0));
  // alpha0 = 1/12; C = max((3 + 2/36 + 2)/2, 2 + 1/36) = 91/36
  CHECK(cert.C == doctest::Approx(91.0 / 36.0).epsilon(1e-12));
  CHECK(cert.alpha_certified ==
        doctest::Approx((1.0 / 12.0) / (91.0 / 36.0)).epsilon(1e-9));
  CHECK(cert.alpha_certified > 0.0);
  CHECK(cert.alpha_sampled >= cert.alpha_certified - 1e-9);
  CHECK(cert.rest_point_equivalence_checked);
  CHECK(cert.sample_count > 5000);
  // dense polar grid oracle brackets the same minimum
  const double grid = oracle::grid_min_cosine_quadratic(
      Eigen::MatrixXd::Identity(2, 2), 1.0, 1.0 / 6.0, 1.0, 10, 48);
  CHECK(grid >= cert.alpha_certified);
  CHECK(std::abs(grid - cert.alpha_sampled) <= 0.05);
}

TEST_CASE("lambda = 0 exposes the degeneracy on the v = 0 slice") {
  const PotentialSpec spec =
      quadratic_potential(Eigen::MatrixXd::Identity(2, 2));
  DeformedEnergy de{spec, 1.0, 0.0};
  const AngleCertificate cert = certify_quasigradient(de, 1.0, 2048);
  CHECK(cert.alpha_certified == 0.0);
  CHECK(cert.alpha_sampled <= 1e-6);
  CHECK(cert.rest_point_equivalence_checked);
}

TEST_CASE("certificate input validation") {
  const PotentialSpec spec =
      quadratic_potential(Eigen::MatrixXd::Identity(2, 2));
  CHECK_THROWS_AS(
      certify_quasigradient(DeformedEnergy{spec, 1.0, 0.4}, 1.0, 512),
      InputError);  // lambda >= lambda0 = 1/3
  CHECK_THROWS_AS(
      certify_quasigradient(DeformedEnergy{spec, -1.0, 0.1}, 1.0, 512),
      InputError);
  CHECK_THROWS_AS(
      certify_quasigradient(DeformedEnergy{spec, 1.0, 0.1}, 0.0, 512),
      InputError);
  CHECK_THROWS_AS(
      certify_quasigradient(DeformedEnergy{spec, 1.0, 0.1}, 1.0, 4),
      InputError);
  CHECK_THROWS_AS(
      certify_quasigradient(DeformedEnergy{nonsmooth_32_potential(), 1.0, 0.1},
                            1.0, 512),
      CapabilityError);
}

TEST_CASE("gradient-comparability bound") {
  const PotentialSpec spec =
      quadratic_potential(Eigen::MatrixXd::Identity(2, 2));
  DeformedEnergy de{spec, 1.0, 1.0 / 8.0};
  const AsfastBound b = asfast_bound(de, 1.0, 4096);
  // k1 = 2 + 2 (1/64) max(1, 1) = 2.03125, k2 = min(1/2, 1/3) = 1/3
  CHECK(b.b_algebraic ==
        doctest::Approx(std::sqrt(2.03125 * 3.0)).epsilon(1e-12));
  CHECK(b.b_sampled > 0.0);
  CHECK(b.b == doctest::Approx(std::max(b.b_sampled, b.b_algebraic)));
  CHECK(b.sample_count > 3000);

  // the sampled ratio ||grad E|| / ||F|| must obey the algebraic bound for
  // every admissible lambda; spot-check a second gamma
  DeformedEnergy heavy{spec, 3.0, 0.05};
  const AsfastBound b2 = asfast_bound(heavy, 2.0, 4096);
  CHECK(b2.b_sampled <= b2.b_algebraic * (1.0 + 1e-9));
}

TEST_CASE("asfast bound brackets the phase-space gradient norms") {
  // direct verification of k1/k2 as norm-equivalence constants on samples
  Eigen::MatrixXd A(2, 2);
  A << 2.0, 0.5, 0.5, 1.0;
  const PotentialSpec spec = quadratic_potential(A);
  const double gamma = 1.2, R = 1.5;
  const double M = hessian_bound(spec, R);
  const double lambda = 0.5 * std::min(lambda_zero(gamma, M), lambda_one(M));
  DeformedEnergy de{spec, gamma, lambda};
  DynamicsConfig cfg;
  cfg.gamma = gamma;
  const double k1 = 2.0 + 2.0 * lambda * lambda * std::max(1.0, M * M);
  const double k2 = std::min(0.5, 1.0 / (1.0 + 2.0 * gamma * gamma));
  // k1 bounds the deformed gradient against ||v||^2 + ||grad G||^2, k2
  // bounds that quantity against ||F||^2; only the quotient bounds the ratio
  for (int k = 0; k < 512; ++k) {
    PhaseState st;
    st.u = R * ball_point(k, 2, 101);
    st.v = R * ball_point(k, 2, 202);
    const PhaseState f = second_order_field(spec, cfg, st);
    const EnergyEval g = energy_value_and_gradient(de, st);
    const Eigen::VectorXd gu = spec.gradient(st.u);
    const double mid2 = st.v.squaredNorm() + gu.squaredNorm();
    const double nf2 = f.u.squaredNorm() + f.v.squaredNorm();
    const double ne2 = g.grad_u.squaredNorm() + g.grad_v.squaredNorm();
    if (nf2 <= 1e-20) continue;
    CHECK(ne2 <= k1 * mid2 * (1.0 + 1e-12));
    CHECK(mid2 <= nf2 / k2 * (1.0 + 1e-12));
    CHECK(std::sqrt(ne2 / nf2) <= std::sqrt(k1 / k2) * (1.0 + 1e-12));
  }
}
