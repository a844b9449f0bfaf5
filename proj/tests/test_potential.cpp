#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "klflow/desingularize.hpp"
#include "klflow/errors.hpp"
#include "klflow/potential.hpp"
#include "klflow/sampling.hpp"
#include "oracles.hpp"

using namespace klflow;

TEST_CASE("catalog lists every built-in") {
  const std::vector<std::string> names = catalog_names();
  for (const char* want : {"quadratic", "saddle", "power", "radial",
                           "convex_growth", "nonsmooth_32", "neg_quadratic"})
    CHECK(std::find(names.begin(), names.end(), want) != names.end());
  CHECK_THROWS_AS(make_catalog_potential("no_such_potential", {}), InputError);
}

TEST_CASE("quadratic evaluations are exact") {
  Eigen::MatrixXd A(2, 2);
  A << 2.0, 1.0, 1.0, 2.0;
  const PotentialSpec spec = quadratic_potential(A);
  Eigen::Vector2d u(0.3, -0.7);
  const Evaluation ev = evaluate(spec, u, true);
  CHECK(ev.value == doctest::Approx(0.5 * u.dot(A * u)).epsilon(1e-15));
  CHECK((ev.gradient - A * u).norm() <= 1e-15);
  REQUIRE(ev.hessian.has_value());
  CHECK((*ev.hessian - A).norm() <= 1e-15);
}

TEST_CASE("derivative consistency across the smooth catalog") {
  CatalogParams prm;
  prm.dimension = 2;
  prm.theta = 1.0 / 3.0;
  for (const std::string& name :
       {"quadratic", "saddle", "power", "convex_growth", "neg_quadratic"}) {
    CAPTURE(name);
    const PotentialSpec spec = make_catalog_potential(name, prm);
    std::vector<Eigen::VectorXd> pts;
    for (int k = 1; k <= 6; ++k)
      pts.push_back(0.9 * ball_point(k, spec.dimension, 7));
    const DerivativeCheck chk = check_derivatives(spec, pts);
    CHECK(chk.pass);
    CHECK(chk.max_err_gradient <= 1e-5);
    if (spec.has_hessian()) CHECK(chk.hessian_checked);
  }
  // radial profile is C^2 only away from the center; check there
  const PotentialSpec rad = make_catalog_potential("radial", prm);
  std::vector<Eigen::VectorXd> pts;
  for (int k = 1; k <= 6; ++k) {
    Eigen::VectorXd p = ball_point(k, 2, 11);
    pts.push_back(p * (0.5 + 0.4 * (k % 2)) / p.norm());
  }
  CHECK(check_derivatives(rad, pts).pass);
}

TEST_CASE("nonsmooth catalog entry has gradient but no Hessian") {
  const PotentialSpec spec = nonsmooth_32_potential();
  CHECK_FALSE(spec.has_hessian());
  Eigen::VectorXd u(1);
  u << 0.49;
  const Evaluation ev = evaluate(spec, u);
  CHECK(ev.value == doctest::Approx(std::pow(0.49, 1.5)).epsilon(1e-15));
  CHECK(ev.gradient[0] ==
        doctest::Approx(1.5 * std::sqrt(0.49)).epsilon(1e-15));
  u << -0.49;
  CHECK(evaluate(spec, u).gradient[0] ==
        doctest::Approx(-1.5 * std::sqrt(0.49)).epsilon(1e-15));
}

TEST_CASE("evaluate rejects bad input") {
  const PotentialSpec spec = quadratic_potential(Eigen::MatrixXd::Identity(2, 2));
  Eigen::VectorXd wrong(3);
  wrong.setZero();
  CHECK_THROWS_AS(evaluate(spec, wrong), InputError);
  const PotentialSpec pw = power_potential(1, 8.0);
  Eigen::VectorXd huge(1);
  huge << 1e40;
  CHECK_THROWS_AS(evaluate(pw, huge), DomainError);
}

TEST_CASE("radial profile rides its own desingularizer") {
  CatalogParams prm;
  prm.dimension = 2;
  prm.c = 1.5;
  prm.theta = 0.4;
  const PotentialSpec spec = make_catalog_potential("radial", prm);
  // G(u) = psi(||u||) by construction, so phi(G(u)) = ||u|| exactly
  for (int k = 1; k <= 5; ++k) {
    const Eigen::VectorXd u = 0.8 * ball_point(k, 2, 3);
    const double g = spec.value(u);
    CHECK(spec.known_desingularizer->phi(g) ==
          doctest::Approx(u.norm()).epsilon(1e-12));
  }
  CHECK_THROWS_AS([&] {
    CatalogParams bad;
    bad.theta = 0.7;  // profile would not be C^1 at the center
    make_catalog_potential("radial", bad);
  }(), InputError);
}

TEST_CASE("every catalog desingularizer passes the KL check at its anchor") {
  CatalogParams prm;
  prm.dimension = 2;
  prm.theta = 1.0 / 3.0;
  for (const std::string& name :
       {"quadratic", "saddle", "power", "radial", "convex_growth",
        "nonsmooth_32", "neg_quadratic"}) {
    CAPTURE(name);
    const PotentialSpec spec = make_catalog_potential(name, prm);
    REQUIRE(spec.known_desingularizer.has_value());
    const KlCheck chk =
        check_kl_inequality(spec, spec.known_critical_point,
                            *spec.known_desingularizer, 0.3, 1024);
    CHECK(chk.pass);
    CHECK(chk.margin >= 1.0 - 1e-6);
    CHECK(chk.n_used > 100);
  }
}

TEST_CASE("hessian bound is exact for quadratics and tight for quartics") {
  Eigen::MatrixXd A = Eigen::Vector2d(1.0, 3.0).asDiagonal();
  CHECK(hessian_bound(quadratic_potential(A), 2.0) == doctest::Approx(3.0));
  Eigen::MatrixXd B(2, 2);
  B << 2.0, 1.0, 1.0, 2.0;
  CHECK(hessian_bound(quadratic_potential(B), 1.0) == doctest::Approx(3.0));
  // G = u^4 in 1D: G'' = 12 u^2, sup over B(0, 1/2) = 3, attained on the axis
  CHECK(hessian_bound(power_potential(1, 2.0), 0.5) == doctest::Approx(3.0));
  // monotone in R
  const PotentialSpec pw = power_potential(2, 2.0);
  CHECK(hessian_bound(pw, 1.0) < hessian_bound(pw, 2.0));
  CHECK_THROWS_AS(hessian_bound(nonsmooth_32_potential(), 1.0),
                  CapabilityError);
}

TEST_CASE("value-gradient bound constants") {
  const Eigen::VectorXd zero1 = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd zero2 = Eigen::VectorXd::Zero(2);
  SUBCASE("isotropic quadratic gives exactly 1/2") {
    const PotentialSpec spec =
        quadratic_potential(Eigen::MatrixXd::Identity(2, 2));
    const ValueGradientBound b =
        check_value_gradient_bound(spec, zero2, 1e-2);
    CHECK(b.pass);
    CHECK(b.c_best == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("anisotropic quadratic is pinned by the stiff axis") {
    Eigen::MatrixXd A = Eigen::Vector2d(1.0, 4.0).asDiagonal();
    // ratio (0.5 u^T A u)/||Au||^2 minimized on the lam = 4 axis: 1/(2*4)
    const ValueGradientBound b =
        check_value_gradient_bound(quadratic_potential(A), zero2, 1e-2);
    CHECK(b.pass);
    CHECK(b.c_best >= 0.125 - 1e-9);
    CHECK(b.c_best <= 0.125 * 1.05);
  }
  SUBCASE("saddle degenerates along the diagonal") {
    const ValueGradientBound b =
        check_value_gradient_bound(saddle_potential(), zero2, 1e-2);
    CHECK(b.c_best > 0.0);
    CHECK(b.c_best <= 0.25 + 1e-9);
    // samples near u1 = +-u2 drive the constant far below the axis value
    CHECK(b.c_best < 0.05);
  }
  SUBCASE("|u|^(3/2) fails: the constant vanishes at the critical point") {
    const ValueGradientBound b =
        check_value_gradient_bound(nonsmooth_32_potential(), zero1, 1e-2);
    CHECK_FALSE(b.pass);
    CHECK(b.c_best < 1e-6);
  }
  SUBCASE("quartic passes: the ratio diverges at the critical point") {
    const ValueGradientBound b =
        check_value_gradient_bound(power_potential(1, 2.0), zero1, 0.1);
    CHECK(b.pass);
    // min over B(0, 0.1) is 1/(16 eps^2) at the boundary
    CHECK(b.c_best >= 1.0 / (16.0 * 0.1 * 0.1) * 0.99);
  }
}

TEST_CASE("sampling families are deterministic and shaped") {
  CHECK(splitmix64(1, 2) == splitmix64(1, 2));
  CHECK(splitmix64(1, 2) != splitmix64(1, 3));
  for (int k = 0; k < 64; ++k) {
    CHECK(ball_point(k, 3, 5).norm() <= 1.0 + 1e-12);
    CHECK(sphere_point(k, 3, 5).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  // signed axes lead the sphere family
  CHECK((sphere_point(0, 2) - Eigen::Vector2d(1, 0)).norm() <= 1e-15);
  CHECK((sphere_point(1, 2) + Eigen::Vector2d(1, 0)).norm() <= 1e-15);
  CHECK((sphere_point(2, 2) - Eigen::Vector2d(0, 1)).norm() <= 1e-15);
  // same seed, same stream
  CHECK((ball_point(9, 4, 17) - ball_point(9, 4, 17)).norm() == 0.0);
  CHECK((ball_point(9, 4, 17) - ball_point(9, 4, 18)).norm() > 0.0);
}
