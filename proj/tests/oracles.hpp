// Independent reference computations used by the test suite.
//
// Everything in here is deliberately written against plain Eigen/std,
// not against the library under test, so that a bug in the library
// cannot cancel against the same bug in its tests.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

// Exact solution of u'' + gamma u' + A u = 0, u(0) = u0, u'(0) = v0,
// for symmetric A, via eigendecomposition and per-mode characteristic roots.
// Each scalar mode z'' + gamma z' + lam z = 0 is solved with complex roots
// r = (-gamma +- sqrt(gamma^2 - 4 lam))/2; coincident roots get the
// (c1 + c2 t) e^{rt} form. Initial data are real, so the imaginary parts
// cancel to rounding.
struct LinearSecondOrder {
  Eigen::MatrixXd A;
  double gamma;
  Eigen::VectorXd u0, v0;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;

  LinearSecondOrder(const Eigen::MatrixXd& A_, double gamma_,
                    const Eigen::VectorXd& u0_, const Eigen::VectorXd& v0_)
      : A(A_), gamma(gamma_), u0(u0_), v0(v0_), eig(A_) {
    if (eig.info() != Eigen::Success) throw std::runtime_error("eig failed");
  }

  // returns (u(t), u'(t))
  std::pair<Eigen::VectorXd, Eigen::VectorXd> at(double t) const {
    using cd = std::complex<double>;
    const int n = static_cast<int>(A.rows());
    Eigen::VectorXd z0 = eig.eigenvectors().transpose() * u0;
    Eigen::VectorXd w0 = eig.eigenvectors().transpose() * v0;
    Eigen::VectorXd z(n), w(n);
    for (int i = 0; i < n; ++i) {
      const double lam = eig.eigenvalues()[i];
      const cd disc = std::sqrt(cd(gamma * gamma - 4.0 * lam, 0.0));
      const cd rp = (-gamma + disc) / 2.0;
      const cd rm = (-gamma - disc) / 2.0;
      cd zt, wt;
      if (std::abs(rp - rm) < 1e-12 * (1.0 + std::abs(rp))) {
        // double root: z = (c1 + c2 t) e^{rt}
        const cd r = rp;
        const cd c1 = z0[i];
        const cd c2 = w0[i] - r * z0[i];
        const cd e = std::exp(r * t);
        zt = (c1 + c2 * t) * e;
        wt = (c2 + r * (c1 + c2 * t)) * e;
      } else {
        const cd c2 = (cd(w0[i]) - rp * z0[i]) / (rm - rp);
        const cd c1 = cd(z0[i]) - c2;
        zt = c1 * std::exp(rp * t) + c2 * std::exp(rm * t);
        wt = c1 * rp * std::exp(rp * t) + c2 * rm * std::exp(rm * t);
      }
      z[i] = zt.real();
      w[i] = wt.real();
    }
    return {eig.eigenvectors() * z, eig.eigenvectors() * w};
  }
};

// Adaptive Simpson quadrature with the classic 1/15 error update.
inline double adaptive_simpson_(const std::function<double(double)>& f,
                                double a, double b, double fa, double fm,
                                double fb, double whole, double tol,
                                int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptive_simpson_(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f,
                               double a, double b, double tol = 1e-12) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_(f, a, b, fa, fm, fb, whole, tol, 48);
}

// Brute-force level-set scan for N <= 2: min of 0.5*||grad G||^2 over the
// band |G(u) - r| <= band_rel * r inside [-box, box]^N.
inline double grid_level_min(
    const std::function<double(const Eigen::VectorXd&)>& G,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& dG, int N,
    double r, double box, int pts_per_axis, double band_rel = 1e-2) {
  double best = std::numeric_limits<double>::infinity();
  if (N == 1) {
    Eigen::VectorXd u(1);
    for (int i = 0; i <= pts_per_axis; ++i) {
      u[0] = -box + 2.0 * box * i / pts_per_axis;
      if (std::abs(G(u) - r) <= band_rel * r)
        best = std::min(best, 0.5 * dG(u).squaredNorm());
    }
  } else if (N == 2) {
    Eigen::VectorXd u(2);
    for (int i = 0; i <= pts_per_axis; ++i)
      for (int j = 0; j <= pts_per_axis; ++j) {
        u[0] = -box + 2.0 * box * i / pts_per_axis;
        u[1] = -box + 2.0 * box * j / pts_per_axis;
        if (std::abs(G(u) - r) <= band_rel * r)
          best = std::min(best, 0.5 * dG(u).squaredNorm());
      }
  } else {
    throw std::invalid_argument("grid_level_min: N <= 2 only");
  }
  return best;
}

// Central-difference gradient and Hessian of a scalar field, step h scaled
// per component.
inline Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd&)>& G,
    const Eigen::VectorXd& u, double h0 = 1e-6) {
  const int n = static_cast<int>(u.size());
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) {
    const double h = h0 * (1.0 + std::abs(u[i]));
    Eigen::VectorXd up = u, um = u;
    up[i] += h;
    um[i] -= h;
    g[i] = (G(up) - G(um)) / (2.0 * h);
  }
  return g;
}

inline Eigen::MatrixXd fd_hessian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& dG,
    const Eigen::VectorXd& u, double h0 = 1e-6) {
  const int n = static_cast<int>(u.size());
  Eigen::MatrixXd H(n, n);
  for (int i = 0; i < n; ++i) {
    const double h = h0 * (1.0 + std::abs(u[i]));
    Eigen::VectorXd up = u, um = u;
    up[i] += h;
    um[i] -= h;
    H.col(i) = (dG(up) - dG(um)) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

// Dense scan of the angle cosine between the deformed-energy gradient and
// the phase-space field for a quadratic potential 0.5<Au,u>, over a polar
// grid of (u, v) pairs in B(0,R)^2. Used to cross-check sampled minima.
inline double grid_min_cosine_quadratic(const Eigen::MatrixXd& A, double gamma,
                                        double lambda, double R, int nr,
                                        int nd) {
  const int n = static_cast<int>(A.rows());
  if (n != 2) throw std::invalid_argument("oracle handles N = 2 only");
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
    Eigen::Vector2d g = A * u;
    Eigen::Vector4d grad_e, f;
    grad_e << g + lambda * (A * v), v + lambda * g;
    f << -v, gamma * v + g;
    const double nf = f.norm(), ne = grad_e.norm();
    if (nf <= 1e-10 || ne <= 1e-10) return;
    best = std::min(best, grad_e.dot(f) / (nf * ne));
  };
  for (int iu = 0; iu <= nr; ++iu)
    for (int ju = 0; ju < nd; ++ju)
      for (int iv = 0; iv <= nr; ++iv)
        for (int jv = 0; jv < nd; ++jv) {
          const double ru = R * iu / nr, rv = R * iv / nr;
          const double au = 2 * M_PI * ju / nd, av = 2 * M_PI * jv / nd;
          consider({ru * std::cos(au), ru * std::sin(au)},
                   {rv * std::cos(av), rv * std::sin(av)});
        }
  return best;
}

}  // namespace oracle
