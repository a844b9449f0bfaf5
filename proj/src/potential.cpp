#include "klflow/potential.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "klflow/sampling.hpp"

namespace klflow {

namespace {

Eigen::VectorXd zero(int n) { return Eigen::VectorXd::Zero(n); }

// smallest |eigenvalue| above the rank cutoff; 0 if A is numerically zero
double smallest_nonzero_abs_eigenvalue(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
  double best = 0.0;
  const double cutoff = 1e-12 * std::max(1.0, A.norm());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double a = std::abs(eig.eigenvalues()[i]);
    if (a > cutoff && (best == 0.0 || a < best)) best = a;
  }
  return best;
}

}  // namespace

PotentialSpec quadratic_potential(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() < 1)
    throw InputError("quadratic potential: A must be square");
  if ((A - A.transpose()).norm() > 1e-12 * (1.0 + A.norm()))
    throw InputError("quadratic potential: A must be symmetric");
  const int n = static_cast<int>(A.rows());
  PotentialSpec spec;
  spec.name = "quadratic";
  spec.dimension = n;
  spec.value = [A](const Eigen::VectorXd& u) { return 0.5 * u.dot(A * u); };
  spec.gradient = [A](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return A * u;
  };
  spec.hessian = [A](const Eigen::VectorXd&) { return A; };
  spec.known_critical_point = zero(n);
  // sqrt(2 s / |lambda|) has KL margin exactly 1 on the worst eigendirection
  const double lam = smallest_nonzero_abs_eigenvalue(A);
  if (lam > 0.0)
    spec.known_desingularizer = Desingularizer::power(std::sqrt(2.0 / lam),
                                                      0.5);
  return spec;
}

PotentialSpec saddle_potential() {
  PotentialSpec spec;
  spec.name = "saddle";
  spec.dimension = 2;
  spec.value = [](const Eigen::VectorXd& u) {
    return u[0] * u[0] - u[1] * u[1];
  };
  spec.gradient = [](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    Eigen::VectorXd g(2);
    g << 2.0 * u[0], -2.0 * u[1];
    return g;
  };
  spec.hessian = [](const Eigen::VectorXd&) {
    Eigen::MatrixXd H(2, 2);
    H << 2.0, 0.0, 0.0, -2.0;
    return H;
  };
  spec.known_critical_point = zero(2);
  // |u1^2 - u2^2| <= ||u||^2 makes the margin of sqrt(s) exactly 1 on the
  // axes and larger elsewhere
  spec.known_desingularizer = Desingularizer::power(1.0, 0.5);
  return spec;
}

PotentialSpec power_potential(int dim, double p) {
  if (dim < 1) throw InputError("power potential: dimension must be >= 1");
  if (!(p >= 1.0)) throw InputError("power potential: p must be >= 1");
  PotentialSpec spec;
  spec.name = "power";
  spec.dimension = dim;
  spec.value = [p](const Eigen::VectorXd& u) {
    return std::pow(u.squaredNorm(), p);
  };
  spec.gradient = [p, dim](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    const double s = u.squaredNorm();
    if (s == 0.0) return zero(dim);
    return (2.0 * p * std::pow(s, p - 1.0)) * u;
  };
  spec.hessian = [p, dim](const Eigen::VectorXd& u) -> Eigen::MatrixXd {
    const double s = u.squaredNorm();
    if (s == 0.0) {
      if (p == 1.0) return 2.0 * Eigen::MatrixXd::Identity(dim, dim);
      return Eigen::MatrixXd::Zero(dim, dim);
    }
    Eigen::MatrixXd H = (2.0 * p * std::pow(s, p - 1.0)) *
                        Eigen::MatrixXd::Identity(dim, dim);
    if (p != 1.0)
      H += (4.0 * p * (p - 1.0) * std::pow(s, p - 2.0)) *
           (u * u.transpose());
    return H;
  };
  spec.known_critical_point = zero(dim);
  spec.known_desingularizer = Desingularizer::power(1.0, 1.0 / (2.0 * p));
  return spec;
}

PotentialSpec radial_potential(int dim, double c, double theta,
                               const Eigen::VectorXd& center) {
  if (dim < 1) throw InputError("radial potential: dimension must be >= 1");
  if (!(c > 0.0) || !(theta > 0.0) || theta > 0.5)
    throw InputError(
        "radial potential: needs c > 0 and theta in (0, 1/2] so the profile "
        "stays differentiable at the center");
  if (center.size() != dim)
    throw InputError("radial potential: center dimension mismatch");
  const double q = 1.0 / theta;  // q >= 2
  PotentialSpec spec;
  spec.name = "radial";
  spec.dimension = dim;
  spec.value = [c, q, center](const Eigen::VectorXd& u) {
    return std::pow((u - center).norm() / c, q);
  };
  spec.gradient = [c, q, center,
                   dim](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    const Eigen::VectorXd w = u - center;
    const double r = w.norm();
    if (r == 0.0) return zero(dim);
    const double dpsi = (q / c) * std::pow(r / c, q - 1.0);
    return (dpsi / r) * w;
  };
  spec.hessian = [c, q, center,
                  dim](const Eigen::VectorXd& u) -> Eigen::MatrixXd {
    const Eigen::VectorXd w = u - center;
    const double r = w.norm();
    if (r == 0.0) {
      if (q == 2.0)
        return (2.0 / (c * c)) * Eigen::MatrixXd::Identity(dim, dim);
      return Eigen::MatrixXd::Zero(dim, dim);
    }
    const double dpsi = (q / c) * std::pow(r / c, q - 1.0);
    const double ddpsi = (q * (q - 1.0) / (c * c)) * std::pow(r / c, q - 2.0);
    const Eigen::MatrixXd P = (w / r) * (w / r).transpose();
    return ddpsi * P +
           (dpsi / r) * (Eigen::MatrixXd::Identity(dim, dim) - P);
  };
  spec.known_critical_point = center;
  spec.known_desingularizer = Desingularizer::power(c, theta);
  return spec;
}

PotentialSpec convex_growth_potential(int dim, double r) {
  if (dim < 1)
    throw InputError("convex growth potential: dimension must be >= 1");
  if (!(r >= 2.0)) throw InputError("convex growth potential: r must be >= 2");
  PotentialSpec spec;
  spec.name = "convex_growth";
  spec.dimension = dim;
  spec.value = [r](const Eigen::VectorXd& u) {
    return std::pow(u.squaredNorm(), r / 2.0);
  };
  spec.gradient = [r, dim](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    const double s = u.squaredNorm();
    if (s == 0.0) return zero(dim);
    return (r * std::pow(s, r / 2.0 - 1.0)) * u;
  };
  spec.hessian = [r, dim](const Eigen::VectorXd& u) -> Eigen::MatrixXd {
    const double s = u.squaredNorm();
    if (s == 0.0) {
      if (r == 2.0) return 2.0 * Eigen::MatrixXd::Identity(dim, dim);
      return Eigen::MatrixXd::Zero(dim, dim);
    }
    Eigen::MatrixXd H =
        (r * std::pow(s, r / 2.0 - 1.0)) * Eigen::MatrixXd::Identity(dim, dim);
    if (r != 2.0)
      H += (r * (r - 2.0) * std::pow(s, r / 2.0 - 2.0)) * (u * u.transpose());
    return H;
  };
  spec.known_critical_point = zero(dim);
  // r-th order growth straightens with exponent 1/r: phi'(g) ||grad G||
  // = (1/r) g^{1/r - 1} * r ||u||^{r-1} = 1 along every ray
  spec.known_desingularizer = Desingularizer::power(1.0, 1.0 / r);
  return spec;
}

PotentialSpec nonsmooth_32_potential() {
  PotentialSpec spec;
  spec.name = "nonsmooth_32";
  spec.dimension = 1;
  spec.value = [](const Eigen::VectorXd& u) {
    return std::pow(std::abs(u[0]), 1.5);
  };
  spec.gradient = [](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    Eigen::VectorXd g(1);
    const double x = u[0];
    g[0] = (x == 0.0) ? 0.0
                      : 1.5 * (x > 0 ? 1.0 : -1.0) * std::sqrt(std::abs(x));
    return g;
  };
  spec.hessian = nullptr;  // |u|^{3/2} is C^1 but not C^2 at the origin
  spec.known_critical_point = zero(1);
  // the classic counterexample exponent: desingularizes, but violates the
  // sqrt lower bound
  spec.known_desingularizer = Desingularizer::power(1.0, 2.0 / 3.0);
  return spec;
}

PotentialSpec neg_quadratic_potential(int dim) {
  if (dim < 1)
    throw InputError("neg quadratic potential: dimension must be >= 1");
  PotentialSpec spec;
  spec.name = "neg_quadratic";
  spec.dimension = dim;
  spec.value = [](const Eigen::VectorXd& u) { return -0.5 * u.squaredNorm(); };
  spec.gradient = [](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return -u;
  };
  spec.hessian = [dim](const Eigen::VectorXd&) -> Eigen::MatrixXd {
    return -Eigen::MatrixXd::Identity(dim, dim);
  };
  spec.known_critical_point = zero(dim);
  spec.known_desingularizer = Desingularizer::power(std::sqrt(2.0), 0.5);
  return spec;
}

std::vector<std::string> catalog_names() {
  return {"quadratic",     "saddle",       "power",        "radial",
          "convex_growth", "nonsmooth_32", "neg_quadratic"};
}

PotentialSpec make_catalog_potential(const std::string& name,
                                     const CatalogParams& params) {
  if (name == "quadratic") {
    if (params.a_full.size() > 0) return quadratic_potential(params.a_full);
    if (params.a_diag.size() > 0)
      return quadratic_potential(
          Eigen::MatrixXd(params.a_diag.asDiagonal()));
    return quadratic_potential(
        Eigen::MatrixXd::Identity(params.dimension, params.dimension));
  }
  if (name == "saddle") return saddle_potential();
  if (name == "power") return power_potential(params.dimension, params.p);
  if (name == "radial") {
    Eigen::VectorXd center = params.center.size() > 0
                                 ? params.center
                                 : zero(params.dimension);
    return radial_potential(params.dimension, params.c, params.theta, center);
  }
  if (name == "convex_growth")
    return convex_growth_potential(params.dimension, params.r);
  if (name == "nonsmooth_32") return nonsmooth_32_potential();
  if (name == "neg_quadratic")
    return neg_quadratic_potential(params.dimension);
  throw InputError("unknown catalog potential: " + name);
}

Evaluation evaluate(const PotentialSpec& spec, const Eigen::VectorXd& u,
                    bool want_hessian) {
  if (u.size() != spec.dimension)
    throw InputError("evaluate: point has dimension " +
                     std::to_string(u.size()) + ", potential expects " +
                     std::to_string(spec.dimension));
  Evaluation out;
  out.value = spec.value(u);
  out.gradient = spec.gradient(u);
  auto finite = [](double x) { return std::isfinite(x); };
  if (!finite(out.value) || !out.gradient.allFinite()) {
    std::ostringstream os;
    os << "evaluate: non-finite result at u = [" << u.transpose() << "]";
    throw DomainError(os.str());
  }
  if (want_hessian && spec.has_hessian()) {
    out.hessian = spec.hessian(u);
    if (!out.hessian->allFinite()) {
      std::ostringstream os;
      os << "evaluate: non-finite Hessian at u = [" << u.transpose() << "]";
      throw DomainError(os.str());
    }
  }
  return out;
}

DerivativeCheck check_derivatives(const PotentialSpec& spec,
                                  const std::vector<Eigen::VectorXd>& points,
                                  double tol) {
  if (points.empty()) throw InputError("check_derivatives: no points");
  DerivativeCheck out;
  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  for (const auto& u : points) {
    if (u.size() != spec.dimension)
      throw InputError("check_derivatives: point dimension mismatch");
    const int n = spec.dimension;
    Eigen::VectorXd g_fd(n);
    for (int i = 0; i < n; ++i) {
      const double h = h0 * (1.0 + std::abs(u[i]));
      Eigen::VectorXd up = u, um = u;
      up[i] += h;
      um[i] -= h;
      g_fd[i] = (spec.value(up) - spec.value(um)) / (2.0 * h);
    }
    const Eigen::VectorXd g = spec.gradient(u);
    out.max_err_gradient = std::max(out.max_err_gradient,
                                    (g_fd - g).norm() / (1.0 + g.norm()));
    if (spec.has_hessian()) {
      Eigen::MatrixXd H_fd(n, n);
      for (int i = 0; i < n; ++i) {
        const double h = h0 * (1.0 + std::abs(u[i]));
        Eigen::VectorXd up = u, um = u;
        up[i] += h;
        um[i] -= h;
        H_fd.col(i) = (spec.gradient(up) - spec.gradient(um)) / (2.0 * h);
      }
      H_fd = 0.5 * (H_fd + H_fd.transpose());
      const Eigen::MatrixXd H = spec.hessian(u);
      out.max_err_hessian = std::max(
          out.max_err_hessian, (H_fd - H).norm() / (1.0 + H.norm()));
      out.hessian_checked = true;
    }
  }
  out.pass = out.max_err_gradient <= tol &&
             (!out.hessian_checked || out.max_err_hessian <= tol);
  return out;
}

double hessian_bound(const PotentialSpec& spec, double R, int budget,
                     std::uint64_t seed) {
  if (!spec.has_hessian())
    throw CapabilityError("hessian_bound: potential has no Hessian");
  if (!(R > 0.0)) throw InputError("hessian_bound: R must be positive");
  if (budget < 1) throw InputError("hessian_bound: budget must be positive");
  const int n = spec.dimension;
  double best = 0.0;
  auto consider = [&](const Eigen::VectorXd& u) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(spec.hessian(u));
    const double lo = std::abs(eig.eigenvalues().minCoeff());
    const double hi = std::abs(eig.eigenvalues().maxCoeff());
    best = std::max(best, std::max(lo, hi));
  };
  consider(Eigen::VectorXd::Zero(n));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[i] = R;
    consider(e);
    consider(-e);
  }
  // The filling scales a fixed unit-ball family by R, so enlarging R keeps
  // every previous sample direction and the reported sup is monotone in R
  // whenever the Hessian grows radially.
  for (int k = 0; k < budget; ++k)
    consider(R * ball_point(static_cast<std::uint64_t>(k), n, seed));
  return best;
}

ValueGradientBound check_value_gradient_bound(const PotentialSpec& spec,
                                              const Eigen::VectorXd& u_bar,
                                              double eps, int budget,
                                              std::uint64_t seed) {
  if (!(eps > 0.0))
    throw InputError("value-gradient bound: eps must be positive");
  if (budget < 8)
    throw InputError("value-gradient bound: budget too small");
  if (u_bar.size() != spec.dimension)
    throw InputError("value-gradient bound: base point dimension mismatch");
  const int n = spec.dimension;
  const double g_bar = spec.value(u_bar);
  ValueGradientBound out;
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](const Eigen::VectorXd& u) {
    const double gap = std::abs(spec.value(u) - g_bar);
    const double gn2 = spec.gradient(u).squaredNorm();
    if (gn2 == 0.0) {
      ++out.n_zero_grad;
      return;
    }
    if (gap == 0.0) {
      // on the level set of u_bar the ratio carries no information about
      // the bound; count and move on
      ++out.n_zero_gap;
      return;
    }
    best = std::min(best, gap / gn2);
    ++out.n_used;
  };
  // geometric shells over twelve decades catch constants that degenerate at
  // the base point; a ball filling covers the rest of the neighborhood
  const int n_shell = budget / 2;
  for (int j = 0; j < n_shell; ++j) {
    const double r =
        eps * std::pow(10.0, -12.0 * (j + 1) / static_cast<double>(n_shell));
    consider(u_bar + r * sphere_point(static_cast<std::uint64_t>(j), n, seed));
  }
  for (int k = 0; k < budget - n_shell; ++k)
    consider(u_bar + eps * ball_point(static_cast<std::uint64_t>(k), n, seed));
  if (out.n_used == 0)
    throw DegenerateSampleError(
        "value-gradient bound: no sample produced a usable ratio");
  out.c_best = best;
  out.pass = out.c_best >= 1e-6;
  return out;
}

}  // namespace klflow
