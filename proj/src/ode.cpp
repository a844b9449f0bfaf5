#include "klflow/ode.hpp"

#include <algorithm>
#include <cmath>

namespace klflow {

namespace {

// Dormand-Prince 5(4) tableau.
const double c2 = 0.2, c3 = 0.3, c4 = 0.8, c5 = 8.0 / 9.0;
const double a21 = 0.2;
const double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
const double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
const double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
             a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
const double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
             a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
             a65 = -5103.0 / 18656.0;
const double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
             a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
// difference between the 5th and the embedded 4th order weights
const double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
             e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

// Lund/PI stabilization, same constants as Hairer's dopri5.
const double kBeta = 0.04;
const double kExpo1 = 0.2 - kBeta * 0.75;
const double kSafe = 0.9;
const double kFacl = 0.2;   // max shrink per step: h/5
const double kFacr = 10.0;  // max growth per step: 10h

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0,
                  const Eigen::VectorXd& y1, double atol, double rtol) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sk =
        atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double q = err[i] / sk;
    sum += q * q;
  }
  return std::sqrt(sum / static_cast<double>(err.size()));
}

// Hairer-style starting step: trial Euler step plus a second derivative
// estimate.
double initial_step(const OdeRhs& f, double t0, const Eigen::VectorXd& y0,
                    const Eigen::VectorXd& f0, double t_end, double atol,
                    double rtol) {
  const double dir = (t_end >= t0) ? 1.0 : -1.0;
  double dnf = 0.0, dny = 0.0;
  for (Eigen::Index i = 0; i < y0.size(); ++i) {
    const double sk = atol + rtol * std::abs(y0[i]);
    dnf += (f0[i] / sk) * (f0[i] / sk);
    dny += (y0[i] / sk) * (y0[i] / sk);
  }
  double h;
  if (dnf <= 1e-10 || dny <= 1e-10)
    h = 1e-6;
  else
    h = 0.01 * std::sqrt(dny / dnf);
  h = std::min(h, std::abs(t_end - t0));
  Eigen::VectorXd y1 = y0 + dir * h * f0;
  Eigen::VectorXd f1(y0.size());
  f(t0 + dir * h, y1, f1);
  double der2 = 0.0;
  for (Eigen::Index i = 0; i < y0.size(); ++i) {
    const double sk = atol + rtol * std::abs(y0[i]);
    const double q = (f1[i] - f0[i]) / sk;
    der2 += q * q;
  }
  der2 = std::sqrt(der2) / h;
  const double der12 = std::max(der2, std::sqrt(dnf));
  double h1;
  if (der12 <= 1e-15)
    h1 = std::max(1e-6, 1e-3 * h);
  else
    h1 = std::pow(0.01 / der12, 0.2);
  return dir * std::min({100.0 * h, h1, std::abs(t_end - t0)});
}

}  // namespace

void integrate_adaptive(const OdeRhs& f, double t0, const Eigen::VectorXd& y0,
                        double t_end, const OdeOptions& opts,
                        const StepCallback& cb) {
  const Eigen::Index n = y0.size();
  if (t_end == t0) return;
  if (t_end < t0) throw InputError("integrate_adaptive: t_end < t0");

  Eigen::VectorXd y = y0, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n),
                  ytmp(n), ynew(n), err(n);
  double t = t0;
  f(t, y, k1);

  double h = initial_step(f, t0, y, k1, t_end, opts.abs_tol, opts.rel_tol);
  if (opts.h_max > 0.0) h = std::min(h, opts.h_max);
  double facold = 1e-4;
  std::uint64_t steps = 0;

  while (t < t_end) {
    if (++steps > opts.max_steps) throw StepLimitError(t);
    if (t + h >= t_end) h = t_end - t;
    if (h <= opts.h_min || t + h == t) throw StepUnderflowError(t);

    ytmp = y + h * (a21 * k1);
    f(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + h, ytmp, k6);
    ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    f(t + h, ynew, k7);  // FSAL: becomes k1 of the next step
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const double errn =
        error_norm(err, y, ynew, opts.abs_tol, opts.rel_tol);
    const double fac11 = std::pow(std::max(errn, 1e-32), kExpo1);

    if (errn <= 1.0) {
      // accepted
      facold = std::max(errn, 1e-4);
      double fac = fac11 / std::pow(facold, kBeta);
      fac = std::max(1.0 / kFacr, std::min(1.0 / kFacl, fac / kSafe));
      double hnew = h / fac;
      if (opts.h_max > 0.0) hnew = std::min(hnew, opts.h_max);

      const double t1 = t + h;
      if (cb(t, y, k1, t1, ynew, k7) == StepControl::kStop) return;
      t = t1;
      y.swap(ynew);
      k1.swap(k7);
      h = hnew;
    } else {
      h = h / std::min(1.0 / kFacl, fac11 / kSafe);
    }
  }
}

Eigen::VectorXd hermite(double t0, const Eigen::VectorXd& y0,
                        const Eigen::VectorXd& f0, double t1,
                        const Eigen::VectorXd& y1, const Eigen::VectorXd& f1,
                        double t) {
  const double h = t1 - t0;
  if (h == 0.0) return y0;
  const double s = (t - t0) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1;
}

}  // namespace klflow
