#include "klflow/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace klflow {

namespace {

// Enough primes for phase-space sampling in dimension 2N with N <= 8,
// plus one spare channel for radii.
constexpr unsigned kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23,
                                29, 31, 37, 41, 43, 47, 53, 59, 61};
constexpr int kMaxDim = static_cast<int>(sizeof(kPrimes) / sizeof(kPrimes[0]));

}  // namespace

std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + counter * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform01(std::uint64_t seed, std::uint64_t counter) {
  // top 53 bits give a dyadic rational in [0, 1)
  return static_cast<double>(splitmix64(seed, counter) >> 11) * 0x1.0p-53;
}

double radical_inverse(std::uint64_t index, unsigned base) {
  double result = 0.0;
  double digit = 1.0 / base;
  while (index > 0) {
    result += digit * static_cast<double>(index % base);
    index /= base;
    digit /= base;
  }
  return result;
}

Eigen::VectorXd halton_point(std::uint64_t index, int dim,
                             std::uint64_t seed) {
  if (dim < 1 || dim > kMaxDim)
    throw std::invalid_argument("halton_point: unsupported dimension");
  // Scrambling by a seed-dependent index offset keeps the low-discrepancy
  // structure while decorrelating distinct seeds. The +1 skips the all-zero
  // point at index 0.
  const std::uint64_t offset = 1 + (splitmix64(seed, 0x5eedULL) & 0xffffULL);
  Eigen::VectorXd x(dim);
  for (int d = 0; d < dim; ++d)
    x[d] = radical_inverse(index + offset, kPrimes[d]);
  return x;
}

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("inverse_normal_cdf: p must be in (0,1)");
  // Acklam's coefficients.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  double q, r, x;
  if (p < plow) {
    q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= phigh) {
    q = p - 0.5;
    r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
          c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  return x;
}

namespace {

// Gaussian-shaped direction from Halton coordinates 1..dim; coordinate 0
// is reserved for the radius. Clamping keeps inverse_normal_cdf in-domain.
Eigen::VectorXd halton_direction(const Eigen::VectorXd& x, int dim,
                                 int first) {
  Eigen::VectorXd d(dim);
  for (int i = 0; i < dim; ++i) {
    double p = x[first + i];
    p = std::min(std::max(p, 1e-12), 1.0 - 1e-12);
    d[i] = inverse_normal_cdf(p);
  }
  const double n = d.norm();
  if (n < 1e-300) {
    d.setZero();
    d[0] = 1.0;
    return d;
  }
  return d / n;
}

}  // namespace

Eigen::VectorXd ball_point(std::uint64_t k, int dim, std::uint64_t seed) {
  const Eigen::VectorXd x = halton_point(k, dim + 1, seed);
  const Eigen::VectorXd dir = halton_direction(x, dim, 1);
  const double r = std::pow(x[0], 1.0 / dim);
  return r * dir;
}

Eigen::VectorXd sphere_point(std::uint64_t k, int dim, std::uint64_t seed) {
  if (k < static_cast<std::uint64_t>(2 * dim)) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e[static_cast<int>(k / 2)] = (k % 2 == 0) ? 1.0 : -1.0;
    return e;
  }
  const Eigen::VectorXd x = halton_point(k - 2 * dim, dim + 1, seed);
  return halton_direction(x, dim, 1);
}

}  // namespace klflow
