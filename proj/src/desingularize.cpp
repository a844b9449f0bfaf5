#include "klflow/desingularize.hpp"

#include <algorithm>
#include <cmath>

#include "klflow/ode.hpp"
#include "klflow/potential.hpp"
#include "klflow/sampling.hpp"

namespace klflow {

namespace {

constexpr double kKlTol = 1e-6;
constexpr double kSqrtBoundFloor = 1e-9;

// Fritsch-Carlson slopes: interior nodes get a weighted harmonic mean of
// the neighboring secants (zero across sign changes), endpoints get the
// shape-limited three-point formula. The resulting cubic is monotone on
// every cell where the data are.
std::vector<double> pchip_slopes(const std::vector<double>& x,
                                 const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  std::vector<double> h(n - 1), d(n - 1), m(n);
  for (int i = 0; i < n - 1; ++i) {
    h[i] = x[i + 1] - x[i];
    d[i] = (y[i + 1] - y[i]) / h[i];
  }
  for (int i = 1; i < n - 1; ++i) {
    if (d[i - 1] * d[i] <= 0.0) {
      m[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
    }
  }
  auto endpoint = [](double h0, double h1, double d0, double d1) {
    double m0 = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (m0 * d0 <= 0.0)
      m0 = 0.0;
    else if (d0 * d1 < 0.0 && std::abs(m0) > 3.0 * std::abs(d0))
      m0 = 3.0 * d0;
    return m0;
  };
  m[0] = endpoint(h[0], h[1], d[0], d[1]);
  m[n - 1] = endpoint(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
  return m;
}

int find_cell(const std::vector<double>& x, double s) {
  // rightmost cell with x[i] <= s; s is already known to be in range
  const auto it = std::upper_bound(x.begin(), x.end(), s);
  int i = static_cast<int>(it - x.begin()) - 1;
  return std::min(std::max(i, 0), static_cast<int>(x.size()) - 2);
}

double eval_cubic(const std::vector<double>& x, const std::vector<double>& y,
                  const std::vector<double>& m, double s) {
  const int i = find_cell(x, s);
  const double h = x[i + 1] - x[i];
  const double t = (s - x[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y[i] + (t3 - 2 * t2 + t) * h * m[i] +
         (-2 * t3 + 3 * t2) * y[i + 1] + (t3 - t2) * h * m[i + 1];
}

double eval_cubic_deriv(const std::vector<double>& x,
                        const std::vector<double>& y,
                        const std::vector<double>& m, double s) {
  const int i = find_cell(x, s);
  const double h = x[i + 1] - x[i];
  const double t = (s - x[i]) / h;
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * y[i] / h + (3 * t2 - 4 * t + 1) * m[i] +
          (-6 * t2 + 6 * t) * y[i + 1] / h + (3 * t2 - 2 * t) * m[i + 1]);
}

}  // namespace

Desingularizer Desingularizer::power(double c, double theta,
                                     double domain_radius) {
  if (!(c > 0.0) || !(theta > 0.0) || !(theta <= 1.0))
    throw InputError("power desingularizer needs c > 0 and theta in (0, 1]");
  if (!(domain_radius > 0.0))
    throw InputError("desingularizer domain radius must be positive");
  Desingularizer d;
  d.power_ = true;
  d.c_ = c;
  d.theta_ = theta;
  d.r0_ = domain_radius;
  return d;
}

Desingularizer Desingularizer::tabulated(std::vector<double> s,
                                         std::vector<double> phi) {
  if (s.size() != phi.size() || s.size() < 4)
    throw InputError("tabulated desingularizer needs >= 4 matched nodes");
  if (s.front() <= 0.0)
    throw InputError("tabulated desingularizer grid must start above 0");
  for (size_t i = 1; i < s.size(); ++i) {
    if (s[i] <= s[i - 1])
      throw InputError("tabulated desingularizer grid must be increasing");
    if (phi[i] <= phi[i - 1])
      throw InputError("tabulated desingularizer values must be increasing");
  }
  if (phi.front() <= 0.0)
    throw InputError("tabulated desingularizer values must be positive");
  Desingularizer d;
  d.power_ = false;
  d.r0_ = s.back();
  d.s_ = std::move(s);
  d.phi_ = std::move(phi);
  d.slope_ = pchip_slopes(d.s_, d.phi_);
  return d;
}

double Desingularizer::c() const {
  if (!power_) throw CapabilityError("tabulated desingularizer has no c");
  return c_;
}

double Desingularizer::theta() const {
  if (!power_) throw CapabilityError("tabulated desingularizer has no theta");
  return theta_;
}

std::string Desingularizer::describe() const {
  char buf[96];
  if (power_)
    std::snprintf(buf, sizeof(buf), "power(c=%g, theta=%g)", c_, theta_);
  else
    std::snprintf(buf, sizeof(buf), "table(n=%d, s in [%g, %g])",
                  static_cast<int>(s_.size()), s_.front(), s_.back());
  return buf;
}

void Desingularizer::check_domain(double s) const {
  if (power_) {
    if (s < 0.0 || s >= r0_)
      throw DomainError("desingularizer argument outside [0, r0)");
  } else {
    if (s < s_.front() || s > s_.back())
      throw DomainError("desingularizer argument outside the table range");
  }
}

double Desingularizer::phi(double s) const {
  check_domain(s);
  if (power_) return c_ * std::pow(s, theta_);
  return eval_cubic(s_, phi_, slope_, s);
}

double Desingularizer::phi_prime(double s) const {
  check_domain(s);
  if (power_) {
    if (s == 0.0) throw DomainError("phi' is unbounded at s = 0");
    return c_ * theta_ * std::pow(s, theta_ - 1.0);
  }
  return eval_cubic_deriv(s_, phi_, slope_, s);
}

double Desingularizer::psi(double y) const {
  if (power_) {
    if (y < 0.0) throw DomainError("psi argument must be non-negative");
    return std::pow(y / c_, 1.0 / theta_);
  }
  const double ylo = phi_.front(), yhi = phi_.back();
  if (y < ylo || y > yhi)
    throw DomainError("psi argument outside the table range");
  // monotone interpolant: plain bisection is safe and exact enough
  double a = s_.front(), b = s_.back();
  for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + b); ++it) {
    const double mid = 0.5 * (a + b);
    if (eval_cubic(s_, phi_, slope_, mid) < y)
      a = mid;
    else
      b = mid;
  }
  return 0.5 * (a + b);
}

double Desingularizer::psi_prime(double y) const {
  if (power_) {
    if (y <= 0.0) throw DomainError("psi' needs a positive argument");
    return std::pow(y / c_, 1.0 / theta_ - 1.0) / (c_ * theta_);
  }
  return 1.0 / phi_prime(psi(y));
}

double Desingularizer::mu(double s) const {
  if (power_) {
    if (s <= 0.0 || s >= r0_)
      throw DomainError("mu argument outside (0, r0)");
    if (theta_ == 0.5) return c_ * c_ / 4.0 * std::log(s);
    const double p = 2.0 * theta_ - 1.0;
    return c_ * c_ * theta_ * theta_ * std::pow(s, p) / p;
  }
  check_domain(s);
  // quadrature of phi'^2 anchored at the first grid node
  const double a = s_.front();
  if (s == a) return 0.0;
  // composite Simpson on a fixed refinement of the covered cells; phi' is a
  // piecewise quadratic, so per-cell Simpson on 8 panels is already exact to
  // rounding for the integrand's smooth pieces
  double total = 0.0;
  auto f = [&](double x) {
    const double d = eval_cubic_deriv(s_, phi_, slope_, x);
    return d * d;
  };
  const int i_end = find_cell(s_, s);
  for (int i = 0; i <= i_end; ++i) {
    const double lo = std::max(a, s_[i]);
    const double hi = std::min(s, s_[i + 1]);
    if (hi <= lo) continue;
    const int panels = 8;
    const double h = (hi - lo) / panels;
    double acc = f(lo) + f(hi);
    for (int k = 1; k < panels; ++k)
      acc += (k % 2 ? 4.0 : 2.0) * f(lo + k * h);
    total += acc * h / 3.0;
  }
  return total;
}

SqrtBoundCheck check_sqrt_lower_bound(const Desingularizer& d,
                                      const std::vector<double>& s_grid) {
  SqrtBoundCheck out;
  double best = std::numeric_limits<double>::infinity();
  int used = 0;
  for (double s : s_grid) {
    if (s <= 0.0) continue;
    if (!d.is_power() && (s < d.domain_min() || s > d.domain_radius()))
      continue;
    if (d.is_power() && s >= d.domain_radius()) continue;
    best = std::min(best, d.phi_prime(s) * std::sqrt(s));
    ++used;
  }
  if (used == 0) throw InputError("sqrt bound check: empty grid");
  out.beta_best = best;
  if (d.is_power()) {
    // analytic verdict: phi' sqrt(s) = c theta s^{theta-1/2} is bounded
    // below near 0 exactly when theta <= 1/2
    out.pass = d.theta() <= 0.5 + 1e-15;
  } else {
    // tables cannot be judged by the sampled minimum alone (any finite grid
    // has a positive one); decay of phi'(s) sqrt(s) toward the low end of
    // the grid is the failure signature
    double s_lo = std::numeric_limits<double>::infinity(), s_hi = 0.0;
    for (double s : s_grid) {
      if (s < d.domain_min() || s > d.domain_radius() || s <= 0.0) continue;
      s_lo = std::min(s_lo, s);
      s_hi = std::max(s_hi, s);
    }
    const double beta_lo = d.phi_prime(s_lo) * std::sqrt(s_lo);
    const double beta_hi = d.phi_prime(s_hi) * std::sqrt(s_hi);
    out.pass = beta_lo >= 0.95 * beta_hi && out.beta_best >= kSqrtBoundFloor;
  }
  return out;
}

namespace {

void require_worst_case_admissible(const Desingularizer& d, double gamma0) {
  if (!(gamma0 > 0.0)) throw InputError("gamma0 must be positive");
  if (d.is_power()) {
    if (d.theta() > 0.5 + 1e-15)
      throw ContractError(
          "worst-case curve needs the sqrt lower bound (theta <= 1/2)");
    // range of phi on [0, r0)
    if (gamma0 >= d.phi(d.domain_radius() * (1.0 - 1e-12)))
      throw InputError("gamma0 outside the range of phi");
  } else {
    const auto chk = check_sqrt_lower_bound(
        d, logspace(d.domain_min(), d.domain_radius(), 64));
    if (!chk.pass)
      throw ContractError(
          "worst-case curve needs the sqrt lower bound on the table");
    if (gamma0 > d.phi(d.domain_radius()) || gamma0 < d.phi(d.domain_min()))
      throw InputError("gamma0 outside the range of the tabulated phi");
  }
}

double power_curve_value(double c, double theta, double gamma0, double t) {
  if (theta == 0.5) return gamma0 * std::exp(-2.0 * t / (c * c));
  const double b = (2.0 * theta - 1.0) / theta;  // negative here
  const double kappa =
      (1.0 - 2.0 * theta) / (theta * theta) * std::pow(c, -1.0 / theta);
  return std::pow(std::pow(gamma0, b) + kappa * t, 1.0 / b);
}

}  // namespace

std::vector<double> worst_case_curve(const Desingularizer& d, double gamma0,
                                     const std::vector<double>& t_grid) {
  require_worst_case_admissible(d, gamma0);
  if (t_grid.empty()) return {};
  if (t_grid.front() < 0.0)
    throw InputError("worst-case curve: t_grid must be non-negative");
  for (size_t i = 1; i < t_grid.size(); ++i)
    if (t_grid[i] < t_grid[i - 1])
      throw InputError("worst-case curve: t_grid must be ascending");

  std::vector<double> out(t_grid.size());
  if (d.is_power()) {
    for (size_t i = 0; i < t_grid.size(); ++i)
      out[i] = power_curve_value(d.c(), d.theta(), gamma0, t_grid[i]);
    return out;
  }

  // Tabulated branch: integrate gamma' = -psi'(gamma). RK stages may poke
  // slightly past the current state, so the RHS clamps its argument to the
  // range of phi; leaving that range at an accepted step is a domain error
  // because the table cannot say anything below its first node.
  const double y_lo = d.phi(d.domain_min());
  const double y_hi = d.phi(d.domain_radius());
  OdeRhs rhs = [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const double g = std::min(std::max(y[0], y_lo), y_hi);
    dy.resize(1);
    dy[0] = -d.psi_prime(g);
  };

  std::vector<double> ts;
  std::vector<double> ys, fs;
  Eigen::VectorXd y0(1);
  y0[0] = gamma0;

  OdeOptions opts;
  opts.abs_tol = 1e-12;
  opts.rel_tol = 1e-10;
  const double t_end = t_grid.back();
  ts.push_back(0.0);
  {
    Eigen::VectorXd f0(1);
    rhs(0.0, y0, f0);
    ys.push_back(y0[0]);
    fs.push_back(f0[0]);
  }
  if (t_end > 0.0) {
    integrate_adaptive(
        rhs, 0.0, y0, t_end, opts,
        [&](double, const Eigen::VectorXd&, const Eigen::VectorXd&, double t1,
            const Eigen::VectorXd& y1, const Eigen::VectorXd& f1) {
          if (y1[0] < y_lo * (1.0 + 1e-9))
            throw DomainError(
                "worst-case curve left the tabulated range; shorten t_grid");
          ts.push_back(t1);
          ys.push_back(y1[0]);
          fs.push_back(f1[0]);
          return StepControl::kContinue;
        });
  }

  for (size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    int j = static_cast<int>(it - ts.begin()) - 1;
    j = std::min(std::max(j, 0), static_cast<int>(ts.size()) - 2);
    if (ts.size() == 1) {
      out[i] = ys[0];
      continue;
    }
    Eigen::VectorXd a(1), b(1), fa(1), fb(1);
    a[0] = ys[j];
    b[0] = ys[j + 1];
    fa[0] = fs[j];
    fb[0] = fs[j + 1];
    out[i] = hermite(ts[j], a, fa, ts[j + 1], b, fb, t)[0];
  }
  return out;
}

double worst_case_value(const Desingularizer& d, double gamma0, double t) {
  require_worst_case_admissible(d, gamma0);
  if (t < 0.0) throw InputError("worst-case value: t must be non-negative");
  if (d.is_power()) return power_curve_value(d.c(), d.theta(), gamma0, t);
  // invert t = mu(psi(gamma0)) - mu(psi(g)) by bisection in g
  const double t_g = worst_case_inverse(d, gamma0, d.phi(d.domain_min()));
  if (t > t_g)
    throw DomainError("worst-case value: time beyond the tabulated range");
  double a = d.phi(d.domain_min()), b = gamma0;
  const double target = d.mu(d.psi(gamma0)) - t;
  for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + b); ++it) {
    const double mid = 0.5 * (a + b);
    if (d.mu(d.psi(mid)) < target)
      a = mid;
    else
      b = mid;
  }
  return 0.5 * (a + b);
}

double worst_case_inverse(const Desingularizer& d, double gamma0, double g) {
  require_worst_case_admissible(d, gamma0);
  if (!(g > 0.0) || g > gamma0)
    throw InputError("worst-case inverse: need 0 < g <= gamma0");
  if (!d.is_power() && g < d.phi(d.domain_min()))
    throw DomainError("worst-case inverse: g below the tabulated range");
  return d.mu(d.psi(gamma0)) - d.mu(d.psi(g));
}

LojasiewiczFit estimate_lojasiewicz(
    const std::vector<std::pair<double, double>>& pairs,
    std::pair<double, double> window) {
  if (!(window.first > 0.0) || !(window.second > window.first))
    throw InputError("exponent fit: window must satisfy 0 < lo < hi");
  std::vector<double> lg, ln;
  for (const auto& [g, n] : pairs) {
    if (g < window.first || g > window.second) continue;
    if (!(g > 0.0) || !(n > 0.0)) continue;
    lg.push_back(std::log(g));
    ln.push_back(std::log(n));
  }
  const int m = static_cast<int>(lg.size());
  if (m < 10)
    throw InsufficientDataError(
        "exponent fit: fewer than 10 usable pairs in the window");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    sx += lg[i];
    sy += ln[i];
    sxx += lg[i] * lg[i];
    sxy += lg[i] * ln[i];
  }
  const double det = m * sxx - sx * sx;
  if (std::abs(det) < 1e-12 * (1.0 + sxx))
    throw InsufficientDataError("exponent fit: degenerate abscissae");
  const double slope = (m * sxy - sx * sy) / det;
  const double icept = (sy - slope * sx) / m;
  LojasiewiczFit fit;
  fit.theta_hat = 1.0 - slope;
  fit.c_hat = (fit.theta_hat > 0.0 && fit.theta_hat <= 1.0)
                  ? std::exp(-icept) / fit.theta_hat
                  : std::numeric_limits<double>::quiet_NaN();
  double rss = 0.0;
  for (int i = 0; i < m; ++i) {
    const double r = ln[i] - (slope * lg[i] + icept);
    rss += r * r;
  }
  fit.residual = std::sqrt(rss / m);
  fit.n_used = m;
  return fit;
}

KlCheck check_kl_inequality(const PotentialSpec& spec,
                            const Eigen::VectorXd& u_bar,
                            const Desingularizer& d, double eta, int budget,
                            std::uint64_t seed) {
  if (!(eta > 0.0)) throw InputError("KL check: eta must be positive");
  if (budget < 1) throw InputError("KL check: budget must be positive");
  if (u_bar.size() != spec.dimension)
    throw InputError("KL check: base point dimension mismatch");
  if (spec.gradient(u_bar).norm() > 1e-10)
    throw InputError("KL check: base point is not critical");

  const int N = spec.dimension;
  const double g_bar = spec.value(u_bar);
  KlCheck out;
  double margin = std::numeric_limits<double>::infinity();

  // Two sample families: a ball filling for coverage and geometric shells
  // toward the center, where the small-gap behavior of phi' lives.
  const int n_ball = (2 * budget) / 3;
  const int n_shell = budget - n_ball;
  auto consider = [&](const Eigen::VectorXd& u) {
    const double gap = std::abs(spec.value(u) - g_bar);
    if (gap == 0.0) {
      ++out.n_zero_gap;
      return;
    }
    const double hi =
        d.is_power() ? d.domain_radius() : d.domain_radius() + 0.0;
    if (gap >= hi || gap < d.domain_min()) {
      ++out.n_outside_domain;
      return;
    }
    margin = std::min(margin, d.phi_prime(gap) * spec.gradient(u).norm());
    ++out.n_used;
  };

  for (int k = 0; k < n_ball; ++k)
    consider(u_bar + eta * ball_point(static_cast<std::uint64_t>(k), N, seed));
  // shells: radii eta * 10^{-12 j / n_shell}
  for (int j = 0; j < n_shell; ++j) {
    const double r = eta * std::pow(10.0, -12.0 * (j + 1) /
                                               static_cast<double>(n_shell));
    consider(u_bar +
             r * sphere_point(static_cast<std::uint64_t>(j), N, seed));
  }

  if (out.n_used == 0)
    throw DegenerateSampleError(
        "KL check: every sample sat on the level set of the base point");
  out.margin = margin;
  out.pass = margin >= 1.0 - kKlTol;
  return out;
}

std::vector<double> logspace(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2)
    throw InputError("logspace: need 0 < lo < hi and n >= 2");
  std::vector<double> out(n);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < n; ++i)
    out[i] = std::exp(llo + (lhi - llo) * i / (n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

}  // namespace klflow
