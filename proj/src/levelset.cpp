#include "klflow/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "klflow/errors.hpp"
#include "klflow/sampling.hpp"

namespace klflow {

namespace {

constexpr double kLevelResidualRel = 1e-9;
constexpr int kMaxDim = 8;

double level_value(const PotentialSpec& spec, const Eigen::VectorXd& u) {
  return spec.value(u);
}

// Scalar Newton correction along the local gradient direction; returns
// false when the directional derivative degenerates or the residual
// tolerance 1e-12 * (1 + r) is not reached.
bool restore_to_level(const PotentialSpec& spec, Eigen::VectorXd& u,
                      double level, double r) {
  const double tol = 1e-12 * (1.0 + std::abs(r));
  for (int it = 0; it < 8; ++it) {
    const double m = level_value(spec, u) - level;
    if (std::abs(m) <= tol) return true;
    const Eigen::VectorXd g = spec.gradient(u);
    const double gg = g.squaredNorm();
    if (!(gg > 1e-300) || !std::isfinite(m)) return false;
    u -= (m / gg) * g;
  }
  return std::abs(level_value(spec, u) - level) <= tol;
}

// grad of 0.5 ||grad G||^2 is Hess G * grad G; falls back to a gradient
// difference along the gradient direction when no Hessian is available.
Eigen::VectorXd objective_gradient(const PotentialSpec& spec,
                                   const Eigen::VectorXd& u,
                                   const Eigen::VectorXd& g) {
  if (spec.has_hessian()) return spec.hessian(u) * g;
  const double gn = g.norm();
  if (gn == 0.0) return Eigen::VectorXd::Zero(u.size());
  const double h = 6e-6 * (1.0 + u.norm());
  const Eigen::VectorXd dir = g / gn;
  const Eigen::VectorXd diff =
      (spec.gradient(u + h * dir) - spec.gradient(u - h * dir)) / (2.0 * h);
  return gn * diff;
}

struct StartResult {
  Eigen::VectorXd u;
  double psi = std::numeric_limits<double>::infinity();
  bool ok = false;
  bool step_converged = false;
};

StartResult solve_from_direction(const PotentialSpec& spec,
                                 const Eigen::VectorXd& u_bar, double r,
                                 double level, const Eigen::VectorXd& dir,
                                 const LevelOptions& opts) {
  StartResult res;

  // bracket the level crossing along the ray
  double tau_lo = 0.0;
  double tau_hi = 1.0;
  auto h = [&](double tau) {
    return level_value(spec, u_bar + tau * dir) - level;
  };
  double h_hi = h(tau_hi);
  while (std::isfinite(h_hi) && h_hi < 0.0 && tau_hi < 1e15) {
    tau_lo = tau_hi;
    tau_hi *= 2.0;
    h_hi = h(tau_hi);
  }
  if (!std::isfinite(h_hi) || h_hi < 0.0) return res;
  for (int it = 0; it < 120; ++it) {
    const double mid = 0.5 * (tau_lo + tau_hi);
    if (h(mid) < 0.0)
      tau_lo = mid;
    else
      tau_hi = mid;
  }
  Eigen::VectorXd u = u_bar + 0.5 * (tau_lo + tau_hi) * dir;
  if (!restore_to_level(spec, u, level, r)) return res;

  // projected-gradient descent on 0.5 ||grad G||^2 with restoration
  Eigen::VectorXd g = spec.gradient(u);
  double f = 0.5 * g.squaredNorm();
  double step = 0.1 * (1.0 + u.norm()) / (1.0 + g.norm());
  bool step_converged = false;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Eigen::VectorXd df = objective_gradient(spec, u, g);
    const double gg = g.squaredNorm();
    Eigen::VectorXd p = df;
    if (gg > 1e-300) p -= (df.dot(g) / gg) * g;
    const double pn = p.norm();
    if (pn * step <= opts.step_tol) {
      step_converged = true;
      break;
    }
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      Eigen::VectorXd cand = u - step * p;
      if (!restore_to_level(spec, cand, level, r)) {
        step *= 0.5;
        continue;
      }
      const Eigen::VectorXd gc = spec.gradient(cand);
      const double fc = 0.5 * gc.squaredNorm();
      if (fc <= f - 1e-4 * step * pn * pn) {
        u = cand;
        g = gc;
        f = fc;
        step = std::min(step * 1.5, 1e6);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      step_converged = pn * step <= opts.step_tol;
      break;
    }
  }

  if (!restore_to_level(spec, u, level, r)) return res;
  res.u = u;
  res.psi = 0.5 * spec.gradient(u).squaredNorm();
  res.step_converged = step_converged;
  res.ok = std::abs(level_value(spec, u) - level) <=
           kLevelResidualRel * (1.0 + std::abs(r));
  return res;
}

double rayleigh_multiplier(const PotentialSpec& spec, const Eigen::VectorXd& u,
                           bool fd_requested, bool* is_fd) {
  const Eigen::VectorXd g = spec.gradient(u);
  const double gg = g.squaredNorm();
  if (!(gg > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  if (spec.has_hessian()) {
    if (is_fd) *is_fd = false;
    return g.dot(spec.hessian(u) * g) / gg;
  }
  if (!fd_requested) return std::numeric_limits<double>::quiet_NaN();
  if (is_fd) *is_fd = true;
  const Eigen::VectorXd dir = g / std::sqrt(gg);
  const double h = 6e-6 * (1.0 + u.norm());
  const Eigen::VectorXd diff =
      (spec.gradient(u + h * dir) - spec.gradient(u - h * dir)) / (2.0 * h);
  return diff.dot(dir);
}

}  // namespace

LevelPoint minimize_on_level(const PotentialSpec& spec,
                             const Eigen::VectorXd& u_bar, double r,
                             const LevelOptions& opts) {
  if (spec.dimension > kMaxDim)
    throw CapabilityError("level-set search supports dimension <= 8");
  if (u_bar.size() != spec.dimension)
    throw InputError("base point dimension mismatch");
  if (!(r > 0.0)) throw InputError("level offset r must be positive");
  if (!(r < spec.level_r_max))
    throw InputError("level offset r exceeds the configured maximum");
  if (opts.starts < 1) throw InputError("need at least one start");

  const double level = level_value(spec, u_bar) + r;
  StartResult best;
  for (int k = 0; k < opts.starts; ++k) {
    const Eigen::VectorXd dir = sphere_point(k, spec.dimension, opts.seed);
    const StartResult cand =
        solve_from_direction(spec, u_bar, r, level, dir, opts);
    if (cand.ok && cand.psi < best.psi) best = cand;
  }
  if (!best.ok)
    throw LevelNotReachedError("no direction from the base point crosses the "
                               "requested level");

  LevelPoint out;
  out.u_star = best.u;
  out.psi = best.psi;
  out.multiplier = rayleigh_multiplier(spec, best.u, opts.fd_multiplier,
                                       &out.multiplier_is_fd);
  out.converged = best.step_converged;
  return out;
}

LevelSetProfile psi_profile(const PotentialSpec& spec,
                            const Eigen::VectorXd& u_bar, double r_hi,
                            double r_lo, int points_per_decade,
                            const LevelOptions& opts) {
  if (!(r_hi > r_lo) || !(r_lo > 0.0))
    throw InputError("need r_hi > r_lo > 0");
  if (points_per_decade < 1)
    throw InputError("points_per_decade must be at least 1");

  const double decades = std::log10(r_hi / r_lo);
  const int n = std::max(1, static_cast<int>(
                                std::lround(points_per_decade * decades)));
  LevelSetProfile p;
  for (int i = 0; i <= n; ++i) {
    const double w = static_cast<double>(i) / n;
    const double r = std::exp((1.0 - w) * std::log(r_hi) + w * std::log(r_lo));
    p.r_grid.push_back(r);
    bool ok = true;
    LevelPoint pt;
    try {
      pt = minimize_on_level(spec, u_bar, r, opts);
    } catch (const Error&) {
      ok = false;
    }
    if (ok) {
      p.psi_values.push_back(pt.psi);
      p.minimizers.push_back(pt.u_star);
      p.multipliers.push_back(pt.multiplier);
      p.converged.push_back(pt.converged);
    } else {
      p.psi_values.push_back(std::numeric_limits<double>::quiet_NaN());
      p.minimizers.push_back(Eigen::VectorXd());
      p.multipliers.push_back(std::numeric_limits<double>::quiet_NaN());
      p.converged.push_back(false);
    }
  }

  double lam = -std::numeric_limits<double>::infinity();
  double ratio_max = -std::numeric_limits<double>::infinity();
  double ratio_first = std::numeric_limits<double>::quiet_NaN();
  double ratio_last = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < p.r_grid.size(); ++i) {
    if (!p.converged[i]) continue;
    const double ratio = p.psi_values[i] / p.r_grid[i];
    if (std::isnan(ratio_first)) ratio_first = ratio;  // largest r
    ratio_last = ratio;                                // smallest r
    ratio_max = std::max(ratio_max, ratio);
    if (std::isfinite(p.multipliers[i])) lam = std::max(lam, p.multipliers[i]);
  }
  const bool any = std::isfinite(ratio_max);
  p.lambda_bar = std::isfinite(lam)
                     ? lam
                     : std::numeric_limits<double>::quiet_NaN();
  p.ratio_max = any ? ratio_max : std::numeric_limits<double>::quiet_NaN();
  p.ratio_bounded = any && ratio_last <= 2.0 * ratio_first;
  return p;
}

std::vector<std::pair<double, double>> implied_desingularizer_bound(
    const LevelSetProfile& profile) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < profile.r_grid.size(); ++i) {
    if (!profile.converged[i]) continue;
    if (!(profile.psi_values[i] > 0.0)) continue;
    out.emplace_back(profile.r_grid[i],
                     1.0 / std::sqrt(2.0 * profile.psi_values[i]));
  }
  if (out.size() < 2)
    throw InsufficientDataError(
        "profile has fewer than 2 valid points; no implied bound");
  return out;
}

void write_profile_csv(const std::string& path, const LevelSetProfile& p) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << "r,psi,ratio,multiplier,converged\n";
  char buf[256];
  for (std::size_t i = 0; i < p.r_grid.size(); ++i) {
    const double ratio = p.psi_values[i] / p.r_grid[i];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%d\n",
                  p.r_grid[i], p.psi_values[i], ratio, p.multipliers[i],
                  p.converged[i] ? 1 : 0);
    out << buf;
  }
  out << "# verdict: " << (p.ratio_bounded ? "bounded" : "unbounded") << "\n";
}

}  // namespace klflow
