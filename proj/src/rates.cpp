#include "klflow/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "klflow/errors.hpp"

namespace klflow {

namespace {

constexpr double kEnvelopeRelSlack = 1e-6;
constexpr double kEnvelopeAbsSlack = 1e-12;
const double kNan = std::numeric_limits<double>::quiet_NaN();

double u_distance(const Trajectory& traj, std::size_t i,
                  const Eigen::VectorXd& u_inf) {
  return (traj.u_at(i) - u_inf).norm();
}

double phase_distance(const Trajectory& traj, std::size_t i,
                      const Eigen::VectorXd& u_inf) {
  const double du2 = (traj.u_at(i) - u_inf).squaredNorm();
  if (traj.mode == FlowKind::kGradientFlow) return std::sqrt(du2);
  return std::sqrt(du2 + traj.v_at(i).squaredNorm());
}

// Envelope checks start once the trajectory enters B(u_inf, 1e-2 d0): the
// estimates are local statements about the approach, not the transient.
std::size_t start_index(const Trajectory& traj, const Eigen::VectorXd& u_inf) {
  const double d0 = u_distance(traj, 0, u_inf);
  if (!(d0 > 0.0)) return 0;
  const double thr = 1e-2 * d0;
  for (std::size_t i = 0; i < traj.size(); ++i)
    if (u_distance(traj, i, u_inf) <= thr) return i;
  return traj.size() - 1;
}

double energy_gap(const Trajectory& traj, std::size_t i,
                  const DeformedEnergy& de, double e_inf) {
  if (traj.mode == FlowKind::kGradientFlow)
    return de.spec.value(traj.u_at(i)) - e_inf;
  return deformed_energy_value(de, traj.u_at(i), traj.v_at(i)) - e_inf;
}

void require_converged(const Trajectory& traj, const char* what) {
  if (traj.classification.kind != Classification::kConverged)
    throw ContractError(std::string(what) +
                        " requires a converged trajectory");
}

struct SeriesPoint {
  double t;
  double val;
};

// Shared alignment engine. The series must be positive; value_space maps
// through psi so the envelope bounds energies instead of distances. c_time
// is scanned from large to small: the largest passing rescaling is the
// sharpest statement, and shrinking c_time always flattens the envelope.
WorstCaseEnvelope fit_worstcase_series(const std::vector<SeriesPoint>& pts,
                                       std::size_t i_start,
                                       const Desingularizer& desing,
                                       bool value_space) {
  WorstCaseEnvelope best;
  if (pts.size() < 2 || i_start + 1 >= pts.size()) return best;

  double gamma0, g_start;
  try {
    gamma0 = value_space ? desing.phi(pts.front().val) : pts.front().val;
    g_start =
        value_space ? desing.phi(pts[i_start].val) : pts[i_start].val;
  } catch (const Error&) {
    return best;
  }
  g_start = std::min(g_start, gamma0 * (1.0 - 1e-15));
  if (!(g_start > 0.0) || !(gamma0 > 0.0)) return best;

  double elapsed0;
  try {
    elapsed0 = worst_case_inverse(desing, gamma0, g_start);
  } catch (const Error&) {
    return best;
  }

  const double t_start_time = pts[i_start].t;
  const double t_last = pts.back().t;
  const double t_mid = t_start_time + 0.25 * (t_last - t_start_time);
  std::size_t i_mid = i_start;
  while (i_mid + 1 < pts.size() && pts[i_mid + 1].t <= t_mid) ++i_mid;

  best.t_start = t_start_time;
  best.n_checked = static_cast<int>(pts.size() - i_start);
  best.max_violation = std::numeric_limits<double>::infinity();

  for (int k = 8; k >= -16; --k) {
    const double c = std::ldexp(1.0, k);
    const double t0 = elapsed0 - c * t_start_time;

    std::vector<double> env(pts.size() - i_start);
    bool usable = true;
    for (std::size_t i = i_start; i < pts.size() && usable; ++i) {
      const double tau = std::max(0.0, c * pts[i].t + t0);
      try {
        const double g = worst_case_value(desing, gamma0, tau);
        env[i - i_start] = value_space ? desing.psi(g) : g;
      } catch (const Error&) {
        usable = false;
      }
      if (usable && !(env[i - i_start] > 0.0)) usable = false;
    }
    if (!usable) continue;

    double scale = 0.0;
    for (std::size_t i = i_start; i <= i_mid; ++i)
      scale = std::max(scale, pts[i].val / env[i - i_start]);
    if (!(scale > 0.0) || !std::isfinite(scale)) continue;

    double max_viol = -std::numeric_limits<double>::infinity();
    bool pass = true;
    for (std::size_t i = i_start; i < pts.size(); ++i) {
      const double rhs = scale * env[i - i_start];
      max_viol = std::max(max_viol, pts[i].val - rhs);
      if (i > i_mid &&
          pts[i].val > rhs * (1.0 + kEnvelopeRelSlack) + kEnvelopeAbsSlack)
        pass = false;
    }

    if (pass) {
      best.c_time = c;
      best.scale = scale;
      best.t0 = t0;
      best.pass = true;
      best.max_violation = max_viol;
      return best;
    }
    if (max_viol < best.max_violation) {
      best.c_time = c;
      best.scale = scale;
      best.t0 = t0;
      best.max_violation = max_viol;
    }
  }
  return best;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
};

LineFit least_squares(const std::vector<double>& x,
                      const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LineFit f;
  const double denom = n * sxx - sx * sx;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

}  // namespace

EnvelopeVerdict check_distance_envelope(const Trajectory& traj,
                                        const Eigen::VectorXd& u_inf,
                                        const Desingularizer& desing,
                                        double alpha,
                                        const DeformedEnergy& energy) {
  require_converged(traj, "check_distance_envelope");
  if (!(alpha > 0.0)) throw InputError("alpha must be positive");

  const std::size_t i0 = start_index(traj, u_inf);
  const double e_inf = energy.spec.value(u_inf);

  EnvelopeVerdict v;
  v.t_start = traj.times[i0];
  v.max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t i = i0; i < traj.size(); ++i) {
    const double gap = energy_gap(traj, i, energy, e_inf);
    if (!(gap > 0.0) || gap < desing.domain_min() ||
        gap >= desing.domain_radius()) {
      ++v.n_excluded;
      continue;
    }
    const double rhs = desing.phi(gap) / alpha + 1e-9;
    const double lhs = phase_distance(traj, i, u_inf);
    v.max_violation = std::max(v.max_violation, lhs - rhs);
    ++v.n_checked;
  }
  if (v.n_checked == 0) {
    // nothing left above the rest level; the estimate holds vacuously
    v.pass = true;
    v.max_violation = 0.0;
    return v;
  }
  v.pass = v.max_violation <= 0.0;
  return v;
}

WorstCaseEnvelope check_worstcase_envelope(const Trajectory& traj,
                                           const Eigen::VectorXd& u_inf,
                                           const Desingularizer& desing) {
  require_converged(traj, "check_worstcase_envelope");
  const double grid_hi = desing.is_power()
                             ? 1e-2
                             : std::min(1e-2, 0.99 * desing.domain_radius());
  const double grid_lo = std::max(1e-8, desing.domain_min() * 1.01);
  if (!check_sqrt_lower_bound(desing, logspace(grid_lo, grid_hi, 40)).pass)
    throw ContractError(
        "desingularizer fails the sqrt lower bound; the worst-case curve is "
        "not defined for all time");

  const std::size_t i0 = start_index(traj, u_inf);
  const double t_start_time = traj.times[i0];
  std::vector<SeriesPoint> pts;
  std::size_t i_start = 0;
  int excluded = 0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double d = u_distance(traj, i, u_inf);
    if (!(d > 0.0)) {
      ++excluded;
      continue;
    }
    if (traj.times[i] <= t_start_time) i_start = pts.size();
    pts.push_back({traj.times[i], d});
  }
  WorstCaseEnvelope out = fit_worstcase_series(pts, i_start, desing, false);
  out.n_excluded = excluded;
  return out;
}

WorstCaseEnvelope check_energy_envelope(const Trajectory& traj,
                                        const Eigen::VectorXd& u_inf,
                                        const Desingularizer& desing,
                                        const DeformedEnergy& energy) {
  require_converged(traj, "check_energy_envelope");
  const std::size_t i0 = start_index(traj, u_inf);
  const double t_start_time = traj.times[i0];
  const double e_inf = energy.spec.value(u_inf);

  std::vector<SeriesPoint> pts;
  std::size_t i_start = 0;
  int excluded = 0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double gap = energy_gap(traj, i, energy, e_inf);
    if (!(gap > 0.0) || gap < desing.domain_min() ||
        gap >= desing.domain_radius()) {
      ++excluded;
      continue;
    }
    if (traj.times[i] <= t_start_time) i_start = pts.size();
    pts.push_back({traj.times[i], gap});
  }
  WorstCaseEnvelope out = fit_worstcase_series(pts, i_start, desing, true);
  out.n_excluded = excluded;
  return out;
}

EmpiricalLaw fit_decay(const Trajectory& traj, const Eigen::VectorXd& u_inf,
                       std::pair<double, double> window) {
  if (!(window.first >= 0.0) || !(window.second > window.first))
    throw InputError("need 0 <= t_lo < t_hi");
  if (traj.size() == 0 ||
      window.second > traj.times.back() * (1.0 + 1e-12) + 1e-300)
    throw InputError("fit window exceeds the trajectory horizon");

  const double floor = 100.0 * std::numeric_limits<double>::epsilon();
  std::vector<double> ts, ds;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.times[i];
    if (t < window.first || t > window.second || t <= 0.0) continue;
    const double d = u_distance(traj, i, u_inf);
    if (d < floor)
      throw RoundingFloorError(
          "distances in the fit window sit at the rounding floor; narrow the "
          "window toward earlier times");
    ts.push_back(t);
    ds.push_back(d);
  }
  if (ts.size() < 3)
    throw InsufficientDataError("fewer than 3 samples in the fit window");

  std::vector<double> log_t(ts.size()), log_d(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    log_t[i] = std::log(ts[i]);
    log_d[i] = std::log(ds[i]);
  }
  const LineFit pw = least_squares(log_t, log_d);
  const LineFit ex = least_squares(ts, log_d);

  EmpiricalLaw law;
  law.power_exponent = -pw.slope;
  law.exponential_rate = -ex.slope;
  law.residual_power = pw.rms;
  law.residual_exponential = ex.rms;
  law.n_used = static_cast<int>(ts.size());
  const double rp = pw.rms, re = ex.rms;
  const bool power_wins = rp < re;
  law.parameter = power_wins ? law.power_exponent : law.exponential_rate;
  if (std::abs(rp - re) <= 0.1 * std::max(rp, re))
    law.kind = EmpiricalLaw::Kind::kAmbiguous;
  else
    law.kind = power_wins ? EmpiricalLaw::Kind::kPower
                          : EmpiricalLaw::Kind::kExponential;
  return law;
}

RateReport end_to_end(const PotentialSpec& spec, const DynamicsConfig& cfg,
                      const Eigen::VectorXd& u0, const Eigen::VectorXd& v0,
                      const RatesOptions& opts) {
  RateReport rep;
  rep.potential = spec.name;
  rep.gamma = cfg.gamma;
  rep.theta_hat = rep.c_hat = rep.loj_residual = kNan;
  rep.velocity_l1_total = kNan;

  const Trajectory traj = integrate(spec, cfg, u0, v0);
  rep.classification = traj.classification;
  if (traj.classification.kind != Classification::kConverged) {
    rep.note = "trajectory did not converge; rate analysis skipped";
    return rep;
  }
  const Eigen::VectorXd u_inf = traj.classification.limit;
  rep.limit_point = u_inf;
  rep.velocity_l1_total =
      velocity_l1(traj, 0.5 * traj.classification.time).total;

  // tail exponent estimate from (value gap, gradient norm) pairs
  const double g_inf = spec.value(u_inf);
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    double g_val = traj.energies[i];
    if (traj.mode == FlowKind::kSecondOrder)
      g_val -= 0.5 * traj.v_at(i).squaredNorm();
    const double gap = g_val - g_inf;
    if (gap > 0.0 && traj.grad_norms[i] > 0.0)
      pairs.emplace_back(gap, traj.grad_norms[i]);
  }
  try {
    const LojasiewiczFit loj = estimate_lojasiewicz(pairs);
    rep.theta_hat = loj.theta_hat;
    rep.c_hat = loj.c_hat;
    rep.loj_residual = loj.residual;
  } catch (const Error&) {
  }

  std::optional<Desingularizer> desing = opts.desing;
  if (!desing) {
    if (!(rep.theta_hat > 0.0) || !(rep.theta_hat <= 1.0) ||
        !(rep.c_hat > 0.0)) {
      rep.note = "no desingularizer given and tail estimation failed";
      return rep;
    }
    // the slope fit cannot resolve the theta = 1/2 boundary, and the
    // worst-case curve only exists below it; an estimate a hair above is
    // noise, not evidence of a steeper profile
    double theta_fit = rep.theta_hat;
    if (theta_fit > 0.5 && theta_fit < 0.5 + 1e-6) theta_fit = 0.5;
    desing = Desingularizer::power(rep.c_hat, theta_fit);
    rep.desing_estimated = true;
  }
  rep.desingularizer = desing->describe();

  const double grid_lo = std::max(1e-8, desing->domain_min() * 1.01);
  const double grid_hi = desing->is_power()
                             ? 1e-2
                             : std::min(1e-2, 0.99 * desing->domain_radius());
  rep.sqrt_check =
      check_sqrt_lower_bound(*desing, logspace(grid_lo, grid_hi, 40));

  DeformedEnergy de{spec, cfg.gamma, 0.0};
  if (traj.mode == FlowKind::kSecondOrder) {
    if (!spec.has_hessian()) {
      rep.note = "potential has no Hessian; no angle certificate";
      return rep;
    }
    double R = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i)
      R = std::max(R, traj.states[i].norm());
    R = std::max(R, 1e-6);
    const double M = hessian_bound(spec, R, 4096, opts.seed);
    de.lambda = 0.5 * std::min(lambda_zero(cfg.gamma, M), lambda_one(M));
    rep.certificate =
        certify_quasigradient(de, R, opts.certify_budget, opts.seed);
    rep.asfast = asfast_bound(de, R, opts.certify_budget, opts.seed);
    rep.alpha_used = rep.certificate.alpha_certified;
  } else {
    // first-order flow: the field is the energy gradient itself
    rep.alpha_used = 1.0;
  }

  if (!rep.sqrt_check.pass) {
    rep.note =
        "desingularizer fails the sqrt lower bound; envelope checks skipped";
    return rep;
  }

  rep.automaj =
      check_distance_envelope(traj, u_inf, *desing, rep.alpha_used, de);
  rep.majval = check_energy_envelope(traj, u_inf, *desing, de);
  rep.majgrad1 = check_worstcase_envelope(traj, u_inf, *desing);
  rep.analyzed = true;

  std::pair<double, double> window = opts.fit_window;
  if (!(window.second > window.first)) {
    const double T = traj.classification.time;
    const double th = std::isnan(rep.theta_hat) ? 0.25 : rep.theta_hat;
    // far from theta = 1/2 the tail is polynomial and the recorded limit
    // contaminates late distances, so the window stays early
    const double t2 = (th >= 0.45 ? 0.5 : 2.5e-3) * T;
    window = {t2 / 100.0, t2};
  }
  try {
    rep.law = fit_decay(traj, u_inf, window);
    rep.law_fitted = true;
    rep.fit_window_used = window;
  } catch (const Error&) {
    try {
      const double T = traj.classification.time;
      window = {0.01 * T, 0.5 * T};
      rep.law = fit_decay(traj, u_inf, window);
      rep.law_fitted = true;
      rep.fit_window_used = window;
    } catch (const Error&) {
      rep.law_fitted = false;
    }
  }
  return rep;
}

}  // namespace klflow
