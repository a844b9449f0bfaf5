#include "klflow/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "klflow/ode.hpp"

namespace klflow {

namespace {

void validate(const PotentialSpec& spec, const DynamicsConfig& cfg,
              const Eigen::VectorXd& u0, const Eigen::VectorXd& v0) {
  if (u0.size() != spec.dimension)
    throw InputError("integrate: u0 dimension mismatch");
  if (cfg.mode == FlowKind::kSecondOrder && v0.size() != spec.dimension)
    throw InputError("integrate: v0 dimension mismatch");
  if (cfg.mode == FlowKind::kSecondOrder && !(cfg.gamma > 0.0))
    throw InputError("integrate: damping gamma must be positive");
  if (!(cfg.abs_tol > 0.0) || !(cfg.rel_tol > 0.0))
    throw InputError("integrate: tolerances must be positive");
  if (!(cfg.t_max > 0.0)) throw InputError("integrate: t_max must be positive");
  if (!(cfg.r_escape > 0.0))
    throw InputError("integrate: r_escape must be positive");
  if (cfg.conv_window < 0.0)
    throw InputError("integrate: conv_window must be non-negative");
  if (!u0.allFinite() || (v0.size() > 0 && !v0.allFinite()))
    throw InputError("integrate: initial state must be finite");
}

// derivative of the cubic Hermite interpolant, used for v in gradient-flow
// dense output
Eigen::VectorXd hermite_deriv(double t0, const Eigen::VectorXd& y0,
                              const Eigen::VectorXd& f0, double t1,
                              const Eigen::VectorXd& y1,
                              const Eigen::VectorXd& f1, double t) {
  const double h = t1 - t0;
  if (h == 0.0) return f0;
  const double s = (t - t0) / h;
  const double s2 = s * s;
  return ((6 * s2 - 6 * s) / h) * y0 + (3 * s2 - 4 * s + 1) * f0 +
         ((-6 * s2 + 6 * s) / h) * y1 + (3 * s2 - 2 * s) * f1;
}

}  // namespace

Eigen::VectorXd Trajectory::u_at(std::size_t i) const {
  return states[i].head(dimension);
}

Eigen::VectorXd Trajectory::v_at(std::size_t i) const {
  if (mode == FlowKind::kSecondOrder) return states[i].tail(dimension);
  return derivs[i];  // u' = -grad G
}

PhaseState Trajectory::sample(double t) const {
  if (times.empty()) throw ContractError("sample: empty trajectory");
  if (t < times.front() || t > times.back())
    throw InputError("sample: time outside the recorded range");
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t j = static_cast<std::size_t>(
      std::max<std::ptrdiff_t>(it - times.begin() - 1, 0));
  j = std::min(j, times.size() >= 2 ? times.size() - 2 : std::size_t{0});
  PhaseState out;
  if (times.size() == 1) {
    out.u = u_at(0);
    out.v = v_at(0);
    return out;
  }
  const Eigen::VectorXd y = hermite(times[j], states[j], derivs[j],
                                    times[j + 1], states[j + 1],
                                    derivs[j + 1], t);
  if (mode == FlowKind::kSecondOrder) {
    out.u = y.head(dimension);
    out.v = y.tail(dimension);
  } else {
    out.u = y;
    out.v = hermite_deriv(times[j], states[j], derivs[j], times[j + 1],
                          states[j + 1], derivs[j + 1], t);
  }
  return out;
}

PhaseState second_order_field(const PotentialSpec& spec,
                              const DynamicsConfig& cfg,
                              const PhaseState& state) {
  if (state.u.size() != spec.dimension || state.v.size() != spec.dimension)
    throw InputError("second_order_field: state dimension mismatch");
  PhaseState out;
  out.u = state.v;
  out.v = -cfg.gamma * state.v - spec.gradient(state.u);
  return out;
}

Trajectory integrate(const PotentialSpec& spec, const DynamicsConfig& cfg,
                     const Eigen::VectorXd& u0, const Eigen::VectorXd& v0) {
  validate(spec, cfg, u0, v0);
  const int N = spec.dimension;
  const bool second = cfg.mode == FlowKind::kSecondOrder;

  Trajectory traj;
  traj.dimension = N;
  traj.mode = cfg.mode;
  traj.gamma = cfg.gamma;

  OdeRhs rhs;
  if (second) {
    rhs = [&spec, &cfg, N](double, const Eigen::VectorXd& y,
                           Eigen::VectorXd& dy) {
      dy.resize(2 * N);
      dy.head(N) = y.tail(N);
      dy.tail(N) = -cfg.gamma * y.tail(N) - spec.gradient(y.head(N));
    };
  } else {
    rhs = [&spec](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
      dy = -spec.gradient(y);
    };
  }

  Eigen::VectorXd y0;
  if (second) {
    y0.resize(2 * N);
    y0 << u0, v0;
  } else {
    y0 = u0;
  }

  // grad G is recoverable from the stored derivative, so recording a row
  // costs no extra evaluations
  auto record = [&](double t, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& f) {
    traj.times.push_back(t);
    traj.states.push_back(y);
    traj.derivs.push_back(f);
    double energy, gn;
    if (second) {
      const Eigen::VectorXd g = -(f.tail(N) + cfg.gamma * y.tail(N));
      gn = g.norm();
      energy = spec.value(y.head(N)) + 0.5 * y.tail(N).squaredNorm();
    } else {
      gn = f.norm();
      energy = spec.value(y);
    }
    traj.energies.push_back(energy);
    traj.grad_norms.push_back(gn);
  };

  {
    Eigen::VectorXd f0(y0.size());
    rhs(0.0, y0, f0);
    record(0.0, y0, f0);
  }

  const double inf = std::numeric_limits<double>::infinity();
  double cond_since = inf;
  auto check_row = [&](std::size_t i) -> bool {
    // returns true when the run is over
    const double t = traj.times[i];
    const Eigen::VectorXd u = traj.u_at(i);
    if (!traj.states[i].allFinite())
      throw IntegrationError("integrate: state became non-finite", traj, t);
    if (u.norm() >= cfg.r_escape) {
      traj.classification.kind = Classification::kEscaped;
      traj.classification.limit = u;
      traj.classification.time = t;
      return true;
    }
    const double vn = traj.v_at(i).norm();
    const bool cond = vn <= cfg.conv_tol_v && traj.grad_norms[i] <= cfg.conv_tol_g;
    if (!cond) {
      cond_since = inf;
    } else {
      if (cond_since == inf) cond_since = t;
      if (t - cond_since >= cfg.conv_window) {
        traj.classification.kind = Classification::kConverged;
        traj.classification.limit = u;
        traj.classification.time = t;
        return true;
      }
    }
    return false;
  };

  if (check_row(0)) return traj;

  OdeOptions opts;
  opts.abs_tol = cfg.abs_tol;
  opts.rel_tol = cfg.rel_tol;
  opts.h_min = 1e-14 * cfg.t_max;
  opts.max_steps = cfg.max_steps;

  try {
    integrate_adaptive(rhs, 0.0, y0, cfg.t_max, opts,
                       [&](double, const Eigen::VectorXd&,
                           const Eigen::VectorXd&, double t1,
                           const Eigen::VectorXd& y1,
                           const Eigen::VectorXd& f1) {
                         record(t1, y1, f1);
                         return check_row(traj.size() - 1)
                                    ? StepControl::kStop
                                    : StepControl::kContinue;
                       });
  } catch (const StepUnderflowError& e) {
    traj.classification.kind = Classification::kUndetermined;
    traj.classification.time = e.t;
    throw IntegrationError("integrate: " + std::string(e.what()), traj, e.t);
  } catch (const StepLimitError& e) {
    traj.classification.kind = Classification::kUndetermined;
    traj.classification.time = e.t;
    throw IntegrationError("integrate: " + std::string(e.what()), traj, e.t);
  }

  if (traj.classification.kind == Classification::kUndetermined) {
    traj.classification.limit = traj.u_at(traj.size() - 1);
    traj.classification.time = traj.times.back();
  }
  return traj;
}

Classification classify_asymptotics(const Trajectory& traj,
                                    const DynamicsConfig& cfg) {
  Classification out;
  if (traj.size() == 0) throw ContractError("classify: empty trajectory");
  const double inf = std::numeric_limits<double>::infinity();
  double cond_since = inf;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.times[i];
    const Eigen::VectorXd u = traj.u_at(i);
    if (u.norm() >= cfg.r_escape) {
      out.kind = Classification::kEscaped;
      out.limit = u;
      out.time = t;
      return out;
    }
    const bool cond = traj.v_at(i).norm() <= cfg.conv_tol_v &&
                      traj.grad_norms[i] <= cfg.conv_tol_g;
    if (!cond) {
      cond_since = inf;
      continue;
    }
    if (cond_since == inf) cond_since = t;
    if (t - cond_since >= cfg.conv_window) {
      out.kind = Classification::kConverged;
      out.limit = u;
      out.time = t;
      return out;
    }
  }
  out.kind = Classification::kUndetermined;
  out.limit = traj.u_at(traj.size() - 1);
  out.time = traj.times.back();
  return out;
}

namespace {

// ||u'|| on a refined grid: each accepted step contributes `panels`
// trapezoid cells with Hermite values at the internal nodes.
double vnorm_integral(const Trajectory& traj, double a, double b) {
  if (b <= a) return 0.0;
  const int panels = 8;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const double lo = std::max(a, traj.times[i]);
    const double hi = std::min(b, traj.times[i + 1]);
    if (hi <= lo) continue;
    double prev_t = lo;
    double prev_f = traj.sample(prev_t).v.norm();
    for (int k = 1; k <= panels; ++k) {
      const double t = lo + (hi - lo) * k / panels;
      const double f = traj.sample(t).v.norm();
      total += 0.5 * (prev_f + f) * (t - prev_t);
      prev_t = t;
      prev_f = f;
    }
  }
  return total;
}

}  // namespace

VelocityL1 velocity_l1(const Trajectory& traj, double t_tail) {
  if (traj.classification.kind != Classification::kConverged)
    throw ContractError(
        "velocity_l1: defined for converged trajectories only");
  if (t_tail < 0.0) throw InputError("velocity_l1: t_tail must be >= 0");
  VelocityL1 out;
  out.total = vnorm_integral(traj, traj.times.front(), traj.times.back());
  out.tail = vnorm_integral(traj, std::max(t_tail, traj.times.front()),
                            traj.times.back());
  return out;
}

double velocity_l1_upto(const Trajectory& traj, double T) {
  if (traj.size() == 0) throw ContractError("velocity_l1_upto: empty");
  return vnorm_integral(traj, traj.times.front(),
                        std::min(T, traj.times.back()));
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw InputError("cannot open " + path + " for writing");
  const int N = traj.dimension;
  std::fprintf(f, "t");
  for (int i = 1; i <= N; ++i) std::fprintf(f, ",u_%d", i);
  for (int i = 1; i <= N; ++i) std::fprintf(f, ",v_%d", i);
  std::fprintf(f, ",E_total,grad_norm\n");
  for (std::size_t i = 0; i < traj.size(); ++i) {
    std::fprintf(f, "%.17g", traj.times[i]);
    const Eigen::VectorXd u = traj.u_at(i), v = traj.v_at(i);
    for (int j = 0; j < N; ++j) std::fprintf(f, ",%.17g", u[j]);
    for (int j = 0; j < N; ++j) std::fprintf(f, ",%.17g", v[j]);
    std::fprintf(f, ",%.17g,%.17g\n", traj.energies[i], traj.grad_norms[i]);
  }
  std::fclose(f);
}

}  // namespace klflow
