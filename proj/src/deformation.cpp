#include "klflow/deformation.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "klflow/errors.hpp"
#include "klflow/sampling.hpp"

namespace klflow {

namespace {

constexpr double kEps0 = 1e-12;
// Below this both the field and the energy gradient count as vanished.
constexpr double kRestTol = 1e-10;

struct PhaseSample {
  Eigen::VectorXd u;
  Eigen::VectorXd v;
};

// Deterministic family on B(0,R) x B(0,R): the rest point (u_bar, 0), the
// slice v = 0 where the undeformed dissipation degenerates, the slice
// u = u_bar where grad G vanishes, and a joint fill of the product ball.
std::vector<PhaseSample> phase_samples(const PotentialSpec& spec, double R,
                                       int budget, std::uint64_t seed) {
  const int n = spec.dimension;
  Eigen::VectorXd ubar = Eigen::VectorXd::Zero(n);
  if (spec.known_critical_point.size() == n) ubar = spec.known_critical_point;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);

  std::vector<PhaseSample> out;
  out.reserve(static_cast<std::size_t>(budget) + 1);
  out.push_back({ubar, zero});

  const int slice = std::max(1, budget / 8);
  const std::uint64_t s_v0 = splitmix64(seed, 0xd1f0);
  const std::uint64_t s_u0 = splitmix64(seed, 0xd1f1);
  const std::uint64_t s_ju = splitmix64(seed, 0xd1f2);
  const std::uint64_t s_jv = splitmix64(seed, 0xd1f3);

  for (int k = 0; k < slice; ++k)
    out.push_back({R * ball_point(k, n, s_v0), zero});
  for (int k = 0; k < slice; ++k)
    out.push_back({ubar, R * ball_point(k, n, s_u0)});
  for (int k = 0; k < budget - 2 * slice; ++k)
    out.push_back(
        {R * ball_point(k, n, s_ju), R * ball_point(k, n, s_jv)});
  return out;
}

void check_inputs(const DeformedEnergy& de, double R, int budget) {
  if (!(de.gamma > 0.0)) throw InputError("gamma must be positive");
  if (!(de.lambda >= 0.0)) throw InputError("lambda must be nonnegative");
  if (!(R > 0.0) || !std::isfinite(R))
    throw InputError("sampling radius must be positive and finite");
  if (budget < 8) throw InputError("sample budget must be at least 8");
  if (!de.spec.has_hessian())
    throw CapabilityError("potential '" + de.spec.name +
                          "' has no Hessian; the deformed gradient and the "
                          "Hessian sup norm are unavailable");
}

}  // namespace

double lambda_zero(double gamma, double M) {
  if (!(gamma > 0.0)) throw InputError("gamma must be positive");
  if (!(M >= 0.0)) throw InputError("Hessian bound must be nonnegative");
  return gamma / (2.0 * (M + 0.5 * gamma * gamma + kEps0));
}

double lambda_one(double M) {
  if (!(M >= 0.0)) throw InputError("Hessian bound must be nonnegative");
  return std::min(0.25, 1.0 / (2.0 * (M * M + 1.0)));
}

double alpha_quadratic_bound(double gamma, double M, double lambda) {
  if (!(lambda > 0.0) || !(lambda < lambda_zero(gamma, M)))
    throw InputError("lambda must lie in (0, lambda_zero)");
  const double from_v = gamma - (M + 0.5 * gamma * gamma) * lambda;
  return std::min(from_v, 0.5 * lambda);
}

double angle_normalization(double gamma, double M, double lambda) {
  const double lm = lambda * M;
  const double cross = 0.5 * (3.0 + 2.0 * lm * lm + 2.0 * gamma * gamma);
  return std::max(cross, 2.0 + lambda * lambda);
}

EnergyEval energy_value_and_gradient(const DeformedEnergy& de,
                                     const PhaseState& state) {
  const Eigen::VectorXd& u = state.u;
  const Eigen::VectorXd& v = state.v;
  const Evaluation ev = evaluate(de.spec, u, de.lambda != 0.0);
  EnergyEval out;
  out.value = 0.5 * v.squaredNorm() + ev.value + de.lambda * ev.gradient.dot(v);
  if (de.lambda != 0.0) {
    out.grad_u = ev.gradient + de.lambda * (*ev.hessian * v);
  } else {
    out.grad_u = ev.gradient;
  }
  out.grad_v = v + de.lambda * ev.gradient;
  return out;
}

double deformed_energy_value(const DeformedEnergy& de, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& v) {
  const Evaluation ev = evaluate(de.spec, u, false);
  return 0.5 * v.squaredNorm() + ev.value + de.lambda * ev.gradient.dot(v);
}

AngleCertificate certify_quasigradient(const DeformedEnergy& de, double R,
                                       int budget, std::uint64_t seed) {
  check_inputs(de, R, budget);
  const double M = hessian_bound(de.spec, R, 4096, seed);
  const double lz = lambda_zero(de.gamma, M);
  if (de.lambda > 0.0 && de.lambda >= lz)
    throw InputError("lambda must be below lambda_zero for this radius");

  AngleCertificate cert;
  cert.R = R;
  cert.gamma = de.gamma;
  cert.lambda = de.lambda;
  cert.M = M;
  cert.C = angle_normalization(de.gamma, M, de.lambda);
  cert.alpha_certified =
      de.lambda > 0.0
          ? alpha_quadratic_bound(de.gamma, M, de.lambda) / cert.C
          : 0.0;

  double min_cos = std::numeric_limits<double>::infinity();
  bool equivalence = true;
  int used = 0;
  DynamicsConfig field_cfg;
  field_cfg.gamma = de.gamma;
  for (const PhaseSample& s : phase_samples(de.spec, R, budget, seed)) {
    const PhaseState state{s.u, s.v};
    const PhaseState f = second_order_field(de.spec, field_cfg, state);
    const EnergyEval grad = energy_value_and_gradient(de, state);
    const double nf = std::sqrt(f.u.squaredNorm() + f.v.squaredNorm());
    const double ne =
        std::sqrt(grad.grad_u.squaredNorm() + grad.grad_v.squaredNorm());
    if ((nf <= kRestTol) != (ne <= kRestTol)) equivalence = false;
    if (nf <= kRestTol || ne <= kRestTol) continue;
    // the trajectory follows x' = -F, so the descent field is minus the
    // state derivative
    const double inner = -(grad.grad_u.dot(f.u) + grad.grad_v.dot(f.v));
    min_cos = std::min(min_cos, inner / (nf * ne));
    ++used;
  }
  if (used == 0)
    throw DegenerateSampleError(
        "every phase sample sat at a rest point; cannot estimate the angle");
  cert.alpha_sampled = min_cos;
  cert.sample_count = used;
  cert.rest_point_equivalence_checked = equivalence;
  return cert;
}

AsfastBound asfast_bound(const DeformedEnergy& de, double R, int budget,
                         std::uint64_t seed) {
  check_inputs(de, R, budget);
  const double M = hessian_bound(de.spec, R, 4096, seed);
  const double mm = std::max(1.0, M * M);
  const double k1 = 2.0 + 2.0 * de.lambda * de.lambda * mm;
  const double k2 = std::min(0.5, 1.0 / (1.0 + 2.0 * de.gamma * de.gamma));

  AsfastBound out;
  out.b_algebraic = std::sqrt(k1 / k2);
  double ratio = 0.0;
  int used = 0;
  DynamicsConfig field_cfg;
  field_cfg.gamma = de.gamma;
  for (const PhaseSample& s : phase_samples(de.spec, R, budget, seed)) {
    const PhaseState state{s.u, s.v};
    const PhaseState f = second_order_field(de.spec, field_cfg, state);
    const EnergyEval grad = energy_value_and_gradient(de, state);
    const double nf = std::sqrt(f.u.squaredNorm() + f.v.squaredNorm());
    if (nf <= kRestTol) continue;
    const double ne =
        std::sqrt(grad.grad_u.squaredNorm() + grad.grad_v.squaredNorm());
    ratio = std::max(ratio, ne / nf);
    ++used;
  }
  if (used == 0)
    throw DegenerateSampleError(
        "every phase sample sat at a rest point; cannot bound the ratio");
  out.b_sampled = ratio;
  out.b = std::max(out.b_sampled, out.b_algebraic);
  out.sample_count = used;
  return out;
}

}  // namespace klflow
