// Deterministic sample families.
//
// All randomized-looking machinery in this library is driven by either a
// Halton low-discrepancy sequence (offset by a seed) or a counter-based
// splitmix64 stream, so any two runs with the same seed produce identical
// samples in identical order, independent of thread count or platform RNG.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace klflow {

// splitmix64: stateless hash of (seed, counter) to 64 bits.
std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t counter);

// Uniform double in [0, 1) from a counter-based stream.
double uniform01(std::uint64_t seed, std::uint64_t counter);

// Radical-inverse (van der Corput) value of `index` in base `base`.
double radical_inverse(std::uint64_t index, unsigned base);

// dim-dimensional Halton point (bases are the first `dim` primes); the seed
// shifts the start index so different seeds give disjoint subsequences.
Eigen::VectorXd halton_point(std::uint64_t index, int dim,
                             std::uint64_t seed = 0);

// Inverse of the standard normal CDF (Acklam's rational approximation,
// relative error below 1.2e-9; more than enough to shape sample clouds).
double inverse_normal_cdf(double p);

// k-th point of a deterministic unit-ball filling family in dimension dim.
// Radius is volume-corrected (r = x^(1/dim)) so the family is close to
// uniform over the ball.
Eigen::VectorXd ball_point(std::uint64_t k, int dim, std::uint64_t seed = 0);

// k-th point of a deterministic unit-sphere covering in dimension dim.
// The first 2*dim entries are the signed coordinate axes.
Eigen::VectorXd sphere_point(std::uint64_t k, int dim, std::uint64_t seed = 0);

}  // namespace klflow
