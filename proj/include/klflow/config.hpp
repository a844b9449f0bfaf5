// Run configuration: flat key = value text with dotted sections.
//
// Grammar (one entry per line; '#' starts a comment anywhere):
//   key = value
// where keys are dotted lowercase identifiers from a fixed allowlist,
// scalars are decimal literals, vectors are comma-separated scalars, and
// the desingularizer uses a constructor form:
//   phi = power(c=1, theta=0.5)
//   phi = table(file=relative/or/absolute.csv)
// Table files are two-column CSV (s, phi(s)), '#' comments allowed, paths
// resolved relative to the config file. Unknown or duplicate keys are
// errors that name the offending line.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "klflow/desingularize.hpp"
#include "klflow/dynamics.hpp"
#include "klflow/potential.hpp"

namespace klflow {

struct RunConfig {
  std::string potential = "quadratic";
  CatalogParams params;
  bool dimension_given = false;

  Eigen::VectorXd u0;  // required
  Eigen::VectorXd v0;  // defaults to zeros matching u0

  DynamicsConfig dynamics;  // gamma, tolerances, horizon, mode

  std::optional<Desingularizer> phi;

  // analyses to run alongside `simulate`; dedicated subcommands force them
  bool do_certify = false;
  bool do_levelset = false;
  bool do_rates = false;
  bool do_exponent = false;

  double certify_radius = 1.0;
  int certify_budget = 2048;
  std::optional<double> certify_lambda;  // default: lambda_star

  double levelset_r_hi = 1e-2;
  double levelset_r_lo = 1e-8;
  int levelset_points_per_decade = 4;
  int levelset_starts = 16;

  std::pair<double, double> rates_fit_window = {0.0, 0.0};  // {0,0} = auto

  std::string out = "out";
  std::uint64_t seed = 0;
};

// Parses and validates; throws ConfigError with the offending line number.
RunConfig parse_config_file(const std::string& path);

// Same grammar from memory; `base_dir` anchors relative table paths.
RunConfig parse_config_text(const std::string& text,
                            const std::string& base_dir = ".");

// Resolves the catalog potential; dimension defaults to the length of
// initial.u when not given explicitly.
PotentialSpec build_potential(const RunConfig& cfg);

}  // namespace klflow
