#include "klflow/cli.hpp"

#include <glob.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "klflow/config.hpp"
#include "klflow/deformation.hpp"
#include "klflow/desingularize.hpp"
#include "klflow/dynamics.hpp"
#include "klflow/errors.hpp"
#include "klflow/levelset.hpp"
#include "klflow/potential.hpp"
#include "klflow/rates.hpp"

namespace klflow {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRun = 2;

std::string classification_name(Classification::Kind k) {
  switch (k) {
    case Classification::kConverged:
      return "Converged";
    case Classification::kEscaped:
      return "Escaped";
    default:
      return "Undetermined";
  }
}

std::string law_name(const RateReport& rep) {
  if (!rep.law_fitted) return "none";
  switch (rep.law.kind) {
    case EmpiricalLaw::Kind::kPower:
      return "Power";
    case EmpiricalLaw::Kind::kExponential:
      return "Exponential";
    default:
      return "Ambiguous";
  }
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

std::string g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

struct CmdIo {
  bool quiet = false;
  void line(const std::string& s) const {
    if (!quiet) std::cout << s << "\n";
  }
};

std::vector<std::pair<double, double>> tail_pairs(const Trajectory& traj,
                                                  double g_inf) {
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    double g_val = traj.energies[i];
    if (traj.mode == FlowKind::kSecondOrder)
      g_val -= 0.5 * traj.v_at(i).squaredNorm();
    const double gap = g_val - g_inf;
    if (gap > 0.0 && traj.grad_norms[i] > 0.0)
      pairs.emplace_back(gap, traj.grad_norms[i]);
  }
  return pairs;
}

// certificate artifact; returns the pass verdict (positive sampled angle
// and rest points matching critical points)
bool core_certify(const PotentialSpec& spec, const RunConfig& cfg,
                  const std::string& out_dir, const CmdIo& io) {
  const double R = cfg.certify_radius;
  const double gamma = cfg.dynamics.gamma;
  const double M = hessian_bound(spec, R, 4096, cfg.seed);
  const double lz = lambda_zero(gamma, M);
  const double l1 = lambda_one(M);
  const double lstar = 0.5 * std::min(lz, l1);
  const double lambda = cfg.certify_lambda.value_or(lstar);

  DeformedEnergy de{spec, gamma, lambda};
  const AngleCertificate cert =
      certify_quasigradient(de, R, cfg.certify_budget, cfg.seed);
  const AsfastBound fast =
      asfast_bound(de, R, cfg.certify_budget, cfg.seed);

  json j;
  j["R"] = cert.R;
  j["gamma"] = cert.gamma;
  j["lambda"] = cert.lambda;
  j["alpha_certified"] = cert.alpha_certified;
  j["alpha_sampled"] = cert.alpha_sampled;
  j["M"] = cert.M;
  j["C"] = cert.C;
  j["sample_count"] = cert.sample_count;
  j["rest_point_equivalence_checked"] = cert.rest_point_equivalence_checked;
  j["lambda_zero"] = lz;
  j["lambda_one"] = l1;
  j["lambda_star"] = lstar;
  j["b"] = fast.b;
  j["b_sampled"] = fast.b_sampled;
  j["b_algebraic"] = fast.b_algebraic;
  write_json(out_dir + "/certificate.json", j);

  const bool ok = cert.alpha_sampled > 0.0 && cert.rest_point_equivalence_checked;
  io.line("certify: alpha_sampled=" + g17(cert.alpha_sampled) +
          " alpha_certified=" + g17(cert.alpha_certified) +
          " verdict=" + (ok ? "ok" : "degenerate"));
  return ok;
}

// psi-profile artifact; returns false when no level point was solvable
bool core_levelset(const PotentialSpec& spec, const RunConfig& cfg,
                   const std::string& out_dir, const CmdIo& io) {
  LevelOptions opts;
  opts.starts = cfg.levelset_starts;
  opts.seed = cfg.seed;
  Eigen::VectorXd ubar = spec.known_critical_point.size() == spec.dimension
                             ? spec.known_critical_point
                             : Eigen::VectorXd::Zero(spec.dimension);
  const LevelSetProfile prof =
      psi_profile(spec, ubar, cfg.levelset_r_hi, cfg.levelset_r_lo,
                  cfg.levelset_points_per_decade, opts);
  write_profile_csv(out_dir + "/psi_profile.csv", prof);

  int n_ok = 0;
  for (bool c : prof.converged) n_ok += c ? 1 : 0;
  io.line("levelset: points=" + std::to_string(prof.r_grid.size()) +
          " solved=" + std::to_string(n_ok) +
          " ratio_max=" + g17(prof.ratio_max) +
          " lambda_bar=" + g17(prof.lambda_bar) +
          " verdict=" + (prof.ratio_bounded ? "bounded" : "unbounded"));
  return n_ok > 0;
}

json envelope_json(const EnvelopeVerdict& v) {
  json j;
  j["pass"] = v.pass;
  j["max_violation"] = v.max_violation;
  j["t_start"] = v.t_start;
  j["n_checked"] = v.n_checked;
  j["n_excluded"] = v.n_excluded;
  return j;
}

json worstcase_json(const WorstCaseEnvelope& w, const char* scale_name) {
  json j;
  j["pass"] = w.pass;
  j["c_time"] = w.c_time;
  j[scale_name] = w.scale;
  j["t0"] = w.t0;
  j["max_violation"] = w.max_violation;
  j["t_start"] = w.t_start;
  j["n_checked"] = w.n_checked;
  j["n_excluded"] = w.n_excluded;
  return j;
}

json report_json(const RateReport& rep) {
  json j;
  j["potential"] = rep.potential;
  j["gamma"] = rep.gamma;
  j["classification"] = classification_name(rep.classification.kind);
  j["time"] = rep.classification.time;
  j["analyzed"] = rep.analyzed;
  j["note"] = rep.note;
  j["limit_point"] = vec_json(rep.limit_point);
  j["desingularizer"] = rep.desingularizer;
  j["desingularizer_estimated"] = rep.desing_estimated;
  j["theta_hat"] = rep.theta_hat;
  j["c_hat"] = rep.c_hat;
  j["loj_residual"] = rep.loj_residual;
  j["alpha_used"] = rep.alpha_used;
  j["velocity_l1_total"] = rep.velocity_l1_total;
  if (rep.analyzed) {
    json cert;
    cert["R"] = rep.certificate.R;
    cert["lambda"] = rep.certificate.lambda;
    cert["alpha_certified"] = rep.certificate.alpha_certified;
    cert["alpha_sampled"] = rep.certificate.alpha_sampled;
    cert["M"] = rep.certificate.M;
    cert["C"] = rep.certificate.C;
    cert["sample_count"] = rep.certificate.sample_count;
    cert["rest_point_equivalence_checked"] =
        rep.certificate.rest_point_equivalence_checked;
    j["certificate"] = cert;
    json fast;
    fast["b"] = rep.asfast.b;
    fast["b_sampled"] = rep.asfast.b_sampled;
    fast["b_algebraic"] = rep.asfast.b_algebraic;
    j["asfast"] = fast;
    json sq;
    sq["beta_best"] = rep.sqrt_check.beta_best;
    sq["pass"] = rep.sqrt_check.pass;
    j["sqrt_check"] = sq;
    j["envelope_automaj"] = envelope_json(rep.automaj);
    j["envelope_majval"] = worstcase_json(rep.majval, "c");
    j["envelope_majgrad1"] = worstcase_json(rep.majgrad1, "d");
  }
  j["law"] = law_name(rep);
  if (rep.law_fitted) {
    json l;
    l["parameter"] = rep.law.parameter;
    l["power_exponent"] = rep.law.power_exponent;
    l["exponential_rate"] = rep.law.exponential_rate;
    l["residual_power"] = rep.law.residual_power;
    l["residual_exponential"] = rep.law.residual_exponential;
    l["n_used"] = rep.law.n_used;
    j["law_fit"] = l;
    j["fit_window"] = {rep.fit_window_used.first, rep.fit_window_used.second};
  }
  return j;
}

bool core_rates(const PotentialSpec& spec, const RunConfig& cfg,
                const std::string& out_dir, const CmdIo& io) {
  RatesOptions opts;
  opts.desing = cfg.phi;
  opts.fit_window = cfg.rates_fit_window;
  opts.certify_budget = cfg.certify_budget;
  opts.seed = cfg.seed;
  const RateReport rep =
      end_to_end(spec, cfg.dynamics, cfg.u0, cfg.v0, opts);
  write_json(out_dir + "/rate_report.json", report_json(rep));
  io.line("rates: classification=" +
          classification_name(rep.classification.kind) + " law=" +
          law_name(rep) +
          (rep.analyzed
               ? " automaj=" + std::string(rep.automaj.pass ? "pass" : "fail") +
                     " majgrad1=" +
                     std::string(rep.majgrad1.pass ? "pass" : "fail")
               : ""));
  return true;
}

int core_simulate(const PotentialSpec& spec, const RunConfig& cfg,
                  const std::string& out_dir, const CmdIo& io) {
  Trajectory traj;
  bool failed = false;
  std::string fail_reason;
  try {
    traj = integrate(spec, cfg.dynamics, cfg.u0, cfg.v0);
  } catch (IntegrationError& e) {
    traj = std::move(e.partial);
    failed = true;
    fail_reason = e.what();
  }
  write_trajectory_csv(traj, out_dir + "/trajectory.csv");

  json run;
  run["potential"] = spec.name;
  run["gamma"] = cfg.dynamics.gamma;
  run["mode"] = cfg.dynamics.mode == FlowKind::kGradientFlow
                    ? "gradient_flow"
                    : "second_order";
  run["seed"] = cfg.seed;
  run["rows"] = traj.size();
  if (failed) {
    run["classification"] = "IntegrationFailure";
    run["error"] = fail_reason;
  } else {
    run["classification"] = classification_name(traj.classification.kind);
    run["classification_time"] = traj.classification.time;
  }
  if (traj.size() > 0) {
    run["final_t"] = traj.times.back();
    run["final_u"] = vec_json(traj.u_at(traj.size() - 1));
    run["final_v"] = vec_json(traj.v_at(traj.size() - 1));
    run["final_energy"] = traj.energies.back();
    run["final_grad_norm"] = traj.grad_norms.back();
  }
  if (cfg.do_exponent && !failed) {
    const double g_inf = traj.classification.kind == Classification::kConverged
                             ? spec.value(traj.classification.limit)
                             : 0.0;
    try {
      const LojasiewiczFit fit = estimate_lojasiewicz(tail_pairs(traj, g_inf));
      run["theta_hat"] = fit.theta_hat;
      run["c_hat"] = fit.c_hat;
      run["loj_residual"] = fit.residual;
    } catch (const Error& e) {
      run["theta_hat_error"] = e.what();
    }
  }
  write_json(out_dir + "/run.json", run);
  io.line("simulate: classification=" +
          std::string(failed
                          ? "IntegrationFailure"
                          : classification_name(traj.classification.kind)) +
          " rows=" + std::to_string(traj.size()));

  if (failed) return kExitRun;
  // analyses toggled in the config ride along; their pass/fail verdicts
  // live in the artifacts and do not change the simulate exit code
  if (cfg.do_certify) core_certify(spec, cfg, out_dir, io);
  if (cfg.do_levelset) core_levelset(spec, cfg, out_dir, io);
  if (cfg.do_rates) core_rates(spec, cfg, out_dir, io);
  return kExitOk;
}

int run_one(const std::string& command, const RunConfig& cfg, const CmdIo& io) {
  fs::create_directories(cfg.out);
  const PotentialSpec spec = build_potential(cfg);
  if (command == "simulate") return core_simulate(spec, cfg, cfg.out, io);
  if (command == "certify")
    return core_certify(spec, cfg, cfg.out, io) ? kExitOk : kExitRun;
  if (command == "levelset")
    return core_levelset(spec, cfg, cfg.out, io) ? kExitOk : kExitRun;
  if (command == "rates")
    return core_rates(spec, cfg, cfg.out, io) ? kExitOk : kExitRun;
  throw Error("unexpected command '" + command + "'");
}

int guarded_run(const std::string& command, const std::string& config_path,
                const std::optional<std::string>& out_override,
                const std::optional<std::uint64_t>& seed_override,
                const CmdIo& io) {
  try {
    RunConfig cfg = parse_config_file(config_path);
    if (out_override) cfg.out = *out_override;
    if (seed_override) cfg.seed = *seed_override;
    return run_one(command, cfg, io);
  } catch (const ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const CapabilityError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const InputError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kExitRun;
  } catch (const std::exception& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kExitRun;
  }
}

std::vector<std::string> expand_glob(const std::string& pattern) {
  glob_t g;
  std::vector<std::string> out;
  const int rc = glob(pattern.c_str(), 0, nullptr, &g);
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.push_back(g.gl_pathv[i]);
  }
  globfree(&g);
  std::sort(out.begin(), out.end());
  return out;
}

int run_batch(const std::string& command,
              const std::vector<std::string>& configs,
              const std::optional<std::string>& out_base,
              const std::optional<std::uint64_t>& seed_override,
              const CmdIo& io) {
  std::vector<std::future<int>> futures;
  futures.reserve(configs.size());
  for (const std::string& path : configs) {
    std::optional<std::string> out_dir;
    if (out_base) {
      std::string stem = fs::path(path).stem().string();
      out_dir = *out_base + "/" + stem;
    }
    futures.push_back(std::async(std::launch::async, [=]() {
      return guarded_run(command, path, out_dir, seed_override, io);
    }));
  }
  int worst = kExitOk;
  for (auto& f : futures) worst = std::max(worst, f.get());
  return worst;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  json j;
  in >> j;
  return j;
}

std::string json_num_csv(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) return "nan";
  return g17(j[key].get<double>());
}

int do_report(const std::string& pattern, const std::string& out_dir,
              const CmdIo& io) {
  std::vector<std::string> matches = expand_glob(pattern);
  if (matches.empty()) {
    std::cerr << "report: no files match '" << pattern << "'\n";
    return kExitConfig;
  }
  std::ostringstream csv;
  csv << "potential,gamma,classification,theta_hat,law,param,"
         "envelope_automaj,envelope_majgrad1\n";
  for (const std::string& m : matches) {
    std::string path = m;
    if (fs::is_directory(path)) path += "/rate_report.json";
    json j;
    try {
      j = read_json_file(path);
    } catch (const std::exception& e) {
      std::cerr << "report: " << e.what() << "\n";
      return kExitRun;
    }
    const std::string law = j.value("law", "none");
    std::string param = "nan";
    if (j.contains("law_fit")) param = json_num_csv(j["law_fit"], "parameter");
    auto env = [&](const char* key) -> std::string {
      if (!j.contains(key)) return "n/a";
      return j[key].value("pass", false) ? "pass" : "fail";
    };
    csv << j.value("potential", "?") << "," << json_num_csv(j, "gamma") << ","
        << j.value("classification", "?") << "," << json_num_csv(j, "theta_hat")
        << "," << law << "," << param << "," << env("envelope_automaj") << ","
        << env("envelope_majgrad1") << "\n";
  }
  fs::create_directories(out_dir);
  const std::string path = out_dir + "/summary.csv";
  std::ofstream out(path);
  if (!out) {
    std::cerr << "report: cannot open '" << path << "'\n";
    return kExitRun;
  }
  out << csv.str();
  io.line("report: " + std::to_string(matches.size()) + " runs -> " + path);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"damped second-order gradient systems: simulation and "
               "certification toolkit"};
  app.require_subcommand(1);

  struct SubArgs {
    std::string config;
    std::string out;
    std::string batch;
    std::int64_t seed = -1;
    bool quiet = false;
  };
  std::map<std::string, SubArgs> sub_args;
  for (const char* name : {"simulate", "certify", "levelset", "rates"}) {
    CLI::App* sub = app.add_subcommand(
        name, std::string("run ") + name + " for a config");
    SubArgs& sa = sub_args[name];
    sub->add_option("--config", sa.config, "config file path");
    sub->add_option("--out", sa.out, "output directory (overrides config)");
    sub->add_option("--batch", sa.batch,
                    "glob of config files to run concurrently");
    sub->add_option("--seed", sa.seed, "seed override (nonnegative)");
    sub->add_flag("--quiet", sa.quiet, "suppress summary lines");
  }
  CLI::App* rep = app.add_subcommand("report",
                                     "merge rate reports into summary.csv");
  SubArgs& ra = sub_args["report"];
  rep->add_option("--batch", ra.batch,
                  "glob of rate_report.json files or run directories")
      ->required();
  rep->add_option("--out", ra.out, "directory for summary.csv");
  rep->add_flag("--quiet", ra.quiet, "suppress summary lines");

  std::vector<const char*> argv;
  argv.push_back("klflow");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const SubArgs& sa = sub_args[command];
  CmdIo io;
  io.quiet = sa.quiet;

  if (command == "report")
    return do_report(sa.batch, sa.out.empty() ? "." : sa.out, io);

  std::optional<std::string> out_override;
  if (!sa.out.empty()) out_override = sa.out;
  std::optional<std::uint64_t> seed_override;
  if (sa.seed >= 0) seed_override = static_cast<std::uint64_t>(sa.seed);

  if (!sa.batch.empty()) {
    const std::vector<std::string> configs = expand_glob(sa.batch);
    if (configs.empty()) {
      std::cerr << command << ": no configs match '" << sa.batch << "'\n";
      return kExitConfig;
    }
    return run_batch(command, configs, out_override, seed_override, io);
  }
  if (sa.config.empty()) {
    std::cerr << command << ": --config or --batch is required\n";
    return kExitConfig;
  }
  return guarded_run(command, sa.config, out_override, seed_override, io);
}

}  // namespace klflow
