#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "klflow/cli.hpp"
#include "klflow/config.hpp"
#include "klflow/errors.hpp"

using namespace klflow;
namespace fs = std::filesystem;

namespace {

const std::string kWork = "/tmp/klflow_cli_tests";

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "missing file: ", path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int config_error_line(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.line;
  }
  return -1;
}

std::string sqrt2s_table_csv() {
  std::ostringstream csv;
  csv << "s,phi\n";
  for (int i = 0; i < 30; ++i) {
    const double s = 1e-6 * std::pow(1e4, i / 29.0);
    char row[64];
    std::snprintf(row, sizeof row, "%.17g,%.17g\n", s, std::sqrt(2.0 * s));
    csv << row;
  }
  return csv.str();
}

}  // namespace

TEST_CASE("minimal config fills the documented defaults") {
  const RunConfig cfg = parse_config_text("initial.u = 1.0\n");
  CHECK(cfg.potential == "quadratic");
  CHECK(cfg.u0.size() == 1);
  CHECK(cfg.u0[0] == 1.0);
  CHECK(cfg.v0.size() == 1);
  CHECK(cfg.v0[0] == 0.0);
  CHECK(cfg.dynamics.gamma == 1.0);
  CHECK(cfg.dynamics.mode == FlowKind::kSecondOrder);
  CHECK(cfg.dynamics.t_max == 1e4);
  CHECK_FALSE(cfg.phi.has_value());
  CHECK_FALSE(cfg.do_certify);
  CHECK_FALSE(cfg.do_rates);
  CHECK(cfg.certify_radius == 1.0);
  CHECK(cfg.levelset_r_hi == 1e-2);
  CHECK(cfg.rates_fit_window.first == 0.0);
  CHECK(cfg.rates_fit_window.second == 0.0);
  CHECK(cfg.out == "out");
  CHECK(cfg.seed == 0);
}

TEST_CASE("every section round-trips through the parser") {
  const std::string text =
      "# full tour\n"
      "potential.name = radial\n"
      "potential.dimension = 2\n"
      "potential.c = 1.5\n"
      "potential.theta = 0.4   # trailing comment\n"
      "potential.center = 0.5, -0.5\n"
      "gamma = 2.5\n"
      "initial.u = 1.0, 2.0\n"
      "initial.v = -0.25,0.25\n"
      "mode = gradient_flow\n"
      "\n"
      "integrator.abs_tol = 1e-10\n"
      "integrator.rel_tol = 1e-8\n"
      "integrator.t_max = 250\n"
      "integrator.r_escape = 1e4\n"
      "integrator.conv_tol_v = 1e-6\n"
      "integrator.conv_tol_g = 1e-7\n"
      "integrator.conv_window = 2.0\n"
      "integrator.max_steps = 1000000\n"
      "analysis.certify = true\n"
      "analysis.levelset = false\n"
      "analysis.rates = true\n"
      "analysis.exponent = true\n"
      "certify.radius = 0.5\n"
      "certify.budget = 512\n"
      "certify.lambda = 0.01\n"
      "levelset.r_hi = 1e-3\n"
      "levelset.r_lo = 1e-7\n"
      "levelset.points_per_decade = 6\n"
      "levelset.starts = 8\n"
      "rates.fit_t_lo = 1.0\n"
      "rates.fit_t_hi = 20.0\n"
      "out = /tmp/somewhere\n"
      "seed = 42\n";
  const RunConfig cfg = parse_config_text(text);
  CHECK(cfg.potential == "radial");
  CHECK(cfg.params.dimension == 2);
  CHECK(cfg.params.c == 1.5);
  CHECK(cfg.params.theta == 0.4);
  CHECK(cfg.params.center.size() == 2);
  CHECK(cfg.params.center[1] == -0.5);
  CHECK(cfg.dynamics.gamma == 2.5);
  CHECK(cfg.u0.size() == 2);
  CHECK(cfg.v0[0] == -0.25);
  CHECK(cfg.dynamics.mode == FlowKind::kGradientFlow);
  CHECK(cfg.dynamics.abs_tol == 1e-10);
  CHECK(cfg.dynamics.rel_tol == 1e-8);
  CHECK(cfg.dynamics.t_max == 250.0);
  CHECK(cfg.dynamics.r_escape == 1e4);
  CHECK(cfg.dynamics.conv_tol_v == 1e-6);
  CHECK(cfg.dynamics.conv_tol_g == 1e-7);
  CHECK(cfg.dynamics.conv_window == 2.0);
  CHECK(cfg.dynamics.max_steps == 1000000);
  CHECK(cfg.do_certify);
  CHECK_FALSE(cfg.do_levelset);
  CHECK(cfg.do_rates);
  CHECK(cfg.do_exponent);
  CHECK(cfg.certify_radius == 0.5);
  CHECK(cfg.certify_budget == 512);
  REQUIRE(cfg.certify_lambda.has_value());
  CHECK(*cfg.certify_lambda == 0.01);
  CHECK(cfg.levelset_r_hi == 1e-3);
  CHECK(cfg.levelset_r_lo == 1e-7);
  CHECK(cfg.levelset_points_per_decade == 6);
  CHECK(cfg.levelset_starts == 8);
  CHECK(cfg.rates_fit_window.first == 1.0);
  CHECK(cfg.rates_fit_window.second == 20.0);
  CHECK(cfg.out == "/tmp/somewhere");
  CHECK(cfg.seed == 42);

  Eigen::MatrixXd expect(2, 2);
  const RunConfig full = parse_config_text(
      "potential.name = quadratic\n"
      "potential.a_full = 2.0, 1.0, 1.0, 2.0\n"
      "initial.u = 0.1, 0.1\n");
  REQUIRE(full.params.a_full.size() == 4);
  CHECK(full.params.a_full(0, 1) == 1.0);
  CHECK(full.params.a_full(1, 1) == 2.0);
}

TEST_CASE("desingularizer constructors parse") {
  const RunConfig pw = parse_config_text(
      "initial.u = 1.0\n"
      "phi = power(c=2, theta=0.4)\n");
  REQUIRE(pw.phi.has_value());
  CHECK(pw.phi->is_power());
  CHECK(pw.phi->c() == doctest::Approx(2.0));
  CHECK(pw.phi->theta() == doctest::Approx(0.4));

  fs::create_directories(kWork + "/tables");
  write_file(kWork + "/tables/sqrt.csv", sqrt2s_table_csv());
  const RunConfig tb = parse_config_text(
      "initial.u = 1.0\n"
      "phi = table(file=tables/sqrt.csv)\n",
      kWork);
  REQUIRE(tb.phi.has_value());
  CHECK_FALSE(tb.phi->is_power());
  CHECK(tb.phi->phi(1e-4) == doctest::Approx(std::sqrt(2e-4)).epsilon(1e-6));
}

TEST_CASE("parser errors carry line numbers") {
  CHECK(config_error_line("initial.u = 1.0\ngamma = -1\n") == 2);
  CHECK(config_error_line("bogus = 1\ninitial.u = 1.0\n") == 1);
  CHECK(config_error_line("gamma = 1\ninitial.u = 1.0\ngamma = 2\n") == 3);
  CHECK(config_error_line("gamma = fast\ninitial.u = 1.0\n") == 1);
  CHECK(config_error_line("initial.u = 1.0\nmode = sideways\n") == 2);
  CHECK(config_error_line("initial.u = 1.0\npotential.dimension = 0\n") == 2);
  CHECK(config_error_line("initial.u = 1.0\njust words\n") == 2);
  CHECK(config_error_line("initial.u = 1.0\nout =\n") == 2);
  CHECK(config_error_line(
            "initial.u = 1.0\npotential.a_full = 1.0, 2.0, 3.0\n") == 2);
  CHECK(config_error_line("initial.u = 1.0\nphi = gaussian(c=1)\n") == 2);
  CHECK(config_error_line("initial.u = 1.0\nphi = table(file=/no/such)\n") ==
        2);
  CHECK(config_error_line("initial.u = 1.0, 2.0\ninitial.v = 0.0\n") == 2);
  CHECK(config_error_line(
            "initial.u = 1.0\nlevelset.r_hi = 1e-8\nlevelset.r_lo = 1e-2\n") ==
        2);
  // whole-file problems have no line to blame
  CHECK(config_error_line("gamma = 1.0\n") == 0);

  try {
    parse_config_text("gamma = 1\ninitial.u = 1.0\ngamma = 2\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("first at line 1") != std::string::npos);
    CHECK(std::string(e.what()).find("gamma") != std::string::npos);
  }
}

TEST_CASE("potential resolution follows the initial state") {
  const RunConfig cfg = parse_config_text(
      "potential.name = power\n"
      "potential.p = 2\n"
      "initial.u = 0.1, 0.2, 0.3\n");
  const PotentialSpec spec = build_potential(cfg);
  CHECK(spec.dimension == 3);
  CHECK(spec.name == "power");

  const RunConfig bad = parse_config_text(
      "potential.name = saddle\n"
      "initial.u = 1.0\n");
  CHECK_THROWS_AS(build_potential(bad), ConfigError);
}

TEST_CASE("config files resolve table paths next to themselves") {
  fs::create_directories(kWork + "/filecfg");
  write_file(kWork + "/filecfg/tbl.csv", sqrt2s_table_csv());
  write_file(kWork + "/filecfg/run.cfg",
             "initial.u = 1.0\n"
             "phi = table(file=tbl.csv)\n");
  const RunConfig cfg = parse_config_file(kWork + "/filecfg/run.cfg");
  REQUIRE(cfg.phi.has_value());
  CHECK(cfg.phi->phi(1e-4) == doctest::Approx(std::sqrt(2e-4)).epsilon(1e-6));
  CHECK_THROWS_AS(parse_config_file(kWork + "/filecfg/absent.cfg"),
                  ConfigError);
}

TEST_CASE("exit codes separate parse failures from run failures") {
  fs::remove_all(kWork + "/runs");
  fs::create_directories(kWork + "/runs");
  const std::string quad = kWork + "/runs/quad.cfg";
  write_file(quad,
             "potential.name = quadratic\n"
             "potential.a_diag = 2.0\n"
             "gamma = 3.0\n"
             "integrator.t_max = 100\n"
             "initial.u = 1.0\n");

  CHECK(run_cli({}) == 1);
  CHECK(run_cli({"frobnicate"}) == 1);
  CHECK(run_cli({"simulate"}) == 1);
  CHECK(run_cli({"simulate", "--config", kWork + "/runs/absent.cfg",
                 "--quiet"}) == 1);
  CHECK(run_cli({"--help"}) == 0);

  const std::string out = kWork + "/runs/quad_out";
  CHECK(run_cli({"simulate", "--config", quad, "--out", out, "--quiet"}) == 0);
  CHECK(fs::exists(out + "/trajectory.csv"));
  CHECK(fs::exists(out + "/run.json"));
  CHECK(slurp(out + "/run.json").find("\"Converged\"") != std::string::npos);

  // seed override lands in the artifact
  CHECK(run_cli({"simulate", "--config", quad, "--out", out + "7", "--seed",
                 "7", "--quiet"}) == 0);
  CHECK(slurp(out + "7/run.json").find("\"seed\": 7") != std::string::npos);

  // an exhausted step budget is an execution failure, not a config one
  const std::string stunted = kWork + "/runs/stunted.cfg";
  write_file(stunted,
             "potential.name = quadratic\n"
             "initial.u = 1.0\n"
             "integrator.max_steps = 25\n");
  CHECK(run_cli({"simulate", "--config", stunted, "--out",
                 kWork + "/runs/stunted_out", "--quiet"}) == 2);
  CHECK(slurp(kWork + "/runs/stunted_out/run.json")
            .find("IntegrationFailure") != std::string::npos);

  // a degenerate certificate is reported and exits nonzero
  const std::string flat = kWork + "/runs/flat.cfg";
  write_file(flat,
             "potential.name = quadratic\n"
             "initial.u = 1.0\n"
             "certify.lambda = 0.0\n");
  CHECK(run_cli({"certify", "--config", flat, "--out",
                 kWork + "/runs/flat_out", "--quiet"}) == 2);
  CHECK(fs::exists(kWork + "/runs/flat_out/certificate.json"));

  // no level point exists on a concave potential
  const std::string conc = kWork + "/runs/conc.cfg";
  write_file(conc,
             "potential.name = neg_quadratic\n"
             "initial.u = 0.1\n");
  CHECK(run_cli({"levelset", "--config", conc, "--out",
                 kWork + "/runs/conc_out", "--quiet"}) == 2);
}

TEST_CASE("identical configs and seeds produce identical artifacts") {
  fs::remove_all(kWork + "/det");
  fs::create_directories(kWork + "/det");
  const std::string cfg = kWork + "/det/run.cfg";
  write_file(cfg,
             "potential.name = quadratic\n"
             "potential.a_diag = 2.0\n"
             "gamma = 3.0\n"
             "integrator.t_max = 100\n"
             "initial.u = 1.0\n"
             "analysis.certify = true\n"
             "analysis.levelset = true\n"
             "analysis.rates = true\n"
             "analysis.exponent = true\n"
             "rates.fit_t_lo = 5.0\n"
             "rates.fit_t_hi = 15.0\n"
             "seed = 3\n");
  const std::string a = kWork + "/det/a", b = kWork + "/det/b";
  REQUIRE(run_cli({"simulate", "--config", cfg, "--out", a, "--quiet"}) == 0);
  REQUIRE(run_cli({"simulate", "--config", cfg, "--out", b, "--quiet"}) == 0);
  for (const char* name : {"trajectory.csv", "run.json", "certificate.json",
                           "psi_profile.csv", "rate_report.json"}) {
    CHECK_MESSAGE(slurp(a + "/" + name) == slurp(b + "/" + name),
                  "artifact differs: ", name);
  }
}

TEST_CASE("batch runs fan out and the report collates them") {
  fs::remove_all(kWork + "/batch");
  fs::create_directories(kWork + "/batch/cfgs");
  write_file(kWork + "/batch/cfgs/a_quad.cfg",
             "potential.name = quadratic\n"
             "potential.a_diag = 2.0\n"
             "gamma = 3.0\n"
             "integrator.t_max = 100\n"
             "initial.u = 1.0\n"
             "rates.fit_t_lo = 5.0\n"
             "rates.fit_t_hi = 15.0\n");
  write_file(kWork + "/batch/cfgs/b_escape.cfg",
             "potential.name = neg_quadratic\n"
             "initial.u = 0.1\n"
             "integrator.t_max = 50\n");
  const std::string base = kWork + "/batch/out";
  REQUIRE(run_cli({"rates", "--batch", kWork + "/batch/cfgs/*.cfg", "--out",
                   base, "--quiet"}) == 0);
  CHECK(fs::exists(base + "/a_quad/rate_report.json"));
  CHECK(fs::exists(base + "/b_escape/rate_report.json"));

  REQUIRE(run_cli({"report", "--batch", base + "/*", "--out",
                   kWork + "/batch/rep", "--quiet"}) == 0);
  const std::string csv = slurp(kWork + "/batch/rep/summary.csv");
  std::istringstream lines(csv);
  std::string header, row1, row2, extra;
  REQUIRE(std::getline(lines, header));
  REQUIRE(std::getline(lines, row1));
  REQUIRE(std::getline(lines, row2));
  CHECK_FALSE(std::getline(lines, extra));
  CHECK(header ==
        "potential,gamma,classification,theta_hat,law,param,"
        "envelope_automaj,envelope_majgrad1");
  CHECK(row1.find("quadratic,") == 0);
  CHECK(row1.find(",Converged,") != std::string::npos);
  CHECK(row1.find(",Exponential,") != std::string::npos);
  CHECK(row1.find(",pass,pass") != std::string::npos);
  CHECK(row2.find("neg_quadratic,") == 0);
  CHECK(row2.find(",Escaped,") != std::string::npos);
  CHECK(row2.find(",none,") != std::string::npos);
  CHECK(row2.find(",n/a,n/a") != std::string::npos);

  // a pattern with no matches is a usage error
  CHECK(run_cli({"report", "--batch", kWork + "/batch/nothing/*", "--quiet"}) ==
        1);
}
