#include "klflow/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "klflow/errors.hpp"

namespace klflow {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double(const std::string& v, int line) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("'" + v + "' is not a number", line);
  }
}

long long parse_int(const std::string& v, int line) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("'" + v + "' is not an integer", line);
  }
}

std::uint64_t parse_seed(const std::string& v, int line) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return static_cast<std::uint64_t>(x);
  } catch (const std::exception&) {
    throw ConfigError("'" + v + "' is not a valid seed", line);
  }
}

bool parse_bool(const std::string& v, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("'" + v + "' is not a boolean (true/false)", line);
}

Eigen::VectorXd parse_vector(const std::string& v, int line) {
  std::vector<double> vals;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty())
      throw ConfigError("empty entry in vector value", line);
    vals.push_back(parse_double(item, line));
  }
  if (vals.empty()) throw ConfigError("empty vector value", line);
  Eigen::VectorXd out(static_cast<int>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i)
    out[static_cast<int>(i)] = vals[i];
  return out;
}

// splits "name(k1=v1, k2=v2)" into the name and its arguments
std::map<std::string, std::string> parse_call(const std::string& v,
                                              std::string* name, int line) {
  const std::size_t open = v.find('(');
  if (open == std::string::npos || v.back() != ')')
    throw ConfigError("expected a constructor form like power(c=1, theta=0.5)",
                      line);
  *name = trim(v.substr(0, open));
  std::map<std::string, std::string> args;
  std::stringstream ss(v.substr(open + 1, v.size() - open - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("constructor argument '" + item + "' lacks '='", line);
    const std::string k = trim(item.substr(0, eq));
    if (args.count(k))
      throw ConfigError("duplicate constructor argument '" + k + "'", line);
    args[k] = trim(item.substr(eq + 1));
  }
  return args;
}

Desingularizer load_table_file(const std::string& path, int line) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open table file '" + path + "'", line);
  std::vector<double> s, phi;
  std::string row;
  int rowno = 0;
  while (std::getline(in, row)) {
    ++rowno;
    const std::size_t hash = row.find('#');
    if (hash != std::string::npos) row = row.substr(0, hash);
    row = trim(row);
    if (row.empty()) continue;
    if (rowno == 1 && row.find_first_not_of(
                          "0123456789+-.eE, \t") != std::string::npos)
      continue;  // header row
    std::stringstream ss(row);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b))
      throw ConfigError("table file '" + path + "' row " +
                            std::to_string(rowno) + " needs two columns",
                        line);
    s.push_back(parse_double(trim(a), line));
    phi.push_back(parse_double(trim(b), line));
  }
  return Desingularizer::tabulated(std::move(s), std::move(phi));
}

Desingularizer parse_phi(const std::string& v, const std::string& base_dir,
                         int line) {
  std::string name;
  auto args = parse_call(v, &name, line);
  if (name == "power") {
    if (!args.count("c") || !args.count("theta"))
      throw ConfigError("power(...) needs c and theta", line);
    for (const auto& kv : args)
      if (kv.first != "c" && kv.first != "theta")
        throw ConfigError("unknown power(...) argument '" + kv.first + "'",
                          line);
    return Desingularizer::power(parse_double(args["c"], line),
                                 parse_double(args["theta"], line));
  }
  if (name == "table") {
    if (!args.count("file") || args.size() != 1)
      throw ConfigError("table(...) takes exactly one argument: file", line);
    std::string path = args["file"];
    if (!path.empty() && path[0] != '/') path = base_dir + "/" + path;
    return load_table_file(path, line);
  }
  throw ConfigError("unknown desingularizer '" + name +
                        "' (expected power or table)",
                    line);
}

}  // namespace

RunConfig parse_config_text(const std::string& text,
                            const std::string& base_dir) {
  RunConfig cfg;
  std::map<std::string, int> seen;  // key -> line, for duplicate detection
  bool have_u0 = false, have_v0 = false;

  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    raw = trim(raw);
    if (raw.empty()) continue;
    const std::size_t eq = raw.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected 'key = value'", line);
    const std::string key = trim(raw.substr(0, eq));
    const std::string val = trim(raw.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("expected 'key = value'", line);
    if (seen.count(key))
      throw ConfigError("duplicate key '" + key + "' (first at line " +
                            std::to_string(seen[key]) + ")",
                        line);
    seen[key] = line;

    if (key == "potential.name") {
      cfg.potential = val;
    } else if (key == "potential.dimension") {
      const long long d = parse_int(val, line);
      if (d < 1 || d > 64)
        throw ConfigError("potential.dimension must be in [1, 64]", line);
      cfg.params.dimension = static_cast<int>(d);
      cfg.dimension_given = true;
    } else if (key == "potential.p") {
      cfg.params.p = parse_double(val, line);
    } else if (key == "potential.r") {
      cfg.params.r = parse_double(val, line);
    } else if (key == "potential.c") {
      cfg.params.c = parse_double(val, line);
    } else if (key == "potential.theta") {
      cfg.params.theta = parse_double(val, line);
    } else if (key == "potential.a_diag") {
      cfg.params.a_diag = parse_vector(val, line);
    } else if (key == "potential.a_full") {
      const Eigen::VectorXd flat = parse_vector(val, line);
      const int n = static_cast<int>(std::lround(
          std::sqrt(static_cast<double>(flat.size()))));
      if (n * n != flat.size())
        throw ConfigError("potential.a_full needs a square number of entries",
                          line);
      Eigen::MatrixXd A(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = flat[i * n + j];
      cfg.params.a_full = A;
    } else if (key == "potential.center") {
      cfg.params.center = parse_vector(val, line);
    } else if (key == "gamma") {
      cfg.dynamics.gamma = parse_double(val, line);
      if (!(cfg.dynamics.gamma > 0.0))
        throw ConfigError("gamma must be positive", line);
    } else if (key == "initial.u") {
      cfg.u0 = parse_vector(val, line);
      have_u0 = true;
    } else if (key == "initial.v") {
      cfg.v0 = parse_vector(val, line);
      have_v0 = true;
    } else if (key == "mode") {
      if (val == "second_order")
        cfg.dynamics.mode = FlowKind::kSecondOrder;
      else if (val == "gradient_flow")
        cfg.dynamics.mode = FlowKind::kGradientFlow;
      else
        throw ConfigError(
            "mode must be second_order or gradient_flow", line);
    } else if (key == "integrator.abs_tol") {
      cfg.dynamics.abs_tol = parse_double(val, line);
      if (!(cfg.dynamics.abs_tol > 0.0))
        throw ConfigError("integrator.abs_tol must be positive", line);
    } else if (key == "integrator.rel_tol") {
      cfg.dynamics.rel_tol = parse_double(val, line);
      if (!(cfg.dynamics.rel_tol > 0.0))
        throw ConfigError("integrator.rel_tol must be positive", line);
    } else if (key == "integrator.t_max") {
      cfg.dynamics.t_max = parse_double(val, line);
      if (!(cfg.dynamics.t_max > 0.0))
        throw ConfigError("integrator.t_max must be positive", line);
    } else if (key == "integrator.r_escape") {
      cfg.dynamics.r_escape = parse_double(val, line);
      if (!(cfg.dynamics.r_escape > 0.0))
        throw ConfigError("integrator.r_escape must be positive", line);
    } else if (key == "integrator.conv_tol_v") {
      cfg.dynamics.conv_tol_v = parse_double(val, line);
    } else if (key == "integrator.conv_tol_g") {
      cfg.dynamics.conv_tol_g = parse_double(val, line);
    } else if (key == "integrator.conv_window") {
      cfg.dynamics.conv_window = parse_double(val, line);
    } else if (key == "integrator.max_steps") {
      const long long n = parse_int(val, line);
      if (n < 1) throw ConfigError("integrator.max_steps must be >= 1", line);
      cfg.dynamics.max_steps = static_cast<std::uint64_t>(n);
    } else if (key == "phi") {
      cfg.phi = parse_phi(val, base_dir, line);
    } else if (key == "analysis.certify") {
      cfg.do_certify = parse_bool(val, line);
    } else if (key == "analysis.levelset") {
      cfg.do_levelset = parse_bool(val, line);
    } else if (key == "analysis.rates") {
      cfg.do_rates = parse_bool(val, line);
    } else if (key == "analysis.exponent") {
      cfg.do_exponent = parse_bool(val, line);
    } else if (key == "certify.radius") {
      cfg.certify_radius = parse_double(val, line);
      if (!(cfg.certify_radius > 0.0))
        throw ConfigError("certify.radius must be positive", line);
    } else if (key == "certify.budget") {
      const long long n = parse_int(val, line);
      if (n < 8) throw ConfigError("certify.budget must be >= 8", line);
      cfg.certify_budget = static_cast<int>(n);
    } else if (key == "certify.lambda") {
      cfg.certify_lambda = parse_double(val, line);
      if (*cfg.certify_lambda < 0.0)
        throw ConfigError("certify.lambda must be nonnegative", line);
    } else if (key == "levelset.r_hi") {
      cfg.levelset_r_hi = parse_double(val, line);
    } else if (key == "levelset.r_lo") {
      cfg.levelset_r_lo = parse_double(val, line);
    } else if (key == "levelset.points_per_decade") {
      cfg.levelset_points_per_decade =
          static_cast<int>(parse_int(val, line));
    } else if (key == "levelset.starts") {
      cfg.levelset_starts = static_cast<int>(parse_int(val, line));
    } else if (key == "rates.fit_t_lo") {
      cfg.rates_fit_window.first = parse_double(val, line);
    } else if (key == "rates.fit_t_hi") {
      cfg.rates_fit_window.second = parse_double(val, line);
    } else if (key == "out") {
      cfg.out = val;
    } else if (key == "seed") {
      cfg.seed = parse_seed(val, line);
    } else {
      throw ConfigError("unknown key '" + key + "'", line);
    }
  }

  if (!have_u0) throw ConfigError("missing required key 'initial.u'");
  if (!have_v0) cfg.v0 = Eigen::VectorXd::Zero(cfg.u0.size());
  if (cfg.v0.size() != cfg.u0.size())
    throw ConfigError("initial.v length differs from initial.u",
                      seen.count("initial.v") ? seen["initial.v"] : 0);
  if (!(cfg.levelset_r_hi > cfg.levelset_r_lo) ||
      !(cfg.levelset_r_lo > 0.0))
    throw ConfigError("levelset range needs r_hi > r_lo > 0",
                      seen.count("levelset.r_hi") ? seen["levelset.r_hi"]
                                                  : 0);
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::size_t slash = path.find_last_of('/');
  const std::string base =
      slash == std::string::npos ? std::string(".") : path.substr(0, slash);
  return parse_config_text(buf.str(), base);
}

PotentialSpec build_potential(const RunConfig& cfg) {
  CatalogParams p = cfg.params;
  if (!cfg.dimension_given) p.dimension = static_cast<int>(cfg.u0.size());
  PotentialSpec spec = make_catalog_potential(cfg.potential, p);
  if (spec.dimension != cfg.u0.size())
    throw ConfigError("initial.u has length " + std::to_string(cfg.u0.size()) +
                      " but the potential has dimension " +
                      std::to_string(spec.dimension));
  return spec;
}

}  // namespace klflow
