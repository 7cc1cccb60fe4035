#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgrad/error.hpp"
#include "pgrad/expr.hpp"
#include "pgrad/grid.hpp"
#include "pgrad/io.hpp"
#include "pgrad/potential.hpp"
#include "pgrad/solver.hpp"

namespace pgrad {

struct GridConfig {
  std::size_t p = 1;
  std::size_t n = 1;
  std::vector<double> extents;
  std::vector<std::size_t> nodes;
};

struct PotentialConfig {
  std::string kind;  // cosine | quadratic | linear | expr
  std::vector<double> amplitudes;
  std::optional<std::vector<double>> periods;
  double floor = 0.1;
  double modulation = 0.0;
  std::size_t modulation_axis = 1;  // one-based, as written in the file
  std::vector<double> center;
  std::string forcing_csv;
  std::vector<std::string> forcing_expr;
  std::string expr;
  bool positive = true;
  std::optional<GrowthEnvelope> envelope;
};

struct InitConfig {
  std::string kind = "random";  // constant | random | csv
  std::vector<double> value;
  std::optional<std::uint64_t> seed;
  std::string path;
};

struct OutputConfig {
  std::string field_csv;
  bool closed_csv = false;
  std::string report_json;
};

struct ChecksConfig {
  std::vector<std::string> run{"periodicity", "positivity", "gradient_growth", "grad_consistency"};
  std::size_t samples = 1000;
  std::uint64_t seed = 1;
  double x_radius = 10.0;
};

struct RunConfig {
  std::filesystem::path base_dir;  // relative paths resolve against the config file's directory
  GridConfig grid;
  PotentialConfig potential;
  InitConfig init;
  SolverConfig solver;
  OutputConfig output;
  ChecksConfig checks;

  std::string resolve(const std::string& p) const {
    if (p.empty()) return p;
    const std::filesystem::path path(p);
    return path.is_absolute() ? p : (base_dir / path).string();
  }
};

namespace detail {

using json = nlohmann::json;

inline void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("'" + where + "' must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [k, v] : obj.items())
    if (!keys.count(k)) throw ConfigError("unknown key '" + where + "." + k + "'");
}

template <class T>
T get(const json& obj, const std::string& where, const char* key) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("missing or mistyped key '" + where + "." + key + "'");
  }
}

template <class T>
void get_to(const json& obj, const std::string& where, const char* key, T& out) {
  if (obj.contains(key)) out = get<T>(obj, where, key);
}

}  // namespace detail

/// Parses the JSON run configuration. Unknown keys are rejected.
inline RunConfig parse_config(const nlohmann::json& j, std::filesystem::path base_dir = {}) {
  using detail::get;
  using detail::get_to;
  RunConfig c;
  c.base_dir = std::move(base_dir);
  detail::only_keys(j, "config", {"grid", "potential", "init", "solver", "output", "checks"});

  if (!j.contains("grid")) throw ConfigError("missing section 'grid'");
  const auto& g = j.at("grid");
  detail::only_keys(g, "grid", {"p", "n", "extents", "nodes"});
  c.grid.p = get<std::size_t>(g, "grid", "p");
  c.grid.n = get<std::size_t>(g, "grid", "n");
  c.grid.extents = get<std::vector<double>>(g, "grid", "extents");
  c.grid.nodes = get<std::vector<std::size_t>>(g, "grid", "nodes");
  if (c.grid.p == 0 || c.grid.n == 0) throw ConfigError("grid.p and grid.n must be at least 1");
  if (c.grid.extents.size() != c.grid.p || c.grid.nodes.size() != c.grid.p)
    throw ConfigError("grid.extents and grid.nodes need exactly p entries");
  for (double T : c.grid.extents)
    if (!(T > 0.0)) throw ConfigError("grid.extents must be positive");
  for (auto N : c.grid.nodes)
    if (N < 3) throw ConfigError("grid.nodes must be at least 3 on every axis");

  if (!j.contains("potential")) throw ConfigError("missing section 'potential'");
  const auto& p = j.at("potential");
  detail::only_keys(p, "potential",
                    {"kind", "amplitudes", "periods", "floor", "modulation", "modulation_axis", "center",
                     "forcing_csv", "forcing_expr", "expr", "positive", "envelope"});
  auto& pc = c.potential;
  pc.kind = get<std::string>(p, "potential", "kind");
  if (pc.kind != "cosine" && pc.kind != "quadratic" && pc.kind != "linear" && pc.kind != "expr")
    throw ConfigError("potential.kind must be cosine, quadratic, linear or expr");
  get_to(p, "potential", "amplitudes", pc.amplitudes);
  if (p.contains("periods")) pc.periods = get<std::vector<double>>(p, "potential", "periods");
  get_to(p, "potential", "floor", pc.floor);
  get_to(p, "potential", "modulation", pc.modulation);
  get_to(p, "potential", "modulation_axis", pc.modulation_axis);
  get_to(p, "potential", "center", pc.center);
  get_to(p, "potential", "forcing_csv", pc.forcing_csv);
  get_to(p, "potential", "forcing_expr", pc.forcing_expr);
  get_to(p, "potential", "expr", pc.expr);
  get_to(p, "potential", "positive", pc.positive);
  if (pc.periods && pc.periods->size() != c.grid.n) throw ConfigError("potential.periods needs n entries");
  if (p.contains("envelope")) {
    const auto& e = p.at("envelope");
    detail::only_keys(e, "potential.envelope", {"M", "g_max", "a0", "a_slope", "b_max"});
    GrowthEnvelope env;
    get_to(e, "potential.envelope", "M", env.M);
    get_to(e, "potential.envelope", "g_max", env.g_max);
    get_to(e, "potential.envelope", "a0", env.a0);
    get_to(e, "potential.envelope", "a_slope", env.a_slope);
    get_to(e, "potential.envelope", "b_max", env.b_max);
    try {
      env.validate();
    } catch (const UsageError& err) {
      throw ConfigError(err.what());
    }
    pc.envelope = env;
  }
  if (pc.kind == "cosine") {
    if (pc.amplitudes.empty()) pc.amplitudes.assign(c.grid.n, 1.0);
    if (!pc.periods) throw ConfigError("cosine potential needs potential.periods");
    if (pc.amplitudes.size() != c.grid.n) throw ConfigError("potential.amplitudes needs n entries");
    if (pc.modulation_axis < 1 || pc.modulation_axis > c.grid.p)
      throw ConfigError("potential.modulation_axis must be in 1..p");
  } else if (pc.kind == "quadratic") {
    if (pc.center.empty()) pc.center.assign(c.grid.n, 0.0);
    if (pc.center.size() != c.grid.n) throw ConfigError("potential.center needs n entries");
  } else if (pc.kind == "linear") {
    if (pc.forcing_csv.empty() == pc.forcing_expr.empty())
      throw ConfigError("linear potential needs exactly one of potential.forcing_csv, potential.forcing_expr");
    if (!pc.forcing_expr.empty() && pc.forcing_expr.size() != c.grid.n)
      throw ConfigError("potential.forcing_expr needs n expressions");
  } else if (pc.expr.empty()) {
    throw ConfigError("expr potential needs potential.expr");
  }

  if (j.contains("init")) {
    const auto& in = j.at("init");
    detail::only_keys(in, "init", {"kind", "value", "seed", "path"});
    get_to(in, "init", "kind", c.init.kind);
    get_to(in, "init", "value", c.init.value);
    if (in.contains("seed")) c.init.seed = get<std::uint64_t>(in, "init", "seed");
    get_to(in, "init", "path", c.init.path);
  }
  if (c.init.kind == "constant") {
    if (c.init.value.size() != c.grid.n) throw ConfigError("init.value needs n entries");
  } else if (c.init.kind == "csv") {
    if (c.init.path.empty()) throw ConfigError("init.kind = csv needs init.path");
    if (!std::filesystem::exists(c.resolve(c.init.path)))
      throw ConfigError("init.path '" + c.init.path + "' does not exist");
  } else if (c.init.kind != "random") {
    throw ConfigError("init.kind must be constant, random or csv");
  }

  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    detail::only_keys(s, "solver",
                      {"method", "max_iters", "tol_residual", "tol_action", "armijo_c1", "backtrack_factor",
                       "initial_step", "canonicalize_every", "rng_seed"});
    auto& sc = c.solver;
    std::string method = "ncg";
    get_to(s, "solver", "method", method);
    if (method == "gd") sc.method = Method::GradientDescent;
    else if (method == "ncg") sc.method = Method::NonlinearCG;
    else throw ConfigError("solver.method must be gd or ncg");
    get_to(s, "solver", "max_iters", sc.max_iters);
    get_to(s, "solver", "tol_residual", sc.tol_residual);
    get_to(s, "solver", "tol_action", sc.tol_action);
    get_to(s, "solver", "armijo_c1", sc.armijo_c1);
    get_to(s, "solver", "backtrack_factor", sc.backtrack_factor);
    get_to(s, "solver", "initial_step", sc.initial_step);
    get_to(s, "solver", "canonicalize_every", sc.canonicalize_every);
    get_to(s, "solver", "rng_seed", sc.rng_seed);
  }
  // The lattice shift needs periods; without them it is switched off.
  if (!c.potential.periods) c.solver.canonicalize_every = 0;
  try {
    c.solver.validate();
  } catch (const UsageError& err) {
    throw ConfigError(err.what());
  }

  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::only_keys(o, "output", {"field_csv", "closed_csv", "report_json"});
    get_to(o, "output", "field_csv", c.output.field_csv);
    get_to(o, "output", "closed_csv", c.output.closed_csv);
    get_to(o, "output", "report_json", c.output.report_json);
  }

  if (j.contains("checks")) {
    const auto& ch = j.at("checks");
    detail::only_keys(ch, "checks", {"run", "samples", "seed", "x_radius"});
    get_to(ch, "checks", "run", c.checks.run);
    get_to(ch, "checks", "samples", c.checks.samples);
    get_to(ch, "checks", "seed", c.checks.seed);
    get_to(ch, "checks", "x_radius", c.checks.x_radius);
    for (const auto& name : c.checks.run)
      if (name != "periodicity" && name != "positivity" && name != "gradient_growth" && name != "grad_consistency")
        throw ConfigError("unknown check '" + name + "'");
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

inline GridSpec make_grid(const RunConfig& c) {
  try {
    return GridSpec(c.grid.extents, c.grid.nodes, c.grid.n);
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  }
}

/// Builds the potential named by the config. Expression errors surface as ParseError.
inline Potential make_potential(const RunConfig& c, const GridSpec& g) {
  const auto& pc = c.potential;
  try {
    if (pc.kind == "cosine") {
      Potential F = cosine_lattice({pc.amplitudes, *pc.periods, pc.floor, pc.modulation, pc.modulation_axis - 1},
                                   g.extents());
      if (pc.envelope) F.with_growth(*pc.envelope);
      return F;
    }
    if (pc.kind == "quadratic") {
      Potential F = shifted_quadratic(pc.center, pc.floor, g.p());
      if (pc.periods) F.with_periods(*pc.periods);
      if (pc.envelope) F.with_growth(*pc.envelope);
      return F;
    }
    if (pc.kind == "linear") {
      Field f(g);
      if (!pc.forcing_csv.empty()) {
        f = io::as_field(io::read_field_csv(c.resolve(pc.forcing_csv), g));
      } else {
        std::vector<expr::Ast> comps;
        for (const auto& src : pc.forcing_expr) comps.push_back(expr::parse(src, g.p(), 0));
        f = Field::sample(g, [&](std::span<const double> t, std::span<double> out) {
          for (std::size_t i = 0; i < comps.size(); ++i) out[i] = expr::eval_dual(comps[i], t, {}).value;
        });
      }
      Potential F = linear_forcing(f);
      if (pc.periods) F.with_periods(*pc.periods);
      if (pc.envelope) F.with_growth(*pc.envelope);
      return F;
    }
    Potential F = expression_potential(expr::parse(pc.expr, g.p(), g.n()));
    if (pc.periods) F.with_periods(*pc.periods);
    F.with_positivity_claim(pc.positive);
    if (pc.envelope) F.with_growth(*pc.envelope);
    return F;
  } catch (const ParseError&) {
    throw;
  } catch (const FormatError& e) {
    throw ConfigError(std::string("forcing: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("forcing: ") + e.what());
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
}

inline Field make_initial_field(const RunConfig& c, const GridSpec& g, const Potential& F, std::uint64_t seed) {
  if (c.init.kind == "constant") return Field::constant(g, c.init.value);
  if (c.init.kind == "csv") {
    try {
      return io::as_field(io::read_field_csv(c.resolve(c.init.path), g));
    } catch (const FormatError& e) {
      throw ConfigError(std::string("init: ") + e.what());
    }
  }
  return random_initial_field(g, F.periods(), seed);
}

}  // namespace pgrad
