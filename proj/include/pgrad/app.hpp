#pragma once

// Command implementations behind the `pgrad` executable. Each returns the process exit code:
//   0 success / converged, 2 not converged or a check failed, 3 invalid config or data,
//   4 expression parse error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgrad/action.hpp"
#include "pgrad/config.hpp"
#include "pgrad/io.hpp"
#include "pgrad/potential.hpp"
#include "pgrad/solver.hpp"
#include "pgrad/verify.hpp"

namespace pgrad::app {

enum ExitCode : int { kOk = 0, kNotConverged = 2, kInvalidConfig = 3, kParseError = 4 };

struct Options {
  bool strict = false;
  bool quiet = false;
  std::optional<std::uint64_t> seed;
};

using nlohmann::json;

inline SampleSpec sample_spec(const RunConfig& c, const GridSpec& g) {
  SampleSpec s;
  s.count = c.checks.samples;
  s.seed = c.checks.seed;
  s.x_radius = c.checks.x_radius;
  s.extents = g.extents();
  s.anchors.push_back(std::vector<double>(g.n(), 0.0));
  if (c.potential.kind == "quadratic") s.anchors.push_back(c.potential.center);
  return s;
}

/// Runs the configured hypothesis checks that apply to F.
inline std::vector<CheckReport> run_checks(const RunConfig& c, const GridSpec& g, const Potential& F) {
  const SampleSpec s = sample_spec(c, g);
  std::vector<CheckReport> out;
  for (const auto& name : c.checks.run) {
    if (name == "periodicity") {
      if (F.periods()) out.push_back(check_periodicity(F, s));
    } else if (name == "positivity") {
      out.push_back(check_positivity(F, s));
    } else if (name == "gradient_growth") {
      if (F.growth()) out.push_back(check_gradient_growth(F, *F.growth(), s));
    } else if (name == "grad_consistency") {
      out.push_back(check_grad_consistency(F, s));
    }
  }
  return out;
}

inline json to_json(const CheckReport& r) {
  return {{"name", r.name}, {"pass", r.pass}, {"samples", r.samples}, {"violations", r.violations},
          {"worst", r.worst}, {"measure", r.summary}};
}

inline json to_json(const BoundVerdict& v) {
  json j{{"checked", v.checked}, {"pass", v.pass}, {"violations", v.violations}};
  j["worst_margin"] = v.checked ? json(v.worst_margin) : json(nullptr);
  return j;
}

inline json to_json(const IterationRecord& r) {
  return {{"iter", r.iter},
          {"action", {{"total", r.action.total}, {"kinetic", r.action.kinetic}, {"potential", r.action.potential}}},
          {"residual", r.residual},
          {"dirichlet", r.dirichlet},
          {"mean", r.mean},
          {"fluctuation_norm", r.fluctuation_norm},
          {"h1_norm", r.h1_norm},
          {"step", r.step},
          {"shifts", r.shifts},
          {"gauge_change", r.gauge_change},
          {"restarted", r.restarted}};
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Minimum value of the action when it is known in closed form (constant fields on the
/// potential's floor), used to label a result as a global minimizer.
inline std::optional<double> known_minimum(const RunConfig& c, const GridSpec& g) {
  if (c.potential.kind == "cosine" || c.potential.kind == "quadratic") return c.potential.floor * g.volume();
  return std::nullopt;
}

inline void print_checks(std::ostream& os, const std::vector<CheckReport>& checks) {
  os << std::left << std::setw(18) << "check" << std::setw(7) << "result" << std::setw(10) << "samples"
     << std::setw(12) << "violations" << "worst\n";
  for (const auto& r : checks) {
    os << std::left << std::setw(18) << r.name << std::setw(7) << (r.pass ? "pass" : "FAIL") << std::setw(10)
       << r.samples << std::setw(12) << r.violations << io::format_double(r.worst) << "  (" << r.summary << ")\n";
  }
}

struct Loaded {
  RunConfig config;
  GridSpec grid;
  std::optional<Potential> potential;
};

// Shared loading with uniform error-to-exit-code mapping. Returns an exit code on failure.
inline std::optional<int> load(const std::string& path, Loaded& out, std::ostream& err) {
  try {
    out.config = load_config(path);
    out.grid = make_grid(out.config);
    out.potential = make_potential(out.config, out.grid);
    return std::nullopt;
  } catch (const ParseError& e) {
    err << "error: expression: " << e.what() << " (offset " << e.offset() << ")\n";
    return kParseError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  }
}

/// Minimize the action, audit the run, certify the result, and write outputs.
inline int cmd_solve(const std::string& config_path, const Options& opt, std::ostream& out, std::ostream& err) {
  Loaded L;
  if (auto code = load(config_path, L, err)) return *code;
  RunConfig& c = L.config;
  const GridSpec& g = L.grid;
  const Potential& F = *L.potential;
  if (opt.seed) c.solver.rng_seed = *opt.seed;

  try {
    const auto checks = run_checks(c, g, F);
    bool checks_ok = true;
    for (const auto& r : checks) {
      if (!r.pass) {
        checks_ok = false;
        err << "warning: hypothesis check '" << r.name << "' failed (" << r.summary << " = "
            << io::format_double(r.worst) << ")\n";
      }
    }
    if (!checks_ok && opt.strict) {
      err << "error: hypothesis checks failed and --strict is set\n";
      return kNotConverged;
    }

    const std::uint64_t init_seed = opt.seed ? *opt.seed : c.init.seed.value_or(c.solver.rng_seed);
    const Field init = make_initial_field(c, g, F, init_seed);
    auto [u, report] = minimize(F, init, c.solver);

    bool positive = false;
    for (const auto& r : checks)
      if (r.name == "positivity") positive = r.pass;
    const double f_floor = positive ? 0.0 : -std::numeric_limits<double>::infinity();
    const BoundAudit audit = check_minimizing_bounds(report, g, f_floor);
    const Certificate cert = certify(u, F, c.solver.tol_residual);

    const auto& fin = report.final();
    std::string kind = "critical point (local minimizer)";
    if (const auto known = known_minimum(c, g); known && std::abs(fin.action.total - *known) <= 1e-6 * *known)
      kind = "global minimizer (matches known minimum value)";

    json j;
    j["schema"] = "pgrad.report/1";
    j["timestamp"] = utc_timestamp();
    j["config"] = {{"grid", {{"p", g.p()}, {"n", g.n()}, {"extents", g.extents()}, {"nodes", g.nodes()}}},
                   {"potential", F.name()},
                   {"method", report.method},
                   {"rng_seed", c.solver.rng_seed},
                   {"tol_residual", c.solver.tol_residual},
                   {"canonicalize_every", c.solver.canonicalize_every}};
    j["checks"] = json::array();
    for (const auto& r : checks) j["checks"].push_back(to_json(r));
    j["status"] = to_string(report.status);
    j["solution_kind"] = kind;
    j["final_action"] = fin.action.total;
    j["final"] = to_json(fin);
    j["iterations"] = json::array();
    for (const auto& r : report.iterations) j["iterations"].push_back(to_json(r));
    j["evaluations"] = {{"action", report.action_evaluations}, {"gradient", report.gradient_evaluations}};
    j["audit"] = {{"pass", audit.pass()},
                  {"wirtinger_constant", audit.wirtinger_constant},
                  {"energy_bound", std::isfinite(audit.energy_bound) ? json(audit.energy_bound) : json(nullptr)},
                  {"h1_bound", audit.boundedness.checked ? json(audit.h1_bound) : json(nullptr)},
                  {"energy", to_json(audit.energy)},
                  {"wirtinger", to_json(audit.wirtinger)},
                  {"mean_cell", to_json(audit.mean_cell)},
                  {"boundedness", to_json(audit.boundedness)}};
    j["certificate"] = {{"residual_l2", cert.residual_l2},
                        {"residual_linf", cert.residual_linf},
                        {"gradient_mismatch", cert.gradient_mismatch},
                        {"residual_tolerance", cert.residual_tolerance},
                        {"residual_pass", cert.residual_pass},
                        {"wirtinger", {{"lhs", cert.wirtinger.lhs},
                                       {"rhs", cert.wirtinger.rhs},
                                       {"constant", cert.wirtinger.constant},
                                       {"pass", cert.wirtinger.pass}}}};
    j["assumptions"] = {"weak lower semicontinuity of the potential part of the action is assumed, not checked",
                        "coercivity of the integrated potential is not required by the lattice-shift argument "
                        "and is not checked"};

    if (!c.output.field_csv.empty()) io::write_field_csv(c.resolve(c.output.field_csv), u, c.output.closed_csv);
    if (!c.output.report_json.empty()) {
      std::ofstream rep(c.resolve(c.output.report_json));
      if (!rep) throw FormatError("cannot write '" + c.output.report_json + "'");
      rep << j.dump(2) << '\n';
    }

    if (!opt.quiet) {
      out << "status        " << to_string(report.status) << " after " << fin.iter << " iterations\n"
          << "action        " << io::format_double(fin.action.total) << "  (" << kind << ")\n"
          << "residual L2   " << io::format_double(cert.residual_l2) << "\n"
          << "bound audit   " << (audit.pass() ? "pass" : "FAIL") << "\n";
    }
    return report.status == Status::Converged ? kOk : kNotConverged;
  } catch (const ParseError& e) {
    err << "error: expression: " << e.what() << "\n";
    return kParseError;
  } catch (const DomainError& e) {
    err << "error: potential evaluation failed: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  }
}

/// Run the sampled hypothesis checks and print a table.
inline int cmd_check(const std::string& config_path, const Options& opt, std::ostream& out, std::ostream& err) {
  Loaded L;
  if (auto code = load(config_path, L, err)) return *code;
  if (opt.seed) L.config.checks.seed = *opt.seed;
  try {
    const auto checks = run_checks(L.config, L.grid, *L.potential);
    bool ok = true;
    for (const auto& r : checks) ok = ok && r.pass;
    if (!opt.quiet) print_checks(out, checks);
    return ok ? kOk : kNotConverged;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  }
}

/// Certify a field CSV against the configured potential.
inline int cmd_residual(const std::string& field_path, const std::string& config_path, const Options& opt,
                        std::ostream& out, std::ostream& err) {
  Loaded L;
  if (auto code = load(config_path, L, err)) return *code;
  try {
    const auto imported = io::read_field_csv(field_path, L.grid);
    std::optional<ClosedField> closed;
    if (const auto* cf = std::get_if<ClosedField>(&imported)) closed = *cf;
    const Field u = io::as_field(imported);
    const Certificate cert = certify(u, *L.potential, L.config.solver.tol_residual, closed);
    if (!opt.quiet) {
      out << "residual L2    " << io::format_double(cert.residual_l2) << "  (tolerance "
          << io::format_double(cert.residual_tolerance) << ")\n"
          << "residual Linf  " << io::format_double(cert.residual_linf) << "\n"
          << "wirtinger      " << io::format_double(cert.wirtinger.lhs) << " <= " << io::format_double(cert.wirtinger.rhs)
          << "  (C_h = " << io::format_double(cert.wirtinger.constant) << ") "
          << (cert.wirtinger.pass ? "pass" : "FAIL") << "\n";
      if (cert.boundary) {
        for (std::size_t a = 0; a < cert.boundary->value_mismatch.size(); ++a)
          out << "boundary t" << a + 1 << "   value " << io::format_double(cert.boundary->value_mismatch[a])
              << ", derivative " << io::format_double(cert.boundary->derivative_mismatch[a]) << "  "
              << (cert.boundary->axis_pass[a] ? "pass" : "FAIL") << "\n";
      }
    }
    if (cert.boundary && !cert.boundary->pass) return kNotConverged;
    return cert.residual_pass ? kOk : kNotConverged;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  }
}

/// Solve laplacian(u) = f for a zero-mean right-hand side CSV with the Fourier reference solver.
inline int cmd_oracle_linear(const std::string& rhs_path, const std::string& config_path,
                             const std::string& out_path, const Options& opt, std::ostream& out,
                             std::ostream& err) {
  RunConfig c;
  GridSpec g;
  try {
    c = load_config(config_path);
    g = make_grid(c);
    const Field f = io::as_field(io::read_field_csv(rhs_path, g));
    const Field u = solve_linear_poisson(f);
    if (out_path.empty() || out_path == "-") {
      io::write_field_csv(out, u);
    } else {
      io::write_field_csv(out_path, u);
      if (!opt.quiet) out << "wrote " << out_path << "\n";
    }
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  }
}

}  // namespace pgrad::app
