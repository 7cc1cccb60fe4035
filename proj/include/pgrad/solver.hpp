#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pgrad/action.hpp"
#include "pgrad/grid.hpp"
#include "pgrad/potential.hpp"

namespace pgrad {

enum class Method { GradientDescent, NonlinearCG };

inline std::string to_string(Method m) { return m == Method::GradientDescent ? "gd" : "ncg"; }

struct SolverConfig {
  Method method = Method::NonlinearCG;
  std::size_t max_iters = 20000;
  double tol_residual = 1e-8;
  double tol_action = 1e-15;
  double armijo_c1 = 1e-4;
  double backtrack_factor = 0.5;
  double initial_step = 1.0;
  std::size_t canonicalize_every = 1;  // 0 disables the lattice shift
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) throw UsageError("armijo_c1 must lie in (0, 1)");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) throw UsageError("backtrack_factor must lie in (0, 1)");
    if (!(tol_residual > 0.0) || !(tol_action > 0.0)) throw UsageError("tolerances must be positive");
    if (!(initial_step > 0.0) || !std::isfinite(initial_step)) throw UsageError("initial_step must be positive");
  }
};

enum class Status { Converged, MaxIters, LineSearchFailed, Stalled };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::Converged: return "converged";
    case Status::MaxIters: return "max_iters";
    case Status::LineSearchFailed: return "line_search_failed";
    case Status::Stalled: return "stalled";
  }
  return "unknown";
}

/// State of one accepted iterate u_k (after any lattice shift).
struct IterationRecord {
  std::size_t iter = 0;
  ActionValue action;
  double residual = 0.0;            // |G|_L2
  double dirichlet = 0.0;           // |Du|^2_L2
  std::vector<double> mean;
  double fluctuation_norm = 0.0;    // |u - mean|_L2
  double h1_norm = 0.0;
  double step = 0.0;                // step that produced this iterate
  std::vector<long long> shifts;    // lattice shifts k_i applied to this iterate
  double gauge_change = 0.0;        // |phi after shift - phi before| / (|kinetic| + |potential|)
  bool restarted = false;           // NCG fell back to steepest descent
};

struct RunReport {
  std::string method;
  std::vector<IterationRecord> iterations;
  Status status = Status::MaxIters;
  std::optional<std::vector<double>> periods;
  bool canonicalized = false;
  std::size_t action_evaluations = 0;
  std::size_t gradient_evaluations = 0;

  double initial_action() const { return iterations.front().action.total; }
  const IterationRecord& final() const { return iterations.back(); }
};

struct Canonicalized {
  Field field;
  std::vector<long long> shifts;
};

/// Moves the mean of each component into [0, P_i) by adding k_i P_i with k_i = -floor(mean_i / P_i).
/// Only the mean changes; the fluctuation is untouched.
inline Canonicalized canonicalize(const Field& u, std::span<const double> periods) {
  const auto& g = u.spec();
  if (periods.size() != g.n()) throw UsageError("canonicalize needs one period per component");
  for (double P : periods)
    if (!(P > 0.0)) throw UsageError("periods must be positive");
  const auto m = mean(u);
  Canonicalized c{u, std::vector<long long>(g.n(), 0)};
  for (std::size_t i = 0; i < g.n(); ++i) {
    const double k = -std::floor(m[i] / periods[i]);
    c.shifts[i] = static_cast<long long>(k);
    if (k == 0.0) continue;
    const double offset = k * periods[i];
    for (std::size_t node = 0; node < g.node_count(); ++node) c.field(node, i) += offset;
  }
  return c;
}

/// Seeded starting field: uniform in [0, P_i) per node when periods exist, otherwise 0.1 N(0,1).
inline Field random_initial_field(const GridSpec& g, const std::optional<std::vector<double>>& periods,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Field u(g);
  if (periods) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t k = 0; k < g.node_count(); ++k)
      for (std::size_t i = 0; i < g.n(); ++i) u(k, i) = unit(rng) * (*periods)[i];
  } else {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : u.data()) v = 0.1 * normal(rng);
  }
  return u;
}

namespace detail {

inline IterationRecord describe(std::size_t iter, const Field& u, const ActionValue& a, const Field& G) {
  IterationRecord r;
  r.iter = iter;
  r.action = a;
  r.residual = l2_norm(G);
  r.dirichlet = 2.0 * a.kinetic;
  const auto split = split_mean(u);
  r.mean = split.mean;
  r.fluctuation_norm = l2_norm(split.fluctuation);
  r.h1_norm = std::sqrt(l2_inner(u, u) + r.dirichlet);
  r.shifts.assign(u.spec().n(), 0);
  return r;
}

inline double gauge_scale(const ActionValue& a) { return std::abs(a.kinetic) + std::abs(a.potential); }

}  // namespace detail

/// Minimizes the discrete action by steepest descent or Polak-Ribiere+ nonlinear CG with
/// Armijo backtracking, shifting each iterate's mean into the period cell.
///
/// Stops when |G|_L2 <= tol_residual (converged), after max_iters, when the step falls under
/// 1e-16 (line_search_failed), or when over the last 5 iterations the action decreased by
/// less than tol_action (relative) and the smallest residual seen has not improved for 50
/// iterations (stalled). The second condition keeps runs going once the action has reached
/// its roundoff floor but the gradient is still shrinking.
inline std::pair<Field, RunReport> minimize(const Potential& F, const Field& init, const SolverConfig& cfg) {
  cfg.validate();
  detail::require_compatible(init, F);
  const bool shift = cfg.canonicalize_every > 0;
  if (shift && !F.periods()) throw UsageError("canonicalization requires a potential with periods");

  RunReport report;
  report.method = to_string(cfg.method);
  report.periods = F.periods();
  report.canonicalized = shift;

  auto eval_action = [&](const Field& f) {
    ++report.action_evaluations;
    return action(f, F);
  };
  auto eval_gradient = [&](const Field& f) {
    ++report.gradient_evaluations;
    return action_gradient(f, F);
  };

  Field u = init;
  std::vector<long long> shifts(u.spec().n(), 0);
  double gauge = 0.0;
  ActionValue phi = eval_action(u);
  // Shifts u by whole periods and checks that the action did not move.
  const auto apply_shift = [&](Field& f, ActionValue& a) {
    auto c = canonicalize(f, *F.periods());
    shifts = c.shifts;
    gauge = 0.0;
    if (std::none_of(shifts.begin(), shifts.end(), [](long long k) { return k != 0; })) return false;
    const ActionValue after = eval_action(c.field);
    gauge = std::abs(after.total - a.total) / std::max(detail::gauge_scale(a), 1e-300);
    if (gauge > 1e-12)
      throw Error("lattice shift changed the action by " + std::to_string(gauge) +
                  " (relative); the declared periods are not periods of F");
    f = std::move(c.field);
    a = after;
    return true;
  };
  if (shift) apply_shift(u, phi);
  Field G = eval_gradient(u);
  report.iterations.push_back(detail::describe(0, u, phi, G));
  report.iterations.back().shifts = shifts;
  report.iterations.back().gauge_change = gauge;

  Field direction(u.spec()), G_prev(u.spec());
  double prev_step = 0.0, prev_slope = 0.0;
  double best_residual = report.iterations.back().residual;
  std::size_t best_iter = 0;
  constexpr std::size_t kResidualWindow = 50;

  for (std::size_t iter = 1;; ++iter) {
    const double residual = report.iterations.back().residual;
    if (residual < best_residual) {
      best_residual = residual;
      best_iter = iter - 1;
    }
    if (residual <= cfg.tol_residual) {
      report.status = Status::Converged;
      break;
    }
    if (iter > cfg.max_iters) {
      report.status = Status::MaxIters;
      break;
    }
    if (report.iterations.size() > 5) {
      const auto& back5 = report.iterations[report.iterations.size() - 6];
      const double old = back5.action.total;
      if (old - phi.total < cfg.tol_action * std::abs(old) && iter - 1 - best_iter >= kResidualWindow) {
        report.status = Status::Stalled;
        break;
      }
    }

    bool restarted = iter == 1 || cfg.method == Method::GradientDescent;
    if (!restarted) {
      const double gg_prev = l2_inner(G_prev, G_prev);
      const double beta = std::max(0.0, (l2_inner(G, G) - l2_inner(G, G_prev)) / gg_prev);
      direction *= beta;
      direction -= G;
      if (l2_inner(G, direction) >= 0.0) restarted = true;
    }
    if (restarted) direction = -G;
    const double slope = l2_inner(G, direction);

    double step = cfg.initial_step;
    if (iter > 1 && prev_slope < 0.0) step = std::min(cfg.initial_step, 2.0 * prev_step * prev_slope / slope);

    // Action differences below this are treated as roundoff; acceptance then falls back to
    // the derivative form of the Armijo test, which is exact for quadratics and does not
    // suffer from cancellation against a large constant part of the action.
    const double noise = 1e-10 * (std::abs(phi.kinetic) + std::abs(phi.excess - phi.kinetic));
    struct Trial {
      double step;
      Field field;
      ActionValue phi;
      Field grad;
      double slope;
    };
    const auto evaluate = [&](double s) {
      Field f = u;
      f.axpy(s, direction);
      const ActionValue a = eval_action(f);
      Field gf = eval_gradient(f);
      const double sl = l2_inner(gf, direction);
      return Trial{s, std::move(f), a, std::move(gf), sl};
    };
    const auto acceptable = [&](const Trial& t) {
      if (t.phi.excess <= phi.excess + cfg.armijo_c1 * t.step * slope) return true;
      return std::abs(t.phi.excess - phi.excess) <= noise && t.phi.excess <= phi.excess &&
             t.slope <= (2.0 * cfg.armijo_c1 - 1.0) * slope;
    };

    std::optional<Trial> best;
    while (step >= 1e-16) {
      Trial t = evaluate(step);
      if (acceptable(t)) {
        best = std::move(t);
        break;
      }
      step *= cfg.backtrack_factor;
    }
    if (!best) {
      report.status = Status::LineSearchFailed;
      break;
    }

    // Secant step on the directional derivative; exact line minimizer for quadratic actions.
    if (best->slope > slope) {
      const double s_star = best->step * slope / (slope - best->slope);
      if (std::isfinite(s_star) && s_star > 0.0 && s_star != best->step) {
        Trial alt = evaluate(s_star);
        const bool lower = alt.phi.excess < best->phi.excess ||
                           (alt.phi.excess == best->phi.excess && std::abs(alt.slope) < std::abs(best->slope));
        if (lower && acceptable(alt)) best = std::move(alt);
      }
    }
    step = best->step;
    Field trial = std::move(best->field);
    ActionValue trial_phi = best->phi;
    Field trial_grad = std::move(best->grad);

    shifts.assign(u.spec().n(), 0);
    gauge = 0.0;
    if (shift && iter % cfg.canonicalize_every == 0 && apply_shift(trial, trial_phi)) trial_grad = eval_gradient(trial);

    G_prev = std::move(G);
    u = std::move(trial);
    phi = trial_phi;
    G = std::move(trial_grad);
    prev_step = step;
    prev_slope = slope;

    auto rec = detail::describe(iter, u, phi, G);
    rec.step = step;
    rec.shifts = shifts;
    rec.gauge_change = gauge;
    rec.restarted = restarted;
    report.iterations.push_back(std::move(rec));
  }
  return {std::move(u), std::move(report)};
}

struct BoundVerdict {
  bool pass = true;
  bool checked = false;
  double worst_margin = -std::numeric_limits<double>::infinity();  // max(lhs - rhs) over iterates
  std::size_t violations = 0;
};

/// Audit of the a-priori bounds along a run.
struct BoundAudit {
  BoundVerdict energy;       // 1/2 |Du_k|^2 <= phi(u_0) - Vol * F_floor
  BoundVerdict wirtinger;    // |u_k - mean| <= C_h |Du_k|
  BoundVerdict mean_cell;    // 0 <= mean_i <= P_i after each shift
  BoundVerdict boundedness;  // |u_k|_H1 <= sqrt(2 (1 + C_h^2) phi(u_0) + n max(P)^2 Vol)
  double wirtinger_constant = 0.0;
  double energy_bound = 0.0;
  double h1_bound = 0.0;

  bool pass() const { return energy.pass && wirtinger.pass && mean_cell.pass && boundedness.pass; }
};

namespace detail {

inline void note(BoundVerdict& v, double lhs, double rhs, bool ok) {
  v.checked = true;
  v.worst_margin = std::max(v.worst_margin, lhs - rhs);
  if (!ok) {
    ++v.violations;
    v.pass = false;
  }
}

}  // namespace detail

/// Checks every recorded iterate against the energy, Wirtinger, period-cell and H1 bounds.
///
/// `f_floor` is a lower bound for F (0 for positive potentials); pass -infinity when F is
/// unbounded below, which skips the energy and H1 bounds.
inline BoundAudit check_minimizing_bounds(const RunReport& report, const GridSpec& grid, double f_floor = 0.0) {
  if (report.iterations.empty()) throw UsageError("empty run report");
  BoundAudit audit;
  const double C = wirtinger_constant(grid);
  const double vol = grid.volume();
  const double phi0 = report.initial_action();
  audit.wirtinger_constant = C;

  const bool energy_applies = std::isfinite(f_floor);
  audit.energy_bound = energy_applies ? phi0 - vol * f_floor : std::numeric_limits<double>::infinity();
  const bool cell_applies = report.canonicalized && report.periods.has_value();
  const bool h1_applies = cell_applies && energy_applies && f_floor >= 0.0;
  if (h1_applies) {
    const double pmax = *std::max_element(report.periods->begin(), report.periods->end());
    audit.h1_bound = std::sqrt(2.0 * (1.0 + C * C) * phi0 + static_cast<double>(grid.n()) * pmax * pmax * vol);
  }

  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (const auto& it : report.iterations) {
    if (energy_applies) {
      const double lhs = 0.5 * it.dirichlet;
      const double rhs = audit.energy_bound;
      detail::note(audit.energy, lhs, rhs, lhs <= rhs + 1e-12 * std::abs(phi0));
    }
    {
      // Roundoff in the computed mean leaves a residual of order eps |mean| in the fluctuation.
      double mean_norm = 0.0;
      for (double m : it.mean) mean_norm += m * m;
      const double slack = 8.0 * eps * std::sqrt(mean_norm * vol);
      const double lhs = it.fluctuation_norm;
      const double rhs = C * std::sqrt(it.dirichlet);
      detail::note(audit.wirtinger, lhs, rhs, lhs <= rhs * (1.0 + 1e-12) + slack);
    }
    if (cell_applies) {
      for (std::size_t i = 0; i < it.mean.size(); ++i) {
        const double P = (*report.periods)[i];
        const double m = it.mean[i];
        const double margin = std::max(-m, m - P);
        detail::note(audit.mean_cell, margin, 0.0, margin <= 1e-12 * P);
      }
    }
    if (h1_applies) detail::note(audit.boundedness, it.h1_norm, audit.h1_bound, it.h1_norm <= audit.h1_bound);
  }
  return audit;
}

}  // namespace pgrad
