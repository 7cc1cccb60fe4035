#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pgrad/grid.hpp"
#include "pgrad/potential.hpp"

namespace pgrad {

/// Discrete action split into its Dirichlet (kinetic) and potential parts.
struct ActionValue {
  double total = 0.0;
  double kinetic = 0.0;
  double potential = 0.0;
  double excess = 0.0;  // total minus Vol * F.offset(), summed without that constant
};

namespace detail {

inline void require_compatible(const Field& u, const Potential& F) {
  if (u.spec().p() != F.p() || u.spec().n() != F.n())
    throw UsageError("potential dimensions (p=" + std::to_string(F.p()) + ", n=" + std::to_string(F.n()) +
                     ") do not match the field");
}

inline std::string node_label(const GridSpec& g, std::size_t node) {
  std::string s = "(";
  const auto k = g.multi_index(node);
  for (std::size_t a = 0; a < k.size(); ++a) s += (a ? "," : "") + std::to_string(k[a]);
  return s + ")";
}

// Runs fn(k) over all nodes, re-throwing potential failures with the node attached.
template <class Fn>
void over_nodes(const GridSpec& g, Fn&& fn) {
  detail::for_each_index(g.node_count(), [&](std::size_t k) {
    try {
      fn(k);
    } catch (const DomainError& e) {
      throw DomainError(std::string(e.what()) + " at node " + node_label(g, k), e.offset(), g.multi_index(k));
    }
  });
}

}  // namespace detail

/// phi_h(u) = Vol_cell * sum_k [ 1/2 sum_axis |D_axis u(k)|^2 + F(t_k, u(k)) ].
inline ActionValue action(const Field& u, const Potential& F) {
  detail::require_compatible(u, F);
  const auto& g = u.spec();
  std::vector<double> pot(g.node_count());
  detail::over_nodes(g, [&](std::size_t k) {
    std::vector<double> t(g.p());
    g.time_of(k, t);
    pot[k] = F.excess(t, u.node(k));
    if (!std::isfinite(pot[k])) throw DomainError("potential is not finite");
  });
  ActionValue a;
  const double constant = F.offset() * g.volume();
  const double pot_excess = g.cell_volume() * detail::pairwise_sum(pot);
  a.kinetic = 0.5 * gradient_norm_squared(u);
  a.excess = a.kinetic + pot_excess;
  a.potential = constant + pot_excess;
  a.total = constant + a.excess;
  return a;
}

/// L2 gradient of the discrete action: G = -laplacian(u) + grad_x F(t, u).
///
/// For every v, l2_inner(G, v) is the directional derivative of phi_h at u along v;
/// summation by parts turns the derivative-pairing term into the Laplacian exactly.
inline Field action_gradient(const Field& u, const Potential& F) {
  detail::require_compatible(u, F);
  const auto& g = u.spec();
  Field G = laplacian(u);
  G *= -1.0;
  detail::over_nodes(g, [&](std::size_t k) {
    std::vector<double> t(g.p()), gf(g.n());
    g.time_of(k, t);
    F.gradient(t, u.node(k), gf);
    for (std::size_t i = 0; i < g.n(); ++i) {
      if (!std::isfinite(gf[i])) throw DomainError("potential gradient is not finite");
      G(k, i) += gf[i];
    }
  });
  return G;
}

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

/// Continuity estimate for the action under |grad F| <= M|x| + g_max:
///
///   |phi(u) - phi(v)| <= 1/2 (|Du| + |Dv|) |Du - Dv|
///                        + (M |v| + g_max Vol^{1/2}) |u - v| + M |u - v|^2
///
/// with discrete L2 norms and D the stacked forward difference.
inline BoundCheck continuity_bound(const Field& u, const Field& v, const Potential& F, const GrowthEnvelope& env) {
  u.require_same_grid(v);
  env.validate();
  const Field diff = u - v;
  const double du = std::sqrt(gradient_norm_squared(u));
  const double dv = std::sqrt(gradient_norm_squared(v));
  const double ddiff = std::sqrt(gradient_norm_squared(diff));
  const double l2_diff = l2_norm(diff);
  BoundCheck b;
  b.lhs = std::abs(action(u, F).total - action(v, F).total);
  b.rhs = 0.5 * (du + dv) * ddiff + (env.M * l2_norm(v) + env.g_max * std::sqrt(u.spec().volume())) * l2_diff +
          env.M * l2_diff * l2_diff;
  b.pass = b.lhs <= b.rhs * (1.0 + 1e-12);
  return b;
}

}  // namespace pgrad
