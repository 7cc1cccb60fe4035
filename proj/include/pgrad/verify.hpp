#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "pgrad/action.hpp"
#include "pgrad/grid.hpp"
#include "pgrad/potential.hpp"

namespace pgrad {

struct Residual {
  Field field;   // laplacian(u) - grad_x F(t, u)
  double l2 = 0.0;
  double linf = 0.0;
  double gradient_mismatch = 0.0;  // max |R + action_gradient(u, F)|, node-wise
};

inline double linf_norm(const Field& u) {
  double m = 0.0;
  for (double v : u.data()) m = std::max(m, std::abs(v));
  return m;
}

/// Euler-Lagrange residual R = laplacian(u) - grad_x F(t, u).
///
/// The Laplacian is formed here as sum_axis backward_diff(forward_diff(u)) rather than with the
/// stencil used by action_gradient, so the reported mismatch compares two independent routes.
inline Residual el_residual(const Field& u, const Potential& F) {
  detail::require_compatible(u, F);
  const auto& g = u.spec();
  Field R(g);
  for (std::size_t a = 0; a < g.p(); ++a) R += backward_diff(forward_diff(u, a), a);
  detail::over_nodes(g, [&](std::size_t k) {
    std::vector<double> t(g.p()), gf(g.n());
    g.time_of(k, t);
    F.gradient(t, u.node(k), gf);
    for (std::size_t i = 0; i < g.n(); ++i) R(k, i) -= gf[i];
  });
  Residual r{R, l2_norm(R), linf_norm(R), 0.0};
  const Field G = action_gradient(u, F);
  for (std::size_t j = 0; j < R.size(); ++j)
    r.gradient_mismatch = std::max(r.gradient_mismatch, std::abs(R.data()[j] + G.data()[j]));
  return r;
}

struct BoundaryReport {
  std::vector<double> value_mismatch;       // per axis: max |u(t^a = 0) - u(t^a = T^a)|
  std::vector<double> derivative_mismatch;  // per axis: one-sided quotients leaving each face
  double tolerance = 0.0;
  std::vector<bool> axis_pass;
  bool pass = false;
};

/// Face matching on a closed grid: u and its one-sided difference quotient must agree on
/// opposite faces S^- (t^a = 0) and S^+ (t^a = T^a).
///
/// The quotient leaving S^- is (u(1) - u(0)) / h; leaving S^+ into the next period it is
/// (u(1) - u(N)) / h under the periodic identification of node N+1 with node 1.
inline BoundaryReport boundary_check(const ClosedField& c) {
  const auto& g = c.spec;
  if (c.nodes.size() != g.p() || c.values.size() != c.node_count() * g.n())
    throw FormatError("closed grid shape does not match its periodic grid");
  for (std::size_t a = 0; a < g.p(); ++a)
    if (c.nodes[a] != g.nodes()[a] + 1) throw FormatError("closed grid needs N+1 nodes on every axis");

  BoundaryReport rep;
  double umax = 0.0;
  for (double v : c.values) umax = std::max(umax, std::abs(v));
  rep.tolerance = 1e-9 * (1.0 + umax);
  rep.pass = true;
  for (std::size_t a = 0; a < g.p(); ++a) {
    const std::size_t stride = c.stride(a);
    const std::size_t N = g.nodes()[a];
    const double h = g.spacing(a);
    double vmis = 0.0, dmis = 0.0;
    for (std::size_t q = 0; q < c.node_count(); ++q) {
      if ((q / stride) % c.nodes[a] != 0) continue;
      const std::size_t lower = q, next = q + stride, upper = q + N * stride;
      for (std::size_t i = 0; i < g.n(); ++i) {
        vmis = std::max(vmis, std::abs(c(lower, i) - c(upper, i)));
        const double leave_lower = (c(next, i) - c(lower, i)) / h;
        const double leave_upper = (c(next, i) - c(upper, i)) / h;
        dmis = std::max(dmis, std::abs(leave_lower - leave_upper));
      }
    }
    rep.value_mismatch.push_back(vmis);
    rep.derivative_mismatch.push_back(dmis);
    const bool ok = vmis <= rep.tolerance && dmis <= rep.tolerance;
    rep.axis_pass.push_back(ok);
    rep.pass = rep.pass && ok;
  }
  return rep;
}

struct WirtingerCheck {
  double lhs = 0.0;       // |u - mean(u)|_L2
  double rhs = 0.0;       // C_h |D u|_L2
  double constant = 0.0;  // C_h
  bool pass = false;
};

/// Discrete Wirtinger inequality on the fluctuation of u.
inline WirtingerCheck wirtinger_check(const Field& u) {
  const auto split = split_mean(u);
  WirtingerCheck w;
  w.constant = wirtinger_constant(u.spec());
  w.lhs = l2_norm(split.fluctuation);
  w.rhs = w.constant * std::sqrt(gradient_norm_squared(split.fluctuation));
  w.pass = w.lhs <= w.rhs * (1.0 + 1e-12);
  return w;
}

/// Post-hoc certificate for a candidate solution.
struct Certificate {
  double residual_l2 = 0.0;
  double residual_linf = 0.0;
  double gradient_mismatch = 0.0;
  double residual_tolerance = 0.0;
  bool residual_pass = false;
  WirtingerCheck wirtinger;
  std::optional<BoundaryReport> boundary;

  bool pass() const { return residual_pass && wirtinger.pass && (!boundary || boundary->pass); }
};

inline Certificate certify(const Field& u, const Potential& F, double tol_residual,
                           const std::optional<ClosedField>& closed = std::nullopt) {
  const Residual r = el_residual(u, F);
  Certificate c;
  c.residual_l2 = r.l2;
  c.residual_linf = r.linf;
  c.gradient_mismatch = r.gradient_mismatch;
  c.residual_tolerance = tol_residual;
  c.residual_pass = r.l2 <= tol_residual;
  c.wirtinger = wirtinger_check(u);
  if (closed) c.boundary = boundary_check(*closed);
  return c;
}

}  // namespace pgrad
