#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pgrad/error.hpp"
#include "pgrad/expr.hpp"
#include "pgrad/grid.hpp"

namespace pgrad {

/// Growth data for a potential: |grad_x F(t,x)| <= M|x| + g(t) with g summarized by its
/// maximum, and |F|, |grad F| <= a(|x|) b(t) with a(s) <= a_slope*s + a0 and b <= b_max.
struct GrowthEnvelope {
  double M = 0.0;
  double g_max = 0.0;
  double a0 = 0.0;
  double a_slope = 0.0;
  double b_max = 0.0;

  void validate() const {
    for (double v : {M, g_max, a0, a_slope, b_max})
      if (!(v >= 0.0) || !std::isfinite(v))
        throw UsageError("growth envelope entries must be finite and nonnegative");
  }
};

/// F(t, x) together with its exact x-gradient.
class Potential {
 public:
  using ValueFn = std::function<double(std::span<const double> t, std::span<const double> x)>;
  using GradFn = std::function<void(std::span<const double> t, std::span<const double> x, std::span<double> out)>;

  Potential(std::string name, std::size_t p, std::size_t n, ValueFn value, GradFn grad)
      : name_(std::move(name)), p_(p), n_(n), value_(std::move(value)), grad_(std::move(grad)) {}

  const std::string& name() const noexcept { return name_; }
  std::size_t p() const noexcept { return p_; }
  std::size_t n() const noexcept { return n_; }

  double value(std::span<const double> t, std::span<const double> x) const { return value_(t, x); }

  /// Constant part c of F = c + E, and E evaluated without the cancellation that
  /// value(t, x) - c would suffer. The action sums E so that changes far below the
  /// rounding unit of c stay visible to the line search.
  double offset() const noexcept { return offset_; }
  double excess(std::span<const double> t, std::span<const double> x) const {
    return excess_ ? excess_(t, x) : value_(t, x);
  }
  Potential& with_offset(double c, ValueFn excess) {
    offset_ = c;
    excess_ = std::move(excess);
    return *this;
  }

  void gradient(std::span<const double> t, std::span<const double> x, std::span<double> out) const {
    grad_(t, x, out);
  }
  std::vector<double> gradient(std::span<const double> t, std::span<const double> x) const {
    std::vector<double> g(n_);
    grad_(t, x, g);
    return g;
  }

  const std::optional<std::vector<double>>& periods() const noexcept { return periods_; }
  Potential& with_periods(std::vector<double> periods) {
    if (periods.size() != n_) throw UsageError("need one period per field component");
    for (double v : periods)
      if (!(v > 0.0) || !std::isfinite(v)) throw UsageError("periods must be positive");
    periods_ = std::move(periods);
    return *this;
  }

  bool positivity_claim() const noexcept { return positivity_claim_; }
  Potential& with_positivity_claim(bool claim) {
    positivity_claim_ = claim;
    return *this;
  }

  const std::optional<GrowthEnvelope>& growth() const noexcept { return growth_; }
  Potential& with_growth(GrowthEnvelope env) {
    env.validate();
    growth_ = env;
    return *this;
  }

  /// Replaces the gradient; used to build deliberately inconsistent potentials in tests.
  Potential& with_gradient(GradFn grad) {
    grad_ = std::move(grad);
    return *this;
  }

 private:
  std::string name_;
  std::size_t p_;
  std::size_t n_;
  ValueFn value_;
  GradFn grad_;
  double offset_ = 0.0;
  ValueFn excess_;
  std::optional<std::vector<double>> periods_;
  bool positivity_claim_ = true;
  std::optional<GrowthEnvelope> growth_;
};

struct CosineLatticeParams {
  std::vector<double> amplitudes;
  std::vector<double> periods;
  double floor = 0.1;
  double modulation = 0.0;
  std::size_t modulation_axis = 0;  // zero-based time axis
};

/// F(t,x) = eps + (1 + mu cos(2 pi t^a / T^a)) sum_i A_i (1 - cos(2 pi x^i / P_i)).
///
/// Positive and P-periodic in every component, so it satisfies every hypothesis under which
/// a minimizer is guaranteed to exist. `extents` are the grid periods T^a.
inline Potential cosine_lattice(const CosineLatticeParams& prm, std::span<const double> extents) {
  const std::size_t n = prm.amplitudes.size();
  if (n == 0 || prm.periods.size() != n) throw UsageError("cosine lattice needs matching amplitudes and periods");
  for (std::size_t i = 0; i < n; ++i)
    if (!(prm.amplitudes[i] > 0.0) || !(prm.periods[i] > 0.0))
      throw UsageError("cosine lattice amplitudes and periods must be positive");
  if (!(prm.floor > 0.0)) throw UsageError("cosine lattice floor must be positive");
  if (!(std::abs(prm.modulation) < 1.0)) throw UsageError("cosine lattice modulation must lie in (-1, 1)");
  if (prm.modulation_axis >= extents.size()) throw UsageError("cosine lattice modulation axis out of range");

  const double T = extents[prm.modulation_axis];
  const auto A = prm.amplitudes;
  const auto P = prm.periods;
  const double eps = prm.floor, mu = prm.modulation;
  const std::size_t axis = prm.modulation_axis;
  const auto factor = [=](std::span<const double> t) {
    return 1.0 + mu * std::cos(2.0 * std::numbers::pi * t[axis] / T);
  };

  auto excess = [=](std::span<const double> t, std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      // 1 - cos(z) = 2 sin^2(z/2), written this way to keep precision near the lattice points
      const double h = std::sin(std::numbers::pi * x[i] / P[i]);
      s += A[i] * 2.0 * h * h;
    }
    return factor(t) * s;
  };
  auto value = [=](std::span<const double> t, std::span<const double> x) { return eps + excess(t, x); };
  auto grad = [=](std::span<const double> t, std::span<const double> x, std::span<double> out) {
    const double f = factor(t);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 2.0 * std::numbers::pi / P[i];
      out[i] = f * A[i] * w * std::sin(w * x[i]);
    }
  };

  double sup_sq = 0.0, sum_a = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = A[i] * 2.0 * std::numbers::pi / P[i];
    sup_sq += w * w;
    sum_a += A[i];
  }
  const double g_max = (1.0 + std::abs(mu)) * std::sqrt(sup_sq);
  const double f_max = eps + (1.0 + std::abs(mu)) * 2.0 * sum_a;

  Potential pot("cosine", extents.size(), n, value, grad);
  pot.with_periods(P).with_positivity_claim(true).with_growth(
      {.M = 0.0, .g_max = g_max, .a0 = std::max(g_max, f_max), .a_slope = 0.0, .b_max = 1.0});
  pot.with_offset(eps, excess);
  return pot;
}

/// F(t,x) = |x - a|^2 / 2 + eps. Strictly convex, no periods.
inline Potential shifted_quadratic(std::vector<double> center, double floor, std::size_t p) {
  if (center.empty()) throw UsageError("quadratic potential needs a center");
  if (!(floor > 0.0)) throw UsageError("quadratic floor must be positive");
  const std::size_t n = center.size();
  auto excess = [center](std::span<const double>, std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < center.size(); ++i) s += (x[i] - center[i]) * (x[i] - center[i]);
    return 0.5 * s;
  };
  auto value = [excess, floor](std::span<const double> t, std::span<const double> x) { return floor + excess(t, x); };
  auto grad = [center](std::span<const double>, std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < center.size(); ++i) out[i] = x[i] - center[i];
  };
  double norm_a = 0.0;
  for (double c : center) norm_a += c * c;
  norm_a = std::sqrt(norm_a);
  Potential pot("quadratic", p, n, value, grad);
  pot.with_positivity_claim(true).with_growth({.M = 1.0, .g_max = norm_a, .a0 = 0.0, .a_slope = 0.0, .b_max = 0.0});
  pot.with_offset(floor, excess);
  return pot;
}

/// F(t,x) = -(f(t), x) for a zero-mean forcing field f. f(t) is read at the nearest grid node.
/// Unbounded below, so the positivity claim is false.
inline Potential linear_forcing(const Field& forcing) {
  const auto& g = forcing.spec();
  const auto m = mean(forcing);
  const double norm = l2_norm(forcing);
  for (std::size_t i = 0; i < g.n(); ++i)
    if (std::abs(m[i]) > 1e-10 * norm)
      throw PreconditionError("forcing component " + std::to_string(i + 1) + " has nonzero mean");

  auto f = std::make_shared<const Field>(forcing);
  const auto lookup = [f](std::span<const double> t) {
    const auto& gs = f->spec();
    std::size_t node = 0;
    for (std::size_t a = 0; a < gs.p(); ++a) {
      const auto N = static_cast<long>(gs.nodes()[a]);
      long k = std::lround(t[a] / gs.spacing(a)) % N;
      if (k < 0) k += N;
      node += static_cast<std::size_t>(k) * gs.stride(a);
    }
    return f->node(node);
  };
  auto value = [lookup](std::span<const double> t, std::span<const double> x) {
    const auto fk = lookup(t);
    double s = 0.0;
    for (std::size_t i = 0; i < fk.size(); ++i) s += fk[i] * x[i];
    return -s;
  };
  auto grad = [lookup](std::span<const double> t, std::span<const double>, std::span<double> out) {
    const auto fk = lookup(t);
    for (std::size_t i = 0; i < fk.size(); ++i) out[i] = -fk[i];
  };
  double g_max = 0.0;
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    double s = 0.0;
    for (double v : forcing.node(k)) s += v * v;
    g_max = std::max(g_max, std::sqrt(s));
  }
  Potential pot("linear", g.p(), g.n(), value, grad);
  pot.with_positivity_claim(false).with_growth({.M = 0.0, .g_max = g_max, .a0 = 0.0, .a_slope = 0.0, .b_max = 0.0});
  return pot;
}

/// Potential defined by a parsed expression; gradients come from dual-number evaluation.
inline Potential expression_potential(expr::Ast ast) {
  auto shared = std::make_shared<const expr::Ast>(std::move(ast));
  auto value = [shared](std::span<const double> t, std::span<const double> x) {
    return expr::eval_dual(*shared, t, x).value;
  };
  auto grad = [shared](std::span<const double> t, std::span<const double> x, std::span<double> out) {
    const auto d = expr::eval_dual(*shared, t, x);
    std::copy(d.partials.begin(), d.partials.end(), out.begin());
  };
  Potential pot("expr", shared->p, shared->n, value, grad);
  // A top-level "c + E" or "E + c" declares c as the offset.
  const expr::Node& top = shared->nodes[static_cast<std::size_t>(shared->root)];
  if (top.kind == expr::NodeKind::Add) {
    for (auto [c, e] : {std::pair{top.lhs, top.rhs}, std::pair{top.rhs, top.lhs}}) {
      if (shared->nodes[static_cast<std::size_t>(c)].kind != expr::NodeKind::Constant) continue;
      pot.with_offset(shared->nodes[static_cast<std::size_t>(c)].value,
                      [shared, e](std::span<const double> t, std::span<const double> x) {
                        return expr::eval_dual(*shared, t, x, e).value;
                      });
      break;
    }
  }
  return pot;
}

/// Seeded sampling plan for hypothesis checks: t uniform in the grid box, x uniform in
/// [-x_radius, x_radius]^n, plus each anchor x paired with t = 0.
struct SampleSpec {
  std::size_t count = 1000;
  std::uint64_t seed = 1;
  double x_radius = 10.0;
  std::vector<double> extents;
  std::vector<std::vector<double>> anchors;
};

struct CheckReport {
  std::string name;
  bool pass = false;
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst = 0.0;  // max deviation, min value, worst margin, or max relative error
  std::string summary;
};

namespace detail {

struct SamplePoint {
  std::vector<double> t;
  std::vector<double> x;
};

inline std::vector<SamplePoint> draw_samples(const Potential& F, const SampleSpec& s) {
  if (!s.extents.empty() && s.extents.size() != F.p())
    throw UsageError("sample extents do not match the potential's time dimension");
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SamplePoint> pts;
  pts.reserve(s.count + s.anchors.size());
  for (const auto& a : s.anchors) {
    if (a.size() != F.n()) throw UsageError("sample anchor has wrong dimension");
    pts.push_back({std::vector<double>(F.p(), 0.0), a});
  }
  for (std::size_t j = 0; j < s.count; ++j) {
    SamplePoint pt{std::vector<double>(F.p(), 0.0), std::vector<double>(F.n())};
    for (std::size_t a = 0; a < F.p(); ++a) pt.t[a] = s.extents.empty() ? 0.0 : unit(rng) * s.extents[a];
    for (double& v : pt.x) v = (2.0 * unit(rng) - 1.0) * s.x_radius;
    pts.push_back(std::move(pt));
  }
  return pts;
}

inline double euclid(std::span<const double> v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

}  // namespace detail

/// Sampled test of F(t, x + P_i e_i) = F(t, x).
inline CheckReport check_periodicity(const Potential& F, const SampleSpec& s) {
  if (!F.periods()) throw UsageError("potential declares no periods");
  const auto& P = *F.periods();
  CheckReport r;
  r.name = "periodicity";
  for (const auto& pt : detail::draw_samples(F, s)) {
    const double base = F.value(pt.t, pt.x);
    for (std::size_t i = 0; i < F.n(); ++i) {
      auto y = pt.x;
      y[i] += P[i];
      const double dev = std::abs(F.value(pt.t, y) - base);
      r.worst = std::max(r.worst, dev);
      if (dev > 1e-9 * (1.0 + std::abs(base))) ++r.violations;
    }
    ++r.samples;
  }
  r.pass = r.violations == 0;
  r.summary = "max |F(t,x+P_i e_i) - F(t,x)|";
  return r;
}

/// Sampled test of F > 0; `worst` is the minimum sampled value.
inline CheckReport check_positivity(const Potential& F, const SampleSpec& s) {
  CheckReport r;
  r.name = "positivity";
  r.worst = std::numeric_limits<double>::infinity();
  for (const auto& pt : detail::draw_samples(F, s)) {
    const double v = F.value(pt.t, pt.x);
    r.worst = std::min(r.worst, v);
    if (!(v > 0.0)) ++r.violations;
    ++r.samples;
  }
  r.pass = r.samples > 0 && r.violations == 0;
  r.summary = "min F";
  return r;
}

/// Sampled test of |grad F(t,x)| <= M|x| + g_max; `worst` is max(|grad F| - bound).
inline CheckReport check_gradient_growth(const Potential& F, const GrowthEnvelope& env, const SampleSpec& s) {
  env.validate();
  CheckReport r;
  r.name = "gradient_growth";
  r.worst = -std::numeric_limits<double>::infinity();
  std::vector<double> g(F.n());
  for (const auto& pt : detail::draw_samples(F, s)) {
    F.gradient(pt.t, pt.x, g);
    const double lhs = detail::euclid(g);
    const double rhs = env.M * detail::euclid(pt.x) + env.g_max;
    r.worst = std::max(r.worst, lhs - rhs);
    if (lhs > rhs * (1.0 + 1e-12)) ++r.violations;
    ++r.samples;
  }
  r.pass = r.violations == 0;
  r.summary = "max(|grad F| - (M|x| + g_max))";
  return r;
}

/// Compares grad against central differences of F with step 1e-6 (1 + |x_i|).
/// Error per sample is |fd - grad| / max(1, |grad|); passes when every sample is <= 1e-5.
inline CheckReport check_grad_consistency(const Potential& F, const SampleSpec& s) {
  CheckReport r;
  r.name = "grad_consistency";
  std::vector<double> g(F.n()), fd(F.n());
  for (const auto& pt : detail::draw_samples(F, s)) {
    F.gradient(pt.t, pt.x, g);
    auto y = pt.x;
    for (std::size_t i = 0; i < F.n(); ++i) {
      const double h = 1e-6 * (1.0 + std::abs(pt.x[i]));
      y[i] = pt.x[i] + h;
      const double fp = F.value(pt.t, y);
      y[i] = pt.x[i] - h;
      const double fm = F.value(pt.t, y);
      y[i] = pt.x[i];
      fd[i] = (fp - fm) / (2.0 * h);
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < F.n(); ++i) diff += (fd[i] - g[i]) * (fd[i] - g[i]);
    const double rel = std::sqrt(diff) / std::max(1.0, detail::euclid(g));
    r.worst = std::max(r.worst, rel);
    if (rel > 1e-5) ++r.violations;
    ++r.samples;
  }
  r.pass = r.violations == 0;
  r.summary = "max relative gradient error vs central differences";
  return r;
}

/// Smallest sampled F; used as a floor in energy audits.
inline double sampled_minimum(const Potential& F, const SampleSpec& s) {
  return check_positivity(F, s).worst;
}

}  // namespace pgrad
