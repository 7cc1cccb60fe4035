#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "pgrad/action.hpp"
#include "pgrad/error.hpp"
#include "pgrad/expr.hpp"
#include "pgrad/potential.hpp"
#include "test_support.hpp"

using namespace pgrad;
using pgrad::fixtures::max_abs;
using pgrad::fixtures::max_abs_diff;
using pgrad::fixtures::random_field;
using pgrad::fixtures::random_zero_mean_field;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Potential lattice(const GridSpec& g, double mu = 0.0) {
  std::vector<double> A(g.n(), 1.0), P(g.n(), kTwoPi);
  return cosine_lattice({A, P, 0.1, mu, 0}, g.extents());
}

// Directional derivative of the action along v by central differences.
double central_difference(const Field& u, const Field& v, const Potential& F, double eps) {
  Field up = u, um = u;
  up.axpy(eps, v);
  um.axpy(-eps, v);
  return (action(up, F).total - action(um, F).total) / (2.0 * eps);
}

Field unit(Field v) {
  v *= 1.0 / l2_norm(v);
  return v;
}

}  // namespace

TEST(Action, Examples) {
  GridSpec g({1.0, 2.0}, {6, 5}, 2);
  const std::vector<double> a{0.3, -1.2};
  const auto q = action(Field::constant(g, a), shifted_quadratic(a, 1.0, 2));
  EXPECT_NEAR(q.total, g.volume(), 1e-14);
  EXPECT_EQ(q.kinetic, 0.0);

  const auto c = action(Field(g), lattice(g));
  EXPECT_NEAR(c.total, 0.1 * g.volume(), 1e-15);
  EXPECT_EQ(c.kinetic, 0.0);
}

TEST(Action, TotalIsKineticPlusPotential) {
  GridSpec g({1.0}, {16}, 3);
  const auto a = action(random_field(g, 1), lattice(g, 0.0));
  EXPECT_NEAR(a.total, a.kinetic + a.potential, 4e-16 * a.total);
  EXPECT_NEAR(a.total, 0.1 * g.volume() + a.excess, 4e-16 * a.total);
}

TEST(Action, ExcessResolvesChangesBelowTheFloorRounding) {
  // Near the lattice the per-node excess is far below the rounding unit of the floor.
  GridSpec g({1.0}, {16}, 1);
  const Potential F = lattice(g);
  const Field u = Field::constant(g, std::vector<double>{2e-9});
  const Field w = Field::constant(g, std::vector<double>{1e-9});
  EXPECT_EQ(action(u, F).total, action(w, F).total);
  EXPECT_NEAR(action(u, F).excess, 2e-18, 1e-30);
  EXPECT_GT(action(u, F).excess, action(w, F).excess);
}

TEST(Action, MatchesIndependentSummation) {
  // Oracle: explicit double loop over the 8x8 grid, long double accumulation, the
  // lattice written with 1 - cos, and differences taken with hand-coded wrap.
  GridSpec g({1.0, 1.5}, {8, 8}, 2);
  const double mu = 0.3;
  const Potential F = lattice(g, mu);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Field u = random_field(g, seed, 2.0);
    const double h0 = 1.0 / 8.0, h1 = 1.5 / 8.0;
    long double kin = 0, pot = 0;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        const std::size_t k = i * 8 + j, ki = ((i + 1) % 8) * 8 + j, kj = i * 8 + (j + 1) % 8;
        const double fac = 1.0 + mu * std::cos(kTwoPi * (i * h0) / 1.0);
        long double f = 0.1;
        for (int c = 0; c < 2; ++c) {
          const long double d0 = (u(ki, c) - u(k, c)) / h0, d1 = (u(kj, c) - u(k, c)) / h1;
          kin += 0.5L * (d0 * d0 + d1 * d1);
          f += fac * (1.0L - std::cos(static_cast<long double>(u(k, c))));
        }
        pot += f;
      }
    const double expected = static_cast<double>((kin + pot) * h0 * h1);
    EXPECT_NEAR(action(u, F).total, expected, 1e-12 * std::abs(expected)) << seed;
  }
}

TEST(Action, DimensionMismatchIsRejected) {
  GridSpec g({1.0}, {8}, 2);
  EXPECT_THROW(action(Field(g), shifted_quadratic({0.0}, 1.0, 1)), UsageError);
}

TEST(Action, DomainErrorsNameTheNode) {
  GridSpec g({1.0}, {4}, 1);
  const Potential F = expression_potential(expr::parse("sqrt(x1)", 1, 1));
  const Field u(g, {1.0, 2.0, -1.0, 3.0});
  try {
    action(u, F);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_EQ(e.node(), (std::vector<std::size_t>{2}));
    EXPECT_NE(std::string(e.what()).find("node (2)"), std::string::npos);
  }
  EXPECT_THROW(action_gradient(u, F), DomainError);
}

TEST(ActionGradient, Examples) {
  GridSpec g({1.0, 1.0}, {5, 7}, 2);
  const std::vector<double> a{1.0, 2.0};
  EXPECT_EQ(max_abs(action_gradient(Field::constant(g, a), shifted_quadratic(a, 1.0, 2))), 0.0);

  const Field f = random_zero_mean_field(g, 2);
  const Field u = random_field(g, 3);
  Field expected = laplacian(u);
  expected *= -1.0;
  expected -= f;
  EXPECT_LE(max_abs_diff(action_gradient(u, linear_forcing(f)), expected), 1e-14 * max_abs(expected));
}

TEST(ActionGradient, MatchesCentralDifferences) {
  GridSpec g({1.0, 1.0}, {8, 8}, 2);
  const Potential cos2 = lattice(g, 0.4);
  const Potential ex = expression_potential(expr::parse("0.1 + (1 + t1*t2) * (x1^2 * cos(x2) + exp(0.3*x1*x2))", 2, 2));
  for (const Potential* F : {&cos2, &ex}) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const Field u = random_field(g, 1000 + seed, 0.5);
      const Field v = unit(random_field(g, 2000 + seed));
      const double analytic = l2_inner(action_gradient(u, *F), v);
      const double fd = central_difference(u, v, *F, 1e-6);
      EXPECT_LE(std::abs(analytic - fd), 1e-6 * std::max(std::abs(analytic), 1.0)) << F->name() << " seed " << seed;
    }
  }
}

TEST(Action, ShiftInvariance) {
  GridSpec g({1.0, 2.0}, {8, 6}, 2);
  const std::vector<double> T = g.extents();
  const Potential F = cosine_lattice({{1.0, 0.5}, {kTwoPi, 3.0}, 0.1, 0.2, 1}, T);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Field u = random_field(g, seed, 3.0);
    const double base = action(u, F).total;
    for (std::size_t i = 0; i < g.n(); ++i) {
      std::vector<double> shift(g.n(), 0.0);
      shift[i] = (*F.periods())[i];
      const Field w = u + Field::constant(g, shift);
      EXPECT_LE(std::abs(action(w, F).total - base), 1e-12 * std::abs(base));
    }
  }
}

TEST(Action, KineticInvariantUnderConstantShift) {
  GridSpec g({1.0}, {32}, 2);
  const Field u = random_field(g, 4);
  const Potential F = lattice(g);
  for (double c : {0.5, 1.0, -3.0, 1024.0}) {
    const Field w = u + Field::constant(g, std::vector<double>{c, c});
    EXPECT_NEAR(action(w, F).kinetic, action(u, F).kinetic, 1e-15 * action(u, F).kinetic + 1e-15 * c * c);
  }
  const Field w = u + Field::constant(g, std::vector<double>{0.5, -0.25});
  EXPECT_EQ(action(w, F).kinetic, action(u, F).kinetic);
}

TEST(Action, BoundedBelowByPotentialFloor) {
  GridSpec g({1.0, 1.0}, {8, 8}, 1);
  const Potential F = lattice(g, 0.5);
  SampleSpec s;
  s.extents = g.extents();
  s.anchors = {{0.0}};
  const double fmin = sampled_minimum(F, s);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = action(random_field(g, seed, 5.0), F);
    EXPECT_GE(a.total, a.kinetic);
    EXPECT_GE(a.total, g.volume() * fmin - 1e-9);
  }
}

TEST(ContinuityBound, EqualFieldsGiveZero) {
  GridSpec g({1.0}, {32}, 1);
  const Field u = random_field(g, 6);
  const auto b = continuity_bound(u, u, lattice(g), {0.0, 1.0});
  EXPECT_EQ(b.lhs, 0.0);
  EXPECT_EQ(b.rhs, 0.0);
  EXPECT_TRUE(b.pass);
}

TEST(ContinuityBound, RandomPairsNeverViolate) {
  GridSpec g({1.0}, {32}, 1);
  const Potential F = lattice(g);
  std::size_t violations = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const double scale = 0.01 * std::pow(10.0, static_cast<double>(seed % 5));
    const Field u = random_field(g, 3 * seed, scale), v = random_field(g, 3 * seed + 1, scale);
    if (!continuity_bound(u, v, F, {0.0, 1.0}).pass) ++violations;
  }
  EXPECT_EQ(violations, 0u);
}

TEST(ContinuityBound, HoldsWithLinearGrowth) {
  GridSpec g({2.0}, {16}, 2);
  const std::vector<double> a{1.0, -1.0};
  const Potential F = shifted_quadratic(a, 0.5, 1);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Field u = random_field(g, 10 * seed, 2.0), v = random_field(g, 10 * seed + 1, 2.0);
    EXPECT_TRUE(continuity_bound(u, v, F, {1.0, std::sqrt(2.0)}).pass) << seed;
  }
}

TEST(ContinuityBound, ShrinkingPerturbation) {
  GridSpec g({1.0}, {32}, 1);
  const Potential F = lattice(g);
  for (std::uint64_t seed : {40u, 5000u}) {
    const Field u = random_field(g, seed);
    const Field delta = random_field(g, seed + 1);
    double prev_rhs = INFINITY, first_lhs = 0.0, last_lhs = 0.0;
    for (int k = 0; k < 30; ++k) {
      Field v = u;
      v.axpy(std::ldexp(1.0, -k), delta);
      const auto b = continuity_bound(u, v, F, {0.0, 1.0});
      EXPECT_TRUE(b.pass) << k;
      EXPECT_LT(b.rhs, prev_rhs) << k;
      if (k == 0) first_lhs = b.lhs;
      prev_rhs = b.rhs;
      last_lhs = b.lhs;
    }
    EXPECT_LT(last_lhs, 1e-6 * first_lhs);
  }
}
