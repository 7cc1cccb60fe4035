#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "pgrad/error.hpp"
#include "pgrad/expr.hpp"
#include "pgrad/potential.hpp"
#include "test_support.hpp"

using namespace pgrad;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

SampleSpec samples(std::size_t p, std::size_t count = 1000, std::vector<std::vector<double>> anchors = {}) {
  SampleSpec s;
  s.count = count;
  s.seed = 5;
  s.extents.assign(p, 1.0);
  s.anchors = std::move(anchors);
  return s;
}

Potential pendulum(double mu = 0.0) {
  const std::vector<double> T{1.0, 1.0};
  return cosine_lattice({{1.0}, {kTwoPi}, 0.1, mu, 0}, T);
}

}  // namespace

TEST(CosineLattice, ValuesAndGradient) {
  const std::vector<double> T{1.0, 2.0};
  const Potential F = cosine_lattice({{1.0, 0.5}, {kTwoPi, 3.0}, 0.2, 0.4, 1}, T);
  const std::vector<double> t{0.3, 0.5}, x{1.1, -0.7};
  // Oracle: the textbook formula with 1 - cos.
  const double fac = 1.0 + 0.4 * std::cos(kTwoPi * 0.5 / 2.0);
  const double expected = 0.2 + fac * (1.0 * (1.0 - std::cos(kTwoPi * 1.1 / kTwoPi)) + 0.5 * (1.0 - std::cos(kTwoPi * -0.7 / 3.0)));
  EXPECT_NEAR(F.value(t, x), expected, 1e-15);
  const auto g = F.gradient(t, x);
  EXPECT_NEAR(g[0], fac * 1.0 * std::sin(1.1), 1e-15);
  EXPECT_NEAR(g[1], fac * 0.5 * (kTwoPi / 3.0) * std::sin(kTwoPi * -0.7 / 3.0), 1e-15);
  EXPECT_TRUE(F.positivity_claim());
  ASSERT_TRUE(F.periods());
  EXPECT_EQ(*F.periods(), (std::vector<double>{kTwoPi, 3.0}));
}

TEST(Potential, OffsetPlusExcessIsTheValue) {
  const std::vector<double> t{0.3, 0.8}, x{0.7, -2.0};
  const Potential cos2 = cosine_lattice({{1.0, 0.5}, {kTwoPi, 3.0}, 0.2, 0.4, 1}, std::vector<double>{1.0, 2.0});
  const Potential quad = shifted_quadratic({1.0, 2.0}, 0.3, 2);
  const Potential ex = expression_potential(expr::parse("0.5 + x1^2 + x2^2", 2, 2));
  EXPECT_EQ(cos2.offset(), 0.2);
  EXPECT_EQ(quad.offset(), 0.3);
  const Potential lead = expression_potential(expr::parse("0.5 + (x1^2 + x2^2)", 2, 2));
  const Potential trail = expression_potential(expr::parse("sin(x1)^2 * t2 + 0.25", 2, 2));
  EXPECT_EQ(ex.offset(), 0.0);  // parsed as (0.5 + x1^2) + x2^2
  EXPECT_EQ(lead.offset(), 0.5);
  EXPECT_EQ(trail.offset(), 0.25);
  for (const Potential* F : {&cos2, &quad, &ex, &lead, &trail}) EXPECT_EQ(F->offset() + F->excess(t, x), F->value(t, x)) << F->name();
}

TEST(CosineLattice, FloorAttainedOnLattice) {
  const Potential F = pendulum();
  const std::vector<double> t{0.25, 0.75};
  for (int k = -3; k <= 3; ++k) {
    const std::vector<double> x{k * kTwoPi};
    EXPECT_EQ(F.value(t, x), 0.1) << k;
  }
}

TEST(CosineLattice, RejectsBadParameters) {
  const std::vector<double> T{1.0};
  EXPECT_THROW(cosine_lattice({{1.0}, {kTwoPi}, 0.0, 0.0, 0}, T), UsageError);
  EXPECT_THROW(cosine_lattice({{1.0}, {kTwoPi}, 0.1, 1.0, 0}, T), UsageError);
  EXPECT_THROW(cosine_lattice({{-1.0}, {kTwoPi}, 0.1, 0.0, 0}, T), UsageError);
  EXPECT_THROW(cosine_lattice({{1.0}, {kTwoPi, 1.0}, 0.1, 0.0, 0}, T), UsageError);
  EXPECT_THROW(cosine_lattice({{1.0}, {kTwoPi}, 0.1, 0.0, 1}, T), UsageError);
}

TEST(CheckPeriodicity, Examples) {
  const auto cos_rep = check_periodicity(pendulum(), samples(2));
  EXPECT_TRUE(cos_rep.pass);
  EXPECT_LE(cos_rep.worst, 1e-12);

  Potential quad = shifted_quadratic({0.0}, 1.0, 1);
  quad.with_periods({1.0});
  const auto quad_rep = check_periodicity(quad, samples(1));
  EXPECT_FALSE(quad_rep.pass);
  EXPECT_GT(quad_rep.worst, 0.0);

  Potential e = expression_potential(expr::parse("1 - cos(x1)", 1, 1));
  e.with_periods({kTwoPi});
  const auto e_rep = check_periodicity(e, samples(1));
  EXPECT_TRUE(e_rep.pass);
  EXPECT_LE(e_rep.worst, 1e-12);

  EXPECT_THROW(check_periodicity(shifted_quadratic({0.0}, 1.0, 1), samples(1)), UsageError);
}

TEST(CheckPositivity, Examples) {
  const auto c = check_positivity(pendulum(), samples(2));
  EXPECT_TRUE(c.pass);
  EXPECT_GE(c.worst, 0.1);

  GridSpec g({1.0}, {16}, 1);
  const Field f = Field::sample(g, [](std::span<const double> t, std::span<double> out) { out[0] = std::sin(kTwoPi * t[0]); });
  const Potential lin = linear_forcing(f);
  EXPECT_FALSE(lin.positivity_claim());
  const auto l = check_positivity(lin, samples(1));
  EXPECT_FALSE(l.pass);
  EXPECT_LT(l.worst, 0.0);

  const auto q = check_positivity(shifted_quadratic({1.0, 2.0}, 1.0, 1), samples(1, 1000, {{1.0, 2.0}}));
  EXPECT_TRUE(q.pass);
  EXPECT_EQ(q.worst, 1.0);
}

TEST(CheckGradientGrowth, Examples) {
  EXPECT_TRUE(check_gradient_growth(pendulum(), {0.0, 1.0}, samples(2)).pass);
  const std::vector<double> a{1.0, -2.0};
  EXPECT_TRUE(check_gradient_growth(shifted_quadratic(a, 1.0, 1), {1.0, std::sqrt(5.0)}, samples(1)).pass);
  const auto fail = check_gradient_growth(pendulum(), {0.0, 0.0}, samples(2));
  EXPECT_FALSE(fail.pass);
  EXPECT_GT(fail.violations, 0u);
  EXPECT_GT(fail.worst, 0.0);
}

TEST(CheckGradientGrowth, BuiltinEnvelopesHoldOnTenThousandSamples) {
  const std::vector<double> T{1.0, 1.0};
  const Potential cos2 = cosine_lattice({{1.0, 3.0}, {kTwoPi, 0.5}, 0.1, -0.6, 1}, T);
  const Potential quad = shifted_quadratic({0.5, -4.0}, 2.0, 2);
  GridSpec g({1.0, 1.0}, {8, 8}, 2);
  const Potential lin = linear_forcing(fixtures::random_zero_mean_field(g, 3));
  for (const Potential* F : {&cos2, &quad, &lin}) {
    ASSERT_TRUE(F->growth()) << F->name();
    const auto r = check_gradient_growth(*F, *F->growth(), samples(2, 10000));
    EXPECT_TRUE(r.pass) << F->name();
    EXPECT_EQ(r.violations, 0u);
  }
}

TEST(CheckGradConsistency, Examples) {
  const auto q = check_grad_consistency(shifted_quadratic({1.0, 2.0}, 1.0, 1), samples(1));
  EXPECT_TRUE(q.pass);
  EXPECT_LE(q.worst, 1e-7);
  EXPECT_TRUE(check_grad_consistency(pendulum(0.5), samples(2)).pass);

  Potential bad = pendulum();
  const Potential good = pendulum();
  bad.with_gradient([good](std::span<const double> t, std::span<const double> x, std::span<double> out) {
    good.gradient(t, x, out);
    for (double& v : out) v *= 2.0;
  });
  EXPECT_FALSE(check_grad_consistency(bad, samples(2)).pass);
}

TEST(CheckGradConsistency, EveryBuiltinOnThousandSamples) {
  GridSpec g({1.0}, {12}, 2);
  const Potential lin = linear_forcing(fixtures::random_zero_mean_field(g, 4));
  const std::vector<double> T{1.0};
  const Potential cos2 = cosine_lattice({{2.0, 0.3}, {1.0, 4.0}, 0.5, 0.9, 0}, T);
  const Potential quad = shifted_quadratic({3.0, -1.0}, 0.1, 1);
  for (const Potential* F : {&lin, &cos2, &quad}) EXPECT_TRUE(check_grad_consistency(*F, samples(1)).pass) << F->name();
}

TEST(LinearForcing, ReadsForcingAtNearestNode) {
  GridSpec g({2.0}, {4}, 1);
  const Field f(g, {1.0, -2.0, 3.0, -2.0});
  const Potential F = linear_forcing(f);
  const std::vector<double> x{0.5};
  EXPECT_EQ(F.value(std::vector<double>{1.0}, x), -1.5);  // h = 0.5, node 2
  EXPECT_EQ(F.gradient(std::vector<double>{1.5}, x)[0], 2.0);
  EXPECT_EQ(F.gradient(std::vector<double>{2.0}, x)[0], -1.0);  // wraps to node 0
}

TEST(LinearForcing, RequiresZeroMean) {
  GridSpec g({1.0}, {4}, 1);
  EXPECT_THROW(linear_forcing(Field(g, {1.0, 1.0, 1.0, 1.0})), PreconditionError);
}

TEST(SampledMinimum, IncludesAnchors) {
  EXPECT_EQ(sampled_minimum(pendulum(), samples(2, 50, {{0.0}})), 0.1);
}

TEST(Sampling, IsDeterministic) {
  const auto a = check_grad_consistency(pendulum(0.3), samples(2));
  const auto b = check_grad_consistency(pendulum(0.3), samples(2));
  EXPECT_EQ(a.worst, b.worst);
  EXPECT_EQ(a.samples, 1000u);
}
