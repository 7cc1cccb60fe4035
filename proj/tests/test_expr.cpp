#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "pgrad/dual.hpp"
#include "pgrad/error.hpp"
#include "pgrad/expr.hpp"
#include "expr_corpus.hpp"

using namespace pgrad;
using namespace pgrad::expr;
using pgrad::fixtures::corpus;

namespace {

std::size_t error_offset(const std::string& src, std::size_t p, std::size_t n) {
  try {
    parse(src, p, n);
  } catch (const ParseError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "no parse error for '" << src << "'";
  return static_cast<std::size_t>(-1);
}

}  // namespace

TEST(Dual, ProductAndQuotientRules) {
  const DualVector x = DualVector::variable(3.0, 2, 0), y = DualVector::variable(4.0, 2, 1);
  const DualVector p = x * y;
  EXPECT_EQ(p.value, 12.0);
  EXPECT_EQ(p.partials, (std::vector<double>{4.0, 3.0}));
  const DualVector q = x / y;
  EXPECT_DOUBLE_EQ(q.partials[0], 1.0 / 4.0);
  EXPECT_DOUBLE_EQ(q.partials[1], -3.0 / 16.0);
  const DualVector s = sin(x * x);
  EXPECT_DOUBLE_EQ(s.partials[0], std::cos(9.0) * 6.0);
}

TEST(Tokenize, Examples) {
  const auto toks = tokenize("2*pi");
  ASSERT_EQ(toks.size(), 4u);
  EXPECT_EQ(toks[0].kind, TokenKind::Number);
  EXPECT_EQ(toks[0].number, 2.0);
  EXPECT_EQ(toks[1].kind, TokenKind::Operator);
  EXPECT_EQ(toks[1].lexeme, "*");
  EXPECT_EQ(toks[2].kind, TokenKind::Identifier);
  EXPECT_EQ(toks[2].lexeme, "pi");
  EXPECT_EQ(toks[3].kind, TokenKind::End);

  const auto empty = tokenize("");
  ASSERT_EQ(empty.size(), 1u);
  EXPECT_EQ(empty[0].kind, TokenKind::End);

  try {
    tokenize("1 $ 2");
    FAIL() << "expected a lexical error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 2u);
  }
}

TEST(Tokenize, NumbersAndStrictlyIncreasingOffsets) {
  const auto toks = tokenize("1.5e-3 + .25*x1 - 3E2/sqrt(t1)");
  EXPECT_EQ(toks[0].number, 1.5e-3);
  EXPECT_EQ(toks[2].number, 0.25);
  for (std::size_t j = 1; j + 1 < toks.size(); ++j) EXPECT_LT(toks[j - 1].offset, toks[j].offset);
  const auto fn = std::find_if(toks.begin(), toks.end(), [](const Token& t) { return t.lexeme == "sqrt"; });
  ASSERT_NE(fn, toks.end());
  EXPECT_EQ(fn->kind, TokenKind::Function);
}

TEST(Parse, Examples) {
  const Ast a = parse("1 - cos(x1)", 0, 1);
  const Node& root = a.nodes[a.root];
  ASSERT_EQ(root.kind, NodeKind::Sub);
  EXPECT_EQ(a.nodes[root.lhs].kind, NodeKind::Constant);
  EXPECT_EQ(a.nodes[root.lhs].value, 1.0);
  const Node& c = a.nodes[root.rhs];
  ASSERT_EQ(c.kind, NodeKind::Cos);
  EXPECT_EQ(a.nodes[c.lhs].kind, NodeKind::State);
  EXPECT_EQ(a.nodes[c.lhs].index, 0u);

  const Ast b = parse("x1^2 + t1*x2", 1, 2);
  EXPECT_EQ(to_string(b), "((x1^2) + (t1 * x2))");
  EXPECT_EQ(b.nodes[b.root].kind, NodeKind::Add);
  EXPECT_EQ(b.nodes[b.nodes[b.root].lhs].kind, NodeKind::Pow);
}

TEST(Parse, PrecedenceAndAssociativity) {
  EXPECT_EQ(to_string(parse("2^3^2", 0, 1)), "(2^(3^2))");
  EXPECT_EQ(to_string(parse("-x1^2", 0, 1)), "(-(x1^2))");
  EXPECT_EQ(to_string(parse("1 - 2 - 3", 0, 1)), "((1 - 2) - 3)");
  EXPECT_EQ(to_string(parse("8 / 4 / 2", 0, 1)), "((8 / 4) / 2)");
  EXPECT_EQ(to_string(parse("1 + 2 * 3", 0, 1)), "(1 + (2 * 3))");
  EXPECT_EQ(to_string(parse("2^-1", 0, 1)), "(2^(-1))");
  EXPECT_EQ(to_string(parse("-(1+x1)*2", 0, 1)), "((-(1 + x1)) * 2)");
}

TEST(Parse, PositionedErrors) {
  EXPECT_EQ(error_offset("1 + * 2", 0, 1), 4u);
  EXPECT_EQ(error_offset("cos(", 0, 1), 4u);
  EXPECT_EQ(error_offset("x3", 0, 2), 0u);
  EXPECT_EQ(error_offset("t2", 1, 1), 0u);
  EXPECT_EQ(error_offset("foo(1)", 0, 1), 0u);
  EXPECT_EQ(error_offset("y1", 0, 1), 0u);
  EXPECT_EQ(error_offset("sin()", 0, 1), 4u);
  EXPECT_EQ(error_offset("sin(1,2)", 0, 1), 5u);
  EXPECT_EQ(error_offset("sqrt", 0, 1), 4u);
  EXPECT_EQ(error_offset("(1+2", 0, 1), 4u);
  EXPECT_EQ(error_offset("1+2)", 0, 1), 3u);
  EXPECT_EQ(error_offset("x1 x2", 0, 2), 3u);
  EXPECT_EQ(error_offset("", 0, 1), 0u);
  EXPECT_EQ(error_offset("   ", 0, 1), 3u);
  EXPECT_EQ(error_offset("2..3", 0, 1), 2u);
  EXPECT_EQ(error_offset("1e", 0, 1), 1u);
  EXPECT_EQ(error_offset("1e999", 0, 1), 0u);
  EXPECT_EQ(error_offset("x0", 0, 1), 0u);
}

TEST(Parse, ErrorsReportLineAndColumn) {
  try {
    parse("1 +\n * 2", 0, 1);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.column(), 2u);
    EXPECT_NE(std::string(e.what()).find("line 2, column 2"), std::string::npos);
  }
}

TEST(Parse, TotalOnArbitraryInput) {
  // Every input yields an AST or a positioned error; nothing else escapes.
  const std::string alphabet = "x1t2+-*/^(),. epi3sincoqrt\n$";
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1), len(0, 24);
  std::size_t parsed = 0, rejected = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    std::string s;
    for (std::size_t k = len(rng); k > 0; --k) s += alphabet[ch(rng)];
    try {
      const Ast a = parse(s, 2, 1);
      ASSERT_GE(a.root, 0);
      ++parsed;
    } catch (const ParseError& e) {
      EXPECT_LE(e.offset(), s.size()) << s;
      ++rejected;
    }
  }
  EXPECT_GT(parsed, 0u);
  EXPECT_GT(rejected, 0u);
}

TEST(EvalDual, Examples) {
  const std::vector<double> t{2.0}, x{3.0, 4.0};
  const DualVector d = eval_dual(parse("x1^2 + t1*x2", 1, 2), t, x);
  EXPECT_EQ(d.value, 17.0);
  EXPECT_EQ(d.partials, (std::vector<double>{6.0, 2.0}));

  const std::vector<double> zero{0.0};
  const DualVector c = eval_dual(parse("1 - cos(x1)", 0, 1), {}, zero);
  EXPECT_EQ(c.value, 0.0);
  EXPECT_EQ(c.partials, (std::vector<double>{0.0}));

  const std::vector<double> one{1.0};
  EXPECT_DOUBLE_EQ(eval_dual(parse("2*pi", 0, 1), {}, one).value, 2.0 * std::numbers::pi);
  const DualVector frac = eval_dual(parse("x1^0.5", 0, 1), {}, std::vector<double>{4.0});
  EXPECT_DOUBLE_EQ(frac.value, 2.0);
  EXPECT_DOUBLE_EQ(frac.partials[0], 0.25);
  const DualVector neg = eval_dual(parse("x1^3", 0, 1), {}, std::vector<double>{-2.0});
  EXPECT_EQ(neg.value, -8.0);
  EXPECT_EQ(neg.partials[0], 12.0);
}

TEST(EvalDual, TimeVariablesCarryNoPartials) {
  const std::vector<double> t{0.3, 0.7}, x{1.0};
  const DualVector d = eval_dual(parse("sin(t1) * t2 + x1", 2, 1), t, x);
  EXPECT_DOUBLE_EQ(d.value, std::sin(0.3) * 0.7 + 1.0);
  EXPECT_EQ(d.partials, (std::vector<double>{1.0}));
}

TEST(EvalDual, DomainErrorsCarryNodePosition) {
  const std::vector<double> x{1.0, -1.0};
  const auto offset_of = [&](const std::string& src) {
    try {
      eval_dual(parse(src, 0, 2), {}, x);
    } catch (const DomainError& e) {
      return e.offset();
    }
    ADD_FAILURE() << "no domain error for '" << src << "'";
    return DomainError::npos;
  };
  EXPECT_EQ(offset_of("1 + x1 / (x1 - 1)"), 7u);
  EXPECT_EQ(offset_of("2 * sqrt(x2)"), 4u);
  EXPECT_EQ(offset_of("x2^0.5"), 2u);
  EXPECT_EQ(offset_of("exp(1000)"), 0u);
}

TEST(EvalDual, CorpusMatchesCentralDifferences) {
  const auto sources = corpus(200);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  double worst = 0.0;
  for (const auto& src : sources) {
    const Ast ast = parse(src, 1, 3);
    const std::vector<double> t{0.5 * (unit(rng) + 2.0)};
    std::vector<double> x{unit(rng), unit(rng), unit(rng)};
    const DualVector d = eval_dual(ast, t, x);
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const double h = 1e-6 * (1.0 + std::abs(x[i]));
      auto xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (eval_dual(ast, t, xp).value - eval_dual(ast, t, xm).value) / (2.0 * h);
      diff += (fd - d.partials[i]) * (fd - d.partials[i]);
      norm += d.partials[i] * d.partials[i];
    }
    const double rel = std::sqrt(diff) / std::max(1.0, std::sqrt(norm));
    worst = std::max(worst, rel);
    EXPECT_LE(rel, 1e-7) << src;
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(PrettyPrint, RoundTripIsStructurallyExact) {
  auto sources = corpus(200);
  sources.insert(sources.end(), {"1 - cos(x1)", "x1^2 + t1*x2", "-x1^-2", "2^3^2", "1e-300 * x1", "0.1 + 0.2",
                                 "--x1", "sqrt(exp(-x2))/3"});
  for (const auto& src : sources) {
    const Ast a = parse(src, 1, 3);
    const std::string printed = to_string(a);
    const Ast b = parse(printed, 1, 3);
    EXPECT_TRUE(structurally_equal(a, b)) << src << " -> " << printed;
    EXPECT_EQ(to_string(b), printed);
  }
}

TEST(PrettyPrint, ConstantsSurviveExactly) {
  for (double c : {0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, 1.7976931348623157e308}) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", c);
    const Ast a = parse(buf, 0, 1);
    const Ast b = parse(to_string(a), 0, 1);
    EXPECT_EQ(b.nodes[b.root].value, c);
  }
}
