#pragma once

// Expression language for potentials F(t, x).
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative, binds tighter than unary minus
//   primary := number | name | func '(' expr ')' | '(' expr ')'
//
// Names are t1..tp, x1..xn and pi; functions are sin, cos, exp, sqrt.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pgrad/dual.hpp"
#include "pgrad/error.hpp"

namespace pgrad::expr {

enum class TokenKind { Number, Identifier, Operator, Paren, Function, End };

struct Token {
  TokenKind kind;
  std::string lexeme;
  std::size_t offset;  // byte offset into the source
  double number = 0.0;
};

/// 1-based line and column of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(std::string_view source, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t j = 0; j < offset && j < source.size(); ++j) {
    if (source[j] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline ParseError make_parse_error(std::string_view source, const std::string& what, std::size_t offset) {
  const auto [line, col] = line_column(source, offset);
  return ParseError(what, offset, line, col);
}

inline bool is_function_name(std::string_view s) {
  return s == "sin" || s == "cos" || s == "exp" || s == "sqrt";
}

inline std::vector<Token> tokenize(std::string_view source) {
  std::vector<Token> out;
  std::size_t j = 0;
  const auto digit = [&](std::size_t at) {
    return at < source.size() && std::isdigit(static_cast<unsigned char>(source[at]));
  };
  while (j < source.size()) {
    const char c = source[j];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++j;
      continue;
    }
    const std::size_t start = j;
    if (digit(j) || (c == '.' && digit(j + 1))) {
      while (digit(j)) ++j;
      if (j < source.size() && source[j] == '.') {
        ++j;
        while (digit(j)) ++j;
      }
      if (j < source.size() && (source[j] == 'e' || source[j] == 'E')) {
        std::size_t e = j + 1;
        if (e < source.size() && (source[e] == '+' || source[e] == '-')) ++e;
        if (!digit(e)) throw make_parse_error(source, "malformed exponent in number", j);
        j = e;
        while (digit(j)) ++j;
      }
      std::string lexeme(source.substr(start, j - start));
      const double value = std::strtod(lexeme.c_str(), nullptr);
      if (!std::isfinite(value)) throw make_parse_error(source, "number out of range", start);
      out.push_back({TokenKind::Number, std::move(lexeme), start, value});
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (j < source.size() &&
             (std::isalnum(static_cast<unsigned char>(source[j])) || source[j] == '_'))
        ++j;
      std::string lexeme(source.substr(start, j - start));
      const auto kind = is_function_name(lexeme) ? TokenKind::Function : TokenKind::Identifier;
      out.push_back({kind, std::move(lexeme), start});
      continue;
    }
    switch (c) {
      case '+': case '-': case '*': case '/': case '^': case ',':
        out.push_back({TokenKind::Operator, std::string(1, c), start});
        ++j;
        continue;
      case '(': case ')':
        out.push_back({TokenKind::Paren, std::string(1, c), start});
        ++j;
        continue;
      default:
        throw make_parse_error(source, "illegal character", start);
    }
  }
  out.push_back({TokenKind::End, "", source.size()});
  return out;
}

enum class NodeKind { Constant, Time, State, Pi, Negate, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Sqrt };

struct Node {
  NodeKind kind;
  double value = 0.0;      // Constant
  std::size_t index = 0;   // Time / State, zero-based
  int lhs = -1;            // operand of unary nodes and functions
  int rhs = -1;
  std::size_t offset = 0;  // source position for error reporting
};

/// Parsed expression. Nodes are stored children-before-parents, so the arena order is
/// a valid evaluation order and the tree cannot contain cycles.
struct Ast {
  std::vector<Node> nodes;
  int root = -1;
  std::size_t p = 0;
  std::size_t n = 0;
};

namespace detail {

class Parser {
 public:
  Parser(std::span<const Token> tokens, std::string_view source, std::size_t p, std::size_t n)
      : tokens_(tokens), source_(source) {
    ast_.p = p;
    ast_.n = n;
  }

  Ast run() {
    if (tokens_.empty() || tokens_.back().kind != TokenKind::End)
      throw UsageError("token stream must end with an End token");
    if (peek().kind == TokenKind::End) fail("empty expression", peek());
    ast_.root = expression();
    if (peek().kind != TokenKind::End) fail("unexpected '" + peek().lexeme + "'", peek());
    return std::move(ast_);
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& advance() { return tokens_[pos_++]; }

  bool at_operator(char op) const {
    return peek().kind == TokenKind::Operator && peek().lexeme[0] == op;
  }
  bool at_paren(char p) const { return peek().kind == TokenKind::Paren && peek().lexeme[0] == p; }

  [[noreturn]] void fail(const std::string& what, const Token& at) const {
    throw make_parse_error(source_, what, at.offset);
  }

  int push(Node node) {
    ast_.nodes.push_back(node);
    return static_cast<int>(ast_.nodes.size() - 1);
  }

  int expression() {
    int lhs = term();
    while (at_operator('+') || at_operator('-')) {
      const Token& op = advance();
      const int rhs = term();
      lhs = push({op.lexeme[0] == '+' ? NodeKind::Add : NodeKind::Sub, 0.0, 0, lhs, rhs, op.offset});
    }
    return lhs;
  }

  int term() {
    int lhs = unary();
    while (at_operator('*') || at_operator('/')) {
      const Token& op = advance();
      const int rhs = unary();
      lhs = push({op.lexeme[0] == '*' ? NodeKind::Mul : NodeKind::Div, 0.0, 0, lhs, rhs, op.offset});
    }
    return lhs;
  }

  int unary() {
    if (at_operator('-')) {
      const Token& op = advance();
      const int operand = unary();
      return push({NodeKind::Negate, 0.0, 0, operand, -1, op.offset});
    }
    return power();
  }

  int power() {
    const int base = primary();
    if (at_operator('^')) {
      const Token& op = advance();
      const int exponent = unary();
      return push({NodeKind::Pow, 0.0, 0, base, exponent, op.offset});
    }
    return base;
  }

  int primary() {
    const Token& tok = peek();
    switch (tok.kind) {
      case TokenKind::Number:
        advance();
        return push({NodeKind::Constant, tok.number, 0, -1, -1, tok.offset});
      case TokenKind::Identifier:
        advance();
        return variable(tok);
      case TokenKind::Function:
        advance();
        return call(tok);
      case TokenKind::Paren:
        if (tok.lexeme[0] == '(') {
          advance();
          const int inner = expression();
          if (!at_paren(')')) fail("expected ')'", peek());
          advance();
          return inner;
        }
        fail("unexpected ')'", tok);
      case TokenKind::End:
        fail("unexpected end of expression", tok);
      case TokenKind::Operator:
        break;
    }
    fail("unexpected '" + tok.lexeme + "'", tok);
  }

  int variable(const Token& tok) {
    const std::string& name = tok.lexeme;
    if (name == "pi") return push({NodeKind::Pi, 0.0, 0, -1, -1, tok.offset});
    if (name.size() >= 2 && (name[0] == 't' || name[0] == 'x') &&
        name.find_first_not_of("0123456789", 1) == std::string::npos && name[1] != '0') {
      const std::size_t idx = std::stoul(name.substr(1));
      const bool time = name[0] == 't';
      const std::size_t limit = time ? ast_.p : ast_.n;
      if (idx >= 1 && idx <= limit)
        return push({time ? NodeKind::Time : NodeKind::State, 0.0, idx - 1, -1, -1, tok.offset});
      fail("variable '" + name + "' out of range (have " + std::string(time ? "p" : "n") + " = " +
               std::to_string(limit) + ")",
           tok);
    }
    fail("unknown identifier '" + name + "'", tok);
  }

  int call(const Token& fn) {
    if (!at_paren('(')) fail("expected '(' after " + fn.lexeme, peek());
    advance();
    if (at_paren(')')) fail(fn.lexeme + " takes exactly one argument", peek());
    const int arg = expression();
    if (at_operator(',')) fail(fn.lexeme + " takes exactly one argument", peek());
    if (!at_paren(')')) fail("expected ')'", peek());
    advance();
    NodeKind kind = NodeKind::Sin;
    if (fn.lexeme == "cos") kind = NodeKind::Cos;
    else if (fn.lexeme == "exp") kind = NodeKind::Exp;
    else if (fn.lexeme == "sqrt") kind = NodeKind::Sqrt;
    return push({kind, 0.0, 0, arg, -1, fn.offset});
  }

  std::span<const Token> tokens_;
  std::string_view source_;
  std::size_t pos_ = 0;
  Ast ast_;
};

}  // namespace detail

/// Parses a token stream. `source` is used only to turn offsets into line/column.
inline Ast parse(std::span<const Token> tokens, std::size_t p, std::size_t n, std::string_view source = {}) {
  return detail::Parser(tokens, source, p, n).run();
}

inline Ast parse(std::string_view source, std::size_t p, std::size_t n) {
  const auto tokens = tokenize(source);
  return parse(tokens, p, n, source);
}

namespace detail {

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void print_node(const Ast& ast, int id, std::string& out) {
  const Node& nd = ast.nodes[static_cast<std::size_t>(id)];
  const auto binary = [&](const char* op) {
    out += '(';
    print_node(ast, nd.lhs, out);
    out += op;
    print_node(ast, nd.rhs, out);
    out += ')';
  };
  const auto function = [&](const char* name) {
    out += name;
    out += '(';
    print_node(ast, nd.lhs, out);
    out += ')';
  };
  switch (nd.kind) {
    case NodeKind::Constant: out += format_number(nd.value); break;
    case NodeKind::Time: out += "t" + std::to_string(nd.index + 1); break;
    case NodeKind::State: out += "x" + std::to_string(nd.index + 1); break;
    case NodeKind::Pi: out += "pi"; break;
    case NodeKind::Negate:
      out += "(-";
      print_node(ast, nd.lhs, out);
      out += ')';
      break;
    case NodeKind::Add: binary(" + "); break;
    case NodeKind::Sub: binary(" - "); break;
    case NodeKind::Mul: binary(" * "); break;
    case NodeKind::Div: binary(" / "); break;
    case NodeKind::Pow: binary("^"); break;
    case NodeKind::Sin: function("sin"); break;
    case NodeKind::Cos: function("cos"); break;
    case NodeKind::Exp: function("exp"); break;
    case NodeKind::Sqrt: function("sqrt"); break;
  }
}

inline bool same_tree(const Ast& a, int ia, const Ast& b, int ib) {
  if ((ia < 0) != (ib < 0)) return false;
  if (ia < 0) return true;
  const Node& x = a.nodes[static_cast<std::size_t>(ia)];
  const Node& y = b.nodes[static_cast<std::size_t>(ib)];
  if (x.kind != y.kind) return false;
  if (x.kind == NodeKind::Constant && x.value != y.value) return false;
  if ((x.kind == NodeKind::Time || x.kind == NodeKind::State) && x.index != y.index) return false;
  return same_tree(a, x.lhs, b, y.lhs) && same_tree(a, x.rhs, b, y.rhs);
}

}  // namespace detail

/// Fully parenthesized rendering; reparsing it yields a structurally identical tree.
inline std::string to_string(const Ast& ast) {
  std::string out;
  if (ast.root >= 0) detail::print_node(ast, ast.root, out);
  return out;
}

/// Structural equality (ignores source offsets).
inline bool structurally_equal(const Ast& a, const Ast& b) {
  return a.p == b.p && a.n == b.n && detail::same_tree(a, a.root, b, b.root);
}

namespace detail {

inline bool integral_exponent(const DualVector& e) {
  return e.is_constant() && std::nearbyint(e.value) == e.value && std::abs(e.value) <= 1e9;
}

// Integer power by binary exponentiation on duals, so the product rule is applied exactly.
inline DualVector integer_power(DualVector base, long long m) {
  DualVector acc(1.0, base.partials.size());
  while (m > 0) {
    if (m & 1) acc *= base;
    m >>= 1;
    if (m) base *= base;
  }
  return acc;
}

}  // namespace detail

/// Value and x-gradient of the expression at (t, x) by forward-mode propagation. `root`
/// selects a subtree (default: the whole expression).
inline DualVector eval_dual(const Ast& ast, std::span<const double> t, std::span<const double> x, int root = -1) {
  if (t.size() != ast.p || x.size() != ast.n) throw UsageError("evaluation point has wrong dimension");
  const std::size_t n = ast.n;
  std::vector<DualVector> vals(ast.nodes.size());
  const auto fail = [](const char* what, const Node& nd) -> DualVector {
    throw DomainError(std::string(what) + " at offset " + std::to_string(nd.offset), nd.offset);
  };
  if (root < 0) root = ast.root;
  for (std::size_t id = 0; id <= static_cast<std::size_t>(root); ++id) {
    const Node& nd = ast.nodes[id];
    const auto arg = [&](int j) -> const DualVector& { return vals[static_cast<std::size_t>(j)]; };
    DualVector& r = vals[id];
    switch (nd.kind) {
      case NodeKind::Constant: r = DualVector(nd.value, n); break;
      case NodeKind::Pi: r = DualVector(std::numbers::pi, n); break;
      case NodeKind::Time: r = DualVector(t[nd.index], n); break;
      case NodeKind::State: r = DualVector::variable(x[nd.index], n, nd.index); break;
      case NodeKind::Negate: r = -arg(nd.lhs); break;
      case NodeKind::Add: r = arg(nd.lhs) + arg(nd.rhs); break;
      case NodeKind::Sub: r = arg(nd.lhs) - arg(nd.rhs); break;
      case NodeKind::Mul: r = arg(nd.lhs) * arg(nd.rhs); break;
      case NodeKind::Div:
        if (arg(nd.rhs).value == 0.0) r = fail("division by zero", nd);
        else r = arg(nd.lhs) / arg(nd.rhs);
        break;
      case NodeKind::Pow: {
        const DualVector& a = arg(nd.lhs);
        const DualVector& b = arg(nd.rhs);
        if (detail::integral_exponent(b)) {
          const auto m = static_cast<long long>(b.value);
          if (m >= 0) {
            r = detail::integer_power(a, m);
          } else {
            DualVector denom = detail::integer_power(a, -m);
            if (denom.value == 0.0) r = fail("division by zero in negative power", nd);
            else r = DualVector(1.0, n) / denom;
          }
        } else {
          if (!(a.value > 0.0)) r = fail("non-integer power of a non-positive base", nd);
          const double log_a = std::log(a.value);
          const double v = std::exp(b.value * log_a);
          r = DualVector(v, n);
          for (std::size_t j = 0; j < n; ++j)
            r.partials[j] = v * (b.partials[j] * log_a + b.value * a.partials[j] / a.value);
        }
        break;
      }
      case NodeKind::Sin: r = pgrad::sin(arg(nd.lhs)); break;
      case NodeKind::Cos: r = pgrad::cos(arg(nd.lhs)); break;
      case NodeKind::Exp: r = pgrad::exp(arg(nd.lhs)); break;
      case NodeKind::Sqrt: {
        const DualVector& a = arg(nd.lhs);
        if (a.value < 0.0) r = fail("sqrt of a negative number", nd);
        if (a.value == 0.0) {
          if (!a.is_constant()) r = fail("sqrt is not differentiable at zero", nd);
          r = DualVector(0.0, n);
        } else {
          const double s = std::sqrt(a.value);
          r = chain(a, s, 0.5 / s);
        }
        break;
      }
    }
    if (!std::isfinite(r.value)) fail("non-finite value", nd);
    for (double pj : r.partials)
      if (!std::isfinite(pj)) fail("non-finite derivative", nd);
  }
  return std::move(vals[static_cast<std::size_t>(root)]);
}

}  // namespace pgrad::expr
