#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rinverse/jet.hpp"

namespace rinverse {

/// Closed symbolic expression over real variables x_1..x_n with complex
/// constants. Nodes: var, const, add, sub, mul, div, neg, integer and real
/// powers, exp, sin, cos, recip, rexp, and the C^k smoothstep ramp sstep.
/// The text form is a prefix s-expression; see docs/expression-grammar.md.
class Expression {
 public:
  enum class Kind {
    Var, Const, Add, Sub, Mul, Div, Neg, PowInt, PowReal,
    Exp, Sin, Cos, Recip, Rexp, SmoothStep,
  };

  struct Node {
    Kind kind;
    int axis = 0;            // Var (0-based)
    Complex value{0.0, 0.0}; // Const
    int ipow = 0;            // PowInt exponent, SmoothStep smoothness
    double rpow = 0.0;       // PowReal exponent
    std::vector<std::shared_ptr<const Node>> args;
  };
  using NodePtr = std::shared_ptr<const Node>;

  Expression() : node_(make_const_node(Complex(0.0, 0.0))) {}
  explicit Expression(NodePtr node) : node_(std::move(node)) {}

  const Node& node() const { return *node_; }
  NodePtr node_ptr() const { return node_; }
  Kind kind() const { return node_->kind; }

  bool is_const() const { return node_->kind == Kind::Const; }
  bool is_zero_const() const {
    return is_const() && node_->value == Complex(0.0, 0.0);
  }

  /// Smallest n such that the expression is closed over x_1..x_n.
  int min_dimension() const { return min_dimension_rec(node_); }

  Complex eval(const Vec& point) const { return eval_rec(node_, point); }

  /// Order-m jet at p; coefficient at a is D^a F(p)/a!.
  Jet jet(const Vec& point, int order) const {
    return jet_rec(node_, point, order);
  }

  std::string to_string() const {
    std::string out;
    print_rec(node_, out);
    return out;
  }

  static Expression parse(std::string_view text);

  /// Replaces x_(axis+1) by replacements[axis]; must cover every variable used.
  Expression substitute(const std::vector<Expression>& replacements) const;

  /// Symbolic partial derivative. The derivative of rexp is expressed through
  /// recip and is singular where its argument vanishes; sstep has no in-grammar
  /// derivative and raises DomainError. Use jets where those cases matter.
  Expression derivative(int axis) const;

 private:
  static NodePtr make_const_node(Complex v) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Const;
    n->value = v;
    return n;
  }

  static int min_dimension_rec(const NodePtr& n) {
    int d = (n->kind == Kind::Var) ? n->axis + 1 : 0;
    for (const auto& a : n->args) d = std::max(d, min_dimension_rec(a));
    return d;
  }

  static Complex eval_rec(const NodePtr& n, const Vec& p);
  static Jet jet_rec(const NodePtr& n, const Vec& p, int m);
  static void print_rec(const NodePtr& n, std::string& out);

  NodePtr node_;

  friend Expression var(int);
  friend Expression cnum(Complex);
  friend Expression make_unary(Expression::Kind, Expression);
  friend Expression make_nary(Expression::Kind, std::vector<Expression>);
  friend Expression pow_int(Expression, int);
  friend Expression pow_real(Expression, double);
  friend Expression smoothstep(Expression, int);
};

/// x_(index), 1-based to match the text grammar.
inline Expression var(int index) {
  if (index < 1) throw ConfigError("var: index is 1-based");
  auto n = std::make_shared<Expression::Node>();
  n->kind = Expression::Kind::Var;
  n->axis = index - 1;
  return Expression(n);
}

inline Expression cnum(Complex v) { return Expression(Expression::make_const_node(v)); }
inline Expression cnum(double v) { return cnum(Complex(v, 0.0)); }

inline Expression make_unary(Expression::Kind k, Expression a) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = k;
  n->args = {a.node_ptr()};
  return Expression(n);
}

inline Expression make_nary(Expression::Kind k, std::vector<Expression> args) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = k;
  for (auto& a : args) n->args.push_back(a.node_ptr());
  return Expression(n);
}

inline Expression exp(Expression a) { return make_unary(Expression::Kind::Exp, std::move(a)); }
inline Expression sin(Expression a) { return make_unary(Expression::Kind::Sin, std::move(a)); }
inline Expression cos(Expression a) { return make_unary(Expression::Kind::Cos, std::move(a)); }
inline Expression recip(Expression a) { return make_unary(Expression::Kind::Recip, std::move(a)); }
inline Expression rexp(Expression a) { return make_unary(Expression::Kind::Rexp, std::move(a)); }

inline Expression neg(Expression a) {
  if (a.is_const()) return cnum(-a.node().value);
  return make_unary(Expression::Kind::Neg, std::move(a));
}

// The binary constructors fold constants and drop additive/multiplicative
// identities so pullback and derivative trees stay small.

inline Expression add(Expression a, Expression b) {
  if (a.is_const() && b.is_const()) return cnum(a.node().value + b.node().value);
  if (a.is_zero_const()) return b;
  if (b.is_zero_const()) return a;
  return make_nary(Expression::Kind::Add, {std::move(a), std::move(b)});
}

inline Expression sub(Expression a, Expression b) {
  if (a.is_const() && b.is_const()) return cnum(a.node().value - b.node().value);
  if (b.is_zero_const()) return a;
  if (a.is_zero_const()) return neg(std::move(b));
  return make_nary(Expression::Kind::Sub, {std::move(a), std::move(b)});
}

inline Expression mul(Expression a, Expression b) {
  if (a.is_const() && b.is_const()) return cnum(a.node().value * b.node().value);
  if (a.is_zero_const() || b.is_zero_const()) return cnum(0.0);
  if (a.is_const() && a.node().value == Complex(1.0, 0.0)) return b;
  if (b.is_const() && b.node().value == Complex(1.0, 0.0)) return a;
  return make_nary(Expression::Kind::Mul, {std::move(a), std::move(b)});
}

inline Expression div(Expression a, Expression b) {
  if (b.is_const() && b.node().value == Complex(1.0, 0.0)) return a;
  return make_nary(Expression::Kind::Div, {std::move(a), std::move(b)});
}

inline Expression pow_int(Expression a, int k) {
  if (k == 0) return cnum(1.0);
  if (k == 1) return a;
  auto n = std::make_shared<Expression::Node>();
  n->kind = Expression::Kind::PowInt;
  n->ipow = k;
  n->args = {a.node_ptr()};
  return Expression(n);
}

inline Expression pow_real(Expression a, double s) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = Expression::Kind::PowReal;
  n->rpow = s;
  n->args = {a.node_ptr()};
  return Expression(n);
}

inline Expression smoothstep(Expression a, int k) {
  if (k < 1) throw ConfigError("smoothstep: smoothness must be >= 1");
  auto n = std::make_shared<Expression::Node>();
  n->kind = Expression::Kind::SmoothStep;
  n->ipow = k;
  n->args = {a.node_ptr()};
  return Expression(n);
}

// ---------------------------------------------------------------------------
// evaluation

inline Complex Expression::eval_rec(const NodePtr& n, const Vec& p) {
  auto subtree = [&n]() { return Expression(n).to_string(); };
  switch (n->kind) {
    case Kind::Var:
      if (n->axis >= static_cast<int>(p.size()))
        throw EvaluationError("variable index exceeds point dimension", subtree());
      return Complex(p[n->axis], 0.0);
    case Kind::Const:
      return n->value;
    case Kind::Add: {
      Complex s(0.0, 0.0);
      for (const auto& a : n->args) s += eval_rec(a, p);
      return s;
    }
    case Kind::Sub:
      return eval_rec(n->args[0], p) - eval_rec(n->args[1], p);
    case Kind::Mul: {
      Complex s(1.0, 0.0);
      for (const auto& a : n->args) s *= eval_rec(a, p);
      return s;
    }
    case Kind::Div: {
      const Complex d = eval_rec(n->args[1], p);
      if (d == Complex(0.0, 0.0)) throw EvaluationError("division by zero", subtree());
      return eval_rec(n->args[0], p) / d;
    }
    case Kind::Neg:
      return -eval_rec(n->args[0], p);
    case Kind::PowInt: {
      const Complex b = eval_rec(n->args[0], p);
      if (n->ipow < 0 && b == Complex(0.0, 0.0))
        throw EvaluationError("zero raised to a negative power", subtree());
      Complex r(1.0, 0.0), q = b;
      int e = std::abs(n->ipow);
      while (e > 0) {
        if (e & 1) r *= q;
        e >>= 1;
        if (e > 0) q *= q;
      }
      return n->ipow < 0 ? Complex(1.0, 0.0) / r : r;
    }
    case Kind::PowReal: {
      const Complex b = eval_rec(n->args[0], p);
      if (std::abs(b.imag()) > 1e-12 || b.real() < 0.0)
        throw EvaluationError("real power of a negative or complex base", subtree());
      return Complex(std::pow(b.real(), n->rpow), 0.0);
    }
    case Kind::Exp:
      return std::exp(eval_rec(n->args[0], p));
    case Kind::Sin:
      return std::sin(eval_rec(n->args[0], p));
    case Kind::Cos:
      return std::cos(eval_rec(n->args[0], p));
    case Kind::Recip: {
      const Complex b = eval_rec(n->args[0], p);
      if (b == Complex(0.0, 0.0)) throw EvaluationError("recip at zero", subtree());
      return Complex(1.0, 0.0) / b;
    }
    case Kind::Rexp: {
      const Complex u = eval_rec(n->args[0], p);
      if (u.real() <= 0.0) return Complex(0.0, 0.0);
      return std::exp(-1.0 / u);
    }
    case Kind::SmoothStep: {
      const double u = eval_rec(n->args[0], p).real();
      if (u <= 0.0) return Complex(0.0, 0.0);
      if (u >= 1.0) return Complex(1.0, 0.0);
      const std::vector<double> c = detail::smoothstep_coefficients(n->ipow);
      double poly = 0.0;
      for (int i = n->ipow; i >= 0; --i) poly = poly * u + c[i];
      return Complex(poly * std::pow(u, n->ipow + 1), 0.0);
    }
  }
  throw EvaluationError("unknown node", subtree());
}

inline Jet Expression::jet_rec(const NodePtr& n, const Vec& p, int m) {
  const int dim = static_cast<int>(p.size());
  auto subtree = [&n]() { return Expression(n).to_string(); };
  try {
    switch (n->kind) {
      case Kind::Var:
        if (n->axis >= dim)
          throw EvaluationError("variable index exceeds point dimension", subtree());
        return Jet::coordinate(dim, m, p, n->axis);
      case Kind::Const:
        return Jet::constant(dim, m, p, n->value);
      case Kind::Add: {
        Jet s = Jet::zero(dim, m, p);
        for (const auto& a : n->args) s = jet_add(s, jet_rec(a, p, m));
        return s;
      }
      case Kind::Sub:
        return jet_sub(jet_rec(n->args[0], p, m), jet_rec(n->args[1], p, m));
      case Kind::Mul: {
        Jet s = jet_rec(n->args[0], p, m);
        for (std::size_t i = 1; i < n->args.size(); ++i)
          s = jet_mul(s, jet_rec(n->args[i], p, m));
        return s;
      }
      case Kind::Div:
        return jet_mul(jet_rec(n->args[0], p, m),
                       jet_compose_univariate(Kernel::Recip, jet_rec(n->args[1], p, m)));
      case Kind::Neg:
        return jet_neg(jet_rec(n->args[0], p, m));
      case Kind::PowInt:
        return jet_pow_int(jet_rec(n->args[0], p, m), n->ipow);
      case Kind::PowReal:
        return jet_pow_real(jet_rec(n->args[0], p, m), n->rpow);
      case Kind::Exp:
        return jet_compose_univariate(Kernel::Exp, jet_rec(n->args[0], p, m));
      case Kind::Sin:
        return jet_compose_univariate(Kernel::Sin, jet_rec(n->args[0], p, m));
      case Kind::Cos:
        return jet_compose_univariate(Kernel::Cos, jet_rec(n->args[0], p, m));
      case Kind::Recip:
        return jet_compose_univariate(Kernel::Recip, jet_rec(n->args[0], p, m));
      case Kind::Rexp:
        return jet_compose_univariate(Kernel::Rexp, jet_rec(n->args[0], p, m));
      case Kind::SmoothStep:
        return jet_smoothstep(jet_rec(n->args[0], p, m), n->ipow);
    }
  } catch (const DomainError& e) {
    throw EvaluationError(e.what(), subtree());
  }
  throw EvaluationError("unknown node", subtree());
}

// ---------------------------------------------------------------------------
// text form

inline void Expression::print_rec(const NodePtr& n, std::string& out) {
  auto head = [&out](const char* name) {
    out += '(';
    out += name;
  };
  switch (n->kind) {
    case Kind::Var:
      head("var");
      out += ' ';
      out += std::to_string(n->axis + 1);
      break;
    case Kind::Const:
      head("const");
      out += ' ';
      out += detail::format_double(n->value.real());
      if (n->value.imag() != 0.0) {
        out += ' ';
        out += detail::format_double(n->value.imag());
      }
      break;
    case Kind::Add: head("add"); break;
    case Kind::Sub: head("sub"); break;
    case Kind::Mul: head("mul"); break;
    case Kind::Div: head("div"); break;
    case Kind::Neg: head("neg"); break;
    case Kind::PowInt: head("pow"); break;
    case Kind::PowReal: head("powr"); break;
    case Kind::Exp: head("exp"); break;
    case Kind::Sin: head("sin"); break;
    case Kind::Cos: head("cos"); break;
    case Kind::Recip: head("recip"); break;
    case Kind::Rexp: head("rexp"); break;
    case Kind::SmoothStep: head("sstep"); break;
  }
  for (const auto& a : n->args) {
    out += ' ';
    print_rec(a, out);
  }
  if (n->kind == Kind::PowInt) {
    out += ' ';
    out += std::to_string(n->ipow);
  } else if (n->kind == Kind::PowReal) {
    out += ' ';
    out += detail::format_double(n->rpow);
  } else if (n->kind == Kind::SmoothStep) {
    out += ' ';
    out += std::to_string(n->ipow);
  }
  out += ')';
}

namespace detail {

struct SexprToken {
  enum class Type { LParen, RParen, Symbol, Number, End } type;
  std::string text;
  double number = 0.0;
};

class SexprLexer {
 public:
  explicit SexprLexer(std::string_view text) : text_(text) {}

  SexprToken next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ >= text_.size()) return {SexprToken::Type::End, "", 0.0};
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      return {SexprToken::Type::LParen, "(", 0.0};
    }
    if (c == ')') {
      ++pos_;
      return {SexprToken::Type::RParen, ")", 0.0};
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '(' && text_[pos_] != ')')
      ++pos_;
    std::string tok(text_.substr(start, pos_ - start));
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end && *end == '\0')
      return {SexprToken::Type::Number, tok, v};
    return {SexprToken::Type::Symbol, tok, 0.0};
  }

  std::size_t position() const { return pos_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expression Expression::parse(std::string_view text) {
  detail::SexprLexer lexer(text);

  struct Parser {
    detail::SexprLexer& lex;

    [[noreturn]] void fail(const std::string& msg) {
      throw ConfigError("expression parse error at offset " +
                        std::to_string(lex.position()) + ": " + msg);
    }

    Expression parse_one(detail::SexprToken tok) {
      if (tok.type == detail::SexprToken::Type::Number) return cnum(tok.number);
      if (tok.type != detail::SexprToken::Type::LParen) fail("expected '(' or number");
      const detail::SexprToken head = lex.next();
      if (head.type != detail::SexprToken::Type::Symbol) fail("expected operator symbol");

      std::vector<Expression> args;
      std::vector<double> numbers;
      std::vector<bool> arg_is_number;
      for (;;) {
        detail::SexprToken t = lex.next();
        if (t.type == detail::SexprToken::Type::RParen) break;
        if (t.type == detail::SexprToken::Type::End) fail("unexpected end of input");
        if (t.type == detail::SexprToken::Type::Number) {
          numbers.push_back(t.number);
          arg_is_number.push_back(true);
          args.push_back(cnum(t.number));
        } else {
          arg_is_number.push_back(false);
          numbers.push_back(0.0);
          args.push_back(parse_one(t));
        }
      }

      const std::string& op = head.text;
      auto need = [&](std::size_t count) {
        if (args.size() != count)
          fail("operator '" + op + "' expects " + std::to_string(count) + " argument(s)");
      };
      auto need_at_least = [&](std::size_t count) {
        if (args.size() < count)
          fail("operator '" + op + "' expects at least " + std::to_string(count) + " arguments");
      };
      auto trailing_number = [&](const char* what) -> double {
        if (args.empty() || !arg_is_number.back()) fail(std::string("expected ") + what);
        return numbers.back();
      };

      if (op == "var") {
        need(1);
        const double v = trailing_number("variable index");
        if (v < 1 || v != static_cast<int>(v)) fail("variable index must be a positive integer");
        return var(static_cast<int>(v));
      }
      if (op == "const") {
        if (args.size() != 1 && args.size() != 2) fail("const expects 1 or 2 numbers");
        for (bool isnum : arg_is_number)
          if (!isnum) fail("const expects numeric arguments");
        return cnum(Complex(numbers[0], args.size() == 2 ? numbers[1] : 0.0));
      }
      if (op == "add" || op == "mul") {
        need_at_least(2);
        Expression r = args[0];
        for (std::size_t i = 1; i < args.size(); ++i)
          r = (op == "add") ? add(r, args[i]) : mul(r, args[i]);
        return r;
      }
      if (op == "sub") { need(2); return sub(args[0], args[1]); }
      if (op == "div") { need(2); return div(args[0], args[1]); }
      if (op == "neg") { need(1); return neg(args[0]); }
      if (op == "exp") { need(1); return rinverse::exp(args[0]); }
      if (op == "sin") { need(1); return rinverse::sin(args[0]); }
      if (op == "cos") { need(1); return rinverse::cos(args[0]); }
      if (op == "recip") { need(1); return recip(args[0]); }
      if (op == "rexp") { need(1); return rexp(args[0]); }
      if (op == "pow") {
        need(2);
        const double k = trailing_number("integer exponent");
        if (k != static_cast<int>(k)) fail("pow exponent must be an integer");
        return pow_int(args[0], static_cast<int>(k));
      }
      if (op == "powr") {
        need(2);
        return pow_real(args[0], trailing_number("real exponent"));
      }
      if (op == "sstep") {
        need(2);
        const double k = trailing_number("smoothness order");
        if (k < 1 || k != static_cast<int>(k)) fail("sstep smoothness must be a positive integer");
        return smoothstep(args[0], static_cast<int>(k));
      }
      fail("unknown operator '" + op + "'");
    }
  } parser{lexer};

  const Expression result = parser.parse_one(lexer.next());
  const detail::SexprToken tail = lexer.next();
  if (tail.type != detail::SexprToken::Type::End)
    throw ConfigError("expression parse error: trailing input after expression");
  return result;
}

// ---------------------------------------------------------------------------
// substitution and symbolic derivative

inline Expression Expression::substitute(const std::vector<Expression>& replacements) const {
  struct Walker {
    const std::vector<Expression>& repl;

    Expression walk(const NodePtr& n) {
      switch (n->kind) {
        case Kind::Var:
          if (n->axis >= static_cast<int>(repl.size()))
            throw ConfigError("substitute: no replacement for x" + std::to_string(n->axis + 1));
          return repl[n->axis];
        case Kind::Const:
          return Expression(n);
        default: {
          std::vector<Expression> args;
          args.reserve(n->args.size());
          for (const auto& a : n->args) args.push_back(walk(a));
          switch (n->kind) {
            case Kind::Add: {
              Expression r = args[0];
              for (std::size_t i = 1; i < args.size(); ++i) r = add(r, args[i]);
              return r;
            }
            case Kind::Mul: {
              Expression r = args[0];
              for (std::size_t i = 1; i < args.size(); ++i) r = mul(r, args[i]);
              return r;
            }
            case Kind::Sub: return sub(args[0], args[1]);
            case Kind::Div: return div(args[0], args[1]);
            case Kind::Neg: return neg(args[0]);
            case Kind::PowInt: return pow_int(args[0], n->ipow);
            case Kind::PowReal: return pow_real(args[0], n->rpow);
            case Kind::Exp: return rinverse::exp(args[0]);
            case Kind::Sin: return rinverse::sin(args[0]);
            case Kind::Cos: return rinverse::cos(args[0]);
            case Kind::Recip: return recip(args[0]);
            case Kind::Rexp: return rexp(args[0]);
            case Kind::SmoothStep: return smoothstep(args[0], n->ipow);
            default: throw ConfigError("substitute: unexpected node");
          }
        }
      }
    }
  } walker{replacements};
  return walker.walk(node_);
}

inline Expression Expression::derivative(int axis) const {
  struct Walker {
    int axis;

    Expression walk(const NodePtr& n) {
      const Expression self(n);
      switch (n->kind) {
        case Kind::Var:
          return cnum(n->axis == axis ? 1.0 : 0.0);
        case Kind::Const:
          return cnum(0.0);
        case Kind::Add: {
          Expression r = walk(n->args[0]);
          for (std::size_t i = 1; i < n->args.size(); ++i) r = add(r, walk(n->args[i]));
          return r;
        }
        case Kind::Sub:
          return sub(walk(n->args[0]), walk(n->args[1]));
        case Kind::Mul: {
          Expression r = cnum(0.0);
          for (std::size_t i = 0; i < n->args.size(); ++i) {
            Expression term = walk(n->args[i]);
            for (std::size_t j = 0; j < n->args.size(); ++j)
              if (j != i) term = mul(term, Expression(n->args[j]));
            r = add(r, term);
          }
          return r;
        }
        case Kind::Div: {
          const Expression a(n->args[0]), b(n->args[1]);
          return div(sub(mul(walk(n->args[0]), b), mul(a, walk(n->args[1]))), pow_int(b, 2));
        }
        case Kind::Neg:
          return neg(walk(n->args[0]));
        case Kind::PowInt: {
          const Expression a(n->args[0]);
          return mul(mul(cnum(static_cast<double>(n->ipow)), pow_int(a, n->ipow - 1)),
                     walk(n->args[0]));
        }
        case Kind::PowReal: {
          const Expression a(n->args[0]);
          return mul(mul(cnum(n->rpow), pow_real(a, n->rpow - 1.0)), walk(n->args[0]));
        }
        case Kind::Exp:
          return mul(Expression(n), walk(n->args[0]));
        case Kind::Sin:
          return mul(rinverse::cos(Expression(n->args[0])), walk(n->args[0]));
        case Kind::Cos:
          return neg(mul(rinverse::sin(Expression(n->args[0])), walk(n->args[0])));
        case Kind::Recip: {
          const Expression a(n->args[0]);
          return neg(div(walk(n->args[0]), pow_int(a, 2)));
        }
        case Kind::Rexp: {
          // d/du exp(-1/u) = exp(-1/u)/u^2; the tree below is singular at
          // u = 0 although the true derivative extends by 0 there.
          const Expression a(n->args[0]);
          return mul(div(Expression(n), pow_int(a, 2)), walk(n->args[0]));
        }
        case Kind::SmoothStep:
          throw DomainError(
              "derivative: sstep has no in-grammar symbolic derivative; use jets");
      }
      throw DomainError("derivative: unknown node");
    }
  } walker{axis};
  return walker.walk(node_);
}

/// Iterated symbolic derivative D^a F.
inline Expression derivative(const Expression& f, const MultiIndex& a) {
  Expression r = f;
  for (int j = 0; j < a.dimension(); ++j)
    for (int k = 0; k < a[j]; ++k) r = r.derivative(j);
  return r;
}

}  // namespace rinverse
