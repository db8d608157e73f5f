#pragma once

// Scalar expressions in the variables {t, t1, t2, x, p, u}: recursive-descent
// parser, IEEE-double evaluation, exact symbolic differentiation.
//
// Grammar:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | base ('^' factor)?
//   base   := number | ident | ident '(' expr (',' expr)? ')' | '(' expr ')'
// '^' is right-associative; unary minus binds looser than '^'.

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hjvar {

enum class Var : int { t = 0, t1, t2, x, p, u };
inline constexpr int kNumVars = 6;

inline const char* var_name(Var v) {
  static constexpr const char* names[kNumVars] = {"t", "t1", "t2", "x", "p", "u"};
  return names[static_cast<int>(v)];
}

inline std::optional<Var> var_from_name(std::string_view s) {
  for (int i = 0; i < kNumVars; ++i)
    if (s == var_name(static_cast<Var>(i))) return static_cast<Var>(i);
  return std::nullopt;
}

// Bitmask over Var.
using VarSet = std::uint8_t;
inline constexpr VarSet var_bit(Var v) { return static_cast<VarSet>(1u << static_cast<int>(v)); }

struct Bindings {
  std::array<std::optional<double>, kNumVars> values{};

  Bindings& set(Var v, double val) {
    values[static_cast<int>(v)] = val;
    return *this;
  }
  Bindings& clear(Var v) {
    values[static_cast<int>(v)].reset();
    return *this;
  }
  std::optional<double> get(Var v) const { return values[static_cast<int>(v)]; }
};

struct ParseError : std::runtime_error {
  std::size_t offset;
  ParseError(const std::string& msg, std::size_t off)
      : std::runtime_error(msg + " (at offset " + std::to_string(off) + ")"), offset(off) {}
};

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DiffError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class UnaryOp { Neg, Sin, Cos, Tan, Exp, Log, Abs, Sqrt };
enum class BinaryOp { Add, Sub, Mul, Div, Pow, Min, Max };

namespace detail {

enum class NodeKind { Constant, Variable, Unary, Binary };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind;
  double value = 0.0;           // Constant
  Var var = Var::t;             // Variable
  UnaryOp uop = UnaryOp::Neg;   // Unary
  BinaryOp bop = BinaryOp::Add; // Binary
  NodePtr a, b;
};

inline NodePtr make_const(double v) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Constant;
  n->value = v;
  return n;
}

inline NodePtr make_var(Var v) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Variable;
  n->var = v;
  return n;
}

inline NodePtr make_unary(UnaryOp op, NodePtr a) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Unary;
  n->uop = op;
  n->a = std::move(a);
  return n;
}

inline NodePtr make_binary(BinaryOp op, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Binary;
  n->bop = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

inline bool is_const(const NodePtr& n, double v) {
  return n->kind == NodeKind::Constant && n->value == v;
}

// Light constant folding used when assembling derivatives; keeps trees small
// without doing general CAS simplification.
inline NodePtr add(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  if (a->kind == NodeKind::Constant && b->kind == NodeKind::Constant)
    return make_const(a->value + b->value);
  return make_binary(BinaryOp::Add, std::move(a), std::move(b));
}

inline NodePtr sub(NodePtr a, NodePtr b) {
  if (is_const(b, 0.0)) return a;
  if (a->kind == NodeKind::Constant && b->kind == NodeKind::Constant)
    return make_const(a->value - b->value);
  if (is_const(a, 0.0)) return make_unary(UnaryOp::Neg, std::move(b));
  return make_binary(BinaryOp::Sub, std::move(a), std::move(b));
}

inline NodePtr mul(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  if (a->kind == NodeKind::Constant && b->kind == NodeKind::Constant)
    return make_const(a->value * b->value);
  return make_binary(BinaryOp::Mul, std::move(a), std::move(b));
}

inline NodePtr div(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0)) return make_const(0.0);
  if (is_const(b, 1.0)) return a;
  return make_binary(BinaryOp::Div, std::move(a), std::move(b));
}

inline NodePtr neg(NodePtr a) {
  if (a->kind == NodeKind::Constant) return make_const(-a->value);
  return make_unary(UnaryOp::Neg, std::move(a));
}

inline NodePtr pow_node(NodePtr a, NodePtr b) {
  if (is_const(b, 1.0)) return a;
  return make_binary(BinaryOp::Pow, std::move(a), std::move(b));
}

inline VarSet variables_of(const NodePtr& n) {
  switch (n->kind) {
    case NodeKind::Constant: return 0;
    case NodeKind::Variable: return var_bit(n->var);
    case NodeKind::Unary: return variables_of(n->a);
    case NodeKind::Binary: return static_cast<VarSet>(variables_of(n->a) | variables_of(n->b));
  }
  return 0;
}

inline double eval_node(const Node& n, const Bindings& b) {
  switch (n.kind) {
    case NodeKind::Constant:
      return n.value;
    case NodeKind::Variable: {
      auto v = b.get(n.var);
      if (!v) throw EvalError(std::string("missing binding for variable '") + var_name(n.var) + "'");
      return *v;
    }
    case NodeKind::Unary: {
      double a = eval_node(*n.a, b);
      switch (n.uop) {
        case UnaryOp::Neg: return -a;
        case UnaryOp::Sin: return std::sin(a);
        case UnaryOp::Cos: return std::cos(a);
        case UnaryOp::Tan: return std::tan(a);
        case UnaryOp::Exp: return std::exp(a);
        case UnaryOp::Log:
          if (a <= 0.0) throw EvalError("log of non-positive argument");
          return std::log(a);
        case UnaryOp::Abs: return std::fabs(a);
        case UnaryOp::Sqrt:
          if (a < 0.0) throw EvalError("sqrt of negative argument");
          return std::sqrt(a);
      }
      break;
    }
    case NodeKind::Binary: {
      double a = eval_node(*n.a, b);
      double c = eval_node(*n.b, b);
      switch (n.bop) {
        case BinaryOp::Add: return a + c;
        case BinaryOp::Sub: return a - c;
        case BinaryOp::Mul: return a * c;
        case BinaryOp::Div:
          if (c == 0.0) throw EvalError("division by zero");
          return a / c;
        case BinaryOp::Pow: {
          if (a == 0.0 && c < 0.0) throw EvalError("zero raised to negative power");
          double r = std::pow(a, c);
          if (std::isnan(r)) throw EvalError("pow domain error (negative base, fractional exponent)");
          return r;
        }
        case BinaryOp::Min: return std::fmin(a, c);
        case BinaryOp::Max: return std::fmax(a, c);
      }
      break;
    }
  }
  throw EvalError("corrupt expression node");
}

inline const char* unary_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::Neg: return "-";
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Tan: return "tan";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Log: return "log";
    case UnaryOp::Abs: return "abs";
    case UnaryOp::Sqrt: return "sqrt";
  }
  return "?";
}

// Precedence levels for printing: add=1, mul=2, pow=3, atom=4.
inline int precedence(const Node& n) {
  switch (n.kind) {
    case NodeKind::Constant:
      return n.value < 0 ? 1 : 4;
    case NodeKind::Variable:
      return 4;
    case NodeKind::Unary:
      return n.uop == UnaryOp::Neg ? 1 : 4;
    case NodeKind::Binary:
      switch (n.bop) {
        case BinaryOp::Add:
        case BinaryOp::Sub: return 1;
        case BinaryOp::Mul:
        case BinaryOp::Div: return 2;
        case BinaryOp::Pow: return 3;
        case BinaryOp::Min:
        case BinaryOp::Max: return 4;
      }
  }
  return 4;
}

inline void print_node(const Node& n, std::string& out, int parent_prec);

inline void print_child(const NodePtr& c, std::string& out, int min_prec) {
  bool paren = precedence(*c) < min_prec;
  if (paren) out += '(';
  print_node(*c, out, 0);
  if (paren) out += ')';
}

inline void print_node(const Node& n, std::string& out, int) {
  switch (n.kind) {
    case NodeKind::Constant: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      out += buf;
      return;
    }
    case NodeKind::Variable:
      out += var_name(n.var);
      return;
    case NodeKind::Unary:
      if (n.uop == UnaryOp::Neg) {
        out += '-';
        print_child(n.a, out, 3);  // -a*b parses back as (-a)*b; parenthesize products
      } else {
        out += unary_name(n.uop);
        out += '(';
        print_node(*n.a, out, 0);
        out += ')';
      }
      return;
    case NodeKind::Binary:
      switch (n.bop) {
        case BinaryOp::Add:
          print_child(n.a, out, 1);
          out += " + ";
          print_child(n.b, out, 2);
          return;
        case BinaryOp::Sub:
          print_child(n.a, out, 1);
          out += " - ";
          print_child(n.b, out, 2);
          return;
        case BinaryOp::Mul:
          print_child(n.a, out, 2);
          out += "*";
          print_child(n.b, out, 3);
          return;
        case BinaryOp::Div:
          print_child(n.a, out, 2);
          out += "/";
          print_child(n.b, out, 3);
          return;
        case BinaryOp::Pow:
          print_child(n.a, out, 4);
          out += "^";
          print_child(n.b, out, 3);
          return;
        case BinaryOp::Min:
        case BinaryOp::Max:
          out += (n.bop == BinaryOp::Min) ? "min" : "max";
          out += '(';
          print_node(*n.a, out, 0);
          out += ", ";
          print_node(*n.b, out, 0);
          out += ')';
          return;
      }
  }
}

inline NodePtr diff_node(const NodePtr& n, Var v);

inline NodePtr diff_pow(const NodePtr& a, const NodePtr& b, Var v) {
  // a^b with constant b: b*a^(b-1)*a'. Otherwise a^b*(b'*log(a) + b*a'/a).
  if (b->kind == NodeKind::Constant) {
    return mul(mul(make_const(b->value), pow_node(a, make_const(b->value - 1.0))), diff_node(a, v));
  }
  NodePtr da = diff_node(a, v);
  NodePtr db = diff_node(b, v);
  NodePtr inner = add(mul(db, make_unary(UnaryOp::Log, a)), mul(b, div(da, a)));
  return mul(pow_node(a, b), inner);
}

inline NodePtr diff_node(const NodePtr& n, Var v) {
  if (!(variables_of(n) & var_bit(v))) return make_const(0.0);
  switch (n->kind) {
    case NodeKind::Constant:
      return make_const(0.0);
    case NodeKind::Variable:
      return make_const(n->var == v ? 1.0 : 0.0);
    case NodeKind::Unary: {
      NodePtr da = diff_node(n->a, v);
      switch (n->uop) {
        case UnaryOp::Neg: return neg(da);
        case UnaryOp::Sin: return mul(make_unary(UnaryOp::Cos, n->a), da);
        case UnaryOp::Cos: return neg(mul(make_unary(UnaryOp::Sin, n->a), da));
        case UnaryOp::Tan: {
          NodePtr sec2 = add(make_const(1.0), pow_node(make_unary(UnaryOp::Tan, n->a), make_const(2.0)));
          return mul(sec2, da);
        }
        case UnaryOp::Exp: return mul(make_unary(UnaryOp::Exp, n->a), da);
        case UnaryOp::Log: return div(da, n->a);
        case UnaryOp::Abs: throw DiffError("abs is not differentiable");
        case UnaryOp::Sqrt:
          return div(da, mul(make_const(2.0), make_unary(UnaryOp::Sqrt, n->a)));
      }
      break;
    }
    case NodeKind::Binary: {
      switch (n->bop) {
        case BinaryOp::Add: return add(diff_node(n->a, v), diff_node(n->b, v));
        case BinaryOp::Sub: return sub(diff_node(n->a, v), diff_node(n->b, v));
        case BinaryOp::Mul:
          return add(mul(diff_node(n->a, v), n->b), mul(n->a, diff_node(n->b, v)));
        case BinaryOp::Div:
          return div(sub(mul(diff_node(n->a, v), n->b), mul(n->a, diff_node(n->b, v))),
                     pow_node(n->b, make_const(2.0)));
        case BinaryOp::Pow: return diff_pow(n->a, n->b, v);
        case BinaryOp::Min: throw DiffError("min is not differentiable");
        case BinaryOp::Max: throw DiffError("max is not differentiable");
      }
      break;
    }
  }
  throw DiffError("corrupt expression node");
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
    return e;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  bool accept(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c, const char* what) {
    if (!accept(c)) throw ParseError(std::string("expected ") + what, pos_);
  }

  NodePtr parse_expr() {
    NodePtr e = parse_term();
    for (;;) {
      if (accept('+'))
        e = make_binary(BinaryOp::Add, e, parse_term());
      else if (accept('-'))
        e = make_binary(BinaryOp::Sub, e, parse_term());
      else
        return e;
    }
  }

  NodePtr parse_term() {
    NodePtr e = parse_factor();
    for (;;) {
      if (accept('*'))
        e = make_binary(BinaryOp::Mul, e, parse_factor());
      else if (accept('/'))
        e = make_binary(BinaryOp::Div, e, parse_factor());
      else
        return e;
    }
  }

  NodePtr parse_factor() {
    if (accept('-')) return make_unary(UnaryOp::Neg, parse_factor());
    NodePtr base = parse_base();
    if (accept('^')) return make_binary(BinaryOp::Pow, base, parse_factor());
    return base;
  }

  NodePtr parse_base() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      expect(')', "')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  NodePtr parse_number() {
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc()) throw ParseError("malformed number", pos_);
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    return make_const(value);
  }

  NodePtr parse_ident() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string_view name = text_.substr(start, pos_ - start);

    if (peek('(')) {
      std::optional<UnaryOp> uop;
      if (name == "sin") uop = UnaryOp::Sin;
      else if (name == "cos") uop = UnaryOp::Cos;
      else if (name == "tan") uop = UnaryOp::Tan;
      else if (name == "exp") uop = UnaryOp::Exp;
      else if (name == "log") uop = UnaryOp::Log;
      else if (name == "abs") uop = UnaryOp::Abs;
      else if (name == "sqrt") uop = UnaryOp::Sqrt;
      std::optional<BinaryOp> bop;
      if (name == "min") bop = BinaryOp::Min;
      else if (name == "max") bop = BinaryOp::Max;
      if (!uop && !bop)
        throw ParseError("unknown function '" + std::string(name) + "'", start);
      expect('(', "'('");
      NodePtr first = parse_expr();
      if (uop) {
        if (accept(',')) throw ParseError("function '" + std::string(name) + "' takes one argument", pos_ - 1);
        expect(')', "')'");
        return make_unary(*uop, first);
      }
      expect(',', "','");
      NodePtr second = parse_expr();
      expect(')', "')'");
      return make_binary(*bop, first, second);
    }

    if (auto v = var_from_name(name)) return make_var(*v);
    if (name == "pi") return make_const(M_PI);
    throw ParseError("unknown identifier '" + std::string(name) + "'", start);
  }
};

}  // namespace detail

// Immutable parsed expression; safe for concurrent read-only evaluation.
class Expression {
 public:
  Expression() : root_(detail::make_const(0.0)) {}

  static Expression parse(std::string_view text) { return Expression(detail::Parser(text).parse()); }
  static Expression constant(double v) { return Expression(detail::make_const(v)); }
  static Expression variable(Var v) { return Expression(detail::make_var(v)); }

  double eval(const Bindings& b) const { return detail::eval_node(*root_, b); }

  Expression derivative(Var v) const { return Expression(detail::diff_node(root_, v)); }

  VarSet variables() const { return detail::variables_of(root_); }
  bool depends_on(Var v) const { return (variables() & var_bit(v)) != 0; }

  std::string str() const {
    std::string out;
    detail::print_node(*root_, out, 0);
    return out;
  }

  Expression operator+(const Expression& o) const { return Expression(detail::add(root_, o.root_)); }
  Expression operator-(const Expression& o) const { return Expression(detail::sub(root_, o.root_)); }
  Expression operator*(const Expression& o) const { return Expression(detail::mul(root_, o.root_)); }
  Expression operator-() const { return Expression(detail::neg(root_)); }

 private:
  explicit Expression(detail::NodePtr root) : root_(std::move(root)) {}
  detail::NodePtr root_;
};

}  // namespace hjvar
