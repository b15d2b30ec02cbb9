#pragma once

// Scalar expressions over x1..xN: parsing, printing, evaluation and symbolic
// differentiation. Expressions are immutable DAGs of shared nodes, so copies
// are cheap and evaluation is safe from any number of threads.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "carnot/error.hpp"

namespace carnot {

enum class Op : std::uint8_t { Const, Var, Neg, Sin, Cos, Exp, Ln, Abs, Sqrt, Add, Sub, Mul, Div, Pow };

enum class Smoothness : std::uint8_t { SymbolicallySmoothAtZero, NonsmoothAtZero };

class Expr {
 public:
  Expr() : Expr(0.0) {}
  Expr(double c);  // NOLINT(google-explicit-constructor): literals mix freely with expressions

  /// Variable x_{index+1}; indices are 0-based internally.
  static Expr variable(int index);
  static Expr unary(Op op, const Expr& arg);
  static Expr binary(Op op, const Expr& lhs, const Expr& rhs);

  Op op() const noexcept { return node_->op; }
  double constant() const noexcept { return node_->value; }
  int variable_index() const noexcept { return node_->var; }
  Expr lhs() const { return Expr(node_->a); }
  Expr rhs() const { return Expr(node_->b); }

  bool is_constant() const noexcept { return op() == Op::Const; }
  bool is_constant(double c) const noexcept { return is_constant() && constant() == c; }
  bool depends_on_variables() const noexcept { return node_->var_dependent; }
  /// One past the highest referenced variable index.
  int dimension() const noexcept { return node_->dim; }
  Smoothness smoothness() const noexcept { return node_->smooth; }
  bool smooth_at_zero() const noexcept { return smoothness() == Smoothness::SymbolicallySmoothAtZero; }

 private:
  struct Node {
    Op op = Op::Const;
    double value = 0.0;
    int var = -1;
    std::shared_ptr<const Node> a, b;
    bool var_dependent = false;
    int dim = 0;
    Smoothness smooth = Smoothness::SymbolicallySmoothAtZero;
  };

  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  static Expr make(Node n);

  std::shared_ptr<const Node> node_;
};

inline bool is_unary(Op op) noexcept { return op >= Op::Neg && op <= Op::Sqrt; }
inline bool is_binary(Op op) noexcept { return op >= Op::Add; }

namespace detail {

inline double int_pow(double base, long long n) {
  bool invert = n < 0;
  unsigned long long e = static_cast<unsigned long long>(invert ? -n : n);
  double result = 1.0;
  while (e) {
    if (e & 1ULL) result *= base;
    base *= base;
    e >>= 1ULL;
  }
  return invert ? 1.0 / result : result;
}

inline bool is_integer(double v) { return std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e9; }

// Applies one operation; sets ok = false on a domain violation.
inline double apply_unary(Op op, double a, bool& ok) {
  double r = 0.0;
  switch (op) {
    case Op::Neg: r = -a; break;
    case Op::Sin: r = std::sin(a); break;
    case Op::Cos: r = std::cos(a); break;
    case Op::Exp: r = std::exp(a); break;
    case Op::Ln:
      if (!(a > 0.0)) ok = false;
      r = std::log(a);
      break;
    case Op::Abs: r = std::fabs(a); break;
    case Op::Sqrt:
      if (a < 0.0) ok = false;
      r = std::sqrt(a);
      break;
    default: ok = false;
  }
  if (!std::isfinite(r)) ok = false;
  return r;
}

inline double apply_binary(Op op, double a, double b, bool& ok) {
  double r = 0.0;
  switch (op) {
    case Op::Add: r = a + b; break;
    case Op::Sub: r = a - b; break;
    case Op::Mul: r = a * b; break;
    case Op::Div:
      if (b == 0.0) ok = false;
      r = a / b;
      break;
    case Op::Pow:
      if (is_integer(b)) {
        if (a == 0.0 && b < 0.0) ok = false;
        r = int_pow(a, static_cast<long long>(b));
      } else {
        // non-integer exponent: exp(b ln a)
        if (!(a > 0.0)) ok = false;
        r = std::exp(b * std::log(a));
      }
      break;
    default: ok = false;
  }
  if (!std::isfinite(r)) ok = false;
  return r;
}

}  // namespace detail

std::string to_string(const Expr& e);

/// Recursive evaluation; throws DomainError naming the offending node.
inline double eval(const Expr& e, std::span<const double> point) {
  switch (e.op()) {
    case Op::Const: return e.constant();
    case Op::Var:
      if (static_cast<std::size_t>(e.variable_index()) >= point.size())
        throw UnknownVariable("x" + std::to_string(e.variable_index() + 1) + " not in a point of dimension " +
                              std::to_string(point.size()));
      return point[static_cast<std::size_t>(e.variable_index())];
    default: break;
  }
  bool ok = true;
  double r;
  if (is_unary(e.op())) {
    r = detail::apply_unary(e.op(), eval(e.lhs(), point), ok);
  } else {
    double a = eval(e.lhs(), point);
    double b = eval(e.rhs(), point);
    r = detail::apply_binary(e.op(), a, b, ok);
  }
  if (!ok) throw DomainError(to_string(e), std::vector<double>(point.begin(), point.end()));
  return r;
}

inline double eval(const Expr& e, std::initializer_list<double> point) {
  return eval(e, std::span<const double>(point.begin(), point.size()));
}

inline Expr Expr::make(Node n) {
  switch (n.op) {
    case Op::Const: break;
    case Op::Var:
      n.var_dependent = true;
      n.dim = n.var + 1;
      break;
    default: {
      const Node& a = *n.a;
      bool nonsmooth = a.smooth == Smoothness::NonsmoothAtZero;
      n.var_dependent = a.var_dependent;
      n.dim = a.dim;
      if (is_unary(n.op)) {
        if (a.var_dependent && (n.op == Op::Ln || n.op == Op::Abs || n.op == Op::Sqrt)) nonsmooth = true;
      } else {
        const Node& b = *n.b;
        nonsmooth = nonsmooth || b.smooth == Smoothness::NonsmoothAtZero;
        n.var_dependent = n.var_dependent || b.var_dependent;
        n.dim = std::max(n.dim, b.dim);
        if (n.op == Op::Pow) {
          if (b.var_dependent) {
            // c^g(x) = exp(g ln c) is smooth only for a positive constant base
            if (a.var_dependent || !(a.op == Op::Const && a.value > 0.0)) nonsmooth = true;
          } else if (a.var_dependent) {
            bool natural = b.op == Op::Const && detail::is_integer(b.value) && b.value >= 0.0;
            if (!natural) nonsmooth = true;
          }
        } else if (n.op == Op::Div && b.var_dependent) {
          std::vector<double> origin(static_cast<std::size_t>(b.dim), 0.0);
          try {
            if (eval(Expr(n.b), origin) == 0.0) nonsmooth = true;
          } catch (const Error&) {
            nonsmooth = true;
          }
        }
      }
      n.smooth = nonsmooth ? Smoothness::NonsmoothAtZero : Smoothness::SymbolicallySmoothAtZero;
    }
  }
  return Expr(std::make_shared<const Node>(std::move(n)));
}

inline Expr::Expr(double c) {
  Node n;
  n.op = Op::Const;
  n.value = c;
  node_ = std::make_shared<const Node>(std::move(n));
}

inline Expr Expr::variable(int index) {
  if (index < 0) throw UnknownVariable("negative variable index");
  Node n;
  n.op = Op::Var;
  n.var = index;
  return make(std::move(n));
}

inline Expr Expr::unary(Op op, const Expr& arg) {
  if (!is_unary(op)) throw Error("not a unary operation");
  if (arg.is_constant()) {
    bool ok = true;
    double v = detail::apply_unary(op, arg.constant(), ok);
    if (ok) return Expr(v);
  }
  if (op == Op::Neg && arg.op() == Op::Neg) return arg.lhs();
  Node n;
  n.op = op;
  n.a = arg.node_;
  return make(std::move(n));
}

inline Expr Expr::binary(Op op, const Expr& lhs, const Expr& rhs) {
  if (!is_binary(op)) throw Error("not a binary operation");
  if (lhs.is_constant() && rhs.is_constant()) {
    bool ok = true;
    double v = detail::apply_binary(op, lhs.constant(), rhs.constant(), ok);
    if (ok) return Expr(v);
  }
  switch (op) {
    case Op::Add:
      if (lhs.is_constant(0.0)) return rhs;
      if (rhs.is_constant(0.0)) return lhs;
      break;
    case Op::Sub:
      if (rhs.is_constant(0.0)) return lhs;
      if (lhs.is_constant(0.0)) return unary(Op::Neg, rhs);
      break;
    case Op::Mul:
      if (lhs.is_constant(0.0) || rhs.is_constant(0.0)) return Expr(0.0);
      if (lhs.is_constant(1.0)) return rhs;
      if (rhs.is_constant(1.0)) return lhs;
      break;
    case Op::Div:
      if (rhs.is_constant(1.0)) return lhs;
      if (lhs.is_constant(0.0) && !rhs.is_constant(0.0)) return Expr(0.0);
      break;
    case Op::Pow:
      if (rhs.is_constant(1.0)) return lhs;
      if (rhs.is_constant(0.0)) return Expr(1.0);
      break;
    default: break;
  }
  Node n;
  n.op = op;
  n.a = lhs.node_;
  n.b = rhs.node_;
  return make(std::move(n));
}

inline Expr operator+(const Expr& a, const Expr& b) { return Expr::binary(Op::Add, a, b); }
inline Expr operator-(const Expr& a, const Expr& b) { return Expr::binary(Op::Sub, a, b); }
inline Expr operator*(const Expr& a, const Expr& b) { return Expr::binary(Op::Mul, a, b); }
inline Expr operator/(const Expr& a, const Expr& b) { return Expr::binary(Op::Div, a, b); }
inline Expr operator-(const Expr& a) { return Expr::unary(Op::Neg, a); }
inline Expr pow(const Expr& a, const Expr& b) { return Expr::binary(Op::Pow, a, b); }
inline Expr sin(const Expr& a) { return Expr::unary(Op::Sin, a); }
inline Expr cos(const Expr& a) { return Expr::unary(Op::Cos, a); }
inline Expr exp(const Expr& a) { return Expr::unary(Op::Exp, a); }
inline Expr ln(const Expr& a) { return Expr::unary(Op::Ln, a); }
inline Expr abs(const Expr& a) { return Expr::unary(Op::Abs, a); }
inline Expr sqrt(const Expr& a) { return Expr::unary(Op::Sqrt, a); }

/// Partial derivative with respect to x_{var+1}. abs differentiates to
/// u/abs(u), which is undefined (and flagged nonsmooth) at u = 0.
inline Expr derive(const Expr& e, int var) {
  if (!e.depends_on_variables()) return Expr(0.0);
  switch (e.op()) {
    case Op::Const: return Expr(0.0);
    case Op::Var: return Expr(e.variable_index() == var ? 1.0 : 0.0);
    default: break;
  }
  const Expr u = e.lhs();
  if (is_unary(e.op())) {
    const Expr du = derive(u, var);
    if (du.is_constant(0.0)) return Expr(0.0);
    switch (e.op()) {
      case Op::Neg: return -du;
      case Op::Sin: return cos(u) * du;
      case Op::Cos: return -(sin(u) * du);
      case Op::Exp: return e * du;
      case Op::Ln: return du / u;
      case Op::Abs: return u / abs(u) * du;
      case Op::Sqrt: return du / (Expr(2.0) * e);
      default: break;
    }
  }
  const Expr v = e.rhs();
  const Expr du = derive(u, var);
  const Expr dv = derive(v, var);
  switch (e.op()) {
    case Op::Add: return du + dv;
    case Op::Sub: return du - dv;
    case Op::Mul: return du * v + u * dv;
    case Op::Div: return (du * v - u * dv) / pow(v, Expr(2.0));
    case Op::Pow:
      if (!v.depends_on_variables()) {
        if (du.is_constant(0.0)) return Expr(0.0);
        return v * pow(u, v - Expr(1.0)) * du;
      }
      return e * (dv * ln(u) + v * du / u);
    default: break;
  }
  throw Error("derive: unexpected node");
}

/// Replaces every x_{i+1} by replacements[i].
inline Expr substitute(const Expr& e, std::span<const Expr> replacements) {
  switch (e.op()) {
    case Op::Const: return e;
    case Op::Var: {
      auto i = static_cast<std::size_t>(e.variable_index());
      if (i >= replacements.size()) throw UnknownVariable("substitute: x" + std::to_string(i + 1) + " unbound");
      return replacements[i];
    }
    default: break;
  }
  if (is_unary(e.op())) return Expr::unary(e.op(), substitute(e.lhs(), replacements));
  return Expr::binary(e.op(), substitute(e.lhs(), replacements), substitute(e.rhs(), replacements));
}

/// c * x^alpha.
inline Expr monomial(double c, std::span<const int> alpha) {
  Expr m(c);
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] == 0) continue;
    m = m * pow(Expr::variable(static_cast<int>(i)), Expr(static_cast<double>(alpha[i])));
  }
  return m;
}

/// D^alpha e (0) by repeated symbolic differentiation.
inline double partial_at_zero(const Expr& e, std::span<const int> alpha) {
  if (!e.smooth_at_zero())
    throw NonsmoothInput("partial_at_zero: '" + to_string(e) + "' is not symbolically smooth at the origin");
  Expr d = e;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    for (int r = 0; r < alpha[i]; ++r) d = derive(d, static_cast<int>(i));
  std::vector<double> origin(std::max<std::size_t>(alpha.size(), static_cast<std::size_t>(e.dimension())), 0.0);
  return eval(d, origin);
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Const: return e.constant() < 0.0 ? 3 : 5;
    case Op::Var: return 5;
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;  // function calls
  }
}

inline const char* function_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Ln: return "ln";
    case Op::Abs: return "abs";
    case Op::Sqrt: return "sqrt";
    default: return "?";
  }
}

inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline void print(const Expr& e, std::string& out) {
  auto child = [&out](const Expr& c, bool paren) {
    if (paren) out += '(';
    print(c, out);
    if (paren) out += ')';
  };
  const int p = precedence(e);
  switch (e.op()) {
    case Op::Const: out += format_number(e.constant()); return;
    case Op::Var: out += 'x' + std::to_string(e.variable_index() + 1); return;
    case Op::Neg:
      out += '-';
      child(e.lhs(), precedence(e.lhs()) <= 3);
      return;
    case Op::Sin:
    case Op::Cos:
    case Op::Exp:
    case Op::Ln:
    case Op::Abs:
    case Op::Sqrt:
      out += function_name(e.op());
      child(e.lhs(), true);
      return;
    case Op::Pow:
      child(e.lhs(), precedence(e.lhs()) <= 4);
      out += '^';
      child(e.rhs(), precedence(e.rhs()) < 4);
      return;
    default: break;
  }
  child(e.lhs(), precedence(e.lhs()) < p);
  switch (e.op()) {
    case Op::Add: out += " + "; break;
    case Op::Sub: out += " - "; break;
    case Op::Mul: out += '*'; break;
    default: out += '/'; break;
  }
  child(e.rhs(), precedence(e.rhs()) <= p);
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
  std::string s;
  detail::print(e, s);
  return s;
}

// ---------------------------------------------------------------------------
// Parsing
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | variable | function '(' expr ')' | '(' expr ')'

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, int dim) : text_(text), dim_(dim) {}

  Expr parse() {
    Expr e = expression();
    skip_space();
    if (pos_ != text_.size()) fail("operator or end of input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& expected) const {
    std::string found = pos_ < text_.size() ? "'" + std::string(1, text_[pos_]) + "'" : "end of input";
    throw SyntaxError(pos_, expected, found);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr expression() {
    Expr e = term();
    for (;;) {
      if (accept('+')) e = e + term();
      else if (accept('-')) e = e - term();
      else return e;
    }
  }

  Expr term() {
    Expr e = unary();
    for (;;) {
      if (accept('*')) e = e * unary();
      else if (accept('/')) e = e / unary();
      else return e;
    }
  }

  Expr unary() {
    if (accept('-')) return -unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) return pow(base, unary());
    return base;
  }

  Expr primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("number, variable, function or '('");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expression();
      if (!accept(')')) fail("')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("number, variable, function or '('");
  }

  Expr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_, ++n;
      return n;
    };
    std::size_t n = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      n += digits();
    }
    if (n == 0) fail("digits");
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail("exponent digits");
    }
    double v = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || !std::isfinite(v)) {
      pos_ = start;
      fail("finite number");
    }
    return Expr(v);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);
    if (name.size() > 1 && name[0] == 'x' &&
        std::all_of(name.begin() + 1, name.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      int index = 0;
      std::from_chars(name.data() + 1, name.data() + name.size(), index);
      if (index < 1 || index > dim_)
        throw UnknownVariable("unknown variable '" + std::string(name) + "' (dimension " + std::to_string(dim_) + ")");
      return Expr::variable(index - 1);
    }
    Op op;
    if (name == "sin") op = Op::Sin;
    else if (name == "cos") op = Op::Cos;
    else if (name == "exp") op = Op::Exp;
    else if (name == "ln") op = Op::Ln;
    else if (name == "abs") op = Op::Abs;
    else if (name == "sqrt") op = Op::Sqrt;
    else {
      pos_ = start;
      fail("variable x1..x" + std::to_string(dim_) + " or function sin/cos/exp/ln/abs/sqrt");
    }
    if (!accept('(')) fail("'(' after " + std::string(name));
    Expr arg = expression();
    if (!accept(')')) fail("')'");
    return Expr::unary(op, arg);
  }

  std::string_view text_;
  int dim_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view text, int dim) { return detail::Parser(text, dim).parse(); }

// ---------------------------------------------------------------------------
// Flat postfix program for hot loops (flows, rescaling). Falls back to the
// tree evaluator to report domain errors with the offending node.

class CompiledExpr {
 public:
  CompiledExpr() : CompiledExpr(Expr(0.0)) {}

  explicit CompiledExpr(Expr e) : source_(std::move(e)) {
    int depth = 0;
    emit(source_, depth);
  }

  const Expr& source() const noexcept { return source_; }
  bool is_constant() const noexcept { return code_.size() == 1 && code_[0].op == Op::Const; }

  double operator()(std::span<const double> x) const {
    if (max_depth_ > static_cast<int>(kStack)) return eval(source_, x);
    std::array<double, kStack> stack{};
    int top = -1;
    bool ok = true;
    for (const Instr& in : code_) {
      switch (in.op) {
        case Op::Const: stack[static_cast<std::size_t>(++top)] = in.value; break;
        case Op::Var:
          if (static_cast<std::size_t>(in.var) >= x.size()) return eval(source_, x);
          stack[static_cast<std::size_t>(++top)] = x[static_cast<std::size_t>(in.var)];
          break;
        case Op::Add: --top; stack[static_cast<std::size_t>(top)] += stack[static_cast<std::size_t>(top + 1)]; break;
        case Op::Sub: --top; stack[static_cast<std::size_t>(top)] -= stack[static_cast<std::size_t>(top + 1)]; break;
        case Op::Mul: --top; stack[static_cast<std::size_t>(top)] *= stack[static_cast<std::size_t>(top + 1)]; break;
        default:
          if (is_unary(in.op)) {
            double& a = stack[static_cast<std::size_t>(top)];
            a = detail::apply_unary(in.op, a, ok);
          } else {
            --top;
            double& a = stack[static_cast<std::size_t>(top)];
            a = detail::apply_binary(in.op, a, stack[static_cast<std::size_t>(top + 1)], ok);
          }
      }
    }
    const double r = stack[0];
    if (!ok || !std::isfinite(r)) return eval(source_, x);
    return r;
  }

 private:
  static constexpr std::size_t kStack = 64;

  struct Instr {
    Op op;
    int var;
    double value;
  };

  void emit(const Expr& e, int& depth) {
    switch (e.op()) {
      case Op::Const:
        code_.push_back({Op::Const, -1, e.constant()});
        max_depth_ = std::max(max_depth_, ++depth);
        return;
      case Op::Var:
        code_.push_back({Op::Var, e.variable_index(), 0.0});
        max_depth_ = std::max(max_depth_, ++depth);
        return;
      default: break;
    }
    emit(e.lhs(), depth);
    if (is_binary(e.op())) {
      emit(e.rhs(), depth);
      --depth;
    }
    code_.push_back({e.op(), -1, 0.0});
  }

  Expr source_;
  std::vector<Instr> code_;
  int max_depth_ = 0;
};

}  // namespace carnot
