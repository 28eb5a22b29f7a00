#include "gamma_elliptic/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "gamma_elliptic/errors.hpp"

namespace gamma_elliptic {

enum class Op { Constant, Variable, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Sqrt, Log, Step, Max };

struct Expression::Node {
  Op op = Op::Constant;
  double value = 0.0;
  int index = 0;
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

using NodePtr = std::shared_ptr<const Expression::Node>;

namespace {

NodePtr leaf(double v) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::Constant;
  n->value = v;
  return n;
}

NodePtr var(int index) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::Variable;
  n->index = index;
  return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == Op::Constant && n->value == v; }

double apply(Op op, double a, double b) {
  switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    case Op::Pow: return std::pow(a, b);
    case Op::Neg: return -a;
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Exp: return std::exp(a);
    case Op::Sqrt: return std::sqrt(a);
    case Op::Log: return std::log(a);
    case Op::Step: return a >= 0.0 ? 1.0 : 0.0;
    case Op::Max: return std::max(a, b);
    default: return 0.0;
  }
}

// Builders fold constants and drop neutral elements so derivative trees
// stay small.
NodePtr make(Op op, NodePtr a, NodePtr b = nullptr) {
  if (a->op == Op::Constant && (!b || b->op == Op::Constant)) {
    return leaf(apply(op, a->value, b ? b->value : 0.0));
  }
  switch (op) {
    case Op::Add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case Op::Sub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return make(Op::Neg, b);
      break;
    case Op::Mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return leaf(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      break;
    case Op::Div:
      if (is_const(a, 0.0)) return leaf(0.0);
      if (is_const(b, 1.0)) return a;
      break;
    case Op::Pow:
      if (is_const(b, 1.0)) return a;
      if (is_const(b, 0.0)) return leaf(1.0);
      break;
    case Op::Neg:
      if (a->op == Op::Neg) return a->a;
      break;
    default:
      break;
  }
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

double eval(const Expression::Node& n, const Vector& x) {
  switch (n.op) {
    case Op::Constant: return n.value;
    case Op::Variable: return n.index < x.size() ? x[n.index] : 0.0;
    default: break;
  }
  const double a = eval(*n.a, x);
  const double b = n.b ? eval(*n.b, x) : 0.0;
  return apply(n.op, a, b);
}

NodePtr diff(const NodePtr& n, int k) {
  const auto& a = n->a;
  const auto& b = n->b;
  switch (n->op) {
    case Op::Constant: return leaf(0.0);
    case Op::Variable: return leaf(n->index == k ? 1.0 : 0.0);
    case Op::Add: return make(Op::Add, diff(a, k), diff(b, k));
    case Op::Sub: return make(Op::Sub, diff(a, k), diff(b, k));
    case Op::Neg: return make(Op::Neg, diff(a, k));
    case Op::Mul:
      return make(Op::Add, make(Op::Mul, diff(a, k), b), make(Op::Mul, a, diff(b, k)));
    case Op::Div:
      // (a/b)' = a'/b - a b' / b^2
      return make(Op::Sub, make(Op::Div, diff(a, k), b),
                  make(Op::Div, make(Op::Mul, a, diff(b, k)), make(Op::Mul, b, b)));
    case Op::Pow: {
      if (b->op == Op::Constant) {
        return make(Op::Mul, make(Op::Mul, leaf(b->value), make(Op::Pow, a, leaf(b->value - 1.0))),
                    diff(a, k));
      }
      // a^b (b' log a + b a'/a)
      auto term = make(Op::Add, make(Op::Mul, diff(b, k), make(Op::Log, a)),
                       make(Op::Div, make(Op::Mul, b, diff(a, k)), a));
      return make(Op::Mul, n, term);
    }
    case Op::Sin: return make(Op::Mul, make(Op::Cos, a), diff(a, k));
    case Op::Cos: return make(Op::Neg, make(Op::Mul, make(Op::Sin, a), diff(a, k)));
    case Op::Exp: return make(Op::Mul, n, diff(a, k));
    case Op::Sqrt: return make(Op::Div, diff(a, k), make(Op::Mul, leaf(2.0), n));
    case Op::Log: return make(Op::Div, diff(a, k), a);
    case Op::Step: return leaf(0.0);
    case Op::Max: {
      auto s = make(Op::Step, make(Op::Sub, a, b));
      return make(Op::Add, make(Op::Mul, s, diff(a, k)),
                  make(Op::Mul, make(Op::Sub, leaf(1.0), s), diff(b, k)));
    }
  }
  return leaf(0.0);
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (v < 0.0) s = "(" + s + ")";
  return s;
}

const char* function_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Sqrt: return "sqrt";
    case Op::Log: return "log";
    case Op::Step: return "step";
    case Op::Max: return "max";
    default: return "";
  }
}

// Fully parenthesized output; unambiguous and cheap to reparse.
std::string print(const Expression::Node& n) {
  switch (n.op) {
    case Op::Constant: return format_number(n.value);
    case Op::Variable: return "x" + std::to_string(n.index + 1);
    case Op::Add: return "(" + print(*n.a) + " + " + print(*n.b) + ")";
    case Op::Sub: return "(" + print(*n.a) + " - " + print(*n.b) + ")";
    case Op::Mul: return "(" + print(*n.a) + " * " + print(*n.b) + ")";
    case Op::Div: return "(" + print(*n.a) + " / " + print(*n.b) + ")";
    case Op::Pow: return "(" + print(*n.a) + " ^ " + print(*n.b) + ")";
    case Op::Neg: return "(-" + print(*n.a) + ")";
    case Op::Max: return "max(" + print(*n.a) + ", " + print(*n.b) + ")";
    default: return std::string(function_name(n.op)) + "(" + print(*n.a) + ")";
  }
}

int max_variable(const Expression::Node& n) {
  if (n.op == Op::Variable) return n.index + 1;
  int m = 0;
  if (n.a) m = std::max(m, max_variable(*n.a));
  if (n.b) m = std::max(m, max_variable(*n.b));
  return m;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    auto e = expr();
    skip();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr expr() {
    auto lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make(Op::Add, lhs, term());
      } else if (accept('-')) {
        lhs = make(Op::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(Op::Mul, lhs, unary());
      } else if (accept('/')) {
        lhs = make(Op::Div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (accept('^')) return make(Op::Pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
    if (ec != std::errc()) fail("malformed number");
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    if (pos_ == start) fail("malformed number");
    return leaf(v);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(text_.substr(start, pos_ - start));
    if (name == "pi") return leaf(std::numbers::pi);
    if (name.size() >= 2 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      const int index = std::stoi(name.substr(1));
      if (index < 1) {
        pos_ = start;
        fail("variable index must start at 1: '" + name + "'");
      }
      return var(index - 1);
    }
    static const std::array<std::pair<const char*, Op>, 7> functions{{
        {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"sqrt", Op::Sqrt},
        {"log", Op::Log}, {"step", Op::Step}, {"max", Op::Max}}};
    for (const auto& [fname, op] : functions) {
      if (name != fname) continue;
      expect('(');
      auto a = expr();
      NodePtr b;
      if (op == Op::Max) {
        expect(',');
        b = expr();
      }
      expect(')');
      return make(op, a, b);
    }
    pos_ = start;
    fail("unknown identifier '" + name + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression() : root_(leaf(0.0)) {}

Expression Expression::parse(std::string_view text) { return Expression(Parser(text).parse()); }

Expression Expression::constant(double value) { return Expression(leaf(value)); }

Expression Expression::variable(int index) { return Expression(var(index)); }

double Expression::evaluate(const Vector& x) const { return eval(*root_, x); }

Expression Expression::derivative(int index) const { return Expression(diff(root_, index)); }

std::string Expression::to_string() const { return print(*root_); }

std::optional<double> Expression::constant_value() const {
  if (root_->op == Op::Constant) return root_->value;
  return std::nullopt;
}

int Expression::variable_count() const { return max_variable(*root_); }

Expression operator+(const Expression& a, const Expression& b) {
  return Expression(make(Op::Add, a.root_, b.root_));
}
Expression operator-(const Expression& a, const Expression& b) {
  return Expression(make(Op::Sub, a.root_, b.root_));
}
Expression operator*(const Expression& a, const Expression& b) {
  return Expression(make(Op::Mul, a.root_, b.root_));
}
Expression operator/(const Expression& a, const Expression& b) {
  return Expression(make(Op::Div, a.root_, b.root_));
}
Expression operator-(const Expression& a) { return Expression(make(Op::Neg, a.root_)); }

AmbientScalarField make_scalar_field(const Expression& e, int ambient_dim) {
  std::vector<Expression> grad;
  std::vector<Expression> hess;
  for (int i = 0; i < ambient_dim; ++i) grad.push_back(e.derivative(i));
  for (int i = 0; i < ambient_dim; ++i) {
    for (int j = 0; j < ambient_dim; ++j) hess.push_back(grad[static_cast<std::size_t>(i)].derivative(j));
  }
  AmbientScalarField f;
  f.value = [e](const Vector& x) { return e.evaluate(x); };
  f.gradient = [grad, ambient_dim](const Vector& x) {
    Vector g(ambient_dim);
    for (int i = 0; i < ambient_dim; ++i) g[i] = grad[static_cast<std::size_t>(i)].evaluate(x);
    return g;
  };
  f.hessian = [hess, ambient_dim](const Vector& x) {
    Matrix h(ambient_dim, ambient_dim);
    for (int i = 0; i < ambient_dim; ++i) {
      for (int j = 0; j < ambient_dim; ++j) {
        h(i, j) = hess[static_cast<std::size_t>(i * ambient_dim + j)].evaluate(x);
      }
    }
    return h;
  };
  return f;
}

AmbientVectorField make_vector_field(const std::array<Expression, 3>& e) {
  std::array<std::array<Expression, 3>, 3> jac;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) jac[i][k] = e[i].derivative(k);
  }
  AmbientVectorField f;
  f.value = [e](const Vector& x) {
    Vector v(3);
    for (int i = 0; i < 3; ++i) v[i] = e[i].evaluate(x);
    return v;
  };
  f.jacobian = [jac](const Vector& x) {
    Matrix j(3, 3);
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 3; ++k) j(i, k) = jac[i][k].evaluate(x);
    }
    return j;
  };
  return f;
}

AmbientMatrixField make_matrix_field(const std::array<std::array<Expression, 3>, 3>& e) {
  std::array<std::array<std::array<Expression, 3>, 3>, 3> d;
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) d[k][i][j] = e[i][j].derivative(k);
    }
  }
  AmbientMatrixField f;
  f.value = [e](const Vector& x) {
    Matrix a(3, 3);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a(i, j) = e[i][j].evaluate(x);
    }
    return a;
  };
  f.derivatives = [d](const Vector& x) {
    std::vector<Matrix> out(3, Matrix(3, 3));
    for (int k = 0; k < 3; ++k) {
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) out[k](i, j) = d[k][i][j].evaluate(x);
      }
    }
    return out;
  };
  return f;
}

}  // namespace gamma_elliptic
