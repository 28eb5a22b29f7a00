#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "gamma_elliptic/fields.hpp"

namespace gamma_elliptic {

/// Symbolic scalar expression over the ambient coordinates x1, x2, x3, ...
///
/// Grammar (whitespace ignored):
///
///     expr    := term (('+' | '-') term)*
///     term    := unary (('*' | '/') unary)*
///     unary   := ('+' | '-') unary | power
///     power   := primary ('^' unary)?
///     primary := number | 'pi' | 'x' digit+ | func '(' args ')' | '(' expr ')'
///     func    := sin | cos | exp | sqrt | log | step | max
///
/// `^` is right-associative and binds tighter than unary minus, so
/// `-x1^2` is `-(x1^2)`. `step(a)` is 1 for a >= 0 and 0 otherwise; it is
/// what the derivative of `max` is written in terms of.
class Expression {
 public:
  struct Node;

  Expression();  // the constant 0

  static Expression parse(std::string_view text);
  static Expression constant(double value);
  static Expression variable(int index);  // 0-based: variable(0) is x1

  double evaluate(const Vector& x) const;
  Expression derivative(int index) const;

  // Round-trips through parse() for every expression parse() can produce.
  std::string to_string() const;

  std::optional<double> constant_value() const;
  // Largest variable index referenced plus one (0 for constants).
  int variable_count() const;

  friend Expression operator+(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a, const Expression& b);
  friend Expression operator*(const Expression& a, const Expression& b);
  friend Expression operator/(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a);

  const std::shared_ptr<const Node>& root() const { return root_; }

 private:
  explicit Expression(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

  std::shared_ptr<const Node> root_;

  friend struct ExpressionBuilder;
};

// Fields whose derivatives come from symbolic differentiation of the tree.
AmbientScalarField make_scalar_field(const Expression& e, int ambient_dim = 3);
AmbientVectorField make_vector_field(const std::array<Expression, 3>& e);
AmbientMatrixField make_matrix_field(const std::array<std::array<Expression, 3>, 3>& e);

}  // namespace gamma_elliptic
