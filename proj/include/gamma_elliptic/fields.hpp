#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace gamma_elliptic {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Scalar field on the ambient space R^{d+1}. Derivatives are optional;
// operations that need them check has_gradient()/has_hessian().
struct AmbientScalarField {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;

  double operator()(const Vector& x) const { return value(x); }
  bool has_gradient() const { return static_cast<bool>(gradient); }
  bool has_hessian() const { return static_cast<bool>(hessian); }

  static AmbientScalarField constant(double c, int ambient_dim = 3);
};

// Vector field on R^{d+1}; jacobian(x)(i, k) = d v_i / d x_k.
struct AmbientVectorField {
  std::function<Vector(const Vector&)> value;
  std::function<Matrix(const Vector&)> jacobian;

  Vector operator()(const Vector& x) const { return value(x); }
  bool has_jacobian() const { return static_cast<bool>(jacobian); }

  static AmbientVectorField constant(const Vector& c);
  static AmbientVectorField zero(int ambient_dim = 3);
};

// Matrix field on R^{d+1}; derivatives(x)[k] = dA/dx_k.
struct AmbientMatrixField {
  std::function<Matrix(const Vector&)> value;
  std::function<std::vector<Matrix>(const Vector&)> derivatives;

  Matrix operator()(const Vector& x) const { return value(x); }
  bool has_derivatives() const { return static_cast<bool>(derivatives); }

  static AmbientMatrixField constant(const Matrix& a);
  static AmbientMatrixField identity(int ambient_dim = 3, double scale = 1.0);
};

// Central-difference derivatives of an ambient matrix field, used when no
// analytic derivative was supplied.
std::vector<Matrix> finite_difference_derivatives(const AmbientMatrixField& a,
                                                  const Vector& x);

}  // namespace gamma_elliptic
