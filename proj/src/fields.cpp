#include "gamma_elliptic/fields.hpp"

#include <cmath>
#include <limits>

namespace gamma_elliptic {

AmbientScalarField AmbientScalarField::constant(double c, int ambient_dim) {
  AmbientScalarField f;
  f.value = [c](const Vector&) { return c; };
  f.gradient = [ambient_dim](const Vector&) { return Vector::Zero(ambient_dim).eval(); };
  f.hessian = [ambient_dim](const Vector&) {
    return Matrix::Zero(ambient_dim, ambient_dim).eval();
  };
  return f;
}

AmbientVectorField AmbientVectorField::constant(const Vector& c) {
  AmbientVectorField f;
  const auto n = c.size();
  f.value = [c](const Vector&) { return c; };
  f.jacobian = [n](const Vector&) { return Matrix::Zero(n, n).eval(); };
  return f;
}

AmbientVectorField AmbientVectorField::zero(int ambient_dim) {
  return constant(Vector::Zero(ambient_dim));
}

AmbientMatrixField AmbientMatrixField::constant(const Matrix& a) {
  AmbientMatrixField f;
  const auto n = a.rows();
  f.value = [a](const Vector&) { return a; };
  f.derivatives = [n](const Vector&) {
    return std::vector<Matrix>(static_cast<std::size_t>(n), Matrix::Zero(n, n));
  };
  return f;
}

AmbientMatrixField AmbientMatrixField::identity(int ambient_dim, double scale) {
  return constant(scale * Matrix::Identity(ambient_dim, ambient_dim));
}

std::vector<Matrix> finite_difference_derivatives(const AmbientMatrixField& a,
                                                  const Vector& x) {
  const double base = std::cbrt(std::numeric_limits<double>::epsilon());
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(x.size()));
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = base * std::max(1.0, std::abs(x[k]));
    Vector xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    out.push_back((a.value(xp) - a.value(xm)) / (2.0 * h));
  }
  return out;
}

}  // namespace gamma_elliptic
