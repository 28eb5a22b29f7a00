#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gamma_elliptic/fields.hpp"

namespace gamma_elliptic {

// Axis-aligned parameter box; periodic axes wrap with period upper - lower.
struct ParameterBox {
  Vector lower;
  Vector upper;
  std::vector<bool> periodic;
};

// second[k](i, j) = d^2 chi_k / (dy_i dy_j), one d x d block per ambient component.
using SecondDerivatives = std::vector<Matrix>;

/// Analytic parametrization chi: V subset R^d -> R^{d+1} of a patch of the
/// surface, with its Jacobian and (optionally) its second derivatives.
///
/// When no analytic second derivatives are supplied, second_derivatives()
/// falls back to central differences of the Jacobian with step
/// cbrt(eps) * max(1, |y_j|). The orientation flag multiplies the normal
/// built from the Jacobian minors so that charts can be made outward.
class Chart {
 public:
  using MapFn = std::function<Vector(const Vector&)>;
  using JacobianFn = std::function<Matrix(const Vector&)>;
  using HessianFn = std::function<SecondDerivatives(const Vector&)>;
  using InverseFn = std::function<Vector(const Vector&)>;

  Chart(std::string label, ParameterBox box, MapFn map, JacobianFn jacobian,
        HessianFn hessian = {}, int orientation = 1, InverseFn inverse = {});

  const std::string& label() const { return label_; }
  int dimension() const { return static_cast<int>(box_.lower.size()); }
  int ambient_dimension() const { return dimension() + 1; }
  int orientation() const { return orientation_; }
  const ParameterBox& box() const { return box_; }

  // Wraps periodic axes into the box; throws DomainError off the box.
  Vector wrap(const Vector& y) const;
  bool contains(const Vector& y) const;

  Vector point(const Vector& y) const;
  Matrix jacobian(const Vector& y) const;
  SecondDerivatives second_derivatives(const Vector& y) const;
  SecondDerivatives finite_difference_second_derivatives(const Vector& y) const;
  bool has_analytic_second_derivatives() const { return static_cast<bool>(hessian_); }

  bool has_inverse() const { return static_cast<bool>(inverse_); }
  // Parameter of a point on the chart image (no validation of x).
  Vector inverse(const Vector& x) const;

  // Same chart with the analytic second derivatives dropped.
  Chart without_second_derivatives() const;

 private:
  std::string label_;
  ParameterBox box_;
  MapFn map_;
  JacobianFn jacobian_;
  HessianFn hessian_;
  int orientation_;
  InverseFn inverse_;
};

/// Finite atlas plus a closest-point projector onto the surface.
class Atlas {
 public:
  using ProjectorFn = std::function<Vector(const Vector&)>;

  struct Location {
    std::size_t chart;
    Vector parameter;
  };

  Atlas(std::vector<Chart> charts, ProjectorFn projector, std::string name = {});

  const std::vector<Chart>& charts() const { return charts_; }
  const Chart& chart(std::size_t i) const { return charts_.at(i); }
  int dimension() const { return charts_.front().dimension(); }
  const std::string& name() const { return name_; }

  Vector project(const Vector& x) const { return projector_(x); }

  // Chart and parameter of the projection of x, choosing among the charts
  // whose inverse is available the one with the best-conditioned Jacobian.
  Location locate(const Vector& x) const;

 private:
  std::vector<Chart> charts_;
  ProjectorFn projector_;
  std::string name_;
};

// Plane x3 = 0 with chi(y) = (y1, y2, 0) on [-10, 10]^2.
Chart make_plane_chart();
// Polar chart of the sphere of the given radius about coordinate axis
// `axis` (2: usual (theta, phi) about x3; 0: about x1). theta in [0, pi],
// phi periodic in [0, 2 pi).
Chart make_sphere_polar_chart(double radius = 1.0, int axis = 2);
// chi(theta, phi) = ((R + r cos theta) cos phi, (R + r cos theta) sin phi, r sin theta),
// doubly periodic, oriented outward.
Chart make_torus_chart(double major_radius = 2.0, double minor_radius = 1.0);

Atlas make_sphere_atlas(double radius = 1.0);
Atlas make_torus_atlas(double major_radius = 2.0, double minor_radius = 1.0);

// Scalar function of the parameter y with optional derivatives.
struct ParametricScalarField {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

// Vector function of y with values in R^{d+1}; jacobian(y) is (d+1) x d.
struct ParametricVectorField {
  std::function<Vector(const Vector&)> value;
  std::function<Matrix(const Vector&)> jacobian;
};

// v o chi with chain-rule derivatives (second derivatives need the
// chart's second derivatives and the field's Hessian).
ParametricScalarField pull_back(const Chart& chart, const AmbientScalarField& field);
ParametricVectorField pull_back(const Chart& chart, const AmbientVectorField& field);

/// Quantities of the first fundamental form at one parameter point.
struct LocalFrame {
  Matrix jacobian;        // (d+1) x d
  Matrix metric;          // g = J^T J
  Matrix metric_inverse;  // g^{-1}
  double area_element = 0.0;
  Vector normal;          // outward unit normal
};

// Throws DomainError / DegeneracyError. Rank deficiency is declared when
// sigma_min(J) < 1e-10 sigma_max(J).
LocalFrame local_frame(const Chart& chart, const Vector& y);

Matrix metric_tensor(const Chart& chart, const Vector& y);
double area_element(const Chart& chart, const Vector& y);
Vector unit_normal(const Chart& chart, const Vector& y);
// I - nu nu^T.
Matrix tangential_projection(const Chart& chart, const Vector& y);
// J g^{-1} J^T; equal to tangential_projection up to rounding.
Matrix tangential_projection_parametric(const Chart& chart, const Vector& y);

Vector surface_gradient(const Chart& chart, const ParametricScalarField& field, const Vector& y);
double surface_divergence(const Chart& chart, const ParametricVectorField& field, const Vector& y);
double laplace_beltrami_apply(const Chart& chart, const ParametricScalarField& field,
                              const Vector& y);

// d nu / d y_j as the columns of a (d+1) x d matrix.
Matrix normal_derivatives(const Chart& chart, const Vector& y);
// B = grad_M nu, (d+1) x (d+1).
Matrix shape_operator(const Chart& chart, const Vector& y);

// g^{-1} J^T v for a tangential v (ContractError if |P v - v| > 1e-8 max(1, |v|)).
Vector tangential_components(const Chart& chart, const Vector& v, const Vector& y);

}  // namespace gamma_elliptic
