#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include <Eigen/Sparse>

#include "gamma_elliptic/fields.hpp"
#include "gamma_elliptic/surface_mesh.hpp"

namespace gamma_elliptic {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Coefficients (A, b, c, d) of
///   -div(A grad u + u b) + c . grad u + d u = f
/// together with the claimed tangential ellipticity constant of A.
///
/// With project_tangential set, b and c are replaced by P b and P c and A by
/// P A P + (I - P) at every quadrature point, P being the projection onto the
/// element plane. P1 gradients are tangent to the element, so the assembled
/// forms are the same either way; the flag controls what the checkers see.
struct CoefficientSet {
  AmbientMatrixField A = AmbientMatrixField::identity();
  AmbientVectorField b = AmbientVectorField::zero();
  AmbientVectorField c = AmbientVectorField::zero();
  AmbientScalarField d = AmbientScalarField::constant(0.0);
  double ellipticity = 1.0;
  bool project_tangential = true;

  // (A^T, c, b, d): the coefficients of the adjoint problem.
  CoefficientSet adjoint() const;
};

/// Vertex values of a continuous piecewise-linear function.
struct DiscreteField {
  Eigen::VectorXd values;
  std::uint64_t mesh_id = 0;

  static DiscreteField on(const SurfaceMesh& mesh, Eigen::VectorXd values);
  // Checks finiteness and that the field belongs to `mesh`.
  void check(const SurfaceMesh& mesh) const;
};

DiscreteField interpolate(const SurfaceMesh& mesh, const AmbientScalarField& field);

/// A linear system, optionally carrying a mean-value constraint row.
/// The constrained system is the saddle point
///   [ T  m ] [u]   [rhs]
///   [ m' 0 ] [l] = [ 0 ]
/// with m = M_1 * 1 (consistent mass weights).
struct SparseSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  std::optional<Eigen::VectorXd> constraint;

  void validate() const;
};

struct AssemblyOptions {
  // Worker threads for the element loop; 0 picks the hardware concurrency.
  // The result is bitwise identical for any thread count.
  int threads = 1;
  // Stiffness assembly rejects A whose tangential symmetric part has an
  // eigenvalue <= this floor at some quadrature point.
  double ellipticity_floor = 0.0;
  bool project_tangential = true;
};

// Symmetric three-point rule, exact for quadratics on a triangle.
struct QuadraturePoint {
  std::array<double, 3> barycentric;
  double weight;  // fraction of the triangle area
};
const std::array<QuadraturePoint, 3>& triangle_quadrature();

using ElementVertices = std::array<Point3, 3>;

ElementGeometry element_geometry(const ElementVertices& vertices);
ElementVertices element_vertices(const SurfaceMesh& mesh, std::size_t triangle);
Point3 quadrature_location(const ElementVertices& vertices, const QuadraturePoint& q);

// Smallest eigenvalue of the symmetric part of A restricted to the plane
// with the given unit normal.
double tangential_ellipticity(const Eigen::Matrix3d& a, const Point3& normal);

// Element matrices: entry (i, j) pairs test function i with trial function j.
Eigen::Matrix3d element_stiffness(const ElementVertices& v, const AmbientMatrixField& A,
                                  const AssemblyOptions& options = {});
Eigen::Matrix3d element_convection_b(const ElementVertices& v, const AmbientVectorField& b,
                                     const AssemblyOptions& options = {});
Eigen::Matrix3d element_convection_c(const ElementVertices& v, const AmbientVectorField& c,
                                     const AssemblyOptions& options = {});
Eigen::Matrix3d element_mass(const ElementVertices& v, const AmbientScalarField& d);

// K_ij = int A grad phi_j . grad phi_i
SparseMatrix assemble_stiffness(const SurfaceMesh& mesh, const AmbientMatrixField& A,
                                const AssemblyOptions& options = {});
// (G_b)_ij = int phi_j (b . grad phi_i)
SparseMatrix assemble_convection_b(const SurfaceMesh& mesh, const AmbientVectorField& b,
                                   const AssemblyOptions& options = {});
// (G_c)_ij = int (c . grad phi_j) phi_i
SparseMatrix assemble_convection_c(const SurfaceMesh& mesh, const AmbientVectorField& c,
                                   const AssemblyOptions& options = {});
// (M_d)_ij = int d phi_j phi_i
SparseMatrix assemble_mass(const SurfaceMesh& mesh, const AmbientScalarField& d,
                           const AssemblyOptions& options = {});
SparseMatrix assemble_mass(const SurfaceMesh& mesh, const AssemblyOptions& options = {});

// K_A + G_b + G_c + M_d. Also rejects A when its sampled tangential
// ellipticity falls below 0.9 * coefficients.ellipticity.
SparseMatrix assemble_operator(const SurfaceMesh& mesh, const CoefficientSet& coefficients,
                               const AssemblyOptions& options = {});

// int f phi_i
Eigen::VectorXd assemble_load(const SurfaceMesh& mesh, const AmbientScalarField& f,
                              const AssemblyOptions& options = {});
// -int F . grad phi_i (divergence-form data)
Eigen::VectorXd assemble_load_div(const SurfaceMesh& mesh, const AmbientVectorField& F,
                                  const AssemblyOptions& options = {});
// M_1 u for a vertex field (load of a discrete function).
Eigen::VectorXd assemble_load(const SurfaceMesh& mesh, const DiscreteField& u);

// M_1 * 1; sums to the mesh area.
Eigen::VectorXd mass_weights(const SurfaceMesh& mesh);

/// Discrete W^{m,p} norm (||u||_{0,p}^p + m ||grad u||_{0,p}^p)^{1/p}, m in {0, 1},
/// p > 1. The L^p part uses the three-point rule (exact for p = 2).
double discrete_norm(const SurfaceMesh& mesh, const DiscreteField& u, int m, double p);

// int u_h over the mesh (unnormalized); equals 1' M_1 u.
double mean_value(const SurfaceMesh& mesh, const DiscreteField& u);
// mean_value / area.
double average_value(const SurfaceMesh& mesh, const DiscreteField& u);

// Largest absolute entry of a sparse matrix.
double max_abs(const SparseMatrix& m);

}  // namespace gamma_elliptic
