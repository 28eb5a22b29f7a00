#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "gamma_elliptic/assembly.hpp"
#include "gamma_elliptic/krylov.hpp"

namespace gamma_elliptic {

struct SolverOptions {
  double tolerance = 1e-10;
  int max_iterations = 0;  // 0: 10 * unknowns
  AssemblyOptions assembly{};
  // Scalar-form loads for mean-zero problems must satisfy
  // |sum load| <= 1e-8 ||load||_1. With recenter_load the mean is removed
  // instead of rejecting the load.
  bool recenter_load = false;
  // Upper bound on the normalized div-free residual accepted by solve_divfree_cd,
  // relative to max |c| at the vertices.
  double divfree_threshold = 0.1;

  KrylovOptions krylov() const { return KrylovOptions{tolerance, max_iterations, 60}; }
};

struct SolveReport {
  DiscreteField solution;
  std::optional<double> multiplier;
  int iterations = 0;
  double residual = 0.0;  // final relative residual
  double wall_seconds = 0.0;
  bool converged = false;
  std::string method;
  // ||u_h||_{1,2} / ||load||, the load measured in the lumped dual L2 norm
  // sqrt(sum load_i^2 / m_i).
  double apriori_ratio = 0.0;
  // 1 - |u' G_c u| / u' K u for the convection-diffusion solve.
  std::optional<double> coercivity_margin;

  nlohmann::json to_json() const;
};

enum class Verdict { HoldsSufficiently, Violated, Inconclusive };

std::string to_string(Verdict verdict);

struct ReactionCheck {
  Verdict condition_a = Verdict::Inconclusive;  // tested with b
  Verdict condition_b = Verdict::Inconclusive;  // tested with c
  double lambda = 0.0;            // witness level: d >= lambda on M
  double witness_measure = 0.0;   // |M|
  double min_hat_integral_a = 0.0;
  double min_hat_integral_b = 0.0;
};

struct ConditionReport {
  double ellipticity = 0.0;
  Verdict ellipticity_verdict = Verdict::Inconclusive;
  ReactionCheck reaction;
  double divfree_residual = 0.0;
  double divfree_residual_normalized = 0.0;

  bool both_reaction_conditions_violated() const {
    return reaction.condition_a == Verdict::Violated && reaction.condition_b == Verdict::Violated;
  }
  // Which conditions failed, for reporting.
  std::string summary() const;
  nlohmann::json to_json() const;
};

/// Mean-zero -div(A grad u) = f via the saddle-point system with multiplier.
SolveReport solve_laplace_beltrami(const SurfaceMesh& mesh, const AmbientMatrixField& A,
                                   const AmbientScalarField& f, const SolverOptions& options = {});
// Divergence-form data: <f, v> = -int F . grad v.
SolveReport solve_laplace_beltrami(const SurfaceMesh& mesh, const AmbientMatrixField& A,
                                   const AmbientVectorField& F, const SolverOptions& options = {});
// Pre-assembled load vector (scalar form).
SolveReport solve_laplace_beltrami_load(const SurfaceMesh& mesh, const AmbientMatrixField& A,
                                        Eigen::VectorXd load, const SolverOptions& options = {});

struct GeneralSolveOptions {
  bool override_conditions = false;
  // Solve on the mean-zero subspace instead of the full space.
  bool mean_zero = false;
};

/// Full operator T(A, b, c, d) with a nonsymmetric Krylov solve. Throws
/// WellPosednessError when both reaction conditions are violated unless
/// overridden.
SolveReport solve_general_elliptic(const SurfaceMesh& mesh, const CoefficientSet& coefficients,
                                   const AmbientScalarField& f, const SolverOptions& options = {},
                                   const GeneralSolveOptions& general = {});

/// Mean-zero -div(A grad u) + c . grad u = f for a weakly div-free c.
SolveReport solve_divfree_cd(const SurfaceMesh& mesh, const AmbientMatrixField& A,
                             const AmbientVectorField& c, const AmbientScalarField& f,
                             const SolverOptions& options = {});

/// Delta^2 u = f by two mean-zero Laplace-Beltrami solves: -Delta w = f, then
/// -Delta u = w with w re-centered in between.
SolveReport solve_biharmonic(const SurfaceMesh& mesh, const AmbientScalarField& f,
                             const SolverOptions& options = {});

/// Minimum over sampled quadrature points of the smallest eigenvalue of the
/// symmetric part of A on the element tangent plane. `samples` triangles are
/// visited with a uniform stride (all when samples >= triangle count).
double check_ellipticity(const CoefficientSet& coefficients, const SurfaceMesh& mesh, std::size_t samples);

ReactionCheck check_reaction_condition(const CoefficientSet& coefficients, const SurfaceMesh& mesh);

struct DivFreeResidual {
  double max_abs = 0.0;     // max_i |int c . grad phi_i|
  double normalized = 0.0;  // max_i |int c . grad phi_i| / int phi_i
};

DivFreeResidual div_free_residual(const SurfaceMesh& mesh, const AmbientVectorField& c);
// max_i |int c . grad phi_i|
double check_div_free(const SurfaceMesh& mesh, const AmbientVectorField& c);

ConditionReport check_conditions(const CoefficientSet& coefficients, const SurfaceMesh& mesh);

struct InfSupEstimate {
  double alpha = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Smallest generalized singular value of Y^{-1/2} T X^{-1/2} by inverse
/// iteration on T' Y^{-1} T w = sigma^2 X w. With a constraint vector m the
/// iteration runs on {w : m' w = 0}, all solves being saddle-point solves.
InfSupEstimate estimate_inf_sup(const SparseMatrix& t, const SparseMatrix& x, const SparseMatrix& y,
                                const std::optional<Eigen::VectorXd>& constraint = std::nullopt,
                                int max_iterations = 200, double tolerance = 1e-8);

struct FredholmResult {
  double smallest_singular_value = 0.0;
  double norm_estimate = 0.0;  // ||T||_2 by power iteration
  Eigen::VectorXd kernel;      // unit singular vector
  double kernel_variation = 0.0;  // std / |mean| of the kernel candidate
  // Next singular value, from the same iteration deflated against `kernel`.
  double second_singular_value = 0.0;
  int iterations = 0;
};

/// Smallest singular value of a square T by inverse iteration on T'T using a
/// sparse LU factorization of T.
FredholmResult fredholm_kernel(const SparseMatrix& t, int max_iterations = 100);

// Coefficient of variation std / |mean|; infinity for zero mean.
double coefficient_of_variation(const Eigen::VectorXd& v);

}  // namespace gamma_elliptic
