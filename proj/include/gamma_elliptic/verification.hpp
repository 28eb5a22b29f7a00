#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gamma_elliptic/assembly.hpp"
#include "gamma_elliptic/geometry.hpp"
#include "gamma_elliptic/solvers.hpp"
#include "gamma_elliptic/surface_mesh.hpp"

namespace gamma_elliptic {

enum class ProblemKind { LaplaceBeltrami, General, DivFree, Biharmonic };

std::string to_string(ProblemKind kind);
ProblemKind parse_problem_kind(const std::string& name);

struct SurfaceSpec {
  MeshPreset preset = MeshPreset::SphereIcosahedral;
  double radius = 1.0;          // sphere
  double major_radius = 2.0;    // torus
  double minor_radius = 1.0;

  Atlas atlas() const;
};

/// Exact solution u*, the derived load f and the coefficients it was derived with.
struct ManufacturedCase {
  std::string name;
  SurfaceSpec surface;
  ProblemKind problem = ProblemKind::LaplaceBeltrami;
  AmbientScalarField exact;
  AmbientScalarField load;  // evaluated as f(p(x)) off the surface
  CoefficientSet coefficients;
  std::uint64_t seed = 0;
  // Largest disagreement between the analytic and finite-difference routes
  // at the sample points, relative to max(1, max |f|).
  double oracle_discrepancy = 0.0;
};

/// Value of f = -div(P(A grad u + u b)) + c . grad u + d u at a surface point,
/// from the chain rule on a chart with the supplied ambient derivatives.
double apply_operator_analytic(const Atlas& atlas, const AmbientScalarField& u,
                               const CoefficientSet& coefficients, const Vector& x);
/// The same quantity from nested fourth-order central differences of the
/// chart pull-backs; uses values of u, A, b, c, d only.
double apply_operator_finite_difference(const Atlas& atlas, const AmbientScalarField& u,
                                        const CoefficientSet& coefficients, const Vector& x);

// Random surface points drawn from the first chart away from its box edges.
std::vector<Vector> sample_surface_points(const Atlas& atlas, std::size_t count, std::uint64_t seed);

/// Derives f from u* for the given problem and checks the two routes against
/// each other at 50 seeded random points (relative tolerance 1e-6). For the
/// Laplace-Beltrami and div-free problems b and d are ignored (and c too for
/// Laplace-Beltrami). Throws ManufacturingError on disagreement.
ManufacturedCase manufacture(const SurfaceSpec& surface, ProblemKind problem, const AmbientScalarField& exact,
                             const CoefficientSet& coefficients, std::string name = {},
                             std::uint64_t seed = 20240611);

/// Biharmonic case: checks -Delta u* = w* at the samples by both routes and
/// sets f = -Delta w*.
ManufacturedCase manufacture_biharmonic(const SurfaceSpec& surface, const AmbientScalarField& exact,
                                        const AmbientScalarField& intermediate, std::string name = {},
                                        std::uint64_t seed = 20240611);

// Named cases used by the CLI and the acceptance suite:
// sphere-eigen, sphere-eigen-quadratic, sphere-reaction, sphere-divfree,
// sphere-biharmonic, torus-general, zero.
ManufacturedCase builtin_case(const std::string& name);
std::vector<std::string> builtin_case_names();

struct RateWindow {
  double low;
  double high;
};

struct ConvergenceLevel {
  int level = 0;
  double h = 0.0;
  std::size_t dofs = 0;
  double error_l2 = 0.0;
  double error_h1 = 0.0;
  double error_energy = 0.0;
  double solve_seconds = 0.0;
  int iterations = 0;
};

struct ConvergenceReport {
  std::string case_name;
  std::string problem;
  std::uint64_t seed = 0;
  std::vector<ConvergenceLevel> levels;
  std::optional<double> rate_l2;
  std::optional<double> rate_h1;
  RateWindow l2_window{1.9, 2.1};
  RateWindow h1_window{0.9, 1.1};
  bool passed = false;
  std::optional<std::string> failure;

  nlohmann::json to_json() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct StudyOptions {
  int levels = 4;
  int start_resolution = -1;  // -1: 2 for the sphere, 1 for the torus
  SolverOptions solver{};
  bool override_conditions = true;
  int threads = 1;  // levels solved concurrently
};

// Least-squares slope of log(error) against log(h).
double fitted_rate(const std::vector<double>& h, const std::vector<double>& error);

// Errors of a discrete solution against u*: L2 of u_h - I_h u* in the mass
// norm, H1 with the broken gradient against the exact tangential gradient at
// projected quadrature points, and the energy error with A.
struct DiscreteErrors {
  double l2 = 0.0;
  double h1 = 0.0;
  double energy = 0.0;
};
DiscreteErrors measure_errors(const SurfaceMesh& mesh, const Atlas& atlas, const DiscreteField& uh,
                              const AmbientScalarField& exact, const AmbientMatrixField& A, bool mean_zero);

SolveReport solve_case(const ManufacturedCase& c, const SurfaceMesh& mesh, const SolverOptions& options,
                       bool override_conditions = true);

/// Solves the case on successive midpoint refinements and fits rates.
/// Needs levels >= 3; a solver failure stops the study and is recorded in
/// the (partial) report.
ConvergenceReport convergence_study(const ManufacturedCase& c, const StudyOptions& options = {});

struct IbpResult {
  double divergence_term = 0.0;  // int u div phi
  double gradient_term = 0.0;    // int grad u . phi
  double curvature_term = 0.0;   // int tr(B) u phi . nu
  double residual = 0.0;         // |div + grad - curvature|
};

/// Three-term integration-by-parts identity evaluated with exact-surface
/// quantities at the projected quadrature points of the mesh.
IbpResult ibp_residual_test(const SurfaceMesh& mesh, const Atlas& atlas, const AmbientScalarField& u,
                            const AmbientVectorField& phi);

struct LpStabilityRow {
  int level = 0;
  double h = 0.0;
  double p = 0.0;
  double ratio = 0.0;  // ||u_h||_{1,p} / ||f||_{0,p}
};

struct LpStabilityReport {
  std::vector<LpStabilityRow> rows;
  std::vector<double> p_values;
  std::vector<double> spread;  // max / min ratio over levels, per p

  nlohmann::json to_json() const;
};

LpStabilityReport lp_stability_sweep(const ManufacturedCase& c, const std::vector<double>& p_values,
                                     const StudyOptions& options = {});

// ||f||_{0,p} on the mesh with the three-point rule.
double load_norm(const SurfaceMesh& mesh, const AmbientScalarField& f, double p);

}  // namespace gamma_elliptic
