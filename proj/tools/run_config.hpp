#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gamma_elliptic/assembly.hpp"
#include "gamma_elliptic/surface_mesh.hpp"
#include "gamma_elliptic/verification.hpp"

namespace gamma_elliptic::cli {

enum class Task { Solve, Study, Check, Mesh, Export };

std::string to_string(Task task);
Task parse_task(const std::string& name);

using Parameters = std::map<std::string, double>;

// A scalar coefficient: an expression, or a named builtin with parameters.
struct ScalarSpec {
  std::string expression = "0";
  std::string builtin;
  Parameters params;

  bool operator==(const ScalarSpec&) const = default;
};

struct VectorSpec {
  std::array<std::string, 3> components{"0", "0", "0"};
  std::string builtin;
  Parameters params;

  bool operator==(const VectorSpec&) const = default;
};

using MatrixEntries = std::array<std::array<std::string, 3>, 3>;

// form: identity | scalar (expression times I) | identity-plus (I + entries)
//       | full (entries) | builtin
struct MatrixSpec {
  std::string form = "identity";
  std::string scalar = "1";
  MatrixEntries entries{{{"0", "0", "0"}, {"0", "0", "0"}, {"0", "0", "0"}}};
  std::string builtin;
  Parameters params;

  bool operator==(const MatrixSpec&) const = default;
};

struct CoefficientSpec {
  MatrixSpec A;
  VectorSpec b;
  VectorSpec c;
  ScalarSpec d;
  double ellipticity = 1.0;

  bool operator==(const CoefficientSpec&) const = default;
};

struct SurfaceConfig {
  MeshPreset preset = MeshPreset::SphereIcosahedral;
  double radius = 1.0;
  double major_radius = 2.0;
  double minor_radius = 1.0;
  int resolution = 2;

  bool operator==(const SurfaceConfig&) const = default;
};

struct SolverConfig {
  double tolerance = 1e-10;
  int max_iterations = 0;
  int threads = 1;
  double divfree_threshold = 0.1;

  bool operator==(const SolverConfig&) const = default;
};

struct StudyConfig {
  int levels = 4;
  int start_resolution = -1;
  std::vector<double> p_values;

  bool operator==(const StudyConfig&) const = default;
};

struct RunConfig {
  Task task = Task::Solve;
  SurfaceConfig surface;
  ProblemKind problem = ProblemKind::LaplaceBeltrami;
  // Named manufactured case; replaces surface parameters, coefficients,
  // load and exact solution (the resolution is still taken from `surface`).
  std::optional<std::string> builtin_case;
  CoefficientSpec coefficients;
  std::optional<std::string> load;
  std::optional<std::string> exact;
  SolverConfig solver;
  StudyConfig study;
  std::string output = "out";
  std::uint64_t seed = 20240611;
  bool override_conditions = false;
  bool deterministic = false;

  bool operator==(const RunConfig&) const = default;
};

// Both throw ParseError (position 0 when the YAML layer has no better one)
// for malformed text, unknown keys, bad values or violated invariants.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string emit_run_config(const RunConfig& config);

AmbientScalarField build_scalar(const ScalarSpec& spec);
AmbientVectorField build_vector(const VectorSpec& spec);
AmbientMatrixField build_matrix(const MatrixSpec& spec);
CoefficientSet build_coefficients(const CoefficientSpec& spec);

// Expression text behind each spec, after expanding builtins.
std::string scalar_expression(const ScalarSpec& spec);
std::array<std::string, 3> vector_expressions(const VectorSpec& spec);
MatrixEntries matrix_expressions(const MatrixSpec& spec);

SurfaceSpec surface_spec(const SurfaceConfig& surface);

}  // namespace gamma_elliptic::cli
