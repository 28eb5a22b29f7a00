#include "tasks.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "gamma_elliptic/errors.hpp"
#include "gamma_elliptic/expression.hpp"
#include "gamma_elliptic/io.hpp"
#include "gamma_elliptic/solvers.hpp"

namespace gamma_elliptic::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Problem {
  ManufacturedCase data;
  bool has_exact = false;
  bool has_load = false;
};

Problem make_problem(const RunConfig& cfg) {
  Problem p;
  if (cfg.builtin_case) {
    p.data = builtin_case(*cfg.builtin_case);
    p.has_exact = p.has_load = true;
    return p;
  }
  const SurfaceSpec surface = surface_spec(cfg.surface);
  const CoefficientSet coeffs = build_coefficients(cfg.coefficients);
  if (!cfg.load && cfg.exact) {
    if (cfg.problem == ProblemKind::Biharmonic) {
      throw ContractError("biharmonic runs need an explicit load or a builtin case");
    }
    p.data = manufacture(surface, cfg.problem, make_scalar_field(Expression::parse(*cfg.exact)), coeffs, "custom",
                         cfg.seed);
    p.has_exact = p.has_load = true;
    return p;
  }
  p.data.name = "custom";
  p.data.surface = surface;
  p.data.problem = cfg.problem;
  p.data.coefficients = coeffs;
  p.data.seed = cfg.seed;
  p.data.exact = AmbientScalarField::constant(0.0);
  p.data.load = AmbientScalarField::constant(0.0);
  if (cfg.load) {
    const auto f = make_scalar_field(Expression::parse(*cfg.load));
    const Atlas atlas = surface.atlas();
    p.data.load.value = [f, atlas](const Vector& x) { return f(atlas.project(x)); };
    p.data.load.gradient = nullptr;
    p.data.load.hessian = nullptr;
    p.has_load = true;
  }
  if (cfg.exact) {
    p.data.exact = make_scalar_field(Expression::parse(*cfg.exact));
    p.has_exact = true;
  }
  return p;
}

SolverOptions solver_options(const RunConfig& cfg) {
  SolverOptions opts;
  opts.tolerance = cfg.solver.tolerance;
  opts.max_iterations = cfg.solver.max_iterations;
  opts.assembly.threads = cfg.deterministic ? 1 : cfg.solver.threads;
  opts.divfree_threshold = cfg.solver.divfree_threshold;
  return opts;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

json header(const std::string& schema, const RunConfig& cfg) {
  return json{{"schema", schema}, {"version", 1}, {"task", to_string(cfg.task)}, {"deterministic", cfg.deterministic}};
}

json mesh_summary(const SurfaceMesh& mesh, const RunConfig& cfg, MeshPreset preset) {
  return json{{"preset", to_string(preset)},
              {"resolution", cfg.surface.resolution},
              {"vertices", mesh.vertex_count()},
              {"triangles", mesh.triangle_count()},
              {"edges", mesh.edge_count()},
              {"euler_characteristic", mesh.euler_characteristic()},
              {"area", mesh.total_area()},
              {"h", mesh_size(mesh)}};
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool violated(const ConditionReport& cond, bool reaction_matters) {
  return cond.ellipticity_verdict == Verdict::Violated ||
         (reaction_matters && cond.both_reaction_conditions_violated());
}

int run_mesh(const RunConfig& cfg, std::ostream& log) {
  const SurfaceSpec surface = surface_spec(cfg.surface);
  const SurfaceMesh mesh = build_mesh(surface.atlas(), surface.preset, cfg.surface.resolution);
  const fs::path dir(cfg.output);
  write_vtk(dir / "mesh.vtk", mesh);
  write_mesh_csv(dir / "mesh", mesh);
  json j = header("mesh", cfg);
  j["mesh"] = mesh_summary(mesh, cfg, surface.preset);
  write_json(dir / "mesh.json", j);
  log << "mesh: " << mesh.vertex_count() << " vertices, " << mesh.triangle_count() << " triangles\n";
  return kExitOk;
}

int run_check(const RunConfig& cfg, std::ostream& log) {
  const Problem p = make_problem(cfg);
  const SurfaceMesh mesh = build_mesh(p.data.surface.atlas(), p.data.surface.preset, cfg.surface.resolution);
  const ConditionReport cond = check_conditions(p.data.coefficients, mesh);
  json j = header("conditions", cfg);
  j["conditions"] = cond.to_json();
  j["override_conditions"] = cfg.override_conditions;
  write_json(fs::path(cfg.output) / "conditions.json", j);
  log << "check: " << cond.summary() << '\n';
  if (violated(cond, true) && !cfg.override_conditions) return kExitViolated;
  return kExitOk;
}

int run_solve(const RunConfig& cfg, std::ostream& log) {
  const Problem p = make_problem(cfg);
  const Atlas atlas = p.data.surface.atlas();
  const SurfaceMesh mesh = build_mesh(atlas, p.data.surface.preset, cfg.surface.resolution);
  const fs::path dir(cfg.output);
  fs::create_directories(dir);

  const ConditionReport cond = check_conditions(p.data.coefficients, mesh);
  json j = header("solve", cfg);
  j["case"] = p.data.name;
  j["problem"] = to_string(p.data.problem);
  j["mesh"] = mesh_summary(mesh, cfg, p.data.surface.preset);
  j["conditions"] = cond.to_json();
  const bool reaction_matters = p.data.problem == ProblemKind::General;
  if (violated(cond, reaction_matters) && !cfg.override_conditions) {
    j["status"] = "violated";
    write_json(dir / "solve.json", j);
    log << "solve: refused, " << cond.summary() << '\n';
    return kExitViolated;
  }

  SolveReport report;
  try {
    report = solve_case(p.data, mesh, solver_options(cfg), cfg.override_conditions);
  } catch (const WellPosednessError& e) {
    j["status"] = "violated";
    write_json(dir / "solve.json", j);
    log << "solve: " << e.what() << '\n';
    return kExitViolated;
  } catch (const SolverError& e) {
    j["status"] = "solver-failure";
    j["failure"] = e.what();
    write_json(dir / "solve.json", j);
    log << "solve: " << e.what() << '\n';
    return kExitFailure;
  }
  if (cfg.deterministic) report.wall_seconds = 0.0;

  PointData data{{"u", report.solution.values}};
  j["report"] = report.to_json();
  if (p.has_exact) {
    const bool mean_zero = p.data.problem != ProblemKind::General;
    const DiscreteErrors e = measure_errors(mesh, atlas, report.solution, p.data.exact, p.data.coefficients.A, mean_zero);
    j["errors"] = {{"l2", e.l2}, {"h1", e.h1}, {"energy", e.energy}};
    data["exact"] = interpolate(mesh, p.data.exact).values;
  } else {
    j["errors"] = nullptr;
  }
  j["status"] = "ok";
  write_vtk(dir / "solution.vtk", mesh, data);
  std::ofstream csv(dir / "solution.csv");
  csv << "index,x,y,z,u" << (p.has_exact ? ",exact" : "") << '\n';
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    const auto& v = mesh.vertices()[i];
    csv << i << ',' << format_double(v[0]) << ',' << format_double(v[1]) << ',' << format_double(v[2]) << ','
        << format_double(report.solution.values[static_cast<Eigen::Index>(i)]);
    if (p.has_exact) csv << ',' << format_double(data["exact"][static_cast<Eigen::Index>(i)]);
    csv << '\n';
  }
  write_json(dir / "solve.json", j);
  log << "solve: " << report.method << ", " << report.iterations << " iterations, residual " << report.residual << '\n';
  return kExitOk;
}

int run_study(const RunConfig& cfg, std::ostream& log) {
  const Problem p = make_problem(cfg);
  if (!p.has_exact) throw ContractError("a study needs an exact solution: give 'exact' or a builtin 'case'");
  StudyOptions opts;
  opts.levels = cfg.study.levels;
  opts.start_resolution = cfg.study.start_resolution;
  opts.solver = solver_options(cfg);
  opts.override_conditions = cfg.override_conditions || p.data.problem != ProblemKind::General;
  opts.threads = cfg.deterministic ? 1 : cfg.solver.threads;
  ConvergenceReport report = convergence_study(p.data, opts);
  if (cfg.deterministic) {
    for (auto& l : report.levels) l.solve_seconds = 0.0;
  }
  const fs::path dir(cfg.output);
  fs::create_directories(dir);
  report.write_csv(dir / "study.csv");
  json j = header("study", cfg);
  j["report"] = report.to_json();
  write_json(dir / "study.json", j);
  if (!cfg.study.p_values.empty()) {
    const LpStabilityReport lp = lp_stability_sweep(p.data, cfg.study.p_values, opts);
    json k = header("lp", cfg);
    k["case"] = p.data.name;
    k["report"] = lp.to_json();
    write_json(dir / "lp.json", k);
  }
  log << "study: " << report.case_name << ", L2 rate " << (report.rate_l2 ? format_double(*report.rate_l2) : "n/a")
      << ", H1 rate " << (report.rate_h1 ? format_double(*report.rate_h1) : "n/a") << ", "
      << (report.passed ? "passed" : "failed") << '\n';
  if (report.failure) log << "study: " << *report.failure << '\n';
  return report.passed ? kExitOk : kExitFailure;
}

int run_export(const RunConfig& cfg, std::ostream& log) {
  const Problem p = make_problem(cfg);
  const SurfaceMesh mesh = build_mesh(p.data.surface.atlas(), p.data.surface.preset, cfg.surface.resolution);
  const fs::path dir(cfg.output);
  fs::create_directories(dir);
  AssemblyOptions assembly;
  assembly.threads = cfg.deterministic ? 1 : cfg.solver.threads;
  const SparseMatrix T = assemble_operator(mesh, p.data.coefficients, assembly);
  write_matrix_market(dir / "operator.mtx", T);
  write_matrix_market(dir / "mass.mtx", assemble_mass(mesh, assembly));
  write_matrix_market(dir / "constraint.mtx", mass_weights(mesh));
  std::vector<std::string> files{"operator.mtx", "mass.mtx", "constraint.mtx", "mesh.vtk"};
  if (p.has_load) {
    write_matrix_market(dir / "load.mtx", assemble_load(mesh, p.data.load, assembly));
    files.push_back("load.mtx");
  }
  write_vtk(dir / "mesh.vtk", mesh);
  json j = header("export", cfg);
  j["mesh"] = mesh_summary(mesh, cfg, p.data.surface.preset);
  j["files"] = files;
  j["operator"] = {{"rows", T.rows()}, {"cols", T.cols()}, {"nonzeros", T.nonZeros()}, {"symmetric", T.isApprox(SparseMatrix(T.transpose()))}};
  write_json(dir / "export.json", j);
  log << "export: " << T.rows() << "x" << T.cols() << " operator, " << T.nonZeros() << " nonzeros\n";
  return kExitOk;
}

}  // namespace

int run(const RunConfig& config, std::ostream& log) {
  fs::create_directories(config.output);
  switch (config.task) {
    case Task::Mesh: return run_mesh(config, log);
    case Task::Check: return run_check(config, log);
    case Task::Solve: return run_solve(config, log);
    case Task::Study: return run_study(config, log);
    case Task::Export: return run_export(config, log);
  }
  return kExitFailure;
}

}  // namespace gamma_elliptic::cli
