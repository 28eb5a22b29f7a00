#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gamma_elliptic/assembly.hpp"
#include "gamma_elliptic/errors.hpp"
#include "gamma_elliptic/expression.hpp"
#include "gamma_elliptic/solvers.hpp"
#include "gamma_elliptic/surface_mesh.hpp"
#include "gamma_elliptic/verification.hpp"

namespace py = pybind11;
namespace ge = gamma_elliptic;

namespace {

ge::SurfaceSpec surface(const std::string& preset, double radius, double major_radius, double minor_radius) {
  ge::SurfaceSpec s;
  s.preset = ge::parse_mesh_preset(preset);
  s.radius = radius;
  s.major_radius = major_radius;
  s.minor_radius = minor_radius;
  return s;
}

py::dict mesh_summary(const std::string& preset, int resolution, double radius, double major_radius,
                      double minor_radius) {
  const auto spec = surface(preset, radius, major_radius, minor_radius);
  const auto mesh = ge::build_mesh(spec.atlas(), spec.preset, resolution);
  py::dict d;
  d["vertices"] = mesh.vertex_count();
  d["triangles"] = mesh.triangle_count();
  d["edges"] = mesh.edge_count();
  d["euler_characteristic"] = mesh.euler_characteristic();
  d["area"] = mesh.total_area();
  d["h"] = ge::mesh_size(mesh);
  return d;
}

py::dict solve_builtin(const std::string& name, int resolution, double tolerance) {
  const auto c = ge::builtin_case(name);
  const auto atlas = c.surface.atlas();
  const auto mesh = ge::build_mesh(atlas, c.surface.preset, resolution);
  ge::SolverOptions opts;
  opts.tolerance = tolerance;
  ge::SolveReport r;
  {
    py::gil_scoped_release release;
    r = ge::solve_case(c, mesh, opts);
  }
  const auto e = ge::measure_errors(mesh, atlas, r.solution, c.exact, c.coefficients.A,
                                    c.problem != ge::ProblemKind::General);
  py::dict d;
  d["solution"] = r.solution.values;
  d["iterations"] = r.iterations;
  d["residual"] = r.residual;
  d["converged"] = r.converged;
  d["method"] = r.method;
  d["error_l2"] = e.l2;
  d["error_h1"] = e.h1;
  return d;
}

std::string study_json(const std::string& name, int levels, int start_resolution) {
  ge::StudyOptions opts;
  opts.levels = levels;
  opts.start_resolution = start_resolution;
  py::gil_scoped_release release;
  return ge::convergence_study(ge::builtin_case(name), opts).to_json().dump();
}

std::string conditions_json(const std::string& name, int resolution) {
  const auto c = ge::builtin_case(name);
  const auto mesh = ge::build_mesh(c.surface.atlas(), c.surface.preset, resolution);
  return ge::check_conditions(c.coefficients, mesh).to_json().dump();
}

double evaluate(const std::string& text, const Eigen::Vector3d& x) {
  return ge::make_scalar_field(ge::Expression::parse(text))(Eigen::VectorXd(x));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Compiled core of gamma_elliptic";

  py::register_exception<ge::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ge::ParseError>(m, "ParseError", PyExc_ValueError);

  m.def("builtin_cases", &ge::builtin_case_names);
  m.def("mesh_summary", &mesh_summary, py::arg("preset") = "sphere-icosahedral", py::arg("resolution") = 2,
        py::arg("radius") = 1.0, py::arg("major_radius") = 2.0, py::arg("minor_radius") = 1.0);
  m.def("solve_builtin", &solve_builtin, py::arg("name"), py::arg("resolution") = 2, py::arg("tolerance") = 1e-10);
  m.def("study_json", &study_json, py::arg("name"), py::arg("levels") = 4, py::arg("start_resolution") = -1);
  m.def("conditions_json", &conditions_json, py::arg("name"), py::arg("resolution") = 2);
  m.def("evaluate", &evaluate, py::arg("expression"), py::arg("x"));
}
