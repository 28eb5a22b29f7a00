#include "gamma_elliptic/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <numbers>
#include <random>

#include "gamma_elliptic/errors.hpp"
#include "gamma_elliptic/expression.hpp"

namespace gamma_elliptic {

namespace {

Vector to_vector(const Point3& p) { return Vector{{p[0], p[1], p[2]}}; }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

// Zeroes the coefficients a problem kind does not use.
CoefficientSet effective_coefficients(ProblemKind kind, const CoefficientSet& coefficients) {
  CoefficientSet out = coefficients;
  switch (kind) {
    case ProblemKind::LaplaceBeltrami:
      out.b = AmbientVectorField::zero();
      out.c = AmbientVectorField::zero();
      out.d = AmbientScalarField::constant(0.0);
      break;
    case ProblemKind::DivFree:
      out.b = AmbientVectorField::zero();
      out.d = AmbientScalarField::constant(0.0);
      break;
    case ProblemKind::Biharmonic:
      out = CoefficientSet{};
      break;
    case ProblemKind::General:
      break;
  }
  return out;
}

struct ChartPoint {
  const Chart* chart;
  Vector y;
};

ChartPoint locate(const Atlas& atlas, const Vector& x) {
  const Atlas::Location loc = atlas.locate(x);
  return {&atlas.chart(loc.chart), loc.parameter};
}

// Fourth-order central difference of fn along parameter axis j.
template <typename Fn>
auto central_difference(const Fn& fn, const Vector& y, Eigen::Index j, double h) {
  Vector e = Vector::Zero(y.size());
  e[j] = h;
  return ((fn(y - 2.0 * e) - 8.0 * fn(y - e) + 8.0 * fn(y + e) - fn(y + 2.0 * e)) / (12.0 * h)).eval();
}

double central_difference_scalar(const std::function<double(const Vector&)>& fn, const Vector& y,
                                 Eigen::Index j, double h) {
  Vector e = Vector::Zero(y.size());
  e[j] = h;
  return (fn(y - 2.0 * e) - 8.0 * fn(y - e) + 8.0 * fn(y + e) - fn(y + 2.0 * e)) / (12.0 * h);
}

Matrix projection_at(const Chart& chart, const Vector& y) {
  const Vector n = unit_normal(chart, y);
  return Matrix::Identity(n.size(), n.size()) - n * n.transpose();
}

double fd_operator(const Chart& chart, const AmbientScalarField& u, const CoefficientSet& k, const Vector& y0) {
  constexpr double inner = 1e-3;
  constexpr double outer = 1e-2;
  const auto dim = static_cast<Eigen::Index>(chart.dimension());
  const std::function<double(const Vector&)> pulled = [&](const Vector& y) { return u(chart.point(y)); };

  auto tangential_gradient = [&](const Vector& y) {
    Vector dy(dim);
    for (Eigen::Index j = 0; j < dim; ++j) dy[j] = central_difference_scalar(pulled, y, j, inner);
    const Matrix jac = chart.jacobian(y);
    const Matrix g = jac.transpose() * jac;
    return (jac * g.ldlt().solve(dy)).eval();
  };
  auto flux = [&](const Vector& y) {
    const Vector x = chart.point(y);
    const Vector w = k.A(x) * tangential_gradient(y) + u(x) * k.b(x);
    return (projection_at(chart, y) * w).eval();
  };

  const Matrix jac = chart.jacobian(y0);
  const Matrix ginv = (jac.transpose() * jac).inverse();
  Matrix dflux(jac.rows(), dim);
  for (Eigen::Index j = 0; j < dim; ++j) dflux.col(j) = central_difference(flux, y0, j, outer);
  const double divergence = (ginv * jac.transpose() * dflux).trace();
  const Vector x0 = chart.point(y0);
  return -divergence + k.c(x0).dot(tangential_gradient(y0)) + k.d(x0) * u(x0);
}

Atlas atlas_for(const SurfaceSpec& s) {
  return s.preset == MeshPreset::SphereIcosahedral ? make_sphere_atlas(s.radius)
                                                   : make_torus_atlas(s.major_radius, s.minor_radius);
}

void require_twice_differentiable(const AmbientScalarField& u) {
  if (!u.has_gradient() || !u.has_hessian()) {
    throw CapabilityError("manufacture: the exact solution needs an ambient gradient and Hessian");
  }
}

double oracle_check(const Atlas& atlas, const AmbientScalarField& u, const CoefficientSet& k,
                    const std::vector<Vector>& points, const std::function<double(const Vector&)>& target,
                    const std::string& name) {
  double scale = 0.0;
  double worst = 0.0;
  std::vector<double> analytic(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    analytic[i] = apply_operator_analytic(atlas, u, k, points[i]);
    const double fd = apply_operator_finite_difference(atlas, u, k, points[i]);
    scale = std::max(scale, std::abs(analytic[i]));
    worst = std::max(worst, std::abs(analytic[i] - fd));
    if (target) worst = std::max(worst, std::abs(analytic[i] - target(points[i])));
  }
  const double discrepancy = worst / std::max(1.0, scale);
  if (!(discrepancy <= 1e-6)) {
    throw ManufacturingError("manufacture '" + name + "': derivative routes disagree (relative discrepancy " +
                             format_double(discrepancy) + ")");
  }
  return discrepancy;
}

AmbientScalarField expression_field(const std::string& text) { return make_scalar_field(Expression::parse(text)); }

AmbientVectorField rotation_field() {
  return make_vector_field({Expression::parse("-x2"), Expression::parse("x1"), Expression::constant(0.0)});
}

}  // namespace

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::LaplaceBeltrami:
      return "laplace-beltrami";
    case ProblemKind::General:
      return "general";
    case ProblemKind::DivFree:
      return "divfree";
    case ProblemKind::Biharmonic:
      return "biharmonic";
  }
  return "general";
}

ProblemKind parse_problem_kind(const std::string& name) {
  if (name == "laplace-beltrami") return ProblemKind::LaplaceBeltrami;
  if (name == "general") return ProblemKind::General;
  if (name == "divfree") return ProblemKind::DivFree;
  if (name == "biharmonic") return ProblemKind::Biharmonic;
  throw ContractError("unknown problem kind '" + name + "'");
}

Atlas SurfaceSpec::atlas() const { return atlas_for(*this); }

double apply_operator_analytic(const Atlas& atlas, const AmbientScalarField& u, const CoefficientSet& k,
                               const Vector& x) {
  require_twice_differentiable(u);
  const ChartPoint cp = locate(atlas, x);
  const Chart& chart = *cp.chart;
  const Vector& y = cp.y;
  const LocalFrame frame = local_frame(chart, y);
  const Matrix& jac = frame.jacobian;
  const Vector& nu = frame.normal;
  const Matrix dnu = normal_derivatives(chart, y);
  const Vector xp = chart.point(y);
  const auto n = xp.size();

  const Vector grad = u.gradient(xp);
  const Matrix hess = u.hessian(xp);
  const double value = u(xp);
  const Matrix a = k.A(xp);
  const std::vector<Matrix> da = k.A.has_derivatives() ? k.A.derivatives(xp) : finite_difference_derivatives(k.A, xp);
  const Vector b = k.b(xp);
  Matrix db = Matrix::Zero(n, n);
  if (b.norm() > 0.0 || k.b.has_jacobian()) {
    if (!k.b.has_jacobian()) throw CapabilityError("manufacture: b needs an ambient Jacobian");
    db = k.b.jacobian(xp);
  }

  const Matrix p = Matrix::Identity(n, n) - nu * nu.transpose();
  const Vector g = p * grad;
  const Vector w = a * g + value * b;
  Matrix dflux(n, jac.cols());
  for (Eigen::Index j = 0; j < jac.cols(); ++j) {
    const Vector tj = jac.col(j);
    const Matrix dp = -(dnu.col(j) * nu.transpose() + nu * dnu.col(j).transpose());
    const Vector dg = dp * grad + p * hess * tj;
    Matrix daj = Matrix::Zero(n, n);
    for (Eigen::Index m = 0; m < n; ++m) daj += da[static_cast<std::size_t>(m)] * tj[m];
    const Vector dw = daj * g + a * dg + grad.dot(tj) * b + value * db * tj;
    dflux.col(j) = dp * w + p * dw;
  }
  const double divergence = (frame.metric_inverse * jac.transpose() * dflux).trace();
  return -divergence + k.c(xp).dot(g) + k.d(xp) * value;
}

double apply_operator_finite_difference(const Atlas& atlas, const AmbientScalarField& u, const CoefficientSet& k,
                                        const Vector& x) {
  const ChartPoint cp = locate(atlas, x);
  return fd_operator(*cp.chart, u, k, cp.y);
}

std::vector<Vector> sample_surface_points(const Atlas& atlas, std::size_t count, std::uint64_t seed) {
  const Chart& chart = atlas.chart(0);
  const ParameterBox& box = chart.box();
  std::mt19937_64 rng(seed);
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vector y(box.lower.size());
    for (Eigen::Index j = 0; j < y.size(); ++j) {
      const double width = box.upper[j] - box.lower[j];
      const double margin = box.periodic[static_cast<std::size_t>(j)] ? 0.0 : 0.15 * width;
      std::uniform_real_distribution<double> dist(box.lower[j] + margin, box.upper[j] - margin);
      y[j] = dist(rng);
    }
    out.push_back(chart.point(y));
  }
  return out;
}

ManufacturedCase manufacture(const SurfaceSpec& surface, ProblemKind problem, const AmbientScalarField& exact,
                             const CoefficientSet& coefficients, std::string name, std::uint64_t seed) {
  require_twice_differentiable(exact);
  ManufacturedCase out;
  out.name = name.empty() ? to_string(problem) : std::move(name);
  out.surface = surface;
  out.problem = problem;
  out.exact = exact;
  out.coefficients = effective_coefficients(problem, coefficients);
  out.seed = seed;
  const Atlas atlas = surface.atlas();
  if (problem == ProblemKind::Biharmonic) {
    throw ContractError("manufacture: use manufacture_biharmonic for the biharmonic problem");
  }
  out.oracle_discrepancy =
      oracle_check(atlas, exact, out.coefficients, sample_surface_points(atlas, 50, seed), {}, out.name);
  const CoefficientSet k = out.coefficients;
  out.load.value = [atlas, exact, k](const Vector& x) {
    return apply_operator_analytic(atlas, exact, k, atlas.project(x));
  };
  return out;
}

ManufacturedCase manufacture_biharmonic(const SurfaceSpec& surface, const AmbientScalarField& exact,
                                        const AmbientScalarField& intermediate, std::string name,
                                        std::uint64_t seed) {
  require_twice_differentiable(exact);
  require_twice_differentiable(intermediate);
  ManufacturedCase out;
  out.name = name.empty() ? "biharmonic" : std::move(name);
  out.surface = surface;
  out.problem = ProblemKind::Biharmonic;
  out.exact = exact;
  out.seed = seed;
  const Atlas atlas = surface.atlas();
  const CoefficientSet laplacian{};
  const auto points = sample_surface_points(atlas, 50, seed);
  const double first = oracle_check(atlas, exact, laplacian, points,
                                    [&](const Vector& x) { return intermediate(x); }, out.name);
  const double second = oracle_check(atlas, intermediate, laplacian, points, {}, out.name);
  out.oracle_discrepancy = std::max(first, second);
  out.load.value = [atlas, intermediate, laplacian](const Vector& x) {
    return apply_operator_analytic(atlas, intermediate, laplacian, atlas.project(x));
  };
  return out;
}

std::vector<std::string> builtin_case_names() {
  return {"sphere-eigen", "sphere-eigen-quadratic", "sphere-reaction", "sphere-divfree",
          "sphere-biharmonic", "torus-general", "zero"};
}

ManufacturedCase builtin_case(const std::string& name) {
  SurfaceSpec sphere;
  CoefficientSet k;
  if (name == "sphere-eigen") {
    return manufacture(sphere, ProblemKind::LaplaceBeltrami, expression_field("x3"), k, name);
  }
  if (name == "sphere-eigen-quadratic") {
    return manufacture(sphere, ProblemKind::LaplaceBeltrami, expression_field("x1*x2"), k, name);
  }
  if (name == "sphere-reaction") {
    k.d = AmbientScalarField::constant(1.0);
    return manufacture(sphere, ProblemKind::General, expression_field("x3"), k, name);
  }
  if (name == "sphere-divfree") {
    k.c = rotation_field();
    return manufacture(sphere, ProblemKind::DivFree, expression_field("x3"), k, name);
  }
  if (name == "sphere-biharmonic") {
    return manufacture_biharmonic(sphere, expression_field("x3"), expression_field("2*x3"), name);
  }
  if (name == "torus-general") {
    SurfaceSpec torus;
    torus.preset = MeshPreset::TorusGrid;
    const std::string big = format_double(torus.major_radius);
    // Outward unit normal of the torus, extended off the surface.
    const std::string rho = "sqrt(x1^2 + x2^2)";
    const std::string dist = "sqrt((" + rho + " - " + big + ")^2 + x3^2)";
    const std::array<Expression, 3> normal{
        Expression::parse("(x1 - " + big + "*x1/" + rho + ")/" + dist),
        Expression::parse("(x2 - " + big + "*x2/" + rho + ")/" + dist),
        Expression::parse("x3/" + dist),
    };
    const Expression alpha = Expression::parse("1 + 0.5*x1^2");
    std::array<std::array<Expression, 3>, 3> a;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const Expression delta = Expression::constant(i == j ? 1.0 : 0.0);
        a[i][j] = alpha * delta - (alpha - Expression::constant(1.0)) * normal[i] * normal[j];
      }
    }
    k.A = make_matrix_field(a);
    k.c = rotation_field();
    k.d = AmbientScalarField::constant(1.0);
    return manufacture(torus, ProblemKind::General, expression_field("x1/" + rho), k, name);
  }
  if (name == "zero") {
    return manufacture(sphere, ProblemKind::LaplaceBeltrami, expression_field("0"), k, name);
  }
  throw ContractError("unknown builtin case '" + name + "'");
}

double fitted_rate(const std::vector<double>& h, const std::vector<double>& error) {
  if (h.size() != error.size() || h.size() < 2) throw ContractError("fitted_rate: need at least two levels");
  const auto n = static_cast<double>(h.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double lx = std::log(h[i]);
    const double ly = std::log(error[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

DiscreteErrors measure_errors(const SurfaceMesh& mesh, const Atlas& atlas, const DiscreteField& uh,
                              const AmbientScalarField& exact, const AmbientMatrixField& A, bool mean_zero) {
  uh.check(mesh);
  if (!exact.has_gradient()) throw CapabilityError("measure_errors: exact solution needs a gradient");
  Eigen::VectorXd interpolant = interpolate(mesh, exact).values;
  if (mean_zero) {
    const Eigen::VectorXd w = mass_weights(mesh);
    interpolant.array() -= w.dot(interpolant) / w.sum();
  }
  const Eigen::VectorXd e = uh.values - interpolant;
  const double l2_squared = e.dot(assemble_mass(mesh) * e);

  double semi = 0.0;
  double energy = 0.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const ElementVertices v = element_vertices(mesh, t);
    const ElementGeometry g = element_geometry(v);
    const auto& tri = mesh.triangles()[t];
    const Point3 grad_h =
        uh.values[tri[0]] * g.gradients[0] + uh.values[tri[1]] * g.gradients[1] + uh.values[tri[2]] * g.gradients[2];
    for (const auto& q : triangle_quadrature()) {
      const Vector xq = to_vector(quadrature_location(v, q));
      const Vector p = atlas.project(xq);
      const ChartPoint cp = locate(atlas, p);
      const Vector nu = unit_normal(*cp.chart, cp.y);
      Vector grad = exact.gradient(p);
      grad -= nu * nu.dot(grad);
      const Vector diff = to_vector(grad_h) - grad;
      const double w = q.weight * g.area;
      semi += w * diff.squaredNorm();
      energy += w * diff.dot(A(xq) * diff);
    }
  }
  DiscreteErrors out;
  out.l2 = std::sqrt(std::max(l2_squared, 0.0));
  out.h1 = std::sqrt(std::max(l2_squared, 0.0) + semi);
  out.energy = std::sqrt(std::max(energy, 0.0));
  return out;
}

SolveReport solve_case(const ManufacturedCase& c, const SurfaceMesh& mesh, const SolverOptions& options,
                       bool override_conditions) {
  SolverOptions opts = options;
  // Quadrature of f breaks exact compatibility at O(h^2); project it out.
  opts.recenter_load = true;
  switch (c.problem) {
    case ProblemKind::LaplaceBeltrami:
      return solve_laplace_beltrami(mesh, c.coefficients.A, c.load, opts);
    case ProblemKind::General:
      return solve_general_elliptic(mesh, c.coefficients, c.load, opts, {override_conditions, false});
    case ProblemKind::DivFree:
      return solve_divfree_cd(mesh, c.coefficients.A, c.coefficients.c, c.load, opts);
    case ProblemKind::Biharmonic:
      return solve_biharmonic(mesh, c.load, opts);
  }
  throw ContractError("unknown problem kind");
}

namespace {

std::vector<SurfaceMesh> level_meshes(const ManufacturedCase& c, const Atlas& atlas, const StudyOptions& options) {
  int start = options.start_resolution;
  if (start < 0) start = c.surface.preset == MeshPreset::SphereIcosahedral ? 2 : 1;
  std::vector<SurfaceMesh> meshes;
  meshes.push_back(build_mesh(atlas, c.surface.preset, start));
  for (int l = 1; l < options.levels; ++l) meshes.push_back(refine(meshes.back(), atlas));
  return meshes;
}

template <typename Fn>
auto run_levels(std::size_t count, int threads, Fn&& fn) {
  using Result = decltype(fn(std::size_t{0}));
  std::vector<Result> out;
  out.reserve(count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) out.push_back(fn(i));
    return out;
  }
  std::vector<std::future<Result>> futures;
  for (std::size_t i = 0; i < count; ++i) futures.push_back(std::async(std::launch::async, fn, i));
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

}  // namespace

ConvergenceReport convergence_study(const ManufacturedCase& c, const StudyOptions& options) {
  if (options.levels < 3) throw ContractError("convergence_study needs at least 3 levels");
  ConvergenceReport report;
  report.case_name = c.name;
  report.problem = to_string(c.problem);
  report.seed = c.seed;
  const Atlas atlas = c.surface.atlas();
  const std::vector<SurfaceMesh> meshes = level_meshes(c, atlas, options);
  const bool mean_zero = c.problem != ProblemKind::General;

  struct Outcome {
    ConvergenceLevel level;
    std::optional<std::string> failure;
  };
  const auto outcomes = run_levels(meshes.size(), options.threads, [&](std::size_t i) {
    Outcome o;
    const SurfaceMesh& mesh = meshes[i];
    o.level.level = static_cast<int>(i);
    o.level.h = mesh_size(mesh);
    o.level.dofs = mesh.vertex_count();
    try {
      const SolveReport solve = solve_case(c, mesh, options.solver, options.override_conditions);
      const DiscreteErrors err = measure_errors(mesh, atlas, solve.solution, c.exact, c.coefficients.A, mean_zero);
      o.level.error_l2 = err.l2;
      o.level.error_h1 = err.h1;
      o.level.error_energy = err.energy;
      o.level.solve_seconds = solve.wall_seconds;
      o.level.iterations = solve.iterations;
    } catch (const Error& e) {
      o.failure = "level " + std::to_string(i) + ": " + e.what();
    }
    return o;
  });
  for (const auto& o : outcomes) {
    if (o.failure) {
      report.failure = o.failure;
      break;
    }
    report.levels.push_back(o.level);
  }

  std::vector<double> h, l2, h1;
  double largest = 0.0;
  for (const auto& l : report.levels) {
    h.push_back(l.h);
    l2.push_back(l.error_l2);
    h1.push_back(l.error_h1);
    largest = std::max({largest, l.error_l2, l.error_h1});
  }
  const bool exact = largest <= 1e-10;
  if (report.levels.size() >= 3 && !exact) {
    const auto positive = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double e) { return e > 0.0; });
    };
    if (positive(l2)) report.rate_l2 = fitted_rate(h, l2);
    if (positive(h1)) report.rate_h1 = fitted_rate(h, h1);
  }
  const auto inside = [](const std::optional<double>& r, const RateWindow& w) {
    return r && *r >= w.low && *r <= w.high;
  };
  report.passed = !report.failure && report.levels.size() >= 3 &&
                  (exact || (inside(report.rate_l2, report.l2_window) && inside(report.rate_h1, report.h1_window)));
  return report;
}

nlohmann::json ConvergenceReport::to_json() const {
  nlohmann::json j;
  j["case"] = case_name;
  j["problem"] = problem;
  j["seed"] = seed;
  j["levels"] = nlohmann::json::array();
  for (const auto& l : levels) {
    j["levels"].push_back({{"level", l.level},
                           {"h", l.h},
                           {"dofs", l.dofs},
                           {"error_l2", l.error_l2},
                           {"error_h1", l.error_h1},
                           {"error_energy", l.error_energy},
                           {"solve_seconds", l.solve_seconds},
                           {"iterations", l.iterations}});
  }
  j["rates"] = {{"l2", optional_number(rate_l2)}, {"h1", optional_number(rate_h1)}};
  j["windows"] = {{"l2", {l2_window.low, l2_window.high}}, {"h1", {h1_window.low, h1_window.high}}};
  j["passed"] = passed;
  j["failure"] = failure ? nlohmann::json(*failure) : nlohmann::json(nullptr);
  return j;
}

void ConvergenceReport::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "level,h,dofs,error_l2,error_h1,error_energy,iterations\n";
  for (const auto& l : levels) {
    out << l.level << ',' << format_double(l.h) << ',' << l.dofs << ',' << format_double(l.error_l2) << ','
        << format_double(l.error_h1) << ',' << format_double(l.error_energy) << ',' << l.iterations << '\n';
  }
}

IbpResult ibp_residual_test(const SurfaceMesh& mesh, const Atlas& atlas, const AmbientScalarField& u,
                            const AmbientVectorField& phi) {
  for (const auto& chart : atlas.charts()) {
    if (!chart.has_analytic_second_derivatives()) {
      throw CapabilityError("ibp_residual_test: chart '" + chart.label() + "' has no second derivatives");
    }
  }
  if (!u.has_gradient() || !phi.has_jacobian()) {
    throw CapabilityError("ibp_residual_test: u needs a gradient and phi a Jacobian");
  }
  IbpResult out;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const ElementVertices v = element_vertices(mesh, t);
    const ElementGeometry g = element_geometry(v);
    for (const auto& q : triangle_quadrature()) {
      const Vector p = atlas.project(to_vector(quadrature_location(v, q)));
      const ChartPoint cp = locate(atlas, p);
      const Chart& chart = *cp.chart;
      const double w = q.weight * g.area;
      const Vector nu = unit_normal(chart, cp.y);
      const double mean_curvature = shape_operator(chart, cp.y).trace();
      const Vector x = chart.point(cp.y);
      const double value = u(x);
      const Vector field = phi(x);
      out.divergence_term += w * value * surface_divergence(chart, pull_back(chart, phi), cp.y);
      out.gradient_term += w * surface_gradient(chart, pull_back(chart, u), cp.y).dot(field);
      out.curvature_term += w * mean_curvature * value * field.dot(nu);
    }
  }
  out.residual = std::abs(out.divergence_term + out.gradient_term - out.curvature_term);
  return out;
}

double load_norm(const SurfaceMesh& mesh, const AmbientScalarField& f, double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw ContractError("load_norm: p must be finite and > 1");
  double sum = 0.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const ElementVertices v = element_vertices(mesh, t);
    const double area = element_geometry(v).area;
    for (const auto& q : triangle_quadrature()) {
      sum += q.weight * area * std::pow(std::abs(f(to_vector(quadrature_location(v, q)))), p);
    }
  }
  return std::pow(sum, 1.0 / p);
}

LpStabilityReport lp_stability_sweep(const ManufacturedCase& c, const std::vector<double>& p_values,
                                     const StudyOptions& options) {
  for (double p : p_values) {
    if (!(p > 1.0) || !std::isfinite(p)) throw ContractError("lp_stability_sweep: p must lie in (1, inf)");
  }
  const Atlas atlas = c.surface.atlas();
  const std::vector<SurfaceMesh> meshes = level_meshes(c, atlas, options);
  LpStabilityReport report;
  report.p_values = p_values;
  const auto per_level = run_levels(meshes.size(), options.threads, [&](std::size_t i) {
    const SurfaceMesh& mesh = meshes[i];
    const SolveReport solve = solve_case(c, mesh, options.solver, options.override_conditions);
    std::vector<LpStabilityRow> rows;
    for (double p : p_values) {
      const double fnorm = load_norm(mesh, c.load, p);
      const double ratio = fnorm > 0.0 ? discrete_norm(mesh, solve.solution, 1, p) / fnorm : 0.0;
      rows.push_back({static_cast<int>(i), mesh_size(mesh), p, ratio});
    }
    return rows;
  });
  for (const auto& rows : per_level) report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  for (double p : p_values) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& r : report.rows) {
      if (r.p != p) continue;
      lo = std::min(lo, r.ratio);
      hi = std::max(hi, r.ratio);
    }
    report.spread.push_back(hi == 0.0 ? 1.0 : (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()));
  }
  return report;
}

nlohmann::json LpStabilityReport::to_json() const {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) j["rows"].push_back({{"level", r.level}, {"h", r.h}, {"p", r.p}, {"ratio", r.ratio}});
  j["p_values"] = p_values;
  j["spread"] = spread;
  return j;
}

}  // namespace gamma_elliptic
