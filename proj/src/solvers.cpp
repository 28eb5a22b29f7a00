#include "gamma_elliptic/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/SparseLU>

#include "gamma_elliptic/errors.hpp"

namespace gamma_elliptic {

namespace {

using Clock = std::chrono::steady_clock;
using Eigen::VectorXd;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Vector to_vector(const Point3& p) { return Vector{{p[0], p[1], p[2]}}; }

Point3 to_point(const Vector& v) { return Point3(v[0], v[1], v[2]); }

double lumped_dual_norm(const VectorXd& load, const VectorXd& weights) {
  return std::sqrt(load.cwiseAbs2().cwiseQuotient(weights).sum());
}

// Removes the mean of a load vector so that sum(load) = 0.
void check_or_recenter_load(VectorXd& load, const VectorXd& weights, bool recenter) {
  const double sum = load.sum();
  if (std::abs(sum) <= 1e-8 * load.lpNorm<1>()) return;
  if (!recenter) {
    throw ContractError("load is not mean-zero (sum " + std::to_string(sum) +
                        "); pass recenter_load to project it");
  }
  load -= (sum / weights.sum()) * weights;
}

void recenter(VectorXd& u, const VectorXd& weights) { u.array() -= weights.dot(u) / weights.sum(); }

SolveReport report_from(const SurfaceMesh& mesh, const KrylovResult& r, bool constrained,
                        const VectorXd& load, const VectorXd& weights, Clock::time_point start) {
  const auto n = static_cast<Eigen::Index>(mesh.vertex_count());
  SolveReport report;
  VectorXd u = r.x.head(n);
  if (constrained) {
    report.multiplier = r.x[n];
    recenter(u, weights);
  }
  report.solution = DiscreteField::on(mesh, std::move(u));
  report.iterations = r.iterations;
  report.residual = r.residual;
  report.converged = r.converged;
  report.method = r.method;
  const double dual = lumped_dual_norm(load, weights);
  report.apriori_ratio = dual > 0.0 ? discrete_norm(mesh, report.solution, 1, 2.0) / dual : 0.0;
  report.wall_seconds = seconds_since(start);
  return report;
}

void require_converged(const SolveReport& report, double tolerance) {
  if (!report.converged) {
    throw SolverError(report.method + " did not reach tolerance " + std::to_string(tolerance) +
                      " (relative residual " + std::to_string(report.residual) + " after " +
                      std::to_string(report.iterations) + " iterations)");
  }
}

struct Sample {
  double weight;
  double d;
};

}  // namespace

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::HoldsSufficiently:
      return "holds-sufficiently";
    case Verdict::Violated:
      return "violated";
    case Verdict::Inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

nlohmann::json SolveReport::to_json() const {
  nlohmann::json j;
  j["dofs"] = solution.values.size();
  j["solution"] = std::vector<double>(solution.values.data(), solution.values.data() + solution.values.size());
  j["multiplier"] = multiplier ? nlohmann::json(*multiplier) : nlohmann::json(nullptr);
  j["iterations"] = iterations;
  j["residual"] = residual;
  j["wall_seconds"] = wall_seconds;
  j["converged"] = converged;
  j["method"] = method;
  j["apriori_ratio"] = apriori_ratio;
  j["coercivity_margin"] = coercivity_margin ? nlohmann::json(*coercivity_margin) : nlohmann::json(nullptr);
  return j;
}

std::string ConditionReport::summary() const {
  std::string out;
  auto add = [&](const std::string& s) { out += (out.empty() ? "" : "; ") + s; };
  if (ellipticity_verdict == Verdict::Violated) add("ellipticity violated (estimate " + std::to_string(ellipticity) + ")");
  if (reaction.condition_a == Verdict::Violated) add("reaction condition with b violated");
  if (reaction.condition_b == Verdict::Violated) add("reaction condition with c violated");
  return out.empty() ? "no violation detected" : out;
}

nlohmann::json ConditionReport::to_json() const {
  nlohmann::json j;
  j["ellipticity"] = {{"estimate", ellipticity}, {"verdict", to_string(ellipticity_verdict)}};
  j["reaction"] = {
      {"condition_a", to_string(reaction.condition_a)},
      {"condition_b", to_string(reaction.condition_b)},
      {"lambda", reaction.lambda},
      {"witness_measure", reaction.witness_measure},
      {"min_hat_integral_a", reaction.min_hat_integral_a},
      {"min_hat_integral_b", reaction.min_hat_integral_b},
  };
  j["div_free"] = {{"residual", divfree_residual}, {"normalized", divfree_residual_normalized}};
  j["both_reaction_conditions_violated"] = both_reaction_conditions_violated();
  j["summary"] = summary();
  return j;
}

SolveReport solve_laplace_beltrami_load(const SurfaceMesh& mesh, const AmbientMatrixField& A, VectorXd load,
                                        const SolverOptions& options) {
  const auto start = Clock::now();
  if (load.size() != static_cast<Eigen::Index>(mesh.vertex_count())) {
    throw ContractError("load size does not match the vertex count");
  }
  const VectorXd weights = mass_weights(mesh);
  check_or_recenter_load(load, weights, options.recenter_load);
  SparseSystem system{assemble_stiffness(mesh, A, options.assembly), load, weights};
  const KrylovResult r = solve_linear_system(system, options.krylov());
  SolveReport report = report_from(mesh, r, true, load, weights, start);
  require_converged(report, options.tolerance);
  return report;
}

SolveReport solve_laplace_beltrami(const SurfaceMesh& mesh, const AmbientMatrixField& A,
                                   const AmbientScalarField& f, const SolverOptions& options) {
  return solve_laplace_beltrami_load(mesh, A, assemble_load(mesh, f, options.assembly), options);
}

SolveReport solve_laplace_beltrami(const SurfaceMesh& mesh, const AmbientMatrixField& A,
                                   const AmbientVectorField& F, const SolverOptions& options) {
  // -int F . grad phi_i sums to zero exactly, so no mean check is needed.
  SolverOptions opts = options;
  opts.recenter_load = true;
  return solve_laplace_beltrami_load(mesh, A, assemble_load_div(mesh, F, options.assembly), opts);
}

SolveReport solve_general_elliptic(const SurfaceMesh& mesh, const CoefficientSet& coefficients,
                                   const AmbientScalarField& f, const SolverOptions& options,
                                   const GeneralSolveOptions& general) {
  const auto start = Clock::now();
  if (!general.override_conditions) {
    const ReactionCheck reaction = check_reaction_condition(coefficients, mesh);
    if (reaction.condition_a == Verdict::Violated && reaction.condition_b == Verdict::Violated) {
      throw WellPosednessError(
          "both reaction conditions are violated; the operator may be singular (use the override to solve anyway)");
    }
  }
  const SparseMatrix t = assemble_operator(mesh, coefficients, options.assembly);
  const VectorXd load = assemble_load(mesh, f, options.assembly);
  const VectorXd weights = mass_weights(mesh);
  SparseSystem system{t, load, std::nullopt};
  if (general.mean_zero) system.constraint = weights;
  const KrylovResult r = solve_linear_system(system, options.krylov());
  SolveReport report = report_from(mesh, r, general.mean_zero, load, weights, start);
  require_converged(report, options.tolerance);
  return report;
}

SolveReport solve_divfree_cd(const SurfaceMesh& mesh, const AmbientMatrixField& A, const AmbientVectorField& c,
                             const AmbientScalarField& f, const SolverOptions& options) {
  const auto start = Clock::now();
  const DivFreeResidual divfree = div_free_residual(mesh, c);
  double cmax = 0.0;
  for (const auto& v : mesh.vertices()) cmax = std::max(cmax, c(to_vector(v)).norm());
  if (divfree.normalized > options.divfree_threshold * cmax) {
    throw ContractError("convection field is not weakly div-free (normalized residual " +
                        std::to_string(divfree.normalized) + ")");
  }
  const SparseMatrix k = assemble_stiffness(mesh, A, options.assembly);
  const SparseMatrix g = assemble_convection_c(mesh, c, options.assembly);
  VectorXd load = assemble_load(mesh, f, options.assembly);
  const VectorXd weights = mass_weights(mesh);
  check_or_recenter_load(load, weights, options.recenter_load);
  SparseSystem system{SparseMatrix(k + g), load, weights};
  const KrylovResult r = solve_linear_system(system, options.krylov());
  SolveReport report = report_from(mesh, r, true, load, weights, start);
  const VectorXd& u = report.solution.values;
  const double energy = u.dot(k * u);
  report.coercivity_margin = energy > 0.0 ? 1.0 - std::abs(u.dot(g * u)) / energy : 1.0;
  require_converged(report, options.tolerance);
  return report;
}

SolveReport solve_biharmonic(const SurfaceMesh& mesh, const AmbientScalarField& f, const SolverOptions& options) {
  const auto start = Clock::now();
  const AmbientMatrixField identity = AmbientMatrixField::identity();
  const SolveReport first = solve_laplace_beltrami(mesh, identity, f, options);
  // first.solution is already re-centered to zero mean.
  const VectorXd load = assemble_load(mesh, first.solution);
  SolverOptions second_options = options;
  second_options.recenter_load = true;
  SolveReport second = solve_laplace_beltrami_load(mesh, identity, load, second_options);
  second.iterations += first.iterations;
  second.residual = std::max(first.residual, second.residual);
  second.method = first.method + "+" + second.method;
  second.wall_seconds = seconds_since(start);
  return second;
}

double check_ellipticity(const CoefficientSet& coefficients, const SurfaceMesh& mesh, std::size_t samples) {
  if (samples == 0) throw ContractError("check_ellipticity needs at least one sample");
  const std::size_t nt = mesh.triangle_count();
  const std::size_t stride = std::max<std::size_t>(1, nt / std::min(samples, nt));
  double lambda = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < nt; t += stride) {
    const ElementVertices v = element_vertices(mesh, t);
    const ElementGeometry g = element_geometry(v);
    for (const auto& q : triangle_quadrature()) {
      const Eigen::Matrix3d a = coefficients.A(to_vector(quadrature_location(v, q)));
      lambda = std::min(lambda, tangential_ellipticity(a, g.normal));
    }
  }
  return lambda;
}

ReactionCheck check_reaction_condition(const CoefficientSet& coefficients, const SurfaceMesh& mesh) {
  const auto nv = static_cast<Eigen::Index>(mesh.vertex_count());
  VectorXd hat_a = VectorXd::Zero(nv);
  VectorXd hat_b = VectorXd::Zero(nv);
  VectorXd scale = VectorXd::Zero(nv);
  std::vector<Sample> samples;
  samples.reserve(3 * mesh.triangle_count());
  double max_b = 0.0;
  double max_c = 0.0;
  double d_max = 0.0;
  double d_min = std::numeric_limits<double>::infinity();
  double integral_d = 0.0;
  double integral_abs_d = 0.0;

  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const ElementVertices v = element_vertices(mesh, t);
    const ElementGeometry g = element_geometry(v);
    const auto& tri = mesh.triangles()[t];
    for (const auto& q : triangle_quadrature()) {
      const Vector x = to_vector(quadrature_location(v, q));
      const double w = q.weight * g.area;
      const double d = coefficients.d(x);
      Point3 b = to_point(coefficients.b(x));
      Point3 c = to_point(coefficients.c(x));
      if (coefficients.project_tangential) {
        b -= b.dot(g.normal) * g.normal;
        c -= c.dot(g.normal) * g.normal;
      }
      max_b = std::max(max_b, b.norm());
      max_c = std::max(max_c, c.norm());
      d_max = std::max(d_max, std::abs(d));
      d_min = std::min(d_min, d);
      integral_d += w * d;
      integral_abs_d += w * std::abs(d);
      samples.push_back({w, d});
      for (int i = 0; i < 3; ++i) {
        const double phi = q.barycentric[i];
        hat_a[tri[i]] += w * (d * phi + b.dot(g.gradients[i]));
        hat_b[tri[i]] += w * (d * phi + c.dot(g.gradients[i]));
        scale[tri[i]] += w * (std::abs(d) * phi + (b.norm() + c.norm()) * g.gradients[i].norm() + phi);
      }
    }
  }

  ReactionCheck out;
  // Witness level maximizing lambda * |{d >= lambda}| over the samples.
  std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) { return a.d > b.d; });
  double measure = 0.0;
  double best = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    measure += samples[k].weight;
    if (k + 1 < samples.size() && samples[k + 1].d == samples[k].d) continue;
    if (samples[k].d > 0.0 && samples[k].d * measure > best) {
      best = samples[k].d * measure;
      out.lambda = samples[k].d;
      out.witness_measure = measure;
    }
  }
  const double tiny = 1e-12 * std::max(1.0, d_max);
  const bool witness = out.lambda > 0.0 && out.witness_measure > 0.0 && d_min >= -tiny;

  out.min_hat_integral_a = hat_a.minCoeff();
  out.min_hat_integral_b = hat_b.minCoeff();
  bool hat_fails_a = false;
  bool hat_fails_b = false;
  for (Eigen::Index i = 0; i < nv; ++i) {
    hat_fails_a = hat_fails_a || hat_a[i] < -1e-10 * scale[i];
    hat_fails_b = hat_fails_b || hat_b[i] < -1e-10 * scale[i];
  }
  // w = 1 has no gradient: the conditions then require int d > 0.
  const bool constant_fails = integral_d <= 1e-10 * std::max(integral_abs_d, 1e-300);

  auto verdict = [&](bool field_vanishes, bool hat_fails) {
    if (witness && field_vanishes) return Verdict::HoldsSufficiently;
    if (hat_fails || constant_fails) return Verdict::Violated;
    return Verdict::Inconclusive;
  };
  out.condition_a = verdict(max_b <= 1e-14, hat_fails_a);
  out.condition_b = verdict(max_c <= 1e-14, hat_fails_b);
  return out;
}

DivFreeResidual div_free_residual(const SurfaceMesh& mesh, const AmbientVectorField& c) {
  const auto nv = static_cast<Eigen::Index>(mesh.vertex_count());
  VectorXd r = VectorXd::Zero(nv);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const ElementVertices v = element_vertices(mesh, t);
    const ElementGeometry g = element_geometry(v);
    const auto& tri = mesh.triangles()[t];
    for (const auto& q : triangle_quadrature()) {
      const Point3 cq = to_point(c(to_vector(quadrature_location(v, q))));
      const double w = q.weight * g.area;
      for (int i = 0; i < 3; ++i) r[tri[i]] += w * cq.dot(g.gradients[i]);
    }
  }
  const VectorXd weights = mass_weights(mesh);
  DivFreeResidual out;
  out.max_abs = r.cwiseAbs().maxCoeff();
  out.normalized = r.cwiseAbs().cwiseQuotient(weights).maxCoeff();
  return out;
}

double check_div_free(const SurfaceMesh& mesh, const AmbientVectorField& c) {
  return div_free_residual(mesh, c).max_abs;
}

ConditionReport check_conditions(const CoefficientSet& coefficients, const SurfaceMesh& mesh) {
  ConditionReport report;
  report.ellipticity = check_ellipticity(coefficients, mesh, mesh.triangle_count());
  report.ellipticity_verdict = report.ellipticity > 0.0 ? Verdict::HoldsSufficiently : Verdict::Violated;
  report.reaction = check_reaction_condition(coefficients, mesh);
  const DivFreeResidual divfree = div_free_residual(mesh, coefficients.c);
  report.divfree_residual = divfree.max_abs;
  report.divfree_residual_normalized = divfree.normalized;
  return report;
}

InfSupEstimate estimate_inf_sup(const SparseMatrix& t, const SparseMatrix& x, const SparseMatrix& y,
                                const std::optional<VectorXd>& constraint, int max_iterations, double tolerance) {
  const Eigen::Index n = t.rows();
  if (t.cols() != n || x.rows() != n || x.cols() != n || y.rows() != n || y.cols() != n) {
    throw ContractError("estimate_inf_sup: matrix sizes differ");
  }
  if (constraint && constraint->size() != n) throw ContractError("estimate_inf_sup: constraint size mismatch");
  for (const SparseMatrix* norm : {&x, &y}) {
    if (!is_symmetric(*norm, 1e-12) || !(norm->diagonal().array() > 0.0).all()) {
      throw ContractError("estimate_inf_sup: norm matrix is not symmetric positive definite");
    }
  }
  const SparseMatrix tt = t.transpose();
  const KrylovOptions krylov{1e-12, 0, 60};
  auto solve = [&](const SparseMatrix& a, const VectorXd& rhs) {
    const KrylovResult r = solve_linear_system(SparseSystem{a, rhs, constraint}, krylov);
    if (r.residual > 1e-8) throw SolverError("estimate_inf_sup: inner solve failed to converge");
    return VectorXd(r.x.head(n));
  };
  auto x_norm = [&](const VectorXd& w) {
    const double q = w.dot(x * w);
    if (!(q > 0.0)) throw ContractError("estimate_inf_sup: norm matrix is indefinite on the iterate");
    return std::sqrt(q);
  };

  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = uniform(rng);
  if (constraint) w -= (*constraint) * (constraint->dot(w) / constraint->squaredNorm());
  w /= x_norm(w);

  InfSupEstimate out;
  double previous = 0.0;
  for (int k = 0; k < max_iterations; ++k) {
    const VectorXd s = solve(tt, x * w);
    const VectorXd next = solve(t, y * s);
    const double mu = next.dot(x * w);
    if (!(mu > 0.0)) throw ContractError("estimate_inf_sup: norm matrices are not positive definite");
    out.alpha = 1.0 / std::sqrt(mu);
    out.iterations = k + 1;
    w = next / x_norm(next);
    if (k > 0 && std::abs(out.alpha - previous) <= tolerance * out.alpha) {
      out.converged = true;
      break;
    }
    previous = out.alpha;
  }
  return out;
}

double coefficient_of_variation(const VectorXd& v) {
  const double mean = v.mean();
  if (mean == 0.0) return std::numeric_limits<double>::infinity();
  const double variance = (v.array() - mean).square().mean();
  return std::sqrt(variance) / std::abs(mean);
}

FredholmResult fredholm_kernel(const SparseMatrix& t, int max_iterations) {
  if (t.rows() != t.cols()) throw ContractError("fredholm_kernel: matrix is not square");
  const Eigen::Index n = t.rows();
  using ColMajor = Eigen::SparseMatrix<double>;
  ColMajor a = t;
  ColMajor at = ColMajor(t.transpose());
  Eigen::SparseLU<ColMajor> lu;
  Eigen::SparseLU<ColMajor> lut;
  auto factor = [&](double shift) {
    ColMajor s = a;
    ColMajor st = at;
    if (shift != 0.0) {
      ColMajor id(n, n);
      id.setIdentity();
      s += shift * id;
      st += shift * id;
    }
    lu.compute(s);
    lut.compute(st);
    return lu.info() == Eigen::Success && lut.info() == Eigen::Success;
  };
  // An exactly singular pivot is possible for a singular T; a shift far
  // below the detection threshold keeps the factorization usable.
  if (!factor(0.0) && !factor(1e-13 * std::max(max_abs(t), 1e-300))) {
    throw SolverError("fredholm_kernel: sparse LU factorization failed");
  }

  FredholmResult out;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);

  VectorXd p(n);
  for (Eigen::Index i = 0; i < n; ++i) p[i] = 1.0 + 0.1 * uniform(rng);
  p.normalize();
  for (int k = 0; k < 100; ++k) {
    VectorXd q = t.transpose() * (t * p);
    const double nq = q.norm();
    if (nq == 0.0) break;
    p = q / nq;
  }
  out.norm_estimate = (t * p).norm();

  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(rng);
  v.normalize();
  double sigma = std::numeric_limits<double>::infinity();
  for (int k = 0; k < max_iterations; ++k) {
    const VectorXd y = lut.solve(v);
    VectorXd z = lu.solve(y);
    const double nz = z.norm();
    if (!std::isfinite(nz) || nz == 0.0) break;
    z /= nz;
    const double next = (t * z).norm();
    out.iterations = k + 1;
    const double change = std::min((z - v).norm(), (z + v).norm());
    v = std::move(z);
    const bool settled = std::abs(next - sigma) <= 1e-12 * std::max(out.norm_estimate, 1e-300);
    sigma = next;
    if (change < 1e-13 || settled) break;
  }
  out.smallest_singular_value = sigma;
  out.kernel = v;
  out.kernel_variation = coefficient_of_variation(v);

  const VectorXd v1 = v;
  auto deflate = [&v1](VectorXd u) { return VectorXd(u - v1 * v1.dot(u)); };
  VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = uniform(rng);
  w = deflate(w).normalized();
  double second = std::numeric_limits<double>::infinity();
  for (int k = 0; k < max_iterations && n > 1; ++k) {
    const VectorXd y = deflate(lut.solve(w));
    VectorXd z = deflate(lu.solve(y));
    const double nz = z.norm();
    if (!std::isfinite(nz) || nz == 0.0) break;
    z /= nz;
    const double next = (t * z).norm();
    const double change = std::min((z - w).norm(), (z + w).norm());
    w = std::move(z);
    const bool settled = std::abs(next - second) <= 1e-10 * std::max(next, 1e-300);
    second = next;
    if (change < 1e-12 || settled) break;
  }
  out.second_singular_value = n > 1 ? second : 0.0;
  return out;
}

}  // namespace gamma_elliptic
