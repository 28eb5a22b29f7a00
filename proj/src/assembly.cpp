#include "gamma_elliptic/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "gamma_elliptic/errors.hpp"

namespace gamma_elliptic {

namespace {

using Triplet = Eigen::Triplet<double>;

Vector to_vector(const Point3& p) { return Vector{{p[0], p[1], p[2]}}; }

Point3 to_point(const Vector& v) {
  if (v.size() != 3) throw ContractError("coefficient field must return a 3-vector");
  return Point3(v[0], v[1], v[2]);
}

Eigen::Matrix3d to_matrix3(const Matrix& m) {
  if (m.rows() != 3 || m.cols() != 3) throw ContractError("coefficient field must return a 3x3 matrix");
  return m;
}

Eigen::Matrix3d plane_projection(const Point3& normal) {
  return Eigen::Matrix3d::Identity() - normal * normal.transpose();
}

int resolve_threads(int requested, std::size_t work) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  n = std::max(1, n);
  // Small meshes are not worth the thread start-up.
  if (work < 2048) n = 1;
  return n;
}

// Runs fn(begin, end, chunk) over contiguous chunks of [0, count). Chunk
// boundaries depend only on the thread count, and results are merged in
// chunk order by the callers, so the output does not depend on scheduling.
template <typename Fn>
void parallel_chunks(std::size_t count, int threads, Fn&& fn) {
  if (threads <= 1) {
    fn(std::size_t{0}, count, 0);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  const std::size_t step = (count + threads - 1) / threads;
  for (int k = 0; k < threads; ++k) {
    const std::size_t begin = std::min(count, k * step);
    const std::size_t end = std::min(count, begin + step);
    workers.emplace_back([&, begin, end, k] {
      try {
        fn(begin, end, k);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

using ElementKernel = std::function<Eigen::Matrix3d(const ElementVertices&)>;

SparseMatrix assemble_matrix(const SurfaceMesh& mesh, const AssemblyOptions& options,
                             const ElementKernel& kernel) {
  const std::size_t nt = mesh.triangle_count();
  const int threads = resolve_threads(options.threads, nt);
  std::vector<std::vector<Triplet>> chunks(static_cast<std::size_t>(threads));
  parallel_chunks(nt, threads, [&](std::size_t begin, std::size_t end, int k) {
    auto& out = chunks[static_cast<std::size_t>(k)];
    out.reserve(9 * (end - begin));
    for (std::size_t t = begin; t < end; ++t) {
      const Eigen::Matrix3d local = kernel(element_vertices(mesh, t));
      const auto& tri = mesh.triangles()[t];
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) out.emplace_back(tri[i], tri[j], local(i, j));
      }
    }
  });
  std::vector<Triplet> all;
  all.reserve(9 * nt);
  for (const auto& c : chunks) all.insert(all.end(), c.begin(), c.end());
  const auto n = static_cast<Eigen::Index>(mesh.vertex_count());
  SparseMatrix m(n, n);
  m.setFromTriplets(all.begin(), all.end());
  return m;
}

using LoadKernel = std::function<Eigen::Vector3d(const ElementVertices&)>;

Eigen::VectorXd assemble_vector(const SurfaceMesh& mesh, const AssemblyOptions& options,
                                const LoadKernel& kernel) {
  const std::size_t nt = mesh.triangle_count();
  const int threads = resolve_threads(options.threads, nt);
  std::vector<Eigen::Vector3d> local(nt);
  parallel_chunks(nt, threads, [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t t = begin; t < end; ++t) local[t] = kernel(element_vertices(mesh, t));
  });
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.vertex_count()));
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles()[t];
    for (int i = 0; i < 3; ++i) out[tri[i]] += local[t][i];
  }
  return out;
}

Point3 maybe_project(const Point3& v, const Point3& normal, bool project) {
  return project ? Point3(v - v.dot(normal) * normal) : v;
}

}  // namespace

CoefficientSet CoefficientSet::adjoint() const {
  CoefficientSet out = *this;
  const auto a = A;
  out.A.value = [a](const Vector& x) -> Matrix { return a.value(x).transpose(); };
  if (a.has_derivatives()) {
    out.A.derivatives = [a](const Vector& x) {
      auto d = a.derivatives(x);
      for (auto& m : d) m.transposeInPlace();
      return d;
    };
  }
  std::swap(out.b, out.c);
  return out;
}

DiscreteField DiscreteField::on(const SurfaceMesh& mesh, Eigen::VectorXd values) {
  if (values.size() != static_cast<Eigen::Index>(mesh.vertex_count())) {
    throw ContractError("discrete field size does not match the vertex count");
  }
  return DiscreteField{std::move(values), mesh.id()};
}

void DiscreteField::check(const SurfaceMesh& mesh) const {
  if (mesh_id != mesh.id()) throw ContractError("discrete field belongs to a different mesh");
  if (values.size() != static_cast<Eigen::Index>(mesh.vertex_count())) {
    throw ContractError("discrete field size does not match the vertex count");
  }
  if (!values.allFinite()) throw ContractError("discrete field has non-finite values");
}

DiscreteField interpolate(const SurfaceMesh& mesh, const AmbientScalarField& field) {
  Eigen::VectorXd values(static_cast<Eigen::Index>(mesh.vertex_count()));
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    values[static_cast<Eigen::Index>(i)] = field(to_vector(mesh.vertices()[i]));
  }
  return DiscreteField::on(mesh, std::move(values));
}

void SparseSystem::validate() const {
  if (matrix.rows() != matrix.cols()) throw ContractError("system matrix is not square");
  if (rhs.size() != matrix.rows()) throw ContractError("right-hand side size mismatch");
  if (constraint && constraint->size() != matrix.rows()) throw ContractError("constraint size mismatch");
  if (!rhs.allFinite()) throw ContractError("right-hand side has non-finite entries");
}

const std::array<QuadraturePoint, 3>& triangle_quadrature() {
  static const std::array<QuadraturePoint, 3> rule{{
      {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0}, 1.0 / 3.0},
      {{1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0}, 1.0 / 3.0},
      {{1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}, 1.0 / 3.0},
  }};
  return rule;
}

ElementVertices element_vertices(const SurfaceMesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles()[t];
  const auto& v = mesh.vertices();
  return {v[tri[0]], v[tri[1]], v[tri[2]]};
}

Point3 quadrature_location(const ElementVertices& v, const QuadraturePoint& q) {
  return q.barycentric[0] * v[0] + q.barycentric[1] * v[1] + q.barycentric[2] * v[2];
}

double tangential_ellipticity(const Eigen::Matrix3d& a, const Point3& normal) {
  Point3 seed = std::abs(normal[0]) < 0.9 ? Point3::UnitX() : Point3::UnitY();
  const Point3 t1 = (seed - seed.dot(normal) * normal).normalized();
  const Point3 t2 = normal.cross(t1);
  const Eigen::Matrix3d s = 0.5 * (a + a.transpose());
  const double p = t1.dot(s * t1);
  const double q = t2.dot(s * t2);
  const double r = t1.dot(s * t2);
  return 0.5 * (p + q) - std::sqrt(0.25 * (p - q) * (p - q) + r * r);
}

ElementGeometry element_geometry(const ElementVertices& v) {
  const Point3 cross = (v[1] - v[0]).cross(v[2] - v[0]);
  const double twice_area = cross.norm();
  if (!(twice_area > 0.0)) throw MeshError("element_geometry: degenerate triangle");
  ElementGeometry g;
  g.area = 0.5 * twice_area;
  g.normal = cross / twice_area;
  g.gradients[0] = g.normal.cross(v[2] - v[1]) / twice_area;
  g.gradients[1] = g.normal.cross(v[0] - v[2]) / twice_area;
  g.gradients[2] = g.normal.cross(v[1] - v[0]) / twice_area;
  return g;
}

Eigen::Matrix3d element_stiffness(const ElementVertices& v, const AmbientMatrixField& A,
                                  const AssemblyOptions& options) {
  const ElementGeometry g = element_geometry(v);
  const Eigen::Matrix3d p = plane_projection(g.normal);
  Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
  for (const auto& q : triangle_quadrature()) {
    Eigen::Matrix3d a = to_matrix3(A(to_vector(quadrature_location(v, q))));
    if (!a.allFinite()) throw CoefficientError("A is not finite at a quadrature point");
    if (tangential_ellipticity(a, g.normal) <= options.ellipticity_floor) {
      throw CoefficientError("A is not uniformly elliptic on the tangent plane");
    }
    if (options.project_tangential) a = p * a * p + (Eigen::Matrix3d::Identity() - p);
    const double w = q.weight * g.area;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) local(i, j) += w * (a * g.gradients[j]).dot(g.gradients[i]);
    }
  }
  return local;
}

Eigen::Matrix3d element_convection_b(const ElementVertices& v, const AmbientVectorField& b,
                                     const AssemblyOptions& options) {
  const ElementGeometry g = element_geometry(v);
  Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
  for (const auto& q : triangle_quadrature()) {
    const Point3 bq = maybe_project(to_point(b(to_vector(quadrature_location(v, q)))), g.normal,
                                    options.project_tangential);
    const double w = q.weight * g.area;
    for (int i = 0; i < 3; ++i) {
      const double bi = bq.dot(g.gradients[i]);
      for (int j = 0; j < 3; ++j) local(i, j) += w * q.barycentric[j] * bi;
    }
  }
  return local;
}

Eigen::Matrix3d element_convection_c(const ElementVertices& v, const AmbientVectorField& c,
                                     const AssemblyOptions& options) {
  const ElementGeometry g = element_geometry(v);
  Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
  for (const auto& q : triangle_quadrature()) {
    const Point3 cq = maybe_project(to_point(c(to_vector(quadrature_location(v, q)))), g.normal,
                                    options.project_tangential);
    const double w = q.weight * g.area;
    for (int j = 0; j < 3; ++j) {
      const double cj = cq.dot(g.gradients[j]);
      for (int i = 0; i < 3; ++i) local(i, j) += w * cj * q.barycentric[i];
    }
  }
  return local;
}

Eigen::Matrix3d element_mass(const ElementVertices& v, const AmbientScalarField& d) {
  const ElementGeometry g = element_geometry(v);
  Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
  for (const auto& q : triangle_quadrature()) {
    const double dq = d(to_vector(quadrature_location(v, q)));
    const double w = q.weight * g.area * dq;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) local(i, j) += w * q.barycentric[i] * q.barycentric[j];
    }
  }
  return local;
}

SparseMatrix assemble_stiffness(const SurfaceMesh& mesh, const AmbientMatrixField& A,
                                const AssemblyOptions& options) {
  return assemble_matrix(mesh, options,
                         [&](const ElementVertices& v) { return element_stiffness(v, A, options); });
}

SparseMatrix assemble_convection_b(const SurfaceMesh& mesh, const AmbientVectorField& b,
                                   const AssemblyOptions& options) {
  return assemble_matrix(mesh, options,
                         [&](const ElementVertices& v) { return element_convection_b(v, b, options); });
}

SparseMatrix assemble_convection_c(const SurfaceMesh& mesh, const AmbientVectorField& c,
                                   const AssemblyOptions& options) {
  return assemble_matrix(mesh, options,
                         [&](const ElementVertices& v) { return element_convection_c(v, c, options); });
}

SparseMatrix assemble_mass(const SurfaceMesh& mesh, const AmbientScalarField& d,
                           const AssemblyOptions& options) {
  return assemble_matrix(mesh, options, [&](const ElementVertices& v) { return element_mass(v, d); });
}

SparseMatrix assemble_mass(const SurfaceMesh& mesh, const AssemblyOptions& options) {
  return assemble_matrix(mesh, options, [](const ElementVertices& v) {
    const double area = element_geometry(v).area;
    Eigen::Matrix3d m = Eigen::Matrix3d::Constant(1.0);
    m.diagonal().setConstant(2.0);
    return Eigen::Matrix3d(m * (area / 12.0));
  });
}

SparseMatrix assemble_operator(const SurfaceMesh& mesh, const CoefficientSet& coefficients,
                               const AssemblyOptions& options) {
  if (!(coefficients.ellipticity > 0.0)) {
    throw CoefficientError("ellipticity constant must be positive");
  }
  AssemblyOptions opts = options;
  opts.project_tangential = coefficients.project_tangential;
  opts.ellipticity_floor = std::max(options.ellipticity_floor, 0.9 * coefficients.ellipticity);
  return assemble_matrix(mesh, opts, [&](const ElementVertices& v) {
    return Eigen::Matrix3d(element_stiffness(v, coefficients.A, opts) +
                           element_convection_b(v, coefficients.b, opts) +
                           element_convection_c(v, coefficients.c, opts) +
                           element_mass(v, coefficients.d));
  });
}

Eigen::VectorXd assemble_load(const SurfaceMesh& mesh, const AmbientScalarField& f,
                              const AssemblyOptions& options) {
  return assemble_vector(mesh, options, [&](const ElementVertices& v) {
    const ElementGeometry g = element_geometry(v);
    Eigen::Vector3d local = Eigen::Vector3d::Zero();
    for (const auto& q : triangle_quadrature()) {
      const double fq = f(to_vector(quadrature_location(v, q)));
      if (!std::isfinite(fq)) throw CoefficientError("load is not finite at a quadrature point");
      for (int i = 0; i < 3; ++i) local[i] += q.weight * g.area * fq * q.barycentric[i];
    }
    return local;
  });
}

Eigen::VectorXd assemble_load_div(const SurfaceMesh& mesh, const AmbientVectorField& F,
                                  const AssemblyOptions& options) {
  return assemble_vector(mesh, options, [&](const ElementVertices& v) {
    const ElementGeometry g = element_geometry(v);
    Eigen::Vector3d local = Eigen::Vector3d::Zero();
    for (const auto& q : triangle_quadrature()) {
      const Point3 fq = maybe_project(to_point(F(to_vector(quadrature_location(v, q)))), g.normal,
                                      options.project_tangential);
      for (int i = 0; i < 3; ++i) local[i] -= q.weight * g.area * fq.dot(g.gradients[i]);
    }
    return local;
  });
}

Eigen::VectorXd assemble_load(const SurfaceMesh& mesh, const DiscreteField& u) {
  u.check(mesh);
  return assemble_mass(mesh) * u.values;
}

Eigen::VectorXd mass_weights(const SurfaceMesh& mesh) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.vertex_count()));
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const double third = element_geometry(mesh, t).area / 3.0;
    for (int i : mesh.triangles()[t]) w[i] += third;
  }
  return w;
}

double discrete_norm(const SurfaceMesh& mesh, const DiscreteField& u, int m, double p) {
  if (m != 0 && m != 1) throw ContractError("discrete_norm: m must be 0 or 1");
  if (!(p > 1.0) || !std::isfinite(p)) throw ContractError("discrete_norm: p must be finite and > 1");
  u.check(mesh);
  double sum = 0.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const ElementGeometry g = element_geometry(mesh, t);
    const Eigen::Vector3d uv(u.values[tri[0]], u.values[tri[1]], u.values[tri[2]]);
    for (const auto& q : triangle_quadrature()) {
      const double uq = q.barycentric[0] * uv[0] + q.barycentric[1] * uv[1] + q.barycentric[2] * uv[2];
      sum += q.weight * g.area * std::pow(std::abs(uq), p);
    }
    if (m == 1) {
      const Point3 grad = uv[0] * g.gradients[0] + uv[1] * g.gradients[1] + uv[2] * g.gradients[2];
      sum += g.area * std::pow(grad.norm(), p);
    }
  }
  return std::pow(sum, 1.0 / p);
}

double mean_value(const SurfaceMesh& mesh, const DiscreteField& u) {
  u.check(mesh);
  return mass_weights(mesh).dot(u.values);
}

double average_value(const SurfaceMesh& mesh, const DiscreteField& u) {
  return mean_value(mesh, u) / mesh.total_area();
}

double max_abs(const SparseMatrix& m) {
  double out = 0.0;
  for (Eigen::Index k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) out = std::max(out, std::abs(it.value()));
  }
  return out;
}

}  // namespace gamma_elliptic
