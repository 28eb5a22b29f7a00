#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "gamma_elliptic/assembly.hpp"
#include "gamma_elliptic/errors.hpp"
#include "gamma_elliptic/expression.hpp"

using namespace gamma_elliptic;
using Eigen::Matrix3d;
using Eigen::VectorXd;

namespace {

constexpr double pi = std::numbers::pi;

SurfaceMesh right_triangle_pillow() {
  return SurfaceMesh({Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0)}, {Triangle{0, 1, 2}, Triangle{0, 2, 1}});
}

ElementVertices right_triangle() { return {Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0)}; }

const SurfaceMesh& sphere(int level) {
  static std::map<int, SurfaceMesh> cache;
  auto it = cache.find(level);
  if (it == cache.end()) {
    it = cache.emplace(level, build_mesh(make_sphere_atlas(), MeshPreset::SphereIcosahedral, level)).first;
  }
  return it->second;
}

const SurfaceMesh& torus() {
  static const SurfaceMesh mesh = build_mesh(make_torus_atlas(2.0, 1.0), MeshPreset::TorusGrid, 2);
  return mesh;
}

AmbientScalarField scalar(const char* text) { return make_scalar_field(Expression::parse(text)); }

AmbientVectorField vector_field(const char* a, const char* b, const char* c) {
  return make_vector_field({Expression::parse(a), Expression::parse(b), Expression::parse(c)});
}

// Variable, non-symmetric matrix field whose tangential part stays elliptic.
AmbientMatrixField skewed_matrix() {
  AmbientMatrixField A;
  A.value = [](const Vector& x) {
    Matrix m = Matrix::Identity(3, 3) * (2.0 + 0.5 * std::sin(x[0]));
    m(0, 1) = 0.3 * x[2];
    m(1, 0) = -0.2;
    m(2, 0) = 0.1 * x[1];
    return m;
  };
  return A;
}

VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

double max_abs_dense(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Quadrature, WeightsAndPoints) {
  double total = 0.0;
  for (const auto& q : triangle_quadrature()) {
    total += q.weight;
    EXPECT_NEAR(q.barycentric[0] + q.barycentric[1] + q.barycentric[2], 1.0, 1e-15);
  }
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(Quadrature, QuadraticPolynomialsIntegrateExactly) {
  const auto mesh = right_triangle_pillow();
  // int over the unit right triangle: x^2 -> 1/12, x y -> 1/24, 1 + x -> 2/3.
  EXPECT_NEAR(assemble_load(mesh, scalar("x1^2")).sum(), 2.0 / 12.0, 1e-15);
  EXPECT_NEAR(assemble_load(mesh, scalar("x1*x2")).sum(), 2.0 / 24.0, 1e-15);
  EXPECT_NEAR(assemble_load(mesh, scalar("1 + x1")).sum(), 2.0 * (2.0 / 3.0), 1e-15);
  // Mass with a linear coefficient has a cubic integrand; its row sums are
  // int d phi_i, which is quadratic.
  const SparseMatrix M = assemble_mass(mesh, scalar("x1"));
  const VectorXd row_sums = M * VectorXd::Ones(3);
  // Oracle: int x phi_i over the triangle = area/12 * (sum x_v + x_i).
  const double area = 0.5;
  for (int i = 0; i < 3; ++i) {
    const double xi = mesh.vertices()[i][0];
    EXPECT_NEAR(row_sums[i], 2 * area / 12.0 * (1.0 + xi), 1e-15);
  }
}

TEST(Stiffness, HandComputedRightTriangle) {
  Matrix3d expected;
  expected << 1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5;
  EXPECT_LE((element_stiffness(right_triangle(), AmbientMatrixField::identity()) - expected).cwiseAbs().maxCoeff(),
            1e-15);
}

TEST(Stiffness, ConstantsAreInTheKernel) {
  for (const auto* mesh : {&sphere(2), &torus()}) {
    const SparseMatrix K = assemble_stiffness(*mesh, skewed_matrix());
    const VectorXd k1 = K * VectorXd::Ones(K.cols());
    for (Eigen::Index i = 0; i < K.rows(); ++i) {
      EXPECT_LE(std::abs(k1[i]), 1e-12 * K.row(i).cwiseAbs().sum());
    }
  }
}

TEST(Stiffness, LinearInTheCoefficientAndSymmetricForIdentity) {
  const auto& mesh = sphere(2);
  const SparseMatrix K1 = assemble_stiffness(mesh, AmbientMatrixField::identity());
  const SparseMatrix K2 = assemble_stiffness(mesh, AmbientMatrixField::identity(3, 2.0));
  EXPECT_LE(max_abs(SparseMatrix(K2 - 2.0 * K1)), 1e-15 * max_abs(K2));
  EXPECT_LE(max_abs(SparseMatrix(K1 - SparseMatrix(K1.transpose()))), 1e-12 * max_abs(K1));
}

TEST(Stiffness, IndefiniteCoefficientIsRejected) {
  EXPECT_THROW((void)assemble_stiffness(sphere(1), AmbientMatrixField::identity(3, -1.0)), CoefficientError);
  AmbientMatrixField bad;
  bad.value = [](const Vector&) { return Matrix(Matrix::Constant(3, 3, std::nan(""))); };
  EXPECT_THROW((void)assemble_stiffness(sphere(1), bad), CoefficientError);
}

TEST(Stiffness, ClaimedEllipticityIsChecked) {
  CoefficientSet coeffs;
  coeffs.ellipticity = 2.0;  // A = I only gives 1
  EXPECT_THROW((void)assemble_operator(sphere(1), coeffs), CoefficientError);
  coeffs.ellipticity = 1.0;
  EXPECT_NO_THROW((void)assemble_operator(sphere(1), coeffs));
}

TEST(Convection, ZeroFieldGivesZeroMatrix) {
  EXPECT_EQ(max_abs(assemble_convection_b(sphere(1), AmbientVectorField::zero())), 0.0);
  EXPECT_EQ(max_abs(assemble_convection_c(sphere(1), AmbientVectorField::zero())), 0.0);
}

TEST(Convection, HandComputedRightTriangle) {
  // grad phi = (-1,-1), (1,0), (0,1); int phi_j = area / 3 = 1/6.
  const Point3 grads[3] = {Point3(-1, -1, 0), Point3(1, 0, 0), Point3(0, 1, 0)};
  const auto b = AmbientVectorField::constant(Vector{{1.0, 0.0, 0.0}});
  Matrix3d expected_b, expected_c;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      expected_b(i, j) = grads[i][0] / 6.0;
      expected_c(i, j) = grads[j][0] / 6.0;
    }
  }
  EXPECT_LE((element_convection_b(right_triangle(), b) - expected_b).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((element_convection_c(right_triangle(), b) - expected_c).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Convection, TransposeIdentity) {
  const auto w = vector_field("x2*x3", "sin(x1)", "x1 - x2");
  for (const auto* mesh : {&sphere(2), &torus()}) {
    const SparseMatrix Gb = assemble_convection_b(*mesh, w);
    const SparseMatrix Gc = assemble_convection_c(*mesh, w);
    EXPECT_LE(max_abs(SparseMatrix(Gc - SparseMatrix(Gb.transpose()))), 1e-14 * max_abs(Gb));
  }
}

TEST(Convection, ConstantTrialGivesIntegralOfFieldAgainstGradients) {
  const auto w = vector_field("-x2", "x1", "0");
  const SparseMatrix Gb = assemble_convection_b(sphere(3), w);
  const VectorXd g1 = Gb * VectorXd::Ones(Gb.cols());
  // Partition of unity: the entries sum to int w . grad 1 = 0.
  EXPECT_LE(std::abs(g1.sum()), 1e-12 * g1.cwiseAbs().sum());
}

TEST(Convection, DiscretelyDivergenceFreeFieldIsNearlySkew) {
  const auto c = vector_field("-x2", "x1", "0");
  double previous = std::numeric_limits<double>::infinity();
  for (int level = 2; level <= 4; ++level) {
    const auto& mesh = sphere(level);
    const SparseMatrix Gc = assemble_convection_c(mesh, c);
    const VectorXd flux = SparseMatrix(Gc.transpose()) * VectorXd::Ones(Gc.cols());
    const double eps = flux.cwiseAbs().maxCoeff();
    const VectorXd u = random_vector(Gc.cols(), 40 + level);
    const double sym = std::abs(u.dot((Gc + SparseMatrix(Gc.transpose())) * u)) / u.squaredNorm();
    EXPECT_LE(sym, 10.0 * eps) << "level " << level;
    EXPECT_LT(sym, previous);
    previous = sym;
  }
}

TEST(Mass, HandComputedElementMatrix) {
  Matrix3d expected;
  expected << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  expected *= 0.5 / 12.0;
  EXPECT_LE((element_mass(right_triangle(), AmbientScalarField::constant(1.0)) - expected).cwiseAbs().maxCoeff(),
            1e-16);
  const auto mesh = right_triangle_pillow();
  EXPECT_LE(max_abs_dense(Eigen::MatrixXd(assemble_mass(mesh)) - 2 * Eigen::MatrixXd(expected)), 1e-16);
}

TEST(Mass, ZeroCoefficientAndTotalArea) {
  EXPECT_EQ(max_abs(assemble_mass(sphere(2), AmbientScalarField::constant(0.0))), 0.0);
  for (const auto* mesh : {&sphere(3), &torus()}) {
    const SparseMatrix M = assemble_mass(*mesh, AmbientScalarField::constant(1.0));
    const VectorXd ones = VectorXd::Ones(M.cols());
    EXPECT_NEAR(ones.dot(M * ones), mesh->total_area(), 1e-12 * mesh->total_area());
    EXPECT_LE(max_abs(SparseMatrix(M - SparseMatrix(M.transpose()))), 1e-16);
  }
}

TEST(Mass, SphereAreaApproaches4Pi) {
  // The polyhedral area is 4.8e-3 short at level 3, 1.2e-3 at level 4.
  const auto& mesh = sphere(5);
  const SparseMatrix M = assemble_mass(mesh);
  const VectorXd ones = VectorXd::Ones(M.cols());
  EXPECT_LE(std::abs(ones.dot(M * ones) - 4 * pi) / (4 * pi), 1e-3);
  EXPECT_LE(std::abs(mass_weights(sphere(3)).sum() - 4 * pi) / (4 * pi), 5e-3);
}

TEST(Load, ZeroConstantAndDivergenceForm) {
  EXPECT_EQ(assemble_load(sphere(2), AmbientScalarField::constant(0.0)).norm(), 0.0);
  const auto& mesh = sphere(3);
  EXPECT_NEAR(assemble_load(mesh, AmbientScalarField::constant(1.0)).sum(), mesh.total_area(), 1e-12);
  const VectorXd div = assemble_load_div(mesh, vector_field("x2*x3", "-x1", "x1^2"));
  EXPECT_LE(std::abs(div.sum()), 1e-12 * div.cwiseAbs().sum());
}

TEST(Load, DiscreteFieldLoadIsMassTimesValues) {
  const auto& mesh = sphere(2);
  const auto u = interpolate(mesh, scalar("x1 + x3^2"));
  const VectorXd expected = assemble_mass(mesh) * u.values;
  EXPECT_LE((assemble_load(mesh, u) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Norms, Examples) {
  const auto& mesh = sphere(3);
  const auto zero = DiscreteField::on(mesh, VectorXd::Zero(mesh.vertex_count()));
  EXPECT_EQ(discrete_norm(mesh, zero, 1, 2.0), 0.0);
  const double gamma = -2.5;
  const auto constant = DiscreteField::on(mesh, VectorXd::Constant(mesh.vertex_count(), gamma));
  EXPECT_NEAR(discrete_norm(mesh, constant, 0, 2.0), std::abs(gamma) * std::sqrt(mesh.total_area()), 1e-12);
  // The polyhedral error is about 1.1e-2 at level 3; level 5 is within 2e-3.
  const auto& fine = sphere(5);
  const auto x3 = interpolate(fine, scalar("x3"));
  EXPECT_NEAR(discrete_norm(fine, x3, 0, 2.0), std::sqrt(4 * pi / 3), 2e-3);
}

TEST(Norms, H1NormMatchesQuadraticForm) {
  const auto& mesh = torus();
  const SparseMatrix KM = assemble_stiffness(mesh, AmbientMatrixField::identity()) + assemble_mass(mesh);
  const VectorXd u = random_vector(static_cast<Eigen::Index>(mesh.vertex_count()), 7);
  const auto field = DiscreteField::on(mesh, u);
  EXPECT_NEAR(discrete_norm(mesh, field, 1, 2.0), std::sqrt(u.dot(KM * u)), 1e-10 * std::sqrt(u.dot(KM * u)));
}

TEST(Norms, HomogeneousOfDegreeOne) {
  const auto& mesh = sphere(2);
  const VectorXd u = random_vector(static_cast<Eigen::Index>(mesh.vertex_count()), 8);
  for (double p : {1.5, 2.0, 3.0, 4.0}) {
    for (int m : {0, 1}) {
      const double base = discrete_norm(mesh, DiscreteField::on(mesh, u), m, p);
      EXPECT_NEAR(discrete_norm(mesh, DiscreteField::on(mesh, -3.0 * u), m, p), 3.0 * base, 1e-12 * base);
    }
  }
}

TEST(Norms, InvalidArgumentsAreRejected) {
  const auto& mesh = sphere(1);
  const auto u = DiscreteField::on(mesh, VectorXd::Ones(mesh.vertex_count()));
  EXPECT_THROW((void)discrete_norm(mesh, u, 0, 1.0), ContractError);
  EXPECT_THROW((void)discrete_norm(mesh, u, 2, 2.0), ContractError);
  EXPECT_THROW((void)discrete_norm(sphere(2), u, 0, 2.0), ContractError);
}

TEST(MeanValue, Examples) {
  const auto& mesh = sphere(3);
  EXPECT_EQ(mean_value(mesh, DiscreteField::on(mesh, VectorXd::Zero(mesh.vertex_count()))), 0.0);
  EXPECT_NEAR(mean_value(mesh, DiscreteField::on(mesh, VectorXd::Ones(mesh.vertex_count()))), 4 * pi, 5e-3 * 4 * pi);
  EXPECT_NEAR(mean_value(mesh, interpolate(mesh, scalar("x3"))), 0.0, 1e-12);
  const VectorXd u = random_vector(static_cast<Eigen::Index>(mesh.vertex_count()), 9);
  const VectorXd ones = VectorXd::Ones(u.size());
  EXPECT_NEAR(mean_value(mesh, DiscreteField::on(mesh, u)), ones.dot(assemble_mass(mesh) * u), 1e-12);
  EXPECT_NEAR(average_value(mesh, DiscreteField::on(mesh, ones)), 1.0, 1e-14);
}

TEST(Adjoint, TransposedOperatorEqualsAdjointCoefficients) {
  CoefficientSet coeffs;
  coeffs.A = skewed_matrix();
  coeffs.b = vector_field("x3", "x1*x2", "1");
  coeffs.c = vector_field("-x2", "x1", "0");
  coeffs.d = scalar("1 + x1^2");
  coeffs.ellipticity = 1.0;
  const auto& mesh = torus();
  const SparseMatrix T = assemble_operator(mesh, coeffs);
  const SparseMatrix Tadj = assemble_operator(mesh, coeffs.adjoint());
  EXPECT_LE(max_abs(SparseMatrix(SparseMatrix(T.transpose()) - Tadj)), 1e-12 * max_abs(T));
}

TEST(Threads, ParallelAssemblyIsBitwiseDeterministic) {
  const auto& mesh = sphere(4);  // above the single-thread cutoff
  ASSERT_GT(mesh.triangle_count(), 2048u);
  CoefficientSet coeffs;
  coeffs.A = skewed_matrix();
  coeffs.c = vector_field("-x2", "x1", "0");
  coeffs.d = scalar("x3^2");
  AssemblyOptions serial, parallel;
  parallel.threads = 4;
  const SparseMatrix a = assemble_operator(mesh, coeffs, serial);
  const SparseMatrix b = assemble_operator(mesh, coeffs, parallel);
  EXPECT_EQ(max_abs(SparseMatrix(a - b)), 0.0);
  const VectorXd la = assemble_load(mesh, scalar("sin(x1)"), serial);
  const VectorXd lb = assemble_load(mesh, scalar("sin(x1)"), parallel);
  EXPECT_EQ((la - lb).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Threads, ErrorsInWorkersPropagate) {
  AssemblyOptions parallel;
  parallel.threads = 3;
  EXPECT_THROW((void)assemble_stiffness(sphere(4), AmbientMatrixField::identity(3, -1.0), parallel),
               CoefficientError);
}

TEST(SparseSystem, ConstraintMustSumToArea) {
  const auto& mesh = sphere(1);
  SparseSystem system{assemble_stiffness(mesh, AmbientMatrixField::identity()), VectorXd::Zero(42), mass_weights(mesh)};
  EXPECT_NO_THROW(system.validate());
  EXPECT_NEAR(system.constraint->sum(), mesh.total_area(), 1e-12);
  system.rhs = VectorXd::Zero(41);
  EXPECT_THROW(system.validate(), ContractError);
}

TEST(DiscreteField, MeshMismatchIsDetected) {
  const auto& a = sphere(1);
  const auto u = DiscreteField::on(a, VectorXd::Zero(a.vertex_count()));
  EXPECT_NO_THROW(u.check(a));
  const auto other = build_mesh(make_sphere_atlas(), MeshPreset::SphereIcosahedral, 1);
  EXPECT_THROW(u.check(other), ContractError);
}
