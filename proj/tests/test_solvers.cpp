#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include <Eigen/SparseLU>
#include <gtest/gtest.h>

#include "gamma_elliptic/errors.hpp"
#include "gamma_elliptic/expression.hpp"
#include "gamma_elliptic/krylov.hpp"
#include "gamma_elliptic/solvers.hpp"

using namespace gamma_elliptic;
using Eigen::VectorXd;

namespace {

constexpr double pi = std::numbers::pi;

const SurfaceMesh& sphere(int level) {
  static std::map<int, SurfaceMesh> cache;
  auto it = cache.find(level);
  if (it == cache.end()) {
    it = cache.emplace(level, build_mesh(make_sphere_atlas(), MeshPreset::SphereIcosahedral, level)).first;
  }
  return it->second;
}

AmbientScalarField scalar(const char* text) { return make_scalar_field(Expression::parse(text)); }

AmbientVectorField rotation() {
  return make_vector_field({Expression::parse("-x2"), Expression::parse("x1"), Expression::parse("0")});
}

// Mass-norm distance between u_h and the vertex interpolant of u, both
// shifted to zero mean when `mean_zero`.
double l2_error(const SurfaceMesh& mesh, const VectorXd& uh, const char* exact, bool mean_zero = true) {
  const SparseMatrix M = assemble_mass(mesh);
  const VectorXd m = mass_weights(mesh);
  VectorXd e = uh - interpolate(mesh, scalar(exact)).values;
  if (mean_zero) e.array() -= m.dot(e) / m.sum();
  return std::sqrt(e.dot(M * e));
}

SparseMatrix identity(int n) {
  SparseMatrix I(n, n);
  I.setIdentity();
  return I;
}

SparseMatrix diagonal(std::initializer_list<double> d) {
  SparseMatrix D(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
  int i = 0;
  for (double v : d) {
    D.insert(i, i) = v;
    ++i;
  }
  return D;
}

}  // namespace

TEST(LinearSystem, IdentityReturnsTheRightHandSide) {
  const VectorXd b = VectorXd::LinSpaced(5, -1.0, 3.0);
  const auto r = solve_linear_system(SparseSystem{identity(5), b, std::nullopt});
  EXPECT_TRUE(r.converged);
  EXPECT_LE((r.x - b).norm(), 1e-14);
}

TEST(LinearSystem, DiagonalSpdSystem) {
  const auto r = solve_linear_system(SparseSystem{diagonal({2.0, 4.0}), VectorXd{{2.0, 4.0}}, std::nullopt});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.method, "cg");
  EXPECT_LE((r.x - VectorXd::Ones(2)).norm(), 1e-14);
}

TEST(LinearSystem, ConstrainedSphereLaplacianWithRandomMeanZeroLoad) {
  const auto& mesh = sphere(3);
  const SparseMatrix K = assemble_stiffness(mesh, AmbientMatrixField::identity());
  const VectorXd m = mass_weights(mesh);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  VectorXd rhs(K.rows());
  for (auto& v : rhs) v = g(rng);
  rhs.array() -= rhs.mean();
  const auto r = solve_linear_system(SparseSystem{K, rhs, m});
  ASSERT_TRUE(r.converged);
  ASSERT_EQ(r.x.size(), K.rows() + 1);
  VectorXd full_rhs(K.rows() + 1);
  full_rhs << rhs, 0.0;
  const SparseMatrix S = saddle_point_matrix(K, m);
  EXPECT_LE((S * r.x - full_rhs).norm() / full_rhs.norm(), 1e-10);
  EXPECT_LE(std::abs(m.dot(r.x.head(K.rows()))), 1e-10 * r.x.norm());
}

TEST(LinearSystem, NonsymmetricSystemUsesTransposeFreeMethod) {
  const auto& mesh = sphere(2);
  const SparseMatrix T = SparseMatrix(assemble_stiffness(mesh, AmbientMatrixField::identity()) + assemble_mass(mesh) +
                                      assemble_convection_c(mesh, rotation()));
  ASSERT_FALSE(is_symmetric(T));
  const VectorXd rhs = assemble_load(mesh, scalar("x1 + x3^2"));
  const auto r = solve_linear_system(SparseSystem{T, rhs, std::nullopt});
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.method == "bicgstab" || r.method == "gmres");
  EXPECT_LE((T * r.x - rhs).norm() / rhs.norm(), 1e-10);
}

TEST(LinearSystem, KrylovMethodsAgreeOnSmallProblem) {
  const auto& mesh = sphere(1);
  const SparseMatrix A = SparseMatrix(assemble_stiffness(mesh, AmbientMatrixField::identity()) + assemble_mass(mesh));
  const VectorXd b = assemble_load(mesh, scalar("1 + x2"));
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu{Eigen::SparseMatrix<double>(A)};
  const VectorXd direct = lu.solve(b);
  const VectorXd diag = A.diagonal();
  for (const auto& r : {conjugate_gradient(A, b), minres(A, b, diag), bicgstab(A, b, diag), gmres(A, b, diag)}) {
    EXPECT_TRUE(r.converged) << r.method;
    EXPECT_LE((r.x - direct).norm() / direct.norm(), 1e-9) << r.method;
  }
}

TEST(LinearSystem, ExhaustedIterationsAreReportedNotThrown) {
  const auto& mesh = sphere(3);
  const SparseMatrix A = SparseMatrix(assemble_stiffness(mesh, AmbientMatrixField::identity()) + assemble_mass(mesh));
  KrylovOptions opts;
  opts.max_iterations = 2;
  const auto r = solve_linear_system(SparseSystem{A, assemble_load(mesh, scalar("x3")), std::nullopt}, opts);
  EXPECT_FALSE(r.converged);
  EXPECT_GT(r.residual, 1e-10);
}

TEST(LaplaceBeltrami, ZeroLoadGivesZero) {
  const auto report = solve_laplace_beltrami(sphere(2), AmbientMatrixField::identity(), AmbientScalarField::constant(0));
  EXPECT_TRUE(report.converged);
  EXPECT_EQ(report.solution.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LaplaceBeltrami, EigenfunctionX3ConvergesAtSecondOrder) {
  std::vector<double> h, err;
  for (int level = 2; level <= 4; ++level) {
    const auto& mesh = sphere(level);
    const auto r = solve_laplace_beltrami(mesh, AmbientMatrixField::identity(), scalar("2*x3"));
    ASSERT_TRUE(r.converged);
    EXPECT_LE(r.residual, 1e-10);
    EXPECT_LE(std::abs(mean_value(mesh, r.solution)), 1e-10 * r.solution.values.norm());
    ASSERT_TRUE(r.multiplier.has_value());
    h.push_back(mesh_size(mesh));
    err.push_back(l2_error(mesh, r.solution.values, "x3"));
  }
  const double rate = std::log(err[1] / err[2]) / std::log(h[1] / h[2]);
  EXPECT_GE(rate, 1.8);
  EXPECT_LE(rate, 2.2);
}

TEST(LaplaceBeltrami, DegreeTwoHarmonic) {
  double previous = std::numeric_limits<double>::infinity();
  for (int level = 2; level <= 4; ++level) {
    const auto r = solve_laplace_beltrami(sphere(level), AmbientMatrixField::identity(), scalar("6*x1*x2"));
    const double e = l2_error(sphere(level), r.solution.values, "x1*x2");
    EXPECT_LT(e, previous / 3.0);
    previous = e;
  }
  EXPECT_LT(previous, 5e-3);
}

TEST(LaplaceBeltrami, DivergenceFormDataMatchesScalarForm) {
  // -div(grad x3) = 2 x3 on the unit sphere, so F = -grad_M x3 = -(e3 - x3 x) pairs like 2 x3.
  const auto& mesh = sphere(3);
  const auto F = make_vector_field({Expression::parse("x3*x1"), Expression::parse("x3*x2"),
                                    Expression::parse("x3^2 - 1")});
  const auto div_form = solve_laplace_beltrami(mesh, AmbientMatrixField::identity(), F);
  EXPECT_TRUE(div_form.converged);
  EXPECT_LT(l2_error(mesh, div_form.solution.values, "x3"), 2e-2);
}

TEST(LaplaceBeltrami, NonzeroMeanLoadIsRejected) {
  const auto& mesh = sphere(2);
  EXPECT_THROW((void)solve_laplace_beltrami_load(mesh, AmbientMatrixField::identity(), mass_weights(mesh)),
               ContractError);
  SolverOptions opts;
  opts.recenter_load = true;
  const auto r = solve_laplace_beltrami_load(mesh, AmbientMatrixField::identity(), mass_weights(mesh), opts);
  EXPECT_LE(r.solution.values.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(LaplaceBeltrami, NonConvergenceIsASolverError) {
  SolverOptions opts;
  opts.max_iterations = 1;
  EXPECT_THROW((void)solve_laplace_beltrami(sphere(3), AmbientMatrixField::identity(), scalar("2*x3"), opts),
               SolverError);
}

TEST(LaplaceBeltrami, ScalingProperties) {
  const auto& mesh = sphere(3);
  const auto base = solve_laplace_beltrami(mesh, AmbientMatrixField::identity(), scalar("2*x3"));
  const auto both = solve_laplace_beltrami(mesh, AmbientMatrixField::identity(3, 3.0), scalar("6*x3"));
  const auto load = solve_laplace_beltrami(mesh, AmbientMatrixField::identity(), scalar("6*x3"));
  const double n = base.solution.values.norm();
  EXPECT_LE((both.solution.values - base.solution.values).norm(), 1e-8 * n);
  EXPECT_LE((load.solution.values - 3.0 * base.solution.values).norm(), 1e-8 * n);
}

TEST(LaplaceBeltrami, AprioriRatioIsRecorded) {
  const auto r = solve_laplace_beltrami(sphere(3), AmbientMatrixField::identity(), scalar("2*x3"));
  const auto& mesh = sphere(3);
  const VectorXd load = assemble_load(mesh, scalar("2*x3"));
  const VectorXd m = mass_weights(mesh);
  const double dual = std::sqrt((load.array().square() / m.array()).sum());
  EXPECT_NEAR(r.apriori_ratio, discrete_norm(mesh, r.solution, 1, 2.0) / dual, 1e-12 * r.apriori_ratio);
  // For the l = 1 eigenfunction the ratio is sqrt(1 + 2) / 2 in the limit.
  EXPECT_NEAR(r.apriori_ratio, std::sqrt(3.0) / 2.0, 2e-2);
  const auto j = r.to_json();
  EXPECT_EQ(j["dofs"], mesh.vertex_count());
  EXPECT_TRUE(j["converged"].get<bool>());
}

TEST(GeneralElliptic, ReactionProblemRecoversX3) {
  CoefficientSet coeffs;
  coeffs.d = AmbientScalarField::constant(1.0);
  double previous = std::numeric_limits<double>::infinity();
  for (int level = 2; level <= 4; ++level) {
    const auto r = solve_general_elliptic(sphere(level), coeffs, scalar("3*x3"));
    EXPECT_TRUE(r.converged);
    EXPECT_FALSE(r.multiplier.has_value());
    const double e = l2_error(sphere(level), r.solution.values, "x3", false);
    EXPECT_LT(e, previous / 3.0);
    previous = e;
  }
  EXPECT_LT(previous, 5e-3);
}

TEST(GeneralElliptic, ReactionOnlyIdentity) {
  CoefficientSet coeffs;
  coeffs.d = AmbientScalarField::constant(1.0);
  const auto r = solve_general_elliptic(sphere(3), coeffs, AmbientScalarField::constant(1.0));
  EXPECT_LE((r.solution.values - VectorXd::Ones(r.solution.values.size())).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(GeneralElliptic, DoublyViolatedConditionsNeedAnOverride) {
  CoefficientSet coeffs;  // d = 0, b = c = 0
  EXPECT_THROW((void)solve_general_elliptic(sphere(2), coeffs, scalar("2*x3")), WellPosednessError);
  GeneralSolveOptions general;
  general.override_conditions = true;
  general.mean_zero = true;
  const auto r = solve_general_elliptic(sphere(3), coeffs, scalar("2*x3"), {}, general);
  const auto lb = solve_laplace_beltrami(sphere(3), AmbientMatrixField::identity(), scalar("2*x3"));
  EXPECT_LE((r.solution.values - lb.solution.values).norm(), 1e-8 * lb.solution.values.norm());
}

TEST(GeneralElliptic, DiscreteDualityWithAdjointCoefficients) {
  const auto atlas = make_torus_atlas(2.0, 1.0);
  const auto mesh = build_mesh(atlas, MeshPreset::TorusGrid, 2);
  CoefficientSet coeffs;
  AmbientMatrixField A;
  A.value = [](const Vector& x) {
    Matrix m = Matrix::Identity(3, 3) * (1.5 + 0.5 * x[0] * x[0] / 9.0);
    m(0, 1) = 0.2;
    return m;
  };
  coeffs.A = A;
  coeffs.b = make_vector_field({Expression::parse("0.3*x2"), Expression::parse("0"), Expression::parse("0.1")});
  coeffs.c = rotation();
  coeffs.d = AmbientScalarField::constant(1.0);
  const SparseMatrix T = assemble_operator(mesh, coeffs);
  const SparseMatrix Tadj = assemble_operator(mesh, coeffs.adjoint());
  const VectorXd f = assemble_load(mesh, scalar("1 + x1 + 0.3*x3"));
  const VectorXd g = assemble_load(mesh, scalar("2 + x2^2 + x3"));
  const auto u1 = solve_linear_system(SparseSystem{T, g, std::nullopt});
  const auto u2 = solve_linear_system(SparseSystem{Tadj, f, std::nullopt});
  ASSERT_TRUE(u1.converged && u2.converged);
  EXPECT_NEAR(f.dot(u1.x), g.dot(u2.x), 1e-8 * std::abs(f.dot(u1.x)));
}

TEST(DivFree, ZeroFieldReducesToLaplaceBeltrami) {
  const auto& mesh = sphere(3);
  const auto a = solve_divfree_cd(mesh, AmbientMatrixField::identity(), AmbientVectorField::zero(), scalar("2*x3"));
  const auto b = solve_laplace_beltrami(mesh, AmbientMatrixField::identity(), scalar("2*x3"));
  EXPECT_LE((a.solution.values - b.solution.values).norm(), 1e-10 * b.solution.values.norm());
}

TEST(DivFree, RotationFieldLeavesX3Unchanged) {
  double previous = std::numeric_limits<double>::infinity();
  for (int level = 2; level <= 4; ++level) {
    const auto& mesh = sphere(level);
    const auto r = solve_divfree_cd(mesh, AmbientMatrixField::identity(), rotation(), scalar("2*x3"));
    ASSERT_TRUE(r.converged);
    EXPECT_LE(std::abs(mean_value(mesh, r.solution)), 1e-10 * r.solution.values.norm());
    const double e = l2_error(mesh, r.solution.values, "x3");
    EXPECT_LT(e, previous / 3.0);
    previous = e;
    // Energy identity for the computed solution.
    const SparseMatrix Gc = assemble_convection_c(mesh, rotation());
    const VectorXd& u = r.solution.values;
    const double eps = check_div_free(mesh, rotation());
    EXPECT_LE(std::abs(u.dot(Gc * u)), eps * u.squaredNorm());
    ASSERT_TRUE(r.coercivity_margin.has_value());
    EXPECT_GT(*r.coercivity_margin, 0.99);
  }
}

TEST(DivFree, NonSolenoidalFieldIsRejected) {
  const auto position = make_vector_field({Expression::parse("x1"), Expression::parse("x2"), Expression::parse("x3")});
  EXPECT_THROW((void)solve_divfree_cd(sphere(2), AmbientMatrixField::identity(), position, scalar("2*x3")),
               ContractError);
}

TEST(Biharmonic, ZeroLoad) {
  const auto r = solve_biharmonic(sphere(2), AmbientScalarField::constant(0.0));
  EXPECT_EQ(r.solution.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Biharmonic, SquaredEigenvalues) {
  for (const auto& [load, exact] : {std::pair{"4*x3", "x3"}, std::pair{"36*x1*x2", "x1*x2"}}) {
    double previous = std::numeric_limits<double>::infinity();
    for (int level = 2; level <= 4; ++level) {
      const auto r = solve_biharmonic(sphere(level), scalar(load));
      EXPECT_TRUE(r.converged);
      const double e = l2_error(sphere(level), r.solution.values, exact);
      EXPECT_LT(e, previous / 3.0) << load;
      previous = e;
    }
    EXPECT_LT(previous, 1e-2) << load;
  }
}

TEST(Biharmonic, TwoLaplaciansReproduceTheLoad) {
  for (int level = 2; level <= 4; ++level) {
    const auto& mesh = sphere(level);
    const auto r = solve_biharmonic(mesh, scalar("4*x3"));
    const SparseMatrix K = assemble_stiffness(mesh, AmbientMatrixField::identity());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> mass{Eigen::SparseMatrix<double>(assemble_mass(mesh))};
    const VectorXd w = mass.solve(VectorXd(K * r.solution.values));
    const VectorXd load = assemble_load(mesh, scalar("4*x3"));
    // Each stage is solved to 1e-10; the mass inverse amplifies that.
    EXPECT_LE((K * w - load).norm() / load.norm(), 1e-6);
  }
}

TEST(Ellipticity, Examples) {
  CoefficientSet coeffs;
  EXPECT_NEAR(check_ellipticity(coeffs, sphere(2), 1000), 1.0, 1e-14);
  coeffs.A = AmbientMatrixField::identity(3, 2.0);
  EXPECT_NEAR(check_ellipticity(coeffs, sphere(2), 1000), 2.0, 1e-14);
}

TEST(Ellipticity, SandwichedDiagonalAgainstTangentPlaneOracle) {
  AmbientMatrixField A;
  A.value = [](const Vector& x) {
    const Vector nu = x.normalized();
    const Matrix P = Matrix::Identity(3, 3) - nu * nu.transpose();
    Matrix D = Matrix::Zero(3, 3);
    D.diagonal() << 1, 2, 3;
    return Matrix(P * D * P + (Matrix::Identity(3, 3) - P));
  };
  CoefficientSet coeffs;
  coeffs.A = A;
  const auto& mesh = sphere(2);
  const double estimate = check_ellipticity(coeffs, mesh, mesh.triangle_count());
  // Oracle: 2x2 eigenproblem in an orthonormal basis of each element plane.
  double oracle = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto v = element_vertices(mesh, t);
    const Point3 n = (v[1] - v[0]).cross(v[2] - v[0]).normalized();
    const Point3 e1 = (v[1] - v[0]).normalized();
    const Point3 e2 = n.cross(e1);
    Eigen::Matrix<double, 3, 2> basis;
    basis << e1, e2;
    for (const auto& q : triangle_quadrature()) {
      const Point3 x = quadrature_location(v, q);
      const Eigen::Matrix3d a = A.value(Vector(x));
      const Eigen::Matrix2d r = basis.transpose() * (0.5 * (a + a.transpose())) * basis;
      oracle = std::min(oracle, Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(r).eigenvalues()[0]);
    }
  }
  EXPECT_NEAR(estimate, oracle, 1e-12);
  EXPECT_GE(estimate, 1.0 - 1e-6);
  EXPECT_LE(estimate, 2.0);
}

TEST(ReactionCondition, ConstantReactionHolds) {
  CoefficientSet coeffs;
  coeffs.d = AmbientScalarField::constant(1.0);
  const auto r = check_reaction_condition(coeffs, sphere(2));
  EXPECT_EQ(r.condition_a, Verdict::HoldsSufficiently);
  EXPECT_EQ(r.condition_b, Verdict::HoldsSufficiently);
  EXPECT_DOUBLE_EQ(r.lambda, 1.0);
  EXPECT_NEAR(r.witness_measure, sphere(2).total_area(), 1e-12);
}

TEST(ReactionCondition, ZeroReactionIsViolated) {
  const auto report = check_conditions(CoefficientSet{}, sphere(2));
  EXPECT_EQ(report.reaction.condition_a, Verdict::Violated);
  EXPECT_EQ(report.reaction.condition_b, Verdict::Violated);
  EXPECT_TRUE(report.both_reaction_conditions_violated());
  EXPECT_EQ(report.to_json()["reaction"]["condition_a"], "violated");
}

TEST(ReactionCondition, PositivePartOfX3HasACapWitness) {
  CoefficientSet coeffs;
  coeffs.d = scalar("max(x3, 0)");
  const auto r = check_reaction_condition(coeffs, sphere(3));
  EXPECT_EQ(r.condition_a, Verdict::HoldsSufficiently);
  // lambda * |{d >= lambda}| = 2 pi lambda (1 - lambda) is flat near 1/2.
  EXPECT_NEAR(r.lambda, 0.5, 0.05);
  EXPECT_NEAR(r.witness_measure, 2 * pi * (1 - r.lambda), 0.1);
}

TEST(ReactionCondition, SignChangingReactionIsViolated) {
  CoefficientSet coeffs;
  coeffs.d = scalar("x3");
  const auto r = check_reaction_condition(coeffs, sphere(3));
  EXPECT_EQ(r.condition_a, Verdict::Violated);
  EXPECT_LT(r.min_hat_integral_a, 0.0);
}

TEST(ReactionCondition, ConvectionMakesTheWitnessInconclusive) {
  CoefficientSet coeffs;
  coeffs.d = AmbientScalarField::constant(1.0);
  coeffs.b = rotation();
  const auto r = check_reaction_condition(coeffs, sphere(2));
  EXPECT_EQ(r.condition_a, Verdict::Inconclusive);
  EXPECT_EQ(r.condition_b, Verdict::HoldsSufficiently);
  EXPECT_EQ(to_string(Verdict::Inconclusive), "inconclusive");
  EXPECT_EQ(to_string(Verdict::HoldsSufficiently), "holds-sufficiently");
}

TEST(DivFreeCheck, Examples) {
  EXPECT_EQ(check_div_free(sphere(2), AmbientVectorField::zero()), 0.0);
  const auto position = make_vector_field({Expression::parse("x1"), Expression::parse("x2"), Expression::parse("x3")});
  std::vector<double> raw;
  for (int level = 2; level <= 5; ++level) {
    const auto& mesh = sphere(level);
    const double h = mesh_size(mesh);
    raw.push_back(check_div_free(mesh, rotation()));
    EXPECT_LE(raw.back(), h * h);
    EXPECT_GE(div_free_residual(mesh, position).normalized, 0.2);
  }
  for (std::size_t i = 1; i < raw.size(); ++i) EXPECT_LT(raw[i], raw[i - 1]);
}

TEST(InfSup, SmallMatrices) {
  const auto one = estimate_inf_sup(identity(4), identity(4), identity(4));
  EXPECT_NEAR(one.alpha, 1.0, 1e-10);
  const auto diag = estimate_inf_sup(diagonal({3.0, 5.0}), identity(2), identity(2));
  EXPECT_NEAR(diag.alpha, 3.0, 1e-8);
  EXPECT_TRUE(diag.converged);
}

TEST(InfSup, IndefiniteNormMatrixIsRejected) {
  EXPECT_THROW((void)estimate_inf_sup(identity(2), diagonal({1.0, -1.0}), identity(2)), ContractError);
}

TEST(InfSup, LaplaceBeltramiConstantIsStable) {
  std::vector<double> alphas;
  for (int level = 1; level <= 3; ++level) {
    const auto& mesh = sphere(level);
    const SparseMatrix K = assemble_stiffness(mesh, AmbientMatrixField::identity());
    const SparseMatrix H1 = SparseMatrix(K + assemble_mass(mesh));
    const auto est = estimate_inf_sup(K, H1, H1, mass_weights(mesh));
    EXPECT_TRUE(est.converged);
    alphas.push_back(est.alpha);
  }
  const auto [lo, hi] = std::minmax_element(alphas.begin(), alphas.end());
  EXPECT_GT(*lo, 0.0);
  EXPECT_LE(*hi / *lo, 1.5);
  // On the sphere the smallest nonzero eigenvalue is 2, so alpha tends to 2/3.
  EXPECT_NEAR(alphas.back(), 2.0 / 3.0, 0.02);
}

TEST(Fredholm, StiffnessKernelIsConstants) {
  const auto& mesh = sphere(3);
  const auto r = fredholm_kernel(assemble_stiffness(mesh, AmbientMatrixField::identity()));
  EXPECT_LE(r.smallest_singular_value, 1e-10 * r.norm_estimate);
  EXPECT_LE(r.kernel_variation, 1e-6);
  EXPECT_GT(r.second_singular_value, 1e3 * r.smallest_singular_value);
}

TEST(Fredholm, StiffnessPlusMassHasNoKernel) {
  const auto& mesh = sphere(3);
  const auto r = fredholm_kernel(SparseMatrix(assemble_stiffness(mesh, AmbientMatrixField::identity()) +
                                              assemble_mass(mesh)));
  const double mass_scale = mesh.total_area() / static_cast<double>(mesh.vertex_count());
  EXPECT_GE(r.smallest_singular_value, 0.5 * mass_scale);
  EXPECT_GT(r.smallest_singular_value, 1e-6 * r.norm_estimate);
}

TEST(Fredholm, IdentityMatrix) {
  const auto r = fredholm_kernel(identity(6));
  EXPECT_NEAR(r.smallest_singular_value, 1.0, 1e-12);
  EXPECT_NEAR(r.norm_estimate, 1.0, 1e-12);
}

TEST(Fredholm, CoefficientOfVariation) {
  EXPECT_EQ(coefficient_of_variation(VectorXd::Constant(5, 2.0)), 0.0);
  EXPECT_TRUE(std::isinf(coefficient_of_variation(VectorXd{{1.0, -1.0}})));
}
