#pragma once

#include <string>

#include <Eigen/Sparse>

#include "gamma_elliptic/assembly.hpp"

namespace gamma_elliptic {

struct KrylovOptions {
  double tolerance = 1e-10;  // relative residual ||b - A x|| / ||b||
  int max_iterations = 0;    // 0: 10 * unknowns
  int restart = 60;          // GMRES restart length
};

struct KrylovResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual = 0.0;  // true relative residual of x
  bool converged = false;
  std::string method;
};

// Jacobi-preconditioned conjugate gradients (A symmetric positive definite).
KrylovResult conjugate_gradient(const SparseMatrix& a, const Eigen::VectorXd& b,
                                const KrylovOptions& options = {});

// Preconditioned MINRES for symmetric (possibly indefinite) A. `preconditioner`
// holds the diagonal of an SPD preconditioner.
KrylovResult minres(const SparseMatrix& a, const Eigen::VectorXd& b,
                    const Eigen::VectorXd& preconditioner, const KrylovOptions& options = {});

// Right-preconditioned BiCGStab and restarted GMRES with a diagonal preconditioner.
KrylovResult bicgstab(const SparseMatrix& a, const Eigen::VectorXd& b,
                      const Eigen::VectorXd& preconditioner, const KrylovOptions& options = {},
                      const Eigen::VectorXd* initial = nullptr);
KrylovResult gmres(const SparseMatrix& a, const Eigen::VectorXd& b,
                   const Eigen::VectorXd& preconditioner, const KrylovOptions& options = {},
                   const Eigen::VectorXd* initial = nullptr);

bool is_symmetric(const SparseMatrix& a, double relative_tolerance = 1e-14);

// [[T, m], [m', 0]] for a constraint vector m.
SparseMatrix saddle_point_matrix(const SparseMatrix& t, const Eigen::VectorXd& m);

/// Solves a SparseSystem. Unconstrained symmetric systems use CG (MINRES when
/// CG breaks down), nonsymmetric ones BiCGStab with a GMRES fallback.
/// Constrained systems are solved in saddle-point form (MINRES if T is
/// symmetric, GMRES otherwise); the solution then has n + 1 entries, the last
/// being the multiplier. Never throws on non-convergence: the best iterate is
/// returned with converged = false.
KrylovResult solve_linear_system(const SparseSystem& system, const KrylovOptions& options = {});

}  // namespace gamma_elliptic
