#include "gamma_elliptic/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gamma_elliptic/errors.hpp"

namespace gamma_elliptic {

namespace {

using Eigen::VectorXd;

int iteration_cap(const KrylovOptions& options, Eigen::Index n) {
  if (options.max_iterations > 0) return options.max_iterations;
  return static_cast<int>(std::max<Eigen::Index>(10 * n, 20));
}

// Inverse of a diagonal preconditioner; nonpositive or tiny entries fall back to 1.
VectorXd inverse_diagonal(const VectorXd& d) {
  VectorXd inv(d.size());
  const double scale = d.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double a = std::abs(d[i]);
    inv[i] = (a > 1e-300 && a > 1e-14 * scale) ? 1.0 / a : 1.0;
  }
  return inv;
}

double relative_residual(const SparseMatrix& a, const VectorXd& b, const VectorXd& x, double bnorm) {
  return (b - a * x).norm() / bnorm;
}

KrylovResult zero_solution(Eigen::Index n, const std::string& method) {
  KrylovResult r;
  r.x = VectorXd::Zero(n);
  r.converged = true;
  r.method = method;
  return r;
}

void check_square(const SparseMatrix& a, const VectorXd& b) {
  if (a.rows() != a.cols()) throw ContractError("linear solver: matrix is not square");
  if (a.rows() != b.size()) throw ContractError("linear solver: right-hand side size mismatch");
}

// One preconditioned MINRES cycle from x, stopping when the preconditioned
// residual estimate drops below `stop`.
VectorXd minres_cycle(const SparseMatrix& a, const VectorXd& b, VectorXd x, const VectorXd& minv,
                      double stop, int budget, int& iterations) {
  VectorXd r1 = b - a * x;
  VectorXd y = minv.cwiseProduct(r1);
  double beta1 = r1.dot(y);
  if (!(beta1 > 0.0)) return x;
  beta1 = std::sqrt(beta1);
  double oldb = 0.0;
  double beta = beta1;
  double dbar = 0.0;
  double epsln = 0.0;
  double phibar = beta1;
  double cs = -1.0;
  double sn = 0.0;
  const Eigen::Index n = b.size();
  VectorXd w = VectorXd::Zero(n);
  VectorXd w2 = VectorXd::Zero(n);
  VectorXd r2 = r1;
  VectorXd v(n);
  for (int k = 0; k < budget; ++k) {
    ++iterations;
    v = y / beta;
    y = a * v;
    if (k > 0) y -= (beta / oldb) * r1;
    const double alfa = v.dot(y);
    y -= (alfa / beta) * r2;
    r1 = r2;
    r2 = y;
    y = minv.cwiseProduct(r2);
    oldb = beta;
    beta = r2.dot(y);
    if (beta < 0.0) break;
    beta = std::sqrt(beta);

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    const double gamma = std::max(std::hypot(gbar, beta), std::numeric_limits<double>::epsilon());
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    VectorXd w1 = std::move(w2);
    w2 = std::move(w);
    w = (v - oldeps * w1 - delta * w2) / gamma;
    x += phi * w;
    if (phibar <= stop || beta == 0.0) break;
  }
  return x;
}

}  // namespace

bool is_symmetric(const SparseMatrix& a, double relative_tolerance) {
  if (a.rows() != a.cols()) return false;
  const SparseMatrix t = a.transpose();
  const SparseMatrix diff = a - t;
  return max_abs(diff) <= relative_tolerance * std::max(max_abs(a), 1e-300);
}

SparseMatrix saddle_point_matrix(const SparseMatrix& t, const VectorXd& m) {
  if (t.rows() != t.cols() || m.size() != t.rows()) throw ContractError("saddle_point_matrix: size mismatch");
  const Eigen::Index n = t.rows();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(t.nonZeros() + 2 * n));
  for (Eigen::Index k = 0; k < t.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(t, k); it; ++it) triplets.emplace_back(it.row(), it.col(), it.value());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    triplets.emplace_back(i, n, m[i]);
    triplets.emplace_back(n, i, m[i]);
  }
  SparseMatrix out(n + 1, n + 1);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

KrylovResult conjugate_gradient(const SparseMatrix& a, const VectorXd& b, const KrylovOptions& options) {
  check_square(a, b);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return zero_solution(b.size(), "cg");
  const VectorXd dinv = inverse_diagonal(a.diagonal());
  const int cap = iteration_cap(options, b.size());

  KrylovResult result;
  result.method = "cg";
  VectorXd x = VectorXd::Zero(b.size());
  VectorXd r = b;
  VectorXd z = dinv.cwiseProduct(r);
  VectorXd p = z;
  double rz = r.dot(z);
  int it = 0;
  while (it < cap) {
    ++it;
    const VectorXd ap = a * p;
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) break;  // not positive definite along p
    const double alpha = rz / pap;
    x += alpha * p;
    r -= alpha * ap;
    if (r.norm() <= options.tolerance * bnorm) {
      // Guard against drift of the recursive residual.
      r = b - a * x;
      if (r.norm() <= options.tolerance * bnorm) break;
      z = dinv.cwiseProduct(r);
      p = z;
      rz = r.dot(z);
      continue;
    }
    z = dinv.cwiseProduct(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  result.x = std::move(x);
  result.iterations = it;
  result.residual = relative_residual(a, b, result.x, bnorm);
  result.converged = result.residual <= options.tolerance;
  return result;
}

KrylovResult minres(const SparseMatrix& a, const VectorXd& b, const VectorXd& preconditioner,
                    const KrylovOptions& options) {
  check_square(a, b);
  if (preconditioner.size() != b.size()) throw ContractError("minres: preconditioner size mismatch");
  const double bnorm = b.norm();
  if (bnorm == 0.0) return zero_solution(b.size(), "minres");
  const VectorXd minv = inverse_diagonal(preconditioner);
  const int cap = iteration_cap(options, b.size());
  const double bnorm_m = std::sqrt(b.dot(minv.cwiseProduct(b)));

  KrylovResult result;
  result.method = "minres";
  VectorXd x = VectorXd::Zero(b.size());
  int iterations = 0;
  double target = options.tolerance;
  double best = std::numeric_limits<double>::infinity();
  VectorXd best_x = x;
  // The stopping test uses the preconditioned residual; restart with a
  // tighter target until the true residual meets the tolerance.
  for (int cycle = 0; cycle < 12 && iterations < cap; ++cycle) {
    x = minres_cycle(a, b, x, minv, target * bnorm_m, cap - iterations, iterations);
    const double res = relative_residual(a, b, x, bnorm);
    if (res < best) {
      best = res;
      best_x = x;
    }
    if (res <= options.tolerance) break;
    target *= std::clamp(0.5 * options.tolerance / res, 1e-3, 0.5);
  }
  result.x = std::move(best_x);
  result.iterations = iterations;
  result.residual = best;
  result.converged = best <= options.tolerance;
  return result;
}

KrylovResult bicgstab(const SparseMatrix& a, const VectorXd& b, const VectorXd& preconditioner,
                      const KrylovOptions& options, const VectorXd* initial) {
  check_square(a, b);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return zero_solution(b.size(), "bicgstab");
  const VectorXd kinv = inverse_diagonal(preconditioner);
  const int cap = iteration_cap(options, b.size());
  const Eigen::Index n = b.size();

  VectorXd x = initial ? *initial : VectorXd::Zero(n);
  VectorXd r = b - a * x;
  const VectorXd rhat = r;
  double rho = 1.0;
  double alpha = 1.0;
  double omega = 1.0;
  VectorXd v = VectorXd::Zero(n);
  VectorXd p = VectorXd::Zero(n);
  VectorXd best_x = x;
  double best = r.norm() / bnorm;
  int it = 0;
  const double tiny = std::numeric_limits<double>::epsilon() * std::numeric_limits<double>::epsilon();
  while (it < cap && best > options.tolerance) {
    ++it;
    const double rho_next = rhat.dot(r);
    if (std::abs(rho_next) <= tiny * rhat.squaredNorm()) break;
    const double beta = (rho_next / rho) * (alpha / omega);
    p = r + beta * (p - omega * v);
    const VectorXd phat = kinv.cwiseProduct(p);
    v = a * phat;
    const double rv = rhat.dot(v);
    if (rv == 0.0) break;
    alpha = rho_next / rv;
    const VectorXd s = r - alpha * v;
    if (s.norm() <= options.tolerance * bnorm) {
      x += alpha * phat;
      r = s;
    } else {
      const VectorXd shat = kinv.cwiseProduct(s);
      const VectorXd t = a * shat;
      const double tt = t.squaredNorm();
      if (tt == 0.0) break;
      omega = t.dot(s) / tt;
      x += alpha * phat + omega * shat;
      r = s - omega * t;
      if (omega == 0.0) break;
    }
    rho = rho_next;
    const double estimate = r.norm() / bnorm;
    if (estimate < best || estimate <= options.tolerance) {
      r = b - a * x;
      const double res = r.norm() / bnorm;
      if (res < best) {
        best = res;
        best_x = x;
      }
    }
  }
  KrylovResult result;
  result.method = "bicgstab";
  result.x = std::move(best_x);
  result.iterations = it;
  result.residual = relative_residual(a, b, result.x, bnorm);
  result.converged = result.residual <= options.tolerance;
  return result;
}

KrylovResult gmres(const SparseMatrix& a, const VectorXd& b, const VectorXd& preconditioner,
                   const KrylovOptions& options, const VectorXd* initial) {
  check_square(a, b);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return zero_solution(b.size(), "gmres");
  const VectorXd kinv = inverse_diagonal(preconditioner);
  const int cap = iteration_cap(options, b.size());
  const Eigen::Index n = b.size();
  const int m = std::max(2, static_cast<int>(std::min<Eigen::Index>(options.restart, n)));

  VectorXd x = initial ? *initial : VectorXd::Zero(n);
  double res = relative_residual(a, b, x, bnorm);
  int it = 0;
  Eigen::MatrixXd basis(n, m + 1);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
  VectorXd cs(m);
  VectorXd sn(m);
  VectorXd g(m + 1);
  while (it < cap && res > options.tolerance) {
    const VectorXd r = b - a * x;
    const double beta = r.norm();
    basis.col(0) = r / beta;
    h.setZero();
    g.setZero();
    g[0] = beta;
    int k = 0;
    for (int j = 0; j < m && it < cap; ++j) {
      ++it;
      VectorXd w = a * kinv.cwiseProduct(basis.col(j));
      for (int i = 0; i <= j; ++i) {
        h(i, j) = w.dot(basis.col(i));
        w -= h(i, j) * basis.col(i);
      }
      h(j + 1, j) = w.norm();
      const bool lucky = h(j + 1, j) <= 1e-14 * beta;
      if (!lucky) basis.col(j + 1) = w / h(j + 1, j);
      for (int i = 0; i < j; ++i) {
        const double tmp = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
        h(i + 1, j) = -sn[i] * h(i, j) + cs[i] * h(i + 1, j);
        h(i, j) = tmp;
      }
      const double denom = std::hypot(h(j, j), h(j + 1, j));
      cs[j] = denom > 0.0 ? h(j, j) / denom : 1.0;
      sn[j] = denom > 0.0 ? h(j + 1, j) / denom : 0.0;
      h(j, j) = denom;
      h(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      k = j + 1;
      if (std::abs(g[j + 1]) <= 0.5 * options.tolerance * bnorm || lucky) break;
    }
    const VectorXd y = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    const VectorXd update = kinv.cwiseProduct(basis.leftCols(k) * y);
    const VectorXd candidate = x + update;
    const double next = relative_residual(a, b, candidate, bnorm);
    if (!(next < res)) break;  // stagnation
    x = candidate;
    res = next;
  }
  KrylovResult result;
  result.method = "gmres";
  result.x = std::move(x);
  result.iterations = it;
  result.residual = res;
  result.converged = res <= options.tolerance;
  return result;
}

KrylovResult solve_linear_system(const SparseSystem& system, const KrylovOptions& options) {
  system.validate();
  const SparseMatrix& t = system.matrix;
  const bool symmetric = is_symmetric(t);
  const VectorXd diag = t.diagonal();

  if (system.constraint) {
    const VectorXd& m = *system.constraint;
    const Eigen::Index n = t.rows();
    const SparseMatrix aug = saddle_point_matrix(t, m);
    VectorXd rhs(n + 1);
    rhs << system.rhs, 0.0;
    // Block-diagonal preconditioner: |diag T| and the Schur approximation m' |D|^{-1} m.
    VectorXd precond(n + 1);
    const VectorXd dinv = inverse_diagonal(diag);
    precond.head(n) = dinv.cwiseInverse();
    precond[n] = m.cwiseProduct(dinv).dot(m);
    if (symmetric) {
      KrylovResult r = minres(aug, rhs, precond, options);
      if (r.converged) return r;
      KrylovResult g = gmres(aug, rhs, precond, options, &r.x);
      g.iterations += r.iterations;
      return g.residual < r.residual ? g : r;
    }
    return gmres(aug, rhs, precond, options);
  }

  if (symmetric) {
    if ((diag.array() > 0.0).all()) {
      KrylovResult r = conjugate_gradient(t, system.rhs, options);
      if (r.converged) return r;
      KrylovResult alt = minres(t, system.rhs, diag.cwiseAbs(), options);
      alt.iterations += r.iterations;
      return alt.residual < r.residual ? alt : r;
    }
    return minres(t, system.rhs, diag.cwiseAbs(), options);
  }
  KrylovResult r = bicgstab(t, system.rhs, diag, options);
  if (r.converged) return r;
  KrylovResult g = gmres(t, system.rhs, diag, options, &r.x);
  g.iterations += r.iterations;
  return g.residual < r.residual ? g : r;
}

}  // namespace gamma_elliptic
