#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <string>

#include "biotplate/core.hpp"

namespace biotplate {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

struct CGInfo {
  int iterations = 0;
  double rel_residual = 0;
};

/*! Conjugate gradients with Jacobi (diagonal) preconditioning for SPD systems.
 *  Terminates on relative residual <= tol; throws solver_error when the
 *  iteration cap (10 * n by default) is hit or indefiniteness is detected. */
inline CGInfo solve_spd_cg(const SpMat& A, const Vec& b, Vec& x, double tol = 1e-10,
                           long max_iter = -1) {
  const long n = A.rows();
  require_solver(A.cols() == n && b.size() == n, "solver-failed: CG dimension mismatch");
  if (max_iter < 0) max_iter = 10 * n;
  Vec dinv(n);
  for (long i = 0; i < n; ++i) {
    double d = A.coeff(i, i);
    require_solver(d > 0.0, "solver-failed: non-positive diagonal entry in SPD solve");
    dinv[i] = 1.0 / d;
  }
  double bnorm = b.norm();
  if (x.size() != n) x = Vec::Zero(n);
  if (bnorm == 0.0) {
    x.setZero();
    return {0, 0.0};
  }
  Vec r = b - A * x;
  Vec z = dinv.asDiagonal() * r;
  Vec p = z;
  double rz = r.dot(z);
  CGInfo info;
  for (long it = 0; it < max_iter; ++it) {
    Vec Ap = A * p;
    double pAp = p.dot(Ap);
    require_solver(pAp > 0.0, "solver-failed: indefinite operator detected in CG");
    double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    info.iterations = static_cast<int>(it) + 1;
    info.rel_residual = r.norm() / bnorm;
    if (info.rel_residual <= tol) return info;
    z = dinv.asDiagonal() * r;
    double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  throw solver_error("solver-failed: CG did not converge within iteration cap (rel residual " +
                     std::to_string(info.rel_residual) + ")");
}

/*! Reusable sparse LU factorization for (possibly indefinite) saddle systems.
 *  Solves are residual-checked against the requested bound. */
class FactoredLU {
 public:
  FactoredLU() = default;
  explicit FactoredLU(const SpMat& A, double tol = 1e-8) { factor(A, tol); }

  void factor(const SpMat& A, double tol = 1e-8) {
    A_ = A;
    A_.makeCompressed();
    tol_ = tol;
    lu_.compute(A_);
    require_solver(lu_.info() == Eigen::Success,
                   "solver-failed: sparse LU factorization failed (singular or structurally deficient)");
  }

  Vec solve(const Vec& b) const {
    Vec x = lu_.solve(b);
    require_solver(lu_.info() == Eigen::Success, "solver-failed: sparse LU backsolve failed");
    double bn = b.norm();
    if (bn > 0.0) {
      double res = (A_ * x - b).norm() / bn;
      require_solver(res <= tol_, "solver-failed: saddle solve residual " + std::to_string(res) +
                                      " exceeds bound");
    }
    return x;
  }

  const SpMat& matrix() const { return A_; }

 private:
  SpMat A_;
  double tol_ = 1e-8;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
};

inline Vec solve_saddle(const SpMat& A, const Vec& b, double tol = 1e-8) {
  return FactoredLU(A, tol).solve(b);
}

/*! Reusable SPD factorization (used where the same operator is solved many
 *  times, e.g. the fluid extension of the solid velocity). */
class FactoredSPD {
 public:
  FactoredSPD() = default;
  explicit FactoredSPD(const SpMat& A) { factor(A); }
  void factor(const SpMat& A) {
    A_ = A;
    A_.makeCompressed();
    ldlt_.compute(A_);
    require_solver(ldlt_.info() == Eigen::Success, "solver-failed: LDLT factorization failed");
  }
  Vec solve(const Vec& b) const {
    Vec x = ldlt_.solve(b);
    require_solver(ldlt_.info() == Eigen::Success, "solver-failed: LDLT backsolve failed");
    return x;
  }

 private:
  SpMat A_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
};

struct EigenSplit {
  Eigen::MatrixXd Q;  // orthogonal, M = Q^T D Q
  Vec D;              // eigenvalues, descending
};

/*! Symmetric eigendecomposition with eigenvalues sorted descending and the
 *  reconstruction M = Q^T diag(D) Q verified to 1e-10 relative. */
inline EigenSplit sym_eigendecomposition(const Eigen::MatrixXd& M) {
  require_solver((M - M.transpose()).norm() <= 1e-10 * (1.0 + M.norm()),
                 "solver-failed: eigendecomposition input is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
  require_solver(es.info() == Eigen::Success, "solver-failed: eigendecomposition did not converge");
  const long n = M.rows();
  EigenSplit out;
  out.Q.resize(n, n);
  out.D.resize(n);
  for (long i = 0; i < n; ++i) {  // Eigen sorts ascending; flip to descending
    out.D[i] = es.eigenvalues()[n - 1 - i];
    out.Q.row(i) = es.eigenvectors().col(n - 1 - i).transpose();
  }
  double resid = (out.Q.transpose() * out.D.asDiagonal() * out.Q - M).norm();
  require_solver(resid <= 1e-10 * (1.0 + M.norm()),
                 "solver-failed: eigendecomposition reconstruction residual too large");
  return out;
}

}  // namespace biotplate
