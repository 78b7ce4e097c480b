#pragma once

#include <Eigen/Dense>

#include "biotplate/core.hpp"

namespace biotplate {

/*! Rank-4 elasticity tensor in 2D with full minor/major symmetry, stored in
 *  Voigt form. Convention: stress_v = C * strain_v with
 *  strain_v = (S11, S22, 2 S12) and stress_v = (T11, T22, T12). */
class ElasticityTensor {
 public:
  ElasticityTensor() : C_(Eigen::Matrix3d::Zero()) {}

  static ElasticityTensor isotropic(double lambda, double mu) {
    require_input(mu > 0.0 && lambda + mu > 0.0,
                  "material-invalid: isotropic moduli must satisfy mu>0, lambda+mu>0");
    Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
    C(0, 0) = C(1, 1) = lambda + 2.0 * mu;
    C(0, 1) = C(1, 0) = lambda;
    C(2, 2) = mu;
    return ElasticityTensor(C);
  }

  static ElasticityTensor from_voigt(const Eigen::Matrix3d& C) {
    require_input((C - C.transpose()).norm() <= 1e-12 * (1.0 + C.norm()),
                  "material-invalid: Voigt matrix must be symmetric");
    ElasticityTensor A(C);
    require_input(A.coercivity_constant() > 0.0,
                  "material-invalid: Voigt matrix must be positive definite on symmetric strains");
    return A;
  }

  const Eigen::Matrix3d& voigt() const { return C_; }

  /*! Apply the tensor to a (not necessarily symmetric) 2x2 matrix: only the
   *  symmetric part contributes, matching A D(u) with D the symmetric gradient. */
  Eigen::Matrix2d apply(const Eigen::Matrix2d& S) const {
    const double s11 = S(0, 0);
    const double s22 = S(1, 1);
    const double s12 = 0.5 * (S(0, 1) + S(1, 0));
    Eigen::Vector3d sv(s11, s22, 2.0 * s12);
    Eigen::Vector3d tv = C_ * sv;
    Eigen::Matrix2d T;
    T << tv(0), tv(2), tv(2), tv(1);
    return T;
  }

  /*! A S : T for 2x2 inputs (symmetric parts taken on both sides). */
  double contract(const Eigen::Matrix2d& S, const Eigen::Matrix2d& T) const {
    return (apply(S).array() * (0.5 * (T + T.transpose())).array()).sum();
  }

  /*! Smallest eigenvalue of the quadratic form S -> A S : S over symmetric 2x2
   *  matrices (orthonormal basis under the Frobenius inner product). */
  double coercivity_constant() const {
    const double r = 1.0 / std::sqrt(2.0);
    Eigen::Matrix2d E[3];
    E[0] << 1, 0, 0, 0;
    E[1] << 0, 0, 0, 1;
    E[2] << 0, r, r, 0;
    Eigen::Matrix3d Q;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) Q(a, b) = contract(E[a], E[b]);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(Q);
    return es.eigenvalues().minCoeff();
  }

 private:
  explicit ElasticityTensor(const Eigen::Matrix3d& C) : C_(C) {}
  Eigen::Matrix3d C_;
};

/*! Symmetrized unit strain M_ij = (e_i ⊗ e_j + e_j ⊗ e_i) / 2. */
inline Eigen::Matrix2d unit_strain(int i, int j) {
  Eigen::Matrix2d M = Eigen::Matrix2d::Zero();
  M(i, j) += 0.5;
  M(j, i) += 0.5;
  return M;
}

}  // namespace biotplate
