#pragma once
/*! Homogenized coefficients assembled from the cell solutions.
 *
 *  With tangential dimension 1 (thin layer in 2D), the bar-index tensors are
 *  scalars:
 *   - a*, b*, c*: membrane / coupling / bending elastic coefficients, the
 *     energy pairings of the corrector total strains (D(chi_11)+M_11) and
 *     (D(chiB_11)-y2*M_11). Assembled without a 1/|Z_s| prefactor so that the
 *     macroscopic weak form holds verbatim; the per-solid-area variants are
 *     reported alongside.
 *   - B1 = ∫ A D(chi0):M_11, B2 = -∫ A D(chi0):M_11 y2: pressure-strain
 *     couplings, with the dual interface representations ∫_Γ chi_11·nu and
 *     ∫_Γ chiB_11·nu (equal by cross-testing the weak forms).
 *   - alpha_h = -∫_Γ chi0·nu = ∫ A D(chi0):D(chi0) >= 0: pressure storage.
 *   - K_ij = ∫ D(q_i):D(q_j): permeability; row/column 2 vanish, and the
 *     tangential entry is zero exactly when the fluid does not percolate.
 *   - |Z_f|, |Z_s|, d_n^f = ∫_{Z_f} y2, d_n^s = ∫_{Z_s} y2.
 */

#include <cmath>
#include <string>

#include "biotplate/cell_problems.hpp"
#include "biotplate/core.hpp"
#include "biotplate/elasticity.hpp"
#include "biotplate/fem.hpp"

namespace biotplate {

namespace detail {

/*! Quadrature integral of f(x, grad u, grad v) for two coefficient fields on
 *  the same space. */
template <class F>
inline double integrate_grad_pair(const FunctionSpace& V, const Vec& u, const Vec& v, F f) {
  const Mesh2D& m = V.mesh();
  double acc = 0;
  for (int t = 0; t < m.n_tris(); ++t) {
    if (!V.active(t)) continue;
    ElemGeom g = elem_geom(m, t);
    for (const auto& qp : tri_quadrature_order4()) {
      Eigen::Vector2d x = g.p0 + g.J * Eigen::Vector2d(qp.x, qp.y);
      Eigen::Matrix2d Gu = eval_grad(V, u, t, qp.x, qp.y);
      Eigen::Matrix2d Gv = eval_grad(V, v, t, qp.x, qp.y);
      acc += qp.w * g.area * f(x, Gu, Gv);
    }
  }
  return acc;
}

inline Eigen::Matrix2d sym(const Eigen::Matrix2d& G) { return 0.5 * (G + G.transpose()); }

}  // namespace detail

struct EffectiveCoefficients {
  // Elastic plate coefficients in the macroscopic weak-form convention.
  double a_star = 0, b_star = 0, c_star = 0;
  // The same divided by |Z_s| (the prefactored print convention).
  double a_star_per_solid_area = 0, b_star_per_solid_area = 0, c_star_per_solid_area = 0;

  double B1 = 0, B2 = 0;
  double alpha_h = 0;
  Eigen::Matrix2d K = Eigen::Matrix2d::Zero();

  double vol_f = 0, vol_s = 0;
  double d_n_f = 0, d_n_s = 0;

  bool degenerate_interface = false;  // no fluid interface: alpha_h = B1 = B2 = 0
  bool percolating = false;           // fluid connects across the lateral period

  // Consistency diagnostics (absolute gaps of dual representations).
  double duality_gap_B1 = 0;     // |B1 - ∫_Γ chi_11·nu|
  double duality_gap_B2 = 0;     // |B2 - ∫_Γ chiB_11·nu|
  double alpha_energy_gap = 0;   // |alpha_h - ∫ A D(chi0):D(chi0)|
};

/*! Assemble every homogenized coefficient from a complete cell solution set. */
inline EffectiveCoefficients assemble_effective_coefficients(const CellSolutionSet& set) {
  require_input(set.mesh && set.Vs, "input-error: incomplete cell solution set");
  const Mesh2D& m = *set.mesh;
  const FunctionSpace& Vs = *set.Vs;
  const ElasticityTensor& A = set.A;
  const Eigen::Matrix2d M11 = unit_strain(0, 0);

  EffectiveCoefficients c;
  c.vol_f = m.phase_area(Phase::fluid);
  c.vol_s = m.phase_area(Phase::solid);
  c.d_n_f = integrate(m, Phase::fluid, [](const Eigen::Vector2d& x) { return x[1]; });
  c.d_n_s = integrate(m, Phase::solid, [](const Eigen::Vector2d& x) { return x[1]; });
  c.degenerate_interface = m.interface.empty();
  c.percolating = set.mesh->geometry.percolates();

  const Vec& chi = set.chi[0][0];
  const Vec& chiB = set.chiB[0][0];
  auto membrane_strain = [&](const Eigen::Vector2d&, const Eigen::Matrix2d& G) {
    return Eigen::Matrix2d(detail::sym(G) + M11);
  };
  auto bending_strain = [&](const Eigen::Vector2d& x, const Eigen::Matrix2d& G) {
    return Eigen::Matrix2d(detail::sym(G) - x[1] * M11);
  };
  c.a_star = detail::integrate_grad_pair(
      Vs, chi, chi, [&](const Eigen::Vector2d& x, const Eigen::Matrix2d& Gu,
                        const Eigen::Matrix2d& Gv) {
        return A.contract(membrane_strain(x, Gu), membrane_strain(x, Gv));
      });
  c.b_star = detail::integrate_grad_pair(
      Vs, chiB, chi, [&](const Eigen::Vector2d& x, const Eigen::Matrix2d& Gu,
                         const Eigen::Matrix2d& Gv) {
        return A.contract(bending_strain(x, Gu), membrane_strain(x, Gv));
      });
  c.c_star = detail::integrate_grad_pair(
      Vs, chiB, chiB, [&](const Eigen::Vector2d& x, const Eigen::Matrix2d& Gu,
                          const Eigen::Matrix2d& Gv) {
        return A.contract(bending_strain(x, Gu), bending_strain(x, Gv));
      });
  c.a_star_per_solid_area = c.a_star / c.vol_s;
  c.b_star_per_solid_area = c.b_star / c.vol_s;
  c.c_star_per_solid_area = c.c_star / c.vol_s;

  const Vec& chi0 = set.chi0;
  c.B1 = detail::integrate_grad_pair(Vs, chi0, chi0,
                                     [&](const Eigen::Vector2d&, const Eigen::Matrix2d& Gu,
                                         const Eigen::Matrix2d&) {
                                       return A.contract(detail::sym(Gu), M11);
                                     });
  c.B2 = -detail::integrate_grad_pair(Vs, chi0, chi0,
                                      [&](const Eigen::Vector2d& x, const Eigen::Matrix2d& Gu,
                                          const Eigen::Matrix2d&) {
                                        return A.contract(detail::sym(Gu), M11) * x[1];
                                      });

  double energy0 = detail::integrate_grad_pair(
      Vs, chi0, chi0, [&](const Eigen::Vector2d&, const Eigen::Matrix2d& Gu,
                          const Eigen::Matrix2d& Gv) {
        return A.contract(detail::sym(Gu), detail::sym(Gv));
      });
  double flux0 = integrate_interface(Vs, chi0,
                                     [](const Eigen::Vector2d&, const Eigen::Vector2d& nu,
                                        const Eigen::Vector2d& u) { return u.dot(nu); });
  c.alpha_h = -flux0;
  c.alpha_energy_gap = std::abs(c.alpha_h - energy0);

  double flux_chi = integrate_interface(Vs, chi,
                                        [](const Eigen::Vector2d&, const Eigen::Vector2d& nu,
                                           const Eigen::Vector2d& u) { return u.dot(nu); });
  double flux_chiB = integrate_interface(Vs, chiB,
                                         [](const Eigen::Vector2d&, const Eigen::Vector2d& nu,
                                            const Eigen::Vector2d& u) { return u.dot(nu); });
  c.duality_gap_B1 = std::abs(c.B1 - flux_chi);
  c.duality_gap_B2 = std::abs(c.B2 - flux_chiB);

  if (c.degenerate_interface) {
    require_solver(std::abs(c.alpha_h) <= 1e-10 && std::abs(c.B1) <= 1e-10 &&
                       std::abs(c.B2) <= 1e-10,
                   "solver-failed: nonzero pressure couplings without an interface");
  } else {
    require_solver(c.alpha_h > 0.0, "solver-failed: nonpositive pressure storage coefficient");
    require_solver(c.alpha_energy_gap <= 1e-8 * (1.0 + c.alpha_h),
                   "solver-failed: pressure-storage energy identity violated");
  }
  require_solver(c.duality_gap_B1 <= 1e-7 && c.duality_gap_B2 <= 1e-7,
                 "solver-failed: duality identity violated (assembly bug)");

  if (set.has_fluid) {
    const FunctionSpace& Vf = *set.Vf;
    for (int i = 0; i < 2; ++i)
      for (int j = i; j < 2; ++j) {
        double kij = detail::integrate_grad_pair(
            Vf, set.q[static_cast<size_t>(i)], set.q[static_cast<size_t>(j)],
            [](const Eigen::Vector2d&, const Eigen::Matrix2d& Gu, const Eigen::Matrix2d& Gv) {
              return detail::sym(Gu).cwiseProduct(detail::sym(Gv)).sum();
            });
        c.K(i, j) = kij;
        c.K(j, i) = kij;
      }
  }
  return c;
}

struct PositivityReport {
  double min_eig_block = 0;  // eigenvalues of [[a*, b*], [b*, c*]]
  double min_eig_K = 0;
  bool pass = false;
  std::string detail;
};

/*! Certify the coercivity of the homogenized energy: the elastic block form
 *  must be positive definite; K must be positive semidefinite, and positive
 *  in the tangential direction whenever the fluid percolates; alpha_h must be
 *  positive unless the geometry has no interface at all. */
inline PositivityReport check_positivity(const EffectiveCoefficients& c) {
  PositivityReport r;
  Eigen::Matrix2d block;
  block << c.a_star, c.b_star, c.b_star, c.c_star;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eb(block);
  r.min_eig_block = eb.eigenvalues().minCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> ek(c.K);
  r.min_eig_K = ek.eigenvalues().minCoeff();

  r.pass = true;
  if (!(r.min_eig_block > 0.0)) {
    r.pass = false;
    r.detail += "elastic block form not positive definite; ";
  }
  if (r.min_eig_K < -1e-12) {
    r.pass = false;
    r.detail += "permeability has a negative eigenvalue; ";
  }
  if (c.percolating && !(c.K(0, 0) > 0.0)) {
    r.pass = false;
    r.detail += "percolating geometry with zero tangential permeability; ";
  }
  if (!c.degenerate_interface && !(c.alpha_h > 0.0)) {
    r.pass = false;
    r.detail += "nonpositive pressure storage; ";
  }
  if (r.detail.empty()) r.detail = "positive";
  return r;
}

}  // namespace biotplate
