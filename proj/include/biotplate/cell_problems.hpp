#pragma once
/*! Cell-problem solvers on the periodic unit cell Z = (0,1) x (-1,1).
 *
 *  Four families are solved on a shared workspace:
 *   - elasticity correctors   chi_ij   : div(A(D(chi_ij) + M_ij)) = 0 in the
 *     solid, traction-free outer/interface boundaries, periodic laterally,
 *     zero mean per connected solid component;
 *   - bending correctors      chiB_ij  : same operator with strain offset
 *     -y2*M_ij instead of +M_ij;
 *   - pressure corrector      chi0     : zero body load, interface traction
 *     -A D(chi0) nu = nu on the fluid interface, traction-free elsewhere;
 *   - Stokes cells            (q_i,pi_i): -div D(q_i) + grad pi_i = e_i,
 *     div q_i = 0, no-slip on the interface, periodic laterally, pressure
 *     mean-zero per connected fluid component.
 *
 *  All nine solid right-hand sides share one factored elastic system; the two
 *  Stokes solves share one factored velocity/pressure saddle system.
 *
 *  Constraint handling: the mean constraints only interact with the operator
 *  kernels (per-component solid translations, per-component pressure
 *  constants), so they are imposed exactly without appending dense Lagrange
 *  rows — which would ruin sparse-LU fill-in. Instead the kernel multiplier is
 *  computed in closed form (it equals the component average of the load),
 *  the load is made range-compatible, one dof per kernel vector is pinned to
 *  keep the factorization nonsingular, and the kernel component of the
 *  solution is restored afterwards so the mean constraints hold exactly.
 */

#include <array>
#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "biotplate/cell_mesh.hpp"
#include "biotplate/core.hpp"
#include "biotplate/elasticity.hpp"
#include "biotplate/fem.hpp"
#include "biotplate/linalg.hpp"
#include "biotplate/mesh.hpp"

namespace biotplate {

namespace detail {

/*! Per-slot phase-component id, derived from the per-triangle component map.
 *  Slots shared by two components would make mean constraints ambiguous; the
 *  supported geometries never produce them. */
inline std::vector<int> slot_components(const FunctionSpace& V, const std::vector<int>& tri_comp) {
  std::vector<int> sc(static_cast<size_t>(V.n_scalar()), -1);
  int slots[6];
  const Mesh2D& m = V.mesh();
  for (int t = 0; t < m.n_tris(); ++t) {
    int c = tri_comp[static_cast<size_t>(t)];
    if (c < 0 || !V.active(t)) continue;
    V.gather(t, slots);
    for (int k = 0; k < V.local_count(); ++k) {
      if (slots[k] < 0) continue;
      int& cur = sc[static_cast<size_t>(slots[k])];
      require_input(cur < 0 || cur == c,
                    "input-error: phase components share a mesh entity; geometry unsupported");
      cur = c;
    }
  }
  return sc;
}

/*! First dof of every (component, field-component) pair; used as pin points
 *  that remove the translation/constant kernel from the factorization. */
inline std::vector<int> first_dof_per_component(const FunctionSpace& V,
                                                const std::vector<int>& slot_comp, int n_comp) {
  std::vector<int> pins;
  for (int c = 0; c < n_comp; ++c) {
    int slot = -1;
    for (int s = 0; s < V.n_scalar(); ++s)
      if (slot_comp[static_cast<size_t>(s)] == c) {
        slot = s;
        break;
      }
    require_input(slot >= 0, "input-error: empty phase component");
    for (int a = 0; a < V.comps(); ++a) pins.push_back(V.dof(slot, a));
  }
  return pins;
}

/*! Copy of the triplet matrix with the pinned rows/columns zeroed and a unit
 *  diagonal put in their place (symmetric elimination of kernel dofs). */
inline Eigen::SparseMatrix<double> pin_dofs(const Triplets& K, int n, const std::vector<int>& pins) {
  std::vector<char> is_pinned(static_cast<size_t>(n), 0);
  for (int p : pins) is_pinned[static_cast<size_t>(p)] = 1;
  Triplets trip;
  trip.reserve(K.size() + pins.size());
  for (const auto& t : K)
    if (!is_pinned[static_cast<size_t>(t.row())] && !is_pinned[static_cast<size_t>(t.col())])
      trip.push_back(t);
  for (int p : pins) trip.emplace_back(p, p, 1.0);
  Eigen::SparseMatrix<double> M(n, n);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

}  // namespace detail

/*! Reusable factorizations and spaces for all cell problems on one mesh. */
class CellWorkspace {
 public:
  CellWorkspace(const PeriodicCellMesh& cm, const ElasticityTensor& A)
      : cm_(&cm), A_(A), Vs_(cm, ElemType::P2, 2, Phase::solid, &cm.periodic_pairs, nullptr) {
    require_input(cm.phase_area(Phase::solid) > 0.0, "input-error: empty solid subdomain");

    solid_comp_ = phase_components(cm, Phase::solid, &cm.periodic_pairs, n_solid_comp_);
    rows_s_ = mean_rows(Vs_, Phase::solid, solid_comp_, n_solid_comp_);
    ns_ = Vs_.n_dofs();

    slot_comp_s_ = detail::slot_components(Vs_, solid_comp_);
    comp_area_s_.assign(static_cast<size_t>(n_solid_comp_), 0.0);
    for (int t = 0; t < cm.n_tris(); ++t)
      if (solid_comp_[static_cast<size_t>(t)] >= 0)
        comp_area_s_[static_cast<size_t>(solid_comp_[static_cast<size_t>(t)])] += cm.tri_area(t);
    pinned_s_ = detail::first_dof_per_component(Vs_, slot_comp_s_, n_solid_comp_);

    Triplets K;
    assemble_elastic(Vs_, Phase::solid, A_, 1.0, K);
    Ks_.resize(ns_, ns_);
    Ks_.setFromTriplets(K.begin(), K.end());
    lu_s_.factor(detail::pin_dofs(K, ns_, pinned_s_), 1e-9);

    has_fluid_ = cm.phase_area(Phase::fluid) > 0.0;
    if (has_fluid_) {
      DirichletSet noslip(cm);
      for (const auto& te : cm.interface) noslip.mark_edge_with_nodes(cm, te.edge);
      Vf_.emplace(cm, ElemType::P2, 2, Phase::fluid, &cm.periodic_pairs, &noslip);
      Qf_.emplace(cm, ElemType::P1, 1, Phase::fluid, &cm.periodic_pairs, nullptr);
      fluid_comp_ = phase_components(cm, Phase::fluid, &cm.periodic_pairs, n_fluid_comp_);
      rows_f_ = mean_rows(*Qf_, Phase::fluid, fluid_comp_, n_fluid_comp_);
      nv_ = Vf_->n_dofs();
      np_ = Qf_->n_dofs();

      slot_comp_f_ = detail::slot_components(*Qf_, fluid_comp_);
      comp_area_f_.assign(static_cast<size_t>(n_fluid_comp_), 0.0);
      for (int t = 0; t < cm.n_tris(); ++t)
        if (fluid_comp_[static_cast<size_t>(t)] >= 0)
          comp_area_f_[static_cast<size_t>(fluid_comp_[static_cast<size_t>(t)])] += cm.tri_area(t);

      Triplets S, B;
      assemble_symgrad(*Vf_, Phase::fluid, 1.0, S);
      assemble_div_coupling(*Qf_, *Vf_, 1.0, B);
      Sf_.resize(nv_, nv_);
      Sf_.setFromTriplets(S.begin(), S.end());
      Bf_.resize(np_, nv_);
      Bf_.setFromTriplets(B.begin(), B.end());

      // Saddle [[S, -B^T], [-B, 0]]; the constant-pressure kernel is removed
      // by pinning one pressure dof per fluid component.
      Triplets sys = S;
      for (const auto& t : B) {
        sys.emplace_back(nv_ + t.row(), t.col(), -t.value());
        sys.emplace_back(t.col(), nv_ + t.row(), -t.value());
      }
      auto pin_p = detail::first_dof_per_component(*Qf_, slot_comp_f_, n_fluid_comp_);
      pinned_f_.clear();
      for (int p : pin_p) pinned_f_.push_back(nv_ + p);
      lu_f_.factor(detail::pin_dofs(sys, nv_ + np_, pinned_f_), 1e-9);
    }
  }

  const PeriodicCellMesh& mesh() const { return *cm_; }
  const ElasticityTensor& tensor() const { return A_; }
  const FunctionSpace& solid_space() const { return Vs_; }
  bool has_fluid() const { return has_fluid_; }
  const FunctionSpace& fluid_velocity_space() const { return *Vf_; }
  const FunctionSpace& fluid_pressure_space() const { return *Qf_; }
  const std::vector<int>& solid_components() const { return solid_comp_; }
  int n_solid_components() const { return n_solid_comp_; }
  const std::vector<int>& fluid_components() const { return fluid_comp_; }
  int n_fluid_components() const { return n_fluid_comp_; }
  const SpMat& solid_stiffness() const { return Ks_; }
  const SpMat& fluid_symgrad() const { return Sf_; }
  const SpMat& fluid_divergence() const { return Bf_; }

  /*! rhs for the chi_ij problem: -(A M_ij) : D(phi). */
  Vec chi_rhs(int i, int j) const {
    Vec rhs = Vec::Zero(ns_);
    add_strain_load(Vs_, Phase::solid, A_, unit_strain(i, j),
                    [](const Eigen::Vector2d&) { return 1.0; }, -1.0, rhs);
    return rhs;
  }

  /*! rhs for the chiB_ij problem: +y2 (A M_ij) : D(phi). */
  Vec chi_bending_rhs(int i, int j) const {
    Vec rhs = Vec::Zero(ns_);
    add_strain_load(Vs_, Phase::solid, A_, unit_strain(i, j),
                    [](const Eigen::Vector2d& x) { return x[1]; }, 1.0, rhs);
    return rhs;
  }

  /*! rhs for the chi0 problem: -∫_Γ phi·nu. */
  Vec chi_pressure_rhs() const {
    Vec rhs = Vec::Zero(ns_);
    add_interface_load(Vs_, [](const Eigen::Vector2d&, const Eigen::Vector2d& nu) {
      return Eigen::Vector2d(-nu);
    }, rhs);
    return rhs;
  }

  /*! Solve the mean-constrained solid system. The Lagrange multiplier of the
   *  constrained problem is carried by the translation kernel only, so it has
   *  the closed form lambda_{c,a} = (sum of the load over component c, field
   *  component a) / |Z_c|; subtracting lambda times the mean rows makes the
   *  load range-compatible, the pinned factorization gives one particular
   *  solution, and adding translations restores the zero means exactly. */
  Vec solve_solid(const Vec& rhs) const {
    Vec rhs_eff = rhs;
    for (int c = 0; c < n_solid_comp_; ++c)
      for (int a = 0; a < 2; ++a) {
        double tdot = 0.0;
        for (int s = 0; s < Vs_.n_scalar(); ++s)
          if (slot_comp_s_[static_cast<size_t>(s)] == c) tdot += rhs[Vs_.dof(s, a)];
        double lambda = tdot / comp_area_s_[static_cast<size_t>(c)];
        if (lambda != 0.0) rhs_eff -= lambda * rows_s_[static_cast<size_t>(c * 2 + a)];
      }
    Vec b = rhs_eff;
    for (int p : pinned_s_) b[p] = 0.0;
    Vec x = lu_s_.solve(b);
    for (int c = 0; c < n_solid_comp_; ++c)
      for (int a = 0; a < 2; ++a) {
        double shift = -rows_s_[static_cast<size_t>(c * 2 + a)].dot(x) /
                       comp_area_s_[static_cast<size_t>(c)];
        for (int s = 0; s < Vs_.n_scalar(); ++s)
          if (slot_comp_s_[static_cast<size_t>(s)] == c) x[Vs_.dof(s, a)] += shift;
      }
    require_solver((Ks_ * x - rhs_eff).norm() <= 1e-9 * (1.0 + rhs.norm()),
                   "solver-failed: cell solve weak residual above tolerance");
    for (const auto& row : rows_s_)
      require_solver(std::abs(row.dot(x)) <= 1e-9 * (1.0 + x.norm()),
                     "solver-failed: mean constraint violated");
    return x;
  }

  Vec solve_chi(int i, int j) const { return solve_solid(chi_rhs(i, j)); }
  Vec solve_chi_bending(int i, int j) const { return solve_solid(chi_bending_rhs(i, j)); }
  Vec solve_chi_pressure() const { return solve_solid(chi_pressure_rhs()); }

  /*! Solve the Stokes cell problem for unit forcing e_i; returns (velocity,
   *  pressure) coefficients and checks the discrete divergence residual.
   *  Constant pressure shifts per fluid component are in the kernel of the
   *  saddle system (no-slip plus periodicity cancel all boundary fluxes), so
   *  the pinned solution is corrected to per-component zero pressure mean. */
  std::pair<Vec, Vec> solve_stokes(int i) const {
    require_input(has_fluid_, "input-error: Stokes cell requested on a fluid-free geometry");
    Vec F = Vec::Zero(nv_);
    {
      Eigen::Vector2d e = Eigen::Vector2d::Zero();
      e[i] = 1.0;
      add_load(*Vf_, Phase::fluid, [&](const Eigen::Vector2d&) { return e; }, F);
    }
    Vec b = Vec::Zero(nv_ + np_);
    b.head(nv_) = F;
    for (int p : pinned_f_) b[p] = 0.0;
    Vec xa = lu_f_.solve(b);
    Vec q = xa.head(nv_);
    Vec pi = xa.segment(nv_, np_);
    for (int c = 0; c < n_fluid_comp_; ++c) {
      double shift =
          -rows_f_[static_cast<size_t>(c)].dot(pi) / comp_area_f_[static_cast<size_t>(c)];
      for (int s = 0; s < Qf_->n_scalar(); ++s)
        if (slot_comp_f_[static_cast<size_t>(s)] == c) pi[Qf_->dof(s, 0)] += shift;
    }
    require_solver((Sf_ * q - Bf_.transpose() * pi - F).norm() <= 1e-9 * (1.0 + F.norm()),
                   "solver-failed: Stokes momentum residual above tolerance");
    require_solver((Bf_ * q).norm() <= 1e-9 * (1.0 + q.norm()),
                   "solver-failed: discrete divergence residual above tolerance");
    for (const auto& row : rows_f_)
      require_solver(std::abs(row.dot(pi)) <= 1e-9 * (1.0 + pi.norm()),
                     "solver-failed: pressure mean constraint violated");
    return {std::move(q), std::move(pi)};
  }

 private:
  const PeriodicCellMesh* cm_;
  ElasticityTensor A_;
  FunctionSpace Vs_;
  std::vector<int> solid_comp_;
  int n_solid_comp_ = 0;
  std::vector<Vec> rows_s_;
  std::vector<int> slot_comp_s_;
  std::vector<double> comp_area_s_;
  std::vector<int> pinned_s_;
  int ns_ = 0;
  SpMat Ks_;
  FactoredLU lu_s_;

  bool has_fluid_ = false;
  std::optional<FunctionSpace> Vf_, Qf_;
  std::vector<int> fluid_comp_;
  int n_fluid_comp_ = 0;
  std::vector<Vec> rows_f_;
  std::vector<int> slot_comp_f_;
  std::vector<double> comp_area_f_;
  std::vector<int> pinned_f_;
  int nv_ = 0, np_ = 0;
  SpMat Sf_, Bf_;
  FactoredLU lu_f_;
};

/*! Complete set of cell solutions on one mesh, with the spaces needed to
 *  evaluate them. Owns the mesh via shared_ptr so field evaluation stays valid
 *  independent of the originating workspace. */
struct CellSolutionSet {
  std::shared_ptr<const PeriodicCellMesh> mesh;
  ElasticityTensor A;

  std::optional<FunctionSpace> Vs;
  std::vector<int> solid_comp;
  int n_solid_comp = 0;
  std::array<std::array<Vec, 2>, 2> chi;
  std::array<std::array<Vec, 2>, 2> chiB;
  Vec chi0;

  bool has_fluid = false;
  std::optional<FunctionSpace> Vf, Qf;
  std::vector<int> fluid_comp;
  int n_fluid_comp = 0;
  std::array<Vec, 2> q;
  std::array<Vec, 2> pi;

  double solve_seconds = 0.0;
};

/*! Solve all cell problems (4 chi, 4 chiB, chi0, 2 Stokes when fluid exists). */
inline CellSolutionSet solve_all_cells(std::shared_ptr<const PeriodicCellMesh> cm,
                                       const ElasticityTensor& A) {
  require_input(static_cast<bool>(cm), "input-error: null cell mesh");
  const auto t0 = std::chrono::steady_clock::now();
  CellWorkspace ws(*cm, A);

  CellSolutionSet set;
  set.mesh = std::move(cm);
  set.A = A;
  set.Vs.emplace(ws.solid_space());
  set.solid_comp = ws.solid_components();
  set.n_solid_comp = ws.n_solid_components();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      set.chi[static_cast<size_t>(i)][static_cast<size_t>(j)] = ws.solve_chi(i, j);
      set.chiB[static_cast<size_t>(i)][static_cast<size_t>(j)] = ws.solve_chi_bending(i, j);
    }
  set.chi0 = ws.solve_chi_pressure();

  set.has_fluid = ws.has_fluid();
  if (set.has_fluid) {
    set.Vf.emplace(ws.fluid_velocity_space());
    set.Qf.emplace(ws.fluid_pressure_space());
    set.fluid_comp = ws.fluid_components();
    set.n_fluid_comp = ws.n_fluid_components();
    for (int i = 0; i < 2; ++i) {
      auto [qi, pii] = ws.solve_stokes(i);
      set.q[static_cast<size_t>(i)] = std::move(qi);
      set.pi[static_cast<size_t>(i)] = std::move(pii);
    }
  }
  set.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return set;
}

namespace detail {

/*! Integral of f(x) over the triangles of one phase component. */
template <class F>
inline double component_integral(const Mesh2D& m, const std::vector<int>& tri_comp, int comp, F f) {
  double acc = 0;
  for (int t = 0; t < m.n_tris(); ++t) {
    if (tri_comp[static_cast<size_t>(t)] != comp) continue;
    ElemGeom g = elem_geom(m, t);
    for (const auto& qp : tri_quadrature_order4()) {
      Eigen::Vector2d x = g.p0 + g.J * Eigen::Vector2d(qp.x, qp.y);
      acc += qp.w * g.area * f(x);
    }
  }
  return acc;
}

/*! L2 error of a vector coefficient field against a per-component analytic
 *  field g(x, comp) over the space's phase. */
template <class G>
inline double l2_error_vs(const FunctionSpace& V, const Vec& coef, const std::vector<int>& tri_comp,
                          G g) {
  const Mesh2D& m = V.mesh();
  double acc = 0;
  for (int t = 0; t < m.n_tris(); ++t) {
    if (!V.active(t) || tri_comp[static_cast<size_t>(t)] < 0) continue;
    ElemGeom ge = elem_geom(m, t);
    for (const auto& qp : tri_quadrature_order4()) {
      Eigen::Vector2d x = ge.p0 + ge.J * Eigen::Vector2d(qp.x, qp.y);
      Eigen::Vector2d u = eval_vec(V, coef, t, qp.x, qp.y);
      Eigen::Vector2d d = u - g(x, tri_comp[static_cast<size_t>(t)]);
      acc += qp.w * ge.area * d.squaredNorm();
    }
  }
  return std::sqrt(acc);
}

/*! Same for a scalar coefficient field. */
template <class G>
inline double l2_error_vs_scalar(const FunctionSpace& V, const Vec& coef,
                                 const std::vector<int>& tri_comp, G g) {
  const Mesh2D& m = V.mesh();
  double acc = 0;
  for (int t = 0; t < m.n_tris(); ++t) {
    if (!V.active(t) || tri_comp[static_cast<size_t>(t)] < 0) continue;
    ElemGeom ge = elem_geom(m, t);
    for (const auto& qp : tri_quadrature_order4()) {
      Eigen::Vector2d x = ge.p0 + ge.J * Eigen::Vector2d(qp.x, qp.y);
      double u = eval_scalar(V, coef, t, qp.x, qp.y);
      double d = u - g(x, tri_comp[static_cast<size_t>(t)]);
      acc += qp.w * ge.area * d * d;
    }
  }
  return std::sqrt(acc);
}

/*! Per-component means (value integral / area) of an analytic scalar. */
template <class F>
inline std::vector<double> component_means(const Mesh2D& m, const std::vector<int>& tri_comp,
                                           int n_comp, F f) {
  std::vector<double> mean(static_cast<size_t>(n_comp), 0.0);
  for (int c = 0; c < n_comp; ++c) {
    double area = component_integral(m, tri_comp, c, [](const Eigen::Vector2d&) { return 1.0; });
    double val = component_integral(m, tri_comp, c, f);
    mean[static_cast<size_t>(c)] = val / area;
  }
  return mean;
}

}  // namespace detail

struct AnalyticCheck {
  std::string name;
  double error = 0.0;
  double tol = 0.0;
  bool pass = false;
  bool informational = false;  // reported but never gates the verdict
};

struct CellVerifyReport {
  std::vector<AnalyticCheck> checks;
  bool all_pass = true;
  double max_error = 0.0;  // over gating checks only

  void add(std::string name, double error, double tol, bool informational = false) {
    AnalyticCheck c;
    c.name = std::move(name);
    c.error = error;
    c.tol = tol;
    c.informational = informational;
    c.pass = informational || error <= tol;
    if (!informational) {
      all_pass = all_pass && c.pass;
      max_error = std::max(max_error, error);
    }
    checks.push_back(std::move(c));
  }
};

/*! Check every closed-form identity the cell solutions must reproduce:
 *  the linear/quadratic shear correctors (contained exactly in P2), the
 *  hydrostatic Stokes cell (0, y2 - mean), Galerkin energy identities, mean
 *  constraints, and discrete divergence residuals. */
inline CellVerifyReport verify_analytic_cells(const CellSolutionSet& set) {
  require_input(set.mesh && set.Vs, "input-error: incomplete cell solution set");
  CellVerifyReport rep;
  const Mesh2D& m = *set.mesh;
  const FunctionSpace& Vs = *set.Vs;
  const auto& comp = set.solid_comp;

  auto mean_y2 = detail::component_means(m, comp, set.n_solid_comp,
                                         [](const Eigen::Vector2d& x) { return x[1]; });
  auto mean_half_y2sq = detail::component_means(
      m, comp, set.n_solid_comp, [](const Eigen::Vector2d& x) { return 0.5 * x[1] * x[1]; });

  // Shear correctors: the unique zero-stress solutions -(y2 - mean) e_i.
  for (int i = 0; i < 2; ++i) {
    auto expected = [&](const Eigen::Vector2d& x, int c) {
      Eigen::Vector2d v = Eigen::Vector2d::Zero();
      v[i] = -(x[1] - mean_y2[static_cast<size_t>(c)]);
      return v;
    };
    rep.add("chi_" + std::to_string(i + 1) + "2_closed_form",
            detail::l2_error_vs(Vs, set.chi[static_cast<size_t>(i)][1], comp, expected), 1e-8);
  }
  {  // The sign printed in the source closed-form quote; kept for the record.
    auto flipped = [&](const Eigen::Vector2d& x, int c) {
      return Eigen::Vector2d(x[1] - mean_y2[static_cast<size_t>(c)], 0.0);
    };
    rep.add("chi_12_vs_sign_flipped_quote", detail::l2_error_vs(Vs, set.chi[0][1], comp, flipped),
            0.0, /*informational=*/true);
  }
  rep.add("chi_12_equals_chi_21",
          std::sqrt(integrate_field(Vs, Phase::solid, Vec(set.chi[0][1] - set.chi[1][0]),
                                    [](const Eigen::Vector2d&, const Eigen::Vector2d& u,
                                       const Eigen::Matrix2d&) { return u.squaredNorm(); })),
          1e-10);

  // Bending correctors: (1/2 y2^2 - mean) e_i, exactly representable in P2.
  for (int i = 0; i < 2; ++i) {
    auto expected = [&](const Eigen::Vector2d& x, int c) {
      Eigen::Vector2d v = Eigen::Vector2d::Zero();
      v[i] = 0.5 * x[1] * x[1] - mean_half_y2sq[static_cast<size_t>(c)];
      return v;
    };
    rep.add("chiB_" + std::to_string(i + 1) + "2_closed_form",
            detail::l2_error_vs(Vs, set.chiB[static_cast<size_t>(i)][1], comp, expected), 1e-8);
  }
  rep.add("chiB_12_equals_chiB_21",
          std::sqrt(integrate_field(Vs, Phase::solid, Vec(set.chiB[0][1] - set.chiB[1][0]),
                                    [](const Eigen::Vector2d&, const Eigen::Vector2d& u,
                                       const Eigen::Matrix2d&) { return u.squaredNorm(); })),
          1e-10);

  // Mean-zero constraints for every solid family.
  {
    double worst = 0.0;
    auto mean_violation = [&](const Vec& coef) {
      for (int c = 0; c < set.n_solid_comp; ++c) {
        double area = detail::component_integral(m, comp, c,
                                                 [](const Eigen::Vector2d&) { return 1.0; });
        for (int a = 0; a < 2; ++a) {
          double integral = 0.0;
          for (int t = 0; t < m.n_tris(); ++t) {
            if (comp[static_cast<size_t>(t)] != c) continue;
            ElemGeom ge = elem_geom(m, t);
            for (const auto& qp : tri_quadrature_order4())
              integral += qp.w * ge.area * eval_vec(Vs, coef, t, qp.x, qp.y)[a];
          }
          worst = std::max(worst, std::abs(integral) / area);
        }
      }
    };
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        mean_violation(set.chi[static_cast<size_t>(i)][static_cast<size_t>(j)]);
        mean_violation(set.chiB[static_cast<size_t>(i)][static_cast<size_t>(j)]);
      }
    mean_violation(set.chi0);
    rep.add("solid_mean_constraints", worst, 1e-9);
  }

  // Galerkin energy identities: energy(x) = load(x) for every solid solve.
  {
    CellWorkspace ws(*set.mesh, set.A);
    const SpMat& K = ws.solid_stiffness();
    double worst = 0.0;
    auto gap = [&](const Vec& x, const Vec& rhs) {
      double e = x.dot(K * x), l = x.dot(rhs);
      worst = std::max(worst, std::abs(e - l) / (1.0 + std::abs(l)));
    };
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        gap(set.chi[static_cast<size_t>(i)][static_cast<size_t>(j)], ws.chi_rhs(i, j));
        gap(set.chiB[static_cast<size_t>(i)][static_cast<size_t>(j)], ws.chi_bending_rhs(i, j));
      }
    gap(set.chi0, ws.chi_pressure_rhs());
    rep.add("solid_galerkin_identity", worst, 1e-9);

    // chi0: zero without an interface; otherwise both pressure-coefficient
    // formulas agree and the energy is positive.
    if (m.interface.empty()) {
      rep.add("chi0_zero_without_interface", set.chi0.norm(), 1e-10);
    } else {
      double energy = set.chi0.dot(K * set.chi0);
      double flux = -integrate_interface(Vs, set.chi0,
                                         [](const Eigen::Vector2d&, const Eigen::Vector2d& nu,
                                            const Eigen::Vector2d& u) { return u.dot(nu); });
      rep.add("chi0_energy_equals_interface_flux", std::abs(energy - flux) / (1.0 + energy), 1e-9);
      rep.add("chi0_energy_positive", energy > 0.0 ? 0.0 : 1.0, 0.5);
    }

    if (set.has_fluid) {
      const FunctionSpace& Vf = *set.Vf;
      const FunctionSpace& Qf = *set.Qf;
      const SpMat& S = ws.fluid_symgrad();
      const SpMat& B = ws.fluid_divergence();

      rep.add("q2_zero", std::sqrt(integrate_field(Vf, Phase::fluid, set.q[1],
                                                   [](const Eigen::Vector2d&, const Eigen::Vector2d& u,
                                                      const Eigen::Matrix2d&) {
                                                     return u.squaredNorm();
                                                   })),
              1e-8);
      auto mean_y2_f = detail::component_means(m, set.fluid_comp, set.n_fluid_comp,
                                               [](const Eigen::Vector2d& x) { return x[1]; });
      rep.add("pi2_y2_minus_mean",
              detail::l2_error_vs_scalar(Qf, set.pi[1], set.fluid_comp,
                                         [&](const Eigen::Vector2d& x, int c) {
                                           return x[1] - mean_y2_f[static_cast<size_t>(c)];
                                         }),
              1e-8);
      rep.add("stokes_divergence_residual",
              std::max((B * set.q[0]).norm(), (B * set.q[1]).norm()), 1e-9);
      rep.add("stokes_noslip_on_interface",
              std::abs(integrate_interface(Vf, set.q[0],
                                           [](const Eigen::Vector2d&, const Eigen::Vector2d&,
                                              const Eigen::Vector2d& u) { return u.squaredNorm(); })),
              1e-16);
      // Energy identity K_11 = ∫ q_1 · e_1 and K symmetry with K_2i = 0.
      double K11 = set.q[0].dot(S * set.q[0]);
      double load1 = integrate_field(Vf, Phase::fluid, set.q[0],
                                     [](const Eigen::Vector2d&, const Eigen::Vector2d& u,
                                        const Eigen::Matrix2d&) { return u[0]; });
      rep.add("permeability_energy_identity", std::abs(K11 - load1) / (1.0 + std::abs(K11)), 1e-9);
      double K12 = set.q[0].dot(S * set.q[1]);
      double K21 = set.q[1].dot(S * set.q[0]);
      double K22 = set.q[1].dot(S * set.q[1]);
      rep.add("permeability_K12_symmetric", std::abs(K12 - K21), 1e-10);
      rep.add("permeability_second_row_zero", std::max(std::abs(K21), std::abs(K22)), 1e-10);
    }
  }
  return rep;
}

}  // namespace biotplate
