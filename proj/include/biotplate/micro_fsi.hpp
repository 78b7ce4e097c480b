#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "biotplate/fem.hpp"
#include "biotplate/layer_mesh.hpp"
#include "biotplate/linalg.hpp"

namespace biotplate {

/*! Loads driving the layer problem, given as profiles of t and the horizontal
 *  coordinate x1. The fluid body force is (f0, eps*f1n) and the solid body
 *  force is (g0, eps*g1n): the vertical components enter one order down in the
 *  layer thickness, which is the regime the upscaled plate model describes.
 *  Null entries mean zero. All profiles must vanish at t = 0 (the system
 *  starts from rest). */
struct MicroForcing {
  std::function<double(double, double)> f0;   // fluid, horizontal
  std::function<double(double, double)> f1n;  // fluid, vertical profile (scaled by eps)
  std::function<double(double, double)> g0;   // solid, horizontal
  std::function<double(double, double)> g1n;  // solid, vertical profile (scaled by eps)
};

namespace detail {
inline double eval_or_zero(const std::function<double(double, double)>& f, double t, double x1) {
  return f ? f(t, x1) : 0.0;
}
}  // namespace detail

/*! One time level of the direct simulation. `w` is the global velocity field
 *  (fluid velocity; solid material velocity), `u` the displacement accumulated
 *  by the backward-Euler update u+ = u + dt*w (meaningful on the solid; on the
 *  fluid it is just the time integral of the velocity), `p` the fluid
 *  pressure (empty when the layer has no fluid). */
struct MicroState {
  double t = 0;
  Vec w, u, p;
};

struct MicroTrajectory {
  std::vector<MicroState> states;
};

/*! Direct solver for the coupled incompressible-fluid / linear-solid layer.
 *
 *  A single quadratic vector field on the whole layer carries the fluid
 *  velocity and the solid velocity; continuity across the interface (the
 *  no-slip / material-velocity match) is exact because the two phases share
 *  their interface degrees of freedom. The pressure is linear on the fluid.
 *  Each backward-Euler step solves the symmetric saddle system
 *
 *      [ eps*Bf + (dt/eps)*As   -Bdiv^T ] [w]   [ F + G - (1/eps)*As*u_old ]
 *      [ -Bdiv                     0    ] [p] = [ 0                        ]
 *
 *  where Bf is the fluid strain-rate form, As the solid elastic form and Bdiv
 *  the divergence pairing; then u_new = u_old + dt*w. No pressure gauge is
 *  needed even for enclosed fluid pockets: a constant pressure does work
 *  against interface test fields, so the solid compliance fixes its level.
 *  With no fluid at all the same step degenerates to backward-Euler
 *  quasistatic elasticity.
 *
 *  Boundary conditions: lateral solid clamped; lateral fluid velocity-clamped
 *  or stress-free per side; horizontal faces traction-free. */
class MicroSolver {
 public:
  MicroSolver(const LayerMesh& L, const ElasticityTensor& A, double dt,
              bool fluid_dirichlet_left = true, bool fluid_dirichlet_right = false)
      : mesh_(&L),
        A_(A),
        eps_(L.eps),
        dt_(dt),
        bc_(make_velocity_bc(L, fluid_dirichlet_left, fluid_dirichlet_right)),
        V_(L, ElemType::P2, 2, std::nullopt, nullptr, &bc_) {
    require_input(dt > 0.0, "micro-invalid: time step must be positive");
    has_fluid_ = false;
    for (Phase ph : L.tri_phase)
      if (ph == Phase::fluid) {
        has_fluid_ = true;
        break;
      }

    const int nw = V_.n_dofs();
    require_input(nw > 0, "micro-invalid: velocity space is empty");
    auto build = [&](Triplets& t, SpMat& M, int rows, int cols) {
      M.resize(rows, cols);
      M.setFromTriplets(t.begin(), t.end());
    };
    Triplets tf, ts, td, tmf, tms;
    assemble_symgrad(V_, Phase::fluid, 1.0, tf);
    assemble_elastic(V_, Phase::solid, A, 1.0, ts);
    assemble_symgrad(V_, Phase::solid, 1.0, td);
    assemble_mass(V_, Phase::fluid, 1.0, tmf);
    assemble_mass(V_, Phase::solid, 1.0, tms);
    build(tf, Bf_, nw, nw);
    build(ts, As_, nw, nw);
    build(td, Ds_, nw, nw);
    build(tmf, Mf_, nw, nw);
    build(tms, Ms_, nw, nw);

    if (has_fluid_) {
      Qf_.emplace(L, ElemType::P1, 1, Phase::fluid);
      const int np = Qf_->n_dofs();
      Triplets tq, tb;
      assemble_mass(*Qf_, Phase::fluid, 1.0, tq);
      build(tq, Mq_, np, np);
      assemble_div_coupling(*Qf_, V_, 1.0, tb);
      build(tb, Bdiv_, np, nw);

      Triplets tS;
      tS.reserve(tf.size() + ts.size() + 2 * tb.size());
      for (const auto& e : tf) tS.emplace_back(e.row(), e.col(), eps_ * e.value());
      for (const auto& e : ts) tS.emplace_back(e.row(), e.col(), (dt_ / eps_) * e.value());
      for (int k = 0; k < Bdiv_.outerSize(); ++k)
        for (SpMat::InnerIterator it(Bdiv_, k); it; ++it) {
          tS.emplace_back(nw + static_cast<int>(it.row()), static_cast<int>(it.col()), -it.value());
          tS.emplace_back(static_cast<int>(it.col()), nw + static_cast<int>(it.row()), -it.value());
        }
      SpMat S(nw + np, nw + np);
      S.setFromTriplets(tS.begin(), tS.end());
      lu_.factor(S, 1e-9);
      setup_extension(L, fluid_dirichlet_left, fluid_dirichlet_right);
    } else {
      SpMat S = (dt_ / eps_) * As_;
      lu_.factor(S, 1e-9);
    }
  }

  const LayerMesh& mesh() const { return *mesh_; }
  const FunctionSpace& velocity_space() const { return V_; }
  const FunctionSpace& pressure_space() const {
    require_input(has_fluid_, "micro-invalid: layer has no fluid phase");
    return *Qf_;
  }
  bool has_fluid() const { return has_fluid_; }
  int n_velocity_dofs() const { return V_.n_dofs(); }
  double eps() const { return eps_; }
  double dt() const { return dt_; }
  const ElasticityTensor& elasticity() const { return A_; }

  const SpMat& fluid_gram() const { return Bf_; }      // ∫_f D(w):D(z)
  const SpMat& solid_gram() const { return As_; }      // ∫_s A D(u):D(z)
  const SpMat& solid_strain_gram() const { return Ds_; }
  const SpMat& fluid_mass() const { return Mf_; }
  const SpMat& solid_mass() const { return Ms_; }
  const SpMat& pressure_mass() const {
    require_input(has_fluid_, "micro-invalid: layer has no fluid phase");
    return Mq_;
  }
  const SpMat& divergence_matrix() const {
    require_input(has_fluid_, "micro-invalid: layer has no fluid phase");
    return Bdiv_;
  }
  const SpMat& system_matrix() const { return lu_.matrix(); }

  MicroState initial_state() const {
    MicroState s;
    s.t = 0;
    s.w = Vec::Zero(V_.n_dofs());
    s.u = Vec::Zero(V_.n_dofs());
    s.p = has_fluid_ ? Vec::Zero(Qf_->n_dofs()) : Vec();
    return s;
  }

  /*! Assembled load functional of the velocity test space at time t. */
  Vec load_vector(double t, const MicroForcing& F) const {
    Vec rhs = Vec::Zero(V_.n_dofs());
    if (has_fluid_)
      add_load(V_, Phase::fluid,
               [&](const Eigen::Vector2d& x) {
                 return Eigen::Vector2d(detail::eval_or_zero(F.f0, t, x[0]),
                                        eps_ * detail::eval_or_zero(F.f1n, t, x[0]));
               },
               rhs);
    add_load(V_, Phase::solid,
             [&](const Eigen::Vector2d& x) {
               return Eigen::Vector2d(detail::eval_or_zero(F.g0, t, x[0]),
                                      eps_ * detail::eval_or_zero(F.g1n, t, x[0]));
             },
             rhs);
    return rhs;
  }

  MicroState step_with_loads(const MicroState& prev, const Vec& loads) const {
    MicroState next;
    next.t = prev.t + dt_;
    Vec rhs_w = loads - (1.0 / eps_) * (As_ * prev.u);
    if (has_fluid_) {
      const int nw = V_.n_dofs(), np = Qf_->n_dofs();
      Vec rhs = Vec::Zero(nw + np);
      rhs.head(nw) = rhs_w;
      Vec sol = lu_.solve(rhs);
      next.w = sol.head(nw);
      next.p = sol.tail(np);
      double div = (Bdiv_ * next.w).norm();
      require_solver(div <= 1e-9 * (1.0 + next.w.norm()),
                     "solver-failed: discrete divergence residual too large");
    } else {
      next.w = lu_.solve(rhs_w);
      next.p = Vec();
    }
    next.u = prev.u + dt_ * next.w;
    return next;
  }

  MicroState step(const MicroState& prev, const MicroForcing& F) const {
    return step_with_loads(prev, load_vector(prev.t + dt_, F));
  }

  /*! eps * ∫_f D(w):D(w): instantaneous viscous dissipation rate. */
  double fluid_dissipation(const Vec& w) const { return eps_ * w.dot(Bf_ * w); }
  /*! (1/2eps) * ∫_s A D(u):D(u): stored elastic energy. */
  double elastic_energy(const Vec& u) const { return 0.5 / eps_ * u.dot(As_ * u); }

  double fluid_strain_sq(const Vec& z) const { return z.dot(Bf_ * z); }
  double solid_strain_sq(const Vec& z) const { return z.dot(Ds_ * z); }
  /*! ∫_f (z·e1)^2: squared tangential fluid velocity (mass form has no
   *  cross-component coupling, so masking the vertical entries is exact). */
  double tangential_sq(const Vec& z) const {
    Vec z0 = z;
    for (int s = 0; s < V_.n_scalar(); ++s) z0[V_.dof(s, 1)] = 0.0;
    return z0.dot(Mf_ * z0);
  }

  /*! Difference between the fluid velocity and the componentwise harmonic
   *  extension of its interface trace (extension clamped to zero on the
   *  velocity-Dirichlet lateral fluid boundary, natural elsewhere). Returned
   *  in the coefficient basis of a fluid space that vanishes on the interface,
   *  so the difference is zero there by construction. Because the extension is
   *  gradient-orthogonal to every field of that space, the difference is
   *  obtained from one Poisson solve with the velocity itself as data. */
  Vec interface_relative_velocity(const Vec& w) const {
    require_input(has_fluid_, "micro-invalid: layer has no fluid phase");
    if (!Vw_ || Vw_->n_dofs() == 0) return Vec();
    return ext_.solve(Rext_ * w);
  }
  /*! ∫_f |interface_relative_velocity|^2 for a coefficient vector returned by it. */
  double relative_velocity_sq(const Vec& z) const {
    if (z.size() == 0) return 0.0;
    return z.dot(Mext_ * z);
  }

 private:
  static DirichletSet make_velocity_bc(const LayerMesh& L, bool fdl, bool fdr) {
    DirichletSet bc(L);
    auto cls = classify_boundaries(L, fdl, fdr);
    for (size_t i = 0; i < L.boundary.size(); ++i)
      if (cls[i] == LayerBC::dirichlet_solid || cls[i] == LayerBC::dirichlet_fluid)
        bc.mark_edge_with_nodes(L, L.boundary[i].edge);
    return bc;
  }

  void setup_extension(const LayerMesh& L, bool fdl, bool fdr) {
    bc_ext_.emplace(L);
    for (const auto& te : L.interface) bc_ext_->mark_edge_with_nodes(L, te.edge);
    auto cls = classify_boundaries(L, fdl, fdr);
    for (size_t i = 0; i < L.boundary.size(); ++i)
      if (cls[i] == LayerBC::dirichlet_fluid) bc_ext_->mark_edge_with_nodes(L, L.boundary[i].edge);
    Vw_.emplace(L, ElemType::P2, 2, Phase::fluid, nullptr, &*bc_ext_);
    const int ni = Vw_->n_dofs();
    if (ni == 0) return;
    Triplets tl;
    assemble_laplace(*Vw_, Phase::fluid, 1.0, tl);
    SpMat Aext(ni, ni);
    Aext.setFromTriplets(tl.begin(), tl.end());
    ext_.factor(Aext);
    Triplets tm;
    assemble_mass(*Vw_, Phase::fluid, 1.0, tm);
    Mext_.resize(ni, ni);
    Mext_.setFromTriplets(tm.begin(), tm.end());

    // Gradient pairing with rows in the interface-clamped fluid space and
    // columns in the global velocity space (both quadratic, same mesh).
    Triplets tr;
    int si[6], sj[6];
    for (int t = 0; t < L.n_tris(); ++t) {
      if (L.tri_phase[static_cast<size_t>(t)] != Phase::fluid) continue;
      ElemGeom g = elem_geom(L, t);
      Vw_->gather(t, si);
      V_.gather(t, sj);
      for (const auto& qp : tri_quadrature_order4()) {
        double N[6];
        Eigen::Vector2d Gr[6];
        int n;
        detail::shape_at(ElemType::P2, qp.x, qp.y, N, Gr, n);
        double w = qp.w * g.area;
        Eigen::Vector2d Gx[6];
        for (int i = 0; i < n; ++i) Gx[i] = g.JinvT * Gr[i];
        for (int i = 0; i < n; ++i) {
          if (si[i] < 0) continue;
          for (int j = 0; j < n; ++j) {
            if (sj[j] < 0) continue;
            double val = w * Gx[i].dot(Gx[j]);
            for (int a = 0; a < 2; ++a)
              tr.emplace_back(Vw_->dof(si[i], a), V_.dof(sj[j], a), val);
          }
        }
      }
    }
    Rext_.resize(ni, V_.n_dofs());
    Rext_.setFromTriplets(tr.begin(), tr.end());
  }

  const LayerMesh* mesh_;
  ElasticityTensor A_;
  double eps_, dt_;
  DirichletSet bc_;
  FunctionSpace V_;
  bool has_fluid_ = false;
  std::optional<FunctionSpace> Qf_;
  SpMat Bf_, As_, Ds_, Mf_, Ms_, Mq_, Bdiv_;
  FactoredLU lu_;
  std::optional<DirichletSet> bc_ext_;
  std::optional<FunctionSpace> Vw_;
  FactoredSPD ext_;
  SpMat Mext_, Rext_;
};

/*! March the direct simulation from rest to time T. Validates that the forcing
 *  starts from rest and, on steps whose loads vanish, that the discrete energy
 *  balance (stored elastic energy plus one step of viscous dissipation) does
 *  not increase. */
inline MicroTrajectory run_micro(const MicroSolver& S, const MicroForcing& F, double T) {
  require_input(T >= 0.0, "micro-invalid: final time must be nonnegative");
  const LayerMesh& L = S.mesh();
  for (int i = 0; i <= 16; ++i) {
    double x1 = L.sigma_a + (L.sigma_b - L.sigma_a) * i / 16.0;
    double m = std::abs(detail::eval_or_zero(F.f0, 0.0, x1)) +
               std::abs(detail::eval_or_zero(F.f1n, 0.0, x1)) +
               std::abs(detail::eval_or_zero(F.g0, 0.0, x1)) +
               std::abs(detail::eval_or_zero(F.g1n, 0.0, x1));
    require_input(m <= 1e-12, "micro-invalid: forcing must vanish at t = 0");
  }
  const long n = std::lround(T / S.dt());  // T = 0 yields the initial state only
  require_input(n >= 0, "micro-invalid: negative step count");

  MicroTrajectory out;
  out.states.reserve(static_cast<size_t>(n) + 1);
  out.states.push_back(S.initial_state());
  double load_scale = 0;
  for (long k = 1; k <= n; ++k) {
    const MicroState& prev = out.states.back();
    Vec loads = S.load_vector(prev.t + S.dt(), F);
    double lmax = loads.lpNorm<Eigen::Infinity>();
    load_scale = std::max(load_scale, lmax);
    bool quiet = lmax <= 1e-13 * (1.0 + load_scale);
    MicroState next = S.step_with_loads(prev, loads);
    if (quiet) {
      double e_prev = S.elastic_energy(prev.u);
      double e_next = S.elastic_energy(next.u) + S.dt() * S.fluid_dissipation(next.w);
      require_solver(e_next <= e_prev + 1e-11 * (1.0 + e_prev),
                     "solver-failed: energy increased on a forcing-free step");
    }
    out.states.push_back(std::move(next));
  }
  return out;
}

/*! Scale-monitor ratios of one run. Time regularity is measured discretely:
 *  "with rate" means the squared norm of the value and of its backward
 *  difference quotient are both accumulated (rectangle rule); "max-in-time"
 *  takes the maximum over steps of value and rate. The eps powers are chosen
 *  so that each monitor stays bounded as the layer gets thinner. */
struct ScalingMonitors {
  double r_v = 0;   // eps^{-1/2} * fluid strain rate, L2-in-time with rate
  double r_u = 0;   // eps^{-3/2} * solid strain, max-in-time with rate
  double r_w = 0;   // eps^{-3/2} * interface-relative fluid velocity, L2-in-time
  double r_vi = 0;  // eps^{-3/2} * tangential fluid velocity, L2-in-time with rate
  double r_p = 0;   // eps^{-1/2} * fluid pressure, L2-in-time with rate
};

inline ScalingMonitors apriori_monitors(const MicroSolver& S, const MicroTrajectory& traj) {
  require_input(traj.states.size() >= 2, "micro-invalid: trajectory needs at least one step");
  const double dt = S.dt(), eps = S.eps();
  double sum_v = 0, sum_w = 0, sum_vi = 0, sum_p = 0, max_u = 0;
  for (size_t k = 1; k < traj.states.size(); ++k) {
    const MicroState& cur = traj.states[k];
    const MicroState& old = traj.states[k - 1];
    Vec dw = (cur.w - old.w) / dt;
    max_u = std::max({max_u, S.solid_strain_sq(cur.u), S.solid_strain_sq(cur.w)});
    if (!S.has_fluid()) continue;
    sum_v += dt * (S.fluid_strain_sq(cur.w) + S.fluid_strain_sq(dw));
    sum_vi += dt * (S.tangential_sq(cur.w) + S.tangential_sq(dw));
    Vec dp = (cur.p - old.p) / dt;
    sum_p += dt * (cur.p.dot(S.pressure_mass() * cur.p) + dp.dot(S.pressure_mass() * dp));
    Vec wrel = S.interface_relative_velocity(cur.w);
    sum_w += dt * S.relative_velocity_sq(wrel);
  }
  ScalingMonitors m;
  m.r_v = std::sqrt(sum_v / eps);
  m.r_u = std::pow(eps, -1.5) * std::sqrt(max_u);
  m.r_w = std::pow(eps, -1.5) * std::sqrt(sum_w);
  m.r_vi = std::pow(eps, -1.5) * std::sqrt(sum_vi);
  m.r_p = std::sqrt(sum_p / eps);
  return m;
}

}  // namespace biotplate
