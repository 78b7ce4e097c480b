#pragma once

#include <cmath>
#include <vector>

#include "biotplate/micro_fsi.hpp"

namespace biotplate {

/*! Reduced formulation of the coupled layer dynamics.
 *
 *  Expanding velocity and displacement in one basis of the discretely
 *  divergence-free subspace eliminates the pressure; writing the expansion
 *  coefficients a(t) against a basis orthonormal in the energy inner product
 *  H = eps*(fluid strain form) + (1/eps)*(solid elastic form) turns the weak
 *  form into  B a' + C a = h  with B the fluid part of H and C the solid part,
 *  so B + C = I exactly. Diagonalizing B = Q^T diag(D) Q splits the modes:
 *  entries with D_ii > 0 evolve as ODEs, entries with D_ii = 0 carry no fluid
 *  content and reduce to the algebraic relation a*_i = h*_i (no dynamics and
 *  no initial layer, hence the compatibility requirement h(0) = 0 on them).
 *  The pair (ODE block, algebraic block) is the differential-algebraic
 *  structure of the problem. */
struct GalerkinSystem {
  Eigen::MatrixXd basis;  // columns: H-orthonormal divergence-free fields
  Eigen::MatrixXd B, C;   // fluid / solid energy fractions, B + C = I
  Eigen::MatrixXd Q;      // rows: eigenvectors of B
  Vec D;                  // eigenvalues of B, descending, clipped to [0,1]
  int n_ode = 0;          // modes treated as differential (D above threshold)
  double threshold = 0;   // algebraic/differential split level
};

/*! Build the reduced system with m modes (m = -1 keeps the whole
 *  divergence-free subspace). The kernel basis comes from a rank-revealing
 *  LU of the divergence matrix, whose column order is deterministic, and a
 *  truncated run keeps the leading columns; orthonormalization is modified
 *  Gram-Schmidt in H with one re-orthogonalization pass. */
inline GalerkinSystem galerkin_reduce(const MicroSolver& S, int m = -1) {
  const int nw = S.n_velocity_dofs();
  Eigen::MatrixXd kernel;
  if (S.has_fluid()) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd(S.divergence_matrix()));
    kernel = lu.kernel();
    require_solver(lu.dimensionOfKernel() > 0,
                   "basis-deficient: divergence constraint leaves no free velocity modes");
  } else {
    kernel = Eigen::MatrixXd::Identity(nw, nw);
  }
  const int d = static_cast<int>(kernel.cols());
  if (m < 0) m = d;
  require_input(m >= 1 && m <= d,
                "basis-deficient: requested mode count exceeds the divergence-free subspace");

  SpMat H = SpMat(S.eps() * S.fluid_gram()) + SpMat((1.0 / S.eps()) * S.solid_gram());
  GalerkinSystem G;
  G.basis.resize(nw, m);
  for (int j = 0; j < m; ++j) {
    Vec v = kernel.col(j);
    for (int pass = 0; pass < 2; ++pass) {  // classical GS, re-orthogonalized once
      if (j == 0) break;
      Vec c = G.basis.leftCols(j).transpose() * (H * v);
      v -= G.basis.leftCols(j) * c;
    }
    double nrm2 = v.dot(H * v);
    require_solver(nrm2 > 0.0, "basis-deficient: divergence-free columns are energy-degenerate");
    G.basis.col(j) = v / std::sqrt(nrm2);
  }

  G.B = S.eps() * (G.basis.transpose() * (S.fluid_gram() * G.basis));
  G.C = (1.0 / S.eps()) * (G.basis.transpose() * (S.solid_gram() * G.basis));
  double gap = (G.B + G.C - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
  require_solver(gap <= 1e-10, "solver-failed: reduced energy split does not sum to the identity");

  EigenSplit es = sym_eigendecomposition(0.5 * (G.B + G.B.transpose()));
  require_solver(es.D.minCoeff() >= -1e-10 && es.D.maxCoeff() <= 1.0 + 1e-10,
                 "solver-failed: reduced fluid fractions leave [0, 1]");
  G.Q = es.Q;
  G.D = es.D.cwiseMax(0.0).cwiseMin(1.0);
  G.threshold = 1e-12 * G.D.maxCoeff();
  G.n_ode = 0;
  for (int i = 0; i < m; ++i)
    if (G.D[i] > G.threshold) ++G.n_ode;
  return G;
}

/*! Reduced trajectory; `alpha` holds coefficients against `basis` columns, so
 *  the displacement field is basis*alpha and the velocity its backward
 *  difference quotient. */
struct DaeTrajectory {
  std::vector<double> t;
  std::vector<Vec> alpha;
};

/*! Backward-Euler march of the reduced system, in the eigenbasis of B:
 *  differential modes update by
 *      a*_i <- (D_i a*_i + dt h*_i) / (D_i + dt (1 - D_i)),
 *  algebraic modes are slaved to the load, a*_i = h*_i. The update formula
 *  degenerates to exactly that algebraic relation as D_i -> 0, so the split
 *  threshold is not a modeling choice, only a guard against dividing noise. */
inline DaeTrajectory dae_solve(const GalerkinSystem& G, const MicroSolver& S,
                               const MicroForcing& F, double T) {
  require_input(T >= 0.0, "micro-invalid: final time must be nonnegative");
  const long n = std::lround(T / S.dt());
  require_input(n >= 0, "micro-invalid: negative step count");
  const int m = static_cast<int>(G.basis.cols());

  auto hstar = [&](double t) -> Vec { return G.Q * (G.basis.transpose() * S.load_vector(t, F)); };
  Vec h0 = hstar(0.0);
  double viol = 0;
  for (int i = G.n_ode; i < m; ++i) viol = std::max(viol, std::abs(h0[i]));
  require_input(viol <= 1e-9,
                "compatibility-violated: algebraic modes require vanishing loads at t = 0");

  DaeTrajectory out;
  out.t.reserve(static_cast<size_t>(n) + 1);
  out.alpha.reserve(static_cast<size_t>(n) + 1);
  out.t.push_back(0.0);
  out.alpha.push_back(Vec::Zero(m));
  Vec as = Vec::Zero(m);
  for (long k = 1; k <= n; ++k) {
    double t1 = out.t.back() + S.dt();
    Vec h = hstar(t1);
    for (int i = 0; i < m; ++i) {
      if (G.D[i] > G.threshold)
        as[i] = (G.D[i] * as[i] + S.dt() * h[i]) / (G.D[i] + S.dt() * (1.0 - G.D[i]));
      else
        as[i] = h[i];
    }
    out.t.push_back(t1);
    out.alpha.push_back(G.Q.transpose() * as);
  }
  return out;
}

/*! Relative L2-in-time discrepancies between the reduced run and the direct
 *  simulation: displacement measured over the solid, velocity over the fluid
 *  (over the solid when the layer has no fluid). Zero-load runs yield zero
 *  numerator and are reported as zero. */
struct DaeComparison {
  double err_u = 0;
  double err_v = 0;
};

inline DaeComparison compare_dae_vs_monolithic(const MicroSolver& S, const GalerkinSystem& G,
                                               const MicroForcing& F, double T) {
  MicroTrajectory mono = run_micro(S, F, T);
  DaeTrajectory red = dae_solve(G, S, F, T);
  require_solver(mono.states.size() == red.alpha.size(),
                 "solver-failed: mismatched trajectory lengths");
  const SpMat& Ms = S.solid_mass();
  const SpMat& Mv = S.has_fluid() ? S.fluid_mass() : S.solid_mass();
  const double dt = S.dt();
  double du = 0, nu = 0, dv = 0, nv = 0;
  for (size_t k = 1; k < mono.states.size(); ++k) {
    Vec u_r = G.basis * red.alpha[k];
    Vec w_r = (G.basis * (red.alpha[k] - red.alpha[k - 1])) / dt;
    Vec eu = u_r - mono.states[k].u;
    Vec ev = w_r - mono.states[k].w;
    du += dt * eu.dot(Ms * eu);
    nu += dt * mono.states[k].u.dot(Ms * mono.states[k].u);
    dv += dt * ev.dot(Mv * ev);
    nv += dt * mono.states[k].w.dot(Mv * mono.states[k].w);
  }
  DaeComparison out;
  out.err_u = nu > 0 ? std::sqrt(du / nu) : std::sqrt(du);
  out.err_v = nv > 0 ? std::sqrt(dv / nv) : std::sqrt(dv);
  return out;
}

}  // namespace biotplate
