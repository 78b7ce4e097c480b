#pragma once
/*! Macroscopic Biot-plate solver on the 1D midline Σ = (a,b).
 *
 *  Unknowns per time step (backward Euler, fixed dt):
 *   - pressure p (P1; fixed to zero on the designated endpoint part),
 *   - in-plane shift u (P1, zero at both ends),
 *   - deflection w (Hermite cubic, value and slope zero at both ends).
 *
 *  Coupled weak system, with K the tangential permeability, alpha the
 *  pressure storage, beta1 = B1 - |Z_f| and beta2 = B2 + d_n^f the
 *  pressure-strain couplings, and (a*, b*, c*) the plate form:
 *
 *   alpha ∫ dt_p φ + K ∫ (p' - f0) φ' = ∫ dt[beta1 u' + beta2 w''] φ
 *   ∫ a* u'U' + b* w''U' + b* u'V'' + c* w''V''
 *       + ∫ p [beta1 U' + beta2 V'']
 *       = ∫ fbar1 V + f0 [|Z_f| U - d_n^f V'] + gbar1 V + g0 [|Z_s| U - d_n^s V']
 *
 *  Discretizing the right-hand time derivative of the pressure row with the
 *  same backward difference as the left makes the pressure/plate coupling
 *  blocks exact transposes, which in turn gives unconditional discrete energy
 *  decay on forcing-free steps.
 */

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "biotplate/core.hpp"
#include "biotplate/effective_tensors.hpp"
#include "biotplate/linalg.hpp"

namespace biotplate {

// ---------------------------------------------------------------------------
// 1D mesh, quadrature, shape functions
// ---------------------------------------------------------------------------

struct SigmaMesh {
  double a = 0.0, b = 1.0;
  int n_nodes = 0;

  double h() const { return (b - a) / (n_nodes - 1); }
  double node(int i) const { return a + i * h(); }
  int n_elems() const { return n_nodes - 1; }
};

inline SigmaMesh make_sigma_mesh(double a, double b, int n_nodes) {
  require_input(b > a && n_nodes >= 3, "input-error: midline mesh needs b > a and >= 3 nodes");
  return {a, b, n_nodes};
}

struct GaussPoint1D {
  double s, w;  // reference interval [0,1]
};

/*! Five-point Gauss-Legendre rule on [0,1] (exact through degree 9). */
inline const std::array<GaussPoint1D, 5>& gauss1d() {
  static const std::array<GaussPoint1D, 5> pts = {{
      {0.5 * (1.0 - 0.906179845938663993), 0.5 * 0.236926885056189088},
      {0.5 * (1.0 - 0.538469310105683091), 0.5 * 0.478628670499366468},
      {0.5, 0.5 * 0.568888888888888889},
      {0.5 * (1.0 + 0.538469310105683091), 0.5 * 0.478628670499366468},
      {0.5 * (1.0 + 0.906179845938663993), 0.5 * 0.236926885056189088},
  }};
  return pts;
}

namespace detail {

// P1 hat functions on the reference element.
inline std::array<double, 2> p1_val(double s) { return {1.0 - s, s}; }
inline std::array<double, 2> p1_dx(double h) { return {-1.0 / h, 1.0 / h}; }

// Hermite cubic shape functions: local dofs (value_L, slope_L, value_R, slope_R).
inline std::array<double, 4> herm_val(double s, double h) {
  return {1.0 - 3.0 * s * s + 2.0 * s * s * s, h * (s - 2.0 * s * s + s * s * s),
          3.0 * s * s - 2.0 * s * s * s, h * (s * s * s - s * s)};
}
inline std::array<double, 4> herm_dx(double s, double h) {
  return {(-6.0 * s + 6.0 * s * s) / h, 1.0 - 4.0 * s + 3.0 * s * s,
          (6.0 * s - 6.0 * s * s) / h, 3.0 * s * s - 2.0 * s};
}
inline std::array<double, 4> herm_dxx(double s, double h) {
  return {(-6.0 + 12.0 * s) / (h * h), (-4.0 + 6.0 * s) / h, (6.0 - 12.0 * s) / (h * h),
          (6.0 * s - 2.0) / h};
}

inline double sample(const std::function<double(double, double)>& f, double t, double x) {
  return f ? f(t, x) : 0.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Spaces and state
// ---------------------------------------------------------------------------

/*! Endpoint assignment for the pressure: `fix_pressure_*` marks the part of
 *  the boundary where p = 0 is imposed; the complementary part carries the
 *  natural no-flux condition. Each part must contain at least one endpoint. */
struct MacroBC {
  bool fix_pressure_left = false;
  bool fix_pressure_right = true;
};

class MacroSpaces {
 public:
  MacroSpaces(const SigmaMesh& mesh, const MacroBC& bc) : mesh_(mesh), bc_(bc) {
    require_input(mesh.n_nodes >= 3, "input-error: midline mesh needs at least 3 nodes");
    int n_fixed = (bc.fix_pressure_left ? 1 : 0) + (bc.fix_pressure_right ? 1 : 0);
    require_input(n_fixed == 1,
                  "input-error: each pressure boundary part needs at least one endpoint");
    const int N = mesh.n_nodes;
    p_dof_.assign(N, -1);
    u_dof_.assign(N, -1);
    w_dof_.assign(static_cast<size_t>(N), {-1, -1});
    int np = 0, nu = 0, nw = 0;
    for (int i = 0; i < N; ++i) {
      bool end = (i == 0 || i == N - 1);
      bool p_fixed = (i == 0 && bc.fix_pressure_left) || (i == N - 1 && bc.fix_pressure_right);
      if (!p_fixed) p_dof_[i] = np++;
      if (!end) {
        u_dof_[i] = nu++;
        w_dof_[static_cast<size_t>(i)] = {nw, nw + 1};
        nw += 2;
      }
    }
    n_p_ = np;
    n_u_ = nu;
    n_w_ = nw;
  }

  const SigmaMesh& mesh() const { return mesh_; }
  const MacroBC& bc() const { return bc_; }
  int n_pressure() const { return n_p_; }
  int n_inplane() const { return n_u_; }
  int n_deflection() const { return n_w_; }
  int total() const { return n_p_ + n_u_ + n_w_; }
  int offset_pressure() const { return 0; }
  int offset_inplane() const { return n_p_; }
  int offset_deflection() const { return n_p_ + n_u_; }

  int pressure_dof(int node) const { return p_dof_[static_cast<size_t>(node)]; }
  int inplane_dof(int node) const { return u_dof_[static_cast<size_t>(node)]; }
  const std::array<int, 2>& deflection_dofs(int node) const {
    return w_dof_[static_cast<size_t>(node)];
  }

 private:
  SigmaMesh mesh_;
  MacroBC bc_;
  std::vector<int> p_dof_, u_dof_;
  std::vector<std::array<int, 2>> w_dof_;
  int n_p_ = 0, n_u_ = 0, n_w_ = 0;
};

inline MacroSpaces build_macro_spaces(const SigmaMesh& mesh, const MacroBC& bc) {
  require_input((bc.fix_pressure_left || bc.fix_pressure_right) &&
                    !(bc.fix_pressure_left && bc.fix_pressure_right),
                "input-error: each pressure boundary part needs at least one endpoint");
  return MacroSpaces(mesh, bc);
}

struct MacroState {
  double t = 0.0;
  Vec p, u, w;
};

/*! Forcing data, sampled exactly at step times. The extra_* channels carry
 *  manufactured residual sources for verification runs and default to zero. */
struct MacroForcing {
  std::function<double(double, double)> f0;      // tangential fluid load
  std::function<double(double, double)> g0;      // tangential solid load
  std::function<double(double, double)> fbar1n;  // averaged vertical fluid load
  std::function<double(double, double)> gbar1n;  // averaged vertical solid load
  std::function<double(double, double)> extra_p;  // source paired with φ
  std::function<double(double, double)> extra_u;  // source paired with U
  std::function<double(double, double)> extra_w;  // source paired with V
};

// ---------------------------------------------------------------------------
// Field evaluation
// ---------------------------------------------------------------------------

namespace detail {

inline void locate(const SigmaMesh& m, double x, int& k, double& s) {
  double h = m.h();
  k = static_cast<int>(std::floor((x - m.a) / h));
  if (k < 0) k = 0;
  if (k > m.n_elems() - 1) k = m.n_elems() - 1;
  s = (x - m.node(k)) / h;
}

}  // namespace detail

inline double eval_pressure(const MacroSpaces& sp, const Vec& p, double x) {
  int k;
  double s;
  detail::locate(sp.mesh(), x, k, s);
  auto N = detail::p1_val(s);
  double v = 0;
  for (int l = 0; l < 2; ++l) {
    int d = sp.pressure_dof(k + l);
    if (d >= 0) v += N[static_cast<size_t>(l)] * p[d];
  }
  return v;
}

inline double eval_pressure_dx(const MacroSpaces& sp, const Vec& p, double x) {
  int k;
  double s;
  detail::locate(sp.mesh(), x, k, s);
  auto dN = detail::p1_dx(sp.mesh().h());
  double v = 0;
  for (int l = 0; l < 2; ++l) {
    int d = sp.pressure_dof(k + l);
    if (d >= 0) v += dN[static_cast<size_t>(l)] * p[d];
  }
  return v;
}

inline double eval_inplane(const MacroSpaces& sp, const Vec& u, double x) {
  int k;
  double s;
  detail::locate(sp.mesh(), x, k, s);
  auto N = detail::p1_val(s);
  double v = 0;
  for (int l = 0; l < 2; ++l) {
    int d = sp.inplane_dof(k + l);
    if (d >= 0) v += N[static_cast<size_t>(l)] * u[d];
  }
  return v;
}

inline double eval_inplane_dx(const MacroSpaces& sp, const Vec& u, double x) {
  int k;
  double s;
  detail::locate(sp.mesh(), x, k, s);
  auto dN = detail::p1_dx(sp.mesh().h());
  double v = 0;
  for (int l = 0; l < 2; ++l) {
    int d = sp.inplane_dof(k + l);
    if (d >= 0) v += dN[static_cast<size_t>(l)] * u[d];
  }
  return v;
}

namespace detail {
template <class Shape>
inline double herm_field(const MacroSpaces& sp, const Vec& w, double x, Shape shape) {
  int k;
  double s;
  locate(sp.mesh(), x, k, s);
  auto H = shape(s, sp.mesh().h());
  double v = 0;
  for (int l = 0; l < 2; ++l) {
    const auto& d = sp.deflection_dofs(k + l);
    if (d[0] >= 0) v += H[static_cast<size_t>(2 * l)] * w[d[0]];
    if (d[1] >= 0) v += H[static_cast<size_t>(2 * l + 1)] * w[d[1]];
  }
  return v;
}
}  // namespace detail

inline double eval_deflection(const MacroSpaces& sp, const Vec& w, double x) {
  return detail::herm_field(sp, w, x, [](double s, double h) { return detail::herm_val(s, h); });
}
inline double eval_deflection_dx(const MacroSpaces& sp, const Vec& w, double x) {
  return detail::herm_field(sp, w, x, [](double s, double h) { return detail::herm_dx(s, h); });
}
inline double eval_deflection_dxx(const MacroSpaces& sp, const Vec& w, double x) {
  return detail::herm_field(sp, w, x, [](double s, double h) { return detail::herm_dxx(s, h); });
}

/*! L2 error of a discrete field against an exact profile; `which` selects the
 *  field family: 0 pressure, 1 in-plane shift, 2 deflection. */
inline double macro_l2_error(const MacroSpaces& sp, const Vec& coef, int which,
                             const std::function<double(double)>& exact) {
  const SigmaMesh& m = sp.mesh();
  double acc = 0;
  for (int k = 0; k < m.n_elems(); ++k)
    for (const auto& q : gauss1d()) {
      double x = m.node(k) + q.s * m.h();
      double v = which == 0   ? eval_pressure(sp, coef, x)
                 : which == 1 ? eval_inplane(sp, coef, x)
                              : eval_deflection(sp, coef, x);
      double d = v - exact(x);
      acc += q.w * m.h() * d * d;
    }
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Assembled backward-Euler system
// ---------------------------------------------------------------------------

class MacroSystem {
 public:
  MacroSystem(const EffectiveCoefficients& coeffs, const MacroSpaces& spaces, double dt)
      : c_(coeffs), sp_(spaces), dt_(dt) {
    require_input(dt > 0.0, "input-error: time step must be positive");
    auto pos = check_positivity(coeffs);
    require_input(pos.pass, "input-error: effective coefficients fail positivity: " + pos.detail);
    assemble_blocks();
    assemble_system();
  }

  const MacroSpaces& spaces() const { return sp_; }
  double dt() const { return dt_; }
  const SpMat& matrix() const { return lu_.matrix(); }

  /*! The assembled operator with the pressure rows negated; symmetry of this
   *  matrix is the discrete counterpart of the coupling cancellation that
   *  drives the energy estimate. */
  SpMat scaled_symmetric_matrix() const {
    Vec scale = Vec::Ones(sp_.total());
    scale.head(sp_.n_pressure()).setConstant(-1.0);
    return SpMat(scale.asDiagonal() * lu_.matrix());
  }

  /*! Coupling of the plate increments into the pressure equation (read off the
   *  assembled pressure rows, sign-adjusted to the energy convention). */
  Eigen::MatrixXd plate_to_pressure() const {
    Eigen::MatrixXd M = Eigen::MatrixXd(lu_.matrix())
                            .block(0, sp_.offset_inplane(), sp_.n_pressure(),
                                   sp_.n_inplane() + sp_.n_deflection());
    return -M;
  }
  /*! Coupling of the pressure into the plate equations (assembled plate rows). */
  Eigen::MatrixXd pressure_to_plate() const {
    return Eigen::MatrixXd(lu_.matrix())
        .block(sp_.offset_inplane(), 0, sp_.n_inplane() + sp_.n_deflection(), sp_.n_pressure());
  }

  MacroState initial_state() const {
    MacroState s;
    s.t = 0.0;
    s.p = Vec::Zero(sp_.n_pressure());
    s.u = Vec::Zero(sp_.n_inplane());
    s.w = Vec::Zero(sp_.n_deflection());
    return s;
  }

  /*! Pure forcing contribution to the step right-hand side at time t. */
  Vec loads(double t, const MacroForcing& f) const {
    const SigmaMesh& m = sp_.mesh();
    Vec b = Vec::Zero(sp_.total());
    const double K = c_.K(0, 0);
    for (int k = 0; k < m.n_elems(); ++k) {
      double h = m.h(), x0 = m.node(k);
      for (const auto& q : gauss1d()) {
        double x = x0 + q.s * h, wq = q.w * h;
        auto N = detail::p1_val(q.s);
        auto dN = detail::p1_dx(h);
        auto H = detail::herm_val(q.s, h);
        auto dH = detail::herm_dx(q.s, h);
        double f0 = detail::sample(f.f0, t, x), g0 = detail::sample(f.g0, t, x);
        double fb = detail::sample(f.fbar1n, t, x), gb = detail::sample(f.gbar1n, t, x);
        double ep = detail::sample(f.extra_p, t, x), eu = detail::sample(f.extra_u, t, x);
        double ew = detail::sample(f.extra_w, t, x);
        for (int l = 0; l < 2; ++l) {
          int dp = sp_.pressure_dof(k + l);
          if (dp >= 0)
            b[dp] += wq * dt_ *
                     (K * f0 * dN[static_cast<size_t>(l)] + ep * N[static_cast<size_t>(l)]);
          int du = sp_.inplane_dof(k + l);
          if (du >= 0)
            b[sp_.offset_inplane() + du] +=
                wq * ((c_.vol_f * f0 + c_.vol_s * g0 + eu) * N[static_cast<size_t>(l)]);
          const auto& dw = sp_.deflection_dofs(k + l);
          for (int j = 0; j < 2; ++j) {
            if (dw[j] < 0) continue;
            size_t lj = static_cast<size_t>(2 * l + j);
            b[sp_.offset_deflection() + dw[j]] +=
                wq * ((fb + gb + ew) * H[lj] - (c_.d_n_f * f0 + c_.d_n_s * g0) * dH[lj]);
          }
        }
      }
    }
    return b;
  }

  /*! History contribution to the step right-hand side. */
  Vec history(const MacroState& prev) const {
    Vec b = Vec::Zero(sp_.total());
    b.head(sp_.n_pressure()) = c_.alpha_h * (Mp_ * prev.p) - beta1_ * (Cu_ * prev.u) -
                               beta2_ * (Cw_ * prev.w);
    return b;
  }

  MacroState step(const MacroState& prev, const MacroForcing& f) const {
    double t_new = prev.t + dt_;
    Vec rhs = history(prev) + loads(t_new, f);
    Vec x = lu_.solve(rhs);  // residual-checked to 1e-10 relative
    MacroState s;
    s.t = t_new;
    s.p = x.segment(0, sp_.n_pressure());
    s.u = x.segment(sp_.offset_inplane(), sp_.n_inplane());
    s.w = x.segment(sp_.offset_deflection(), sp_.n_deflection());
    return s;
  }

  /*! Stored energy ½ (alpha ||p||² + plate form). */
  double energy(const MacroState& s) const {
    double ep = c_.alpha_h * s.p.dot(Mp_ * s.p);
    double ee = c_.a_star * s.u.dot(Au_ * s.u) + 2.0 * c_.b_star * s.u.dot(Buw_ * s.w) +
                c_.c_star * s.w.dot(Aw_ * s.w);
    return 0.5 * (ep + ee);
  }

  /*! Darcy dissipation dt·K ∫ (p')² of a state. */
  double dissipation(const MacroState& s) const {
    return dt_ * c_.K(0, 0) * s.p.dot(Ap_ * s.p);
  }

  const EffectiveCoefficients& coefficients() const { return c_; }

 private:
  void assemble_blocks() {
    const SigmaMesh& m = sp_.mesh();
    std::vector<Eigen::Triplet<double>> tMp, tAp, tAu, tAw, tBuw, tCu, tCw;
    for (int k = 0; k < m.n_elems(); ++k) {
      double h = m.h();
      for (const auto& q : gauss1d()) {
        double wq = q.w * h;
        auto N = detail::p1_val(q.s);
        auto dN = detail::p1_dx(h);
        auto H2 = detail::herm_dxx(q.s, h);
        for (int l = 0; l < 2; ++l) {
          int pl = sp_.pressure_dof(k + l), ul = sp_.inplane_dof(k + l);
          size_t sl = static_cast<size_t>(l);
          for (int r = 0; r < 2; ++r) {
            int pr = sp_.pressure_dof(k + r), ur = sp_.inplane_dof(k + r);
            size_t sr = static_cast<size_t>(r);
            if (pl >= 0 && pr >= 0) {
              tMp.emplace_back(pl, pr, wq * N[sl] * N[sr]);
              tAp.emplace_back(pl, pr, wq * dN[sl] * dN[sr]);
            }
            if (ul >= 0 && ur >= 0) tAu.emplace_back(ul, ur, wq * dN[sl] * dN[sr]);
            if (pl >= 0 && ur >= 0) tCu.emplace_back(pl, ur, wq * N[sl] * dN[sr]);
          }
          const auto& dwl = sp_.deflection_dofs(k + l);
          for (int r = 0; r < 2; ++r) {
            const auto& dwr = sp_.deflection_dofs(k + r);
            for (int i = 0; i < 2; ++i)
              for (int j = 0; j < 2; ++j) {
                if (dwl[i] < 0 || dwr[j] < 0) continue;
                size_t li = static_cast<size_t>(2 * l + i), rj = static_cast<size_t>(2 * r + j);
                tAw.emplace_back(dwl[i], dwr[j], wq * H2[li] * H2[rj]);
              }
          }
          for (int r = 0; r < 2; ++r) {
            const auto& dwr = sp_.deflection_dofs(k + r);
            for (int j = 0; j < 2; ++j) {
              if (dwr[j] < 0) continue;
              size_t rj = static_cast<size_t>(2 * r + j);
              if (ul >= 0) tBuw.emplace_back(ul, dwr[j], wq * dN[sl] * H2[rj]);
              if (pl >= 0) tCw.emplace_back(pl, dwr[j], wq * N[sl] * H2[rj]);
            }
          }
        }
      }
    }
    auto build = [](int rows, int cols, const std::vector<Eigen::Triplet<double>>& t) {
      SpMat M(rows, cols);
      M.setFromTriplets(t.begin(), t.end());
      return M;
    };
    Mp_ = build(sp_.n_pressure(), sp_.n_pressure(), tMp);
    Ap_ = build(sp_.n_pressure(), sp_.n_pressure(), tAp);
    Au_ = build(sp_.n_inplane(), sp_.n_inplane(), tAu);
    Aw_ = build(sp_.n_deflection(), sp_.n_deflection(), tAw);
    Buw_ = build(sp_.n_inplane(), sp_.n_deflection(), tBuw);
    Cu_ = build(sp_.n_pressure(), sp_.n_inplane(), tCu);
    Cw_ = build(sp_.n_pressure(), sp_.n_deflection(), tCw);
  }

  void assemble_system() {
    beta1_ = c_.B1 - c_.vol_f;
    beta2_ = c_.B2 + c_.d_n_f;
    const double K = c_.K(0, 0);
    std::vector<Eigen::Triplet<double>> t;
    auto add_block = [&](const SpMat& M, int r0, int c0, double scale) {
      for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it)
          if (scale != 0.0) t.emplace_back(r0 + static_cast<int>(it.row()),
                                           c0 + static_cast<int>(it.col()), scale * it.value());
    };
    const int op = 0, ou = sp_.offset_inplane(), ow = sp_.offset_deflection();
    add_block(Mp_, op, op, c_.alpha_h);
    add_block(Ap_, op, op, dt_ * K);
    add_block(Cu_, op, ou, -beta1_);
    add_block(Cw_, op, ow, -beta2_);
    add_block(SpMat(Cu_.transpose()), ou, op, beta1_);
    add_block(Au_, ou, ou, c_.a_star);
    add_block(Buw_, ou, ow, c_.b_star);
    add_block(SpMat(Cw_.transpose()), ow, op, beta2_);
    add_block(SpMat(Buw_.transpose()), ow, ou, c_.b_star);
    add_block(Aw_, ow, ow, c_.c_star);
    SpMat S(sp_.total(), sp_.total());
    S.setFromTriplets(t.begin(), t.end());
    lu_.factor(S, 1e-10);

    // Assembly-time certificate: the Darcy->plate block must be the exact
    // transpose of the plate->Darcy block.
    double gap = (pressure_to_plate() - plate_to_pressure().transpose()).cwiseAbs().maxCoeff();
    require_solver(gap <= 1e-12, "solver-failed: coupling blocks are not transposes");
  }

  EffectiveCoefficients c_;
  MacroSpaces sp_;
  double dt_ = 0;
  double beta1_ = 0, beta2_ = 0;
  SpMat Mp_, Ap_, Au_, Aw_, Buw_, Cu_, Cw_;
  FactoredLU lu_;
};

// ---------------------------------------------------------------------------
// Time loop with energy monitoring
// ---------------------------------------------------------------------------

struct MacroTrajectory {
  std::vector<MacroState> states;  // states[0] is the zero initial state
  std::vector<double> energy;      // E_k per state
  std::vector<double> dissipation;  // dt K ||p'||² per completed step
};

/*! March the coupled system from the zero initial state to T. On every step
 *  whose forcing vanishes the discrete energy decay E_{k+1} <= E_k is
 *  asserted (it is a theorem for this discretization, so a violation means an
 *  assembly or solver defect). */
inline MacroTrajectory run_macro(const MacroSystem& sys, const MacroForcing& f, double T) {
  require_input(T > 0.0, "input-error: final time must be positive");
  const MacroSpaces& sp = sys.spaces();
  const SigmaMesh& m = sp.mesh();
  for (int i = 0; i < m.n_nodes; ++i) {
    double x = m.node(i);
    require_input(std::abs(detail::sample(f.f0, 0.0, x)) <= 1e-12 &&
                      std::abs(detail::sample(f.g0, 0.0, x)) <= 1e-12,
                  "input-error: tangential forcing must vanish at t = 0");
  }
  MacroTrajectory traj;
  traj.states.push_back(sys.initial_state());
  traj.energy.push_back(sys.energy(traj.states.back()));
  int n_steps = static_cast<int>(std::llround(T / sys.dt()));
  double load_scale = 0.0;
  for (int k = 0; k < n_steps; ++k) {
    const MacroState& prev = traj.states.back();
    double load_norm = sys.loads(prev.t + sys.dt(), f).lpNorm<Eigen::Infinity>();
    load_scale = std::max(load_scale, load_norm);
    MacroState next = sys.step(prev, f);
    double e_prev = traj.energy.back();
    double e_next = sys.energy(next);
    if (load_norm <= 1e-13 * (1.0 + load_scale))
      require_solver(e_next <= e_prev + 1e-11 * (1.0 + e_prev),
                     "solver-failed: energy increased on a forcing-free step");
    traj.dissipation.push_back(sys.dissipation(next));
    traj.states.push_back(std::move(next));
    traj.energy.push_back(e_next);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Darcy velocity postprocessing
// ---------------------------------------------------------------------------

/*! Tangential averaged fluid velocity at element midpoints, computed from two
 *  consecutive states:
 *    v = K (f0 - p') + |Z_f| dt_u - d_n^f dt_(w')
 *  The transverse component of this average vanishes identically and is not
 *  stored. */
struct DarcyVelocity {
  Vec x;  // element midpoints
  Vec v;  // tangential component
};

inline DarcyVelocity darcy_velocity(const MacroSystem& sys, const MacroState& prev,
                                    const MacroState& next,
                                    const std::function<double(double, double)>& f0) {
  const MacroSpaces& sp = sys.spaces();
  const SigmaMesh& m = sp.mesh();
  double dt = next.t - prev.t;
  require_input(dt > 0.0, "input-error: states must be consecutive in time");
  const EffectiveCoefficients& c = sys.coefficients();
  DarcyVelocity out;
  out.x.resize(m.n_elems());
  out.v.resize(m.n_elems());
  for (int k = 0; k < m.n_elems(); ++k) {
    double xm = m.node(k) + 0.5 * m.h();
    double dpdx = eval_pressure_dx(sp, next.p, xm);
    double du_dt = (eval_inplane(sp, next.u, xm) - eval_inplane(sp, prev.u, xm)) / dt;
    double dwx_dt =
        (eval_deflection_dx(sp, next.w, xm) - eval_deflection_dx(sp, prev.w, xm)) / dt;
    out.x[k] = xm;
    out.v[k] = c.K(0, 0) * (detail::sample(f0, next.t, xm) - dpdx) + c.vol_f * du_dt -
               c.d_n_f * dwx_dt;
  }
  return out;
}

}  // namespace biotplate
