#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "biotplate/elasticity.hpp"
#include "biotplate/mesh.hpp"
#include "biotplate/quadrature.hpp"

namespace biotplate {

enum class ElemType { P1, P2 };

/*! Homogeneous Dirichlet marks per mesh entity (vertices; edge midpoints for P2). */
struct DirichletSet {
  std::vector<char> vertex;
  std::vector<char> edge;
  explicit DirichletSet(const Mesh2D& m)
      : vertex(static_cast<size_t>(m.n_nodes()), 0), edge(m.edges.size(), 0) {}
  void mark_edge_with_nodes(const Mesh2D& m, int e) {
    edge[static_cast<size_t>(e)] = 1;
    vertex[static_cast<size_t>(m.edges[static_cast<size_t>(e)].a)] = 1;
    vertex[static_cast<size_t>(m.edges[static_cast<size_t>(e)].b)] = 1;
  }
};

namespace shapes {

inline void p1(double xi, double eta, double N[3]) {
  N[0] = 1.0 - xi - eta;
  N[1] = xi;
  N[2] = eta;
}
inline void p1_grad(Eigen::Vector2d G[3]) {
  G[0] = {-1, -1};
  G[1] = {1, 0};
  G[2] = {0, 1};
}
inline void p2(double xi, double eta, double N[6]) {
  double l[3] = {1.0 - xi - eta, xi, eta};
  for (int i = 0; i < 3; ++i) N[i] = l[i] * (2.0 * l[i] - 1.0);
  N[3] = 4.0 * l[0] * l[1];
  N[4] = 4.0 * l[1] * l[2];
  N[5] = 4.0 * l[2] * l[0];
}
inline void p2_grad(double xi, double eta, Eigen::Vector2d G[6]) {
  double l[3] = {1.0 - xi - eta, xi, eta};
  Eigen::Vector2d dl[3] = {{-1, -1}, {1, 0}, {0, 1}};
  for (int i = 0; i < 3; ++i) G[i] = (4.0 * l[i] - 1.0) * dl[i];
  G[3] = 4.0 * (l[1] * dl[0] + l[0] * dl[1]);
  G[4] = 4.0 * (l[2] * dl[1] + l[1] * dl[2]);
  G[5] = 4.0 * (l[0] * dl[2] + l[2] * dl[0]);
}

}  // namespace shapes

struct ElemGeom {
  Eigen::Vector2d p0;
  Eigen::Matrix2d J;      // columns p1-p0, p2-p0
  Eigen::Matrix2d JinvT;  // maps reference gradients to physical ones
  double area;
};

inline ElemGeom elem_geom(const Mesh2D& m, int t) {
  ElemGeom g;
  const auto& tr = m.tris[static_cast<size_t>(t)];
  g.p0 = m.nodes[static_cast<size_t>(tr[0])];
  g.J.col(0) = m.nodes[static_cast<size_t>(tr[1])] - g.p0;
  g.J.col(1) = m.nodes[static_cast<size_t>(tr[2])] - g.p0;
  double det = g.J(0, 0) * g.J(1, 1) - g.J(0, 1) * g.J(1, 0);
  g.area = 0.5 * det;
  Eigen::Matrix2d Jinv;
  Jinv << g.J(1, 1), -g.J(0, 1), -g.J(1, 0), g.J(0, 0);
  Jinv /= det;
  g.JinvT = Jinv.transpose();
  return g;
}

/*! Scalar-slot function space: P1 (vertex dofs) or P2 (vertex + edge-midpoint
 *  dofs), optionally restricted to one phase, with periodic lateral
 *  identification (cell meshes) and homogeneous Dirichlet elimination. Vector
 *  fields interleave components per slot. */
class FunctionSpace {
 public:
  using Vec_t = Eigen::VectorXd;

  FunctionSpace(const Mesh2D& mesh, ElemType et, int comps,
                std::optional<Phase> restrict_phase = std::nullopt,
                const std::vector<std::pair<int, int>>* periodic = nullptr,
                const DirichletSet* bc = nullptr)
      : mesh_(&mesh), et_(et), comps_(comps) {
    const int nv = mesh.n_nodes();
    const int ne = static_cast<int>(mesh.edges.size());

    active_tri_.assign(static_cast<size_t>(mesh.n_tris()), 1);
    if (restrict_phase) {
      for (int t = 0; t < mesh.n_tris(); ++t)
        active_tri_[static_cast<size_t>(t)] = mesh.tri_phase[static_cast<size_t>(t)] == *restrict_phase;
    }

    // Canonical entity maps under periodic identification.
    canon_v_.resize(static_cast<size_t>(nv));
    for (int v = 0; v < nv; ++v) canon_v_[static_cast<size_t>(v)] = v;
    canon_e_.resize(static_cast<size_t>(ne));
    for (int e = 0; e < ne; ++e) canon_e_[static_cast<size_t>(e)] = e;
    if (periodic) {
      std::map<int, int> to_master;
      for (const auto& [l, r] : *periodic) to_master[r] = l;
      for (int v = 0; v < nv; ++v) {
        auto it = to_master.find(v);
        if (it != to_master.end()) canon_v_[static_cast<size_t>(v)] = it->second;
      }
      std::map<std::pair<int, int>, int> edge_lookup;
      for (int e = 0; e < ne; ++e)
        edge_lookup[{mesh.edges[static_cast<size_t>(e)].a, mesh.edges[static_cast<size_t>(e)].b}] = e;
      for (int e = 0; e < ne; ++e) {
        int a = mesh.edges[static_cast<size_t>(e)].a, b = mesh.edges[static_cast<size_t>(e)].b;
        int ca = canon_v_[static_cast<size_t>(a)], cb = canon_v_[static_cast<size_t>(b)];
        if (ca == a && cb == b) continue;
        auto it = edge_lookup.find({std::min(ca, cb), std::max(ca, cb)});
        if (it != edge_lookup.end()) canon_e_[static_cast<size_t>(e)] = it->second;
      }
    }

    // Entities touched by active triangles (marked on canonical ids).
    std::vector<char> v_active(static_cast<size_t>(nv), 0), e_active(static_cast<size_t>(ne), 0);
    for (int t = 0; t < mesh.n_tris(); ++t) {
      if (!active_tri_[static_cast<size_t>(t)]) continue;
      for (int k = 0; k < 3; ++k) {
        v_active[static_cast<size_t>(canon_v_[static_cast<size_t>(mesh.tris[static_cast<size_t>(t)][static_cast<size_t>(k)])])] = 1;
        e_active[static_cast<size_t>(canon_e_[static_cast<size_t>(mesh.tri_edges[static_cast<size_t>(t)][static_cast<size_t>(k)])])] = 1;
      }
    }

    auto constrained_v = [&](int v) {
      if (!bc) return false;
      return bc->vertex[static_cast<size_t>(v)] || bc->vertex[static_cast<size_t>(canon_v_[static_cast<size_t>(v)])];
    };
    auto constrained_e = [&](int e) {
      if (!bc) return false;
      return bc->edge[static_cast<size_t>(e)] || bc->edge[static_cast<size_t>(canon_e_[static_cast<size_t>(e)])];
    };

    vslot_.assign(static_cast<size_t>(nv), -1);
    eslot_.assign(static_cast<size_t>(ne), -1);
    n_scalar_ = 0;
    for (int v = 0; v < nv; ++v)
      if (v_active[static_cast<size_t>(v)] && canon_v_[static_cast<size_t>(v)] == v && !constrained_v(v))
        vslot_[static_cast<size_t>(v)] = n_scalar_++;
    if (et_ == ElemType::P2) {
      for (int e = 0; e < ne; ++e)
        if (e_active[static_cast<size_t>(e)] && canon_e_[static_cast<size_t>(e)] == e && !constrained_e(e))
          eslot_[static_cast<size_t>(e)] = n_scalar_++;
    }
  }

  const Mesh2D& mesh() const { return *mesh_; }
  ElemType elem() const { return et_; }
  int comps() const { return comps_; }
  int n_scalar() const { return n_scalar_; }
  int n_dofs() const { return n_scalar_ * comps_; }
  int local_count() const { return et_ == ElemType::P2 ? 6 : 3; }
  bool active(int t) const { return active_tri_[static_cast<size_t>(t)] != 0; }
  int dof(int slot, int c) const { return slot * comps_ + c; }

  /*! Scalar slots of the local entities of triangle t (-1 where constrained). */
  void gather(int t, int out[6]) const {
    const auto& tr = mesh_->tris[static_cast<size_t>(t)];
    for (int k = 0; k < 3; ++k)
      out[k] = vslot_[static_cast<size_t>(canon_v_[static_cast<size_t>(tr[static_cast<size_t>(k)])])];
    if (et_ == ElemType::P2) {
      for (int k = 0; k < 3; ++k)
        out[3 + k] = eslot_[static_cast<size_t>(canon_e_[static_cast<size_t>(mesh_->tri_edges[static_cast<size_t>(t)][static_cast<size_t>(k)])])];
    }
  }

  int vertex_slot(int v) const { return vslot_[static_cast<size_t>(canon_v_[static_cast<size_t>(v)])]; }
  int edge_slot(int e) const { return eslot_[static_cast<size_t>(canon_e_[static_cast<size_t>(e)])]; }

  /*! Nodal interpolation of a smooth function (vertices; edge midpoints for P2). */
  template <class F>
  Vec_t interpolate(F f) const {
    Vec_t c = Vec_t::Zero(n_dofs());
    for (int v = 0; v < mesh_->n_nodes(); ++v) {
      int s = vslot_[static_cast<size_t>(v)];
      if (s < 0 || canon_v_[static_cast<size_t>(v)] != v) continue;
      assign(c, s, f(mesh_->nodes[static_cast<size_t>(v)]));
    }
    if (et_ == ElemType::P2) {
      for (int e = 0; e < static_cast<int>(mesh_->edges.size()); ++e) {
        int s = eslot_[static_cast<size_t>(e)];
        if (s < 0 || canon_e_[static_cast<size_t>(e)] != e) continue;
        Eigen::Vector2d mid = 0.5 * (mesh_->nodes[static_cast<size_t>(mesh_->edges[static_cast<size_t>(e)].a)] +
                                     mesh_->nodes[static_cast<size_t>(mesh_->edges[static_cast<size_t>(e)].b)]);
        assign(c, s, f(mid));
      }
    }
    return c;
  }

 private:
  void assign(Vec_t& c, int slot, double val) const { c[dof(slot, 0)] = val; }
  void assign(Vec_t& c, int slot, const Eigen::Vector2d& val) const {
    for (int k = 0; k < comps_; ++k) c[dof(slot, k)] = val[k];
  }

  const Mesh2D* mesh_;
  ElemType et_;
  int comps_;
  int n_scalar_ = 0;
  std::vector<char> active_tri_;
  std::vector<int> canon_v_, canon_e_, vslot_, eslot_;
};

using Triplets = std::vector<Eigen::Triplet<double>>;

namespace detail {

inline void shape_at(ElemType et, double xi, double eta, double N[6], Eigen::Vector2d G[6], int& n) {
  if (et == ElemType::P2) {
    shapes::p2(xi, eta, N);
    shapes::p2_grad(xi, eta, G);
    n = 6;
  } else {
    shapes::p1(xi, eta, N);
    shapes::p1_grad(G);
    n = 3;
  }
}

}  // namespace detail

/*! ∫ c u·v over the (optionally phase-restricted) active triangles. */
inline void assemble_mass(const FunctionSpace& V, std::optional<Phase> ph, double c, Triplets& out) {
  const Mesh2D& m = V.mesh();
  int slots[6];
  for (int t = 0; t < m.n_tris(); ++t) {
    if (!V.active(t)) continue;
    if (ph && m.tri_phase[static_cast<size_t>(t)] != *ph) continue;
    ElemGeom g = elem_geom(m, t);
    V.gather(t, slots);
    for (const auto& qp : tri_quadrature_order4()) {
      double N[6];
      Eigen::Vector2d Gr[6];
      int n;
      detail::shape_at(V.elem(), qp.x, qp.y, N, Gr, n);
      double w = qp.w * g.area * c;
      for (int i = 0; i < n; ++i) {
        if (slots[i] < 0) continue;
        for (int j = 0; j < n; ++j) {
          if (slots[j] < 0) continue;
          double v = w * N[i] * N[j];
          for (int comp = 0; comp < V.comps(); ++comp)
            out.emplace_back(V.dof(slots[i], comp), V.dof(slots[j], comp), v);
        }
      }
    }
  }
}

/*! ∫ c D(u):D(v) with D the symmetric gradient (vector space). */
inline void assemble_symgrad(const FunctionSpace& V, std::optional<Phase> ph, double c, Triplets& out) {
  const Mesh2D& m = V.mesh();
  int slots[6];
  for (int t = 0; t < m.n_tris(); ++t) {
    if (!V.active(t)) continue;
    if (ph && m.tri_phase[static_cast<size_t>(t)] != *ph) continue;
    ElemGeom g = elem_geom(m, t);
    V.gather(t, slots);
    for (const auto& qp : tri_quadrature_order4()) {
      double N[6];
      Eigen::Vector2d Gr[6];
      int n;
      detail::shape_at(V.elem(), qp.x, qp.y, N, Gr, n);
      double w = qp.w * g.area * c;
      Eigen::Vector2d Gx[6];
      for (int i = 0; i < n; ++i) Gx[i] = g.JinvT * Gr[i];
      // D(phi_i e_a) : D(phi_j e_b) = 1/2 (delta_ab grad_i . grad_j + d_b phi_i d_a phi_j)
      for (int i = 0; i < n; ++i) {
        if (slots[i] < 0) continue;
        for (int j = 0; j < n; ++j) {
          if (slots[j] < 0) continue;
          double gg = Gx[i].dot(Gx[j]);
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
              double val = 0.5 * ((a == b ? gg : 0.0) + Gx[i][b] * Gx[j][a]);
              out.emplace_back(V.dof(slots[i], a), V.dof(slots[j], b), w * val);
            }
        }
      }
    }
  }
}

/*! ∫ c A D(u):D(v) for a constant elasticity tensor (vector space). */
inline void assemble_elastic(const FunctionSpace& V, std::optional<Phase> ph,
                             const ElasticityTensor& A, double c, Triplets& out) {
  const Mesh2D& m = V.mesh();
  int slots[6];
  for (int t = 0; t < m.n_tris(); ++t) {
    if (!V.active(t)) continue;
    if (ph && m.tri_phase[static_cast<size_t>(t)] != *ph) continue;
    ElemGeom g = elem_geom(m, t);
    V.gather(t, slots);
    for (const auto& qp : tri_quadrature_order4()) {
      double N[6];
      Eigen::Vector2d Gr[6];
      int n;
      detail::shape_at(V.elem(), qp.x, qp.y, N, Gr, n);
      double w = qp.w * g.area * c;
      Eigen::Vector2d Gx[6];
      for (int i = 0; i < n; ++i) Gx[i] = g.JinvT * Gr[i];
      for (int j = 0; j < n; ++j) {
        if (slots[j] < 0) continue;
        for (int b = 0; b < 2; ++b) {
          Eigen::Matrix2d Gu = Eigen::Matrix2d::Zero();
          Gu.row(b) = Gx[j].transpose();  // grad of (phi_j e_b)
          Eigen::Matrix2d S = A.apply(Gu);
          for (int i = 0; i < n; ++i) {
            if (slots[i] < 0) continue;
            for (int a = 0; a < 2; ++a) {
              // S : D(phi_i e_a) = S.row(a) . grad phi_i  (S symmetric)
              double val = S.row(a).dot(Gx[i]);
              out.emplace_back(V.dof(slots[i], a), V.dof(slots[j], b), w * val);
            }
          }
        }
      }
    }
  }
}

/*! ∫ c ∇u·∇v componentwise (Laplace form; scalar or vector space). */
inline void assemble_laplace(const FunctionSpace& V, std::optional<Phase> ph, double c, Triplets& out) {
  const Mesh2D& m = V.mesh();
  int slots[6];
  for (int t = 0; t < m.n_tris(); ++t) {
    if (!V.active(t)) continue;
    if (ph && m.tri_phase[static_cast<size_t>(t)] != *ph) continue;
    ElemGeom g = elem_geom(m, t);
    V.gather(t, slots);
    for (const auto& qp : tri_quadrature_order4()) {
      double N[6];
      Eigen::Vector2d Gr[6];
      int n;
      detail::shape_at(V.elem(), qp.x, qp.y, N, Gr, n);
      double w = qp.w * g.area * c;
      Eigen::Vector2d Gx[6];
      for (int i = 0; i < n; ++i) Gx[i] = g.JinvT * Gr[i];
      for (int i = 0; i < n; ++i) {
        if (slots[i] < 0) continue;
        for (int j = 0; j < n; ++j) {
          if (slots[j] < 0) continue;
          double val = w * Gx[i].dot(Gx[j]);
          for (int comp = 0; comp < V.comps(); ++comp)
            out.emplace_back(V.dof(slots[i], comp), V.dof(slots[j], comp), val);
        }
      }
    }
  }
}

/*! ∫ c q (∇·v) over fluid triangles; rows in the scalar space Q, columns in the
 *  vector space V. */
inline void assemble_div_coupling(const FunctionSpace& Q, const FunctionSpace& V, double c,
                                  Triplets& out) {
  const Mesh2D& m = Q.mesh();
  int qs[6], vs[6];
  for (int t = 0; t < m.n_tris(); ++t) {
    if (!Q.active(t) || !V.active(t)) continue;
    ElemGeom g = elem_geom(m, t);
    Q.gather(t, qs);
    V.gather(t, vs);
    for (const auto& qp : tri_quadrature_order4()) {
      double Nq[6], Nv[6];
      Eigen::Vector2d Gq[6], Gv[6];
      int nq, nv;
      detail::shape_at(Q.elem(), qp.x, qp.y, Nq, Gq, nq);
      detail::shape_at(V.elem(), qp.x, qp.y, Nv, Gv, nv);
      double w = qp.w * g.area * c;
      Eigen::Vector2d Gx[6];
      for (int j = 0; j < nv; ++j) Gx[j] = g.JinvT * Gv[j];
      for (int i = 0; i < nq; ++i) {
        if (qs[i] < 0) continue;
        for (int j = 0; j < nv; ++j) {
          if (vs[j] < 0) continue;
          for (int b = 0; b < 2; ++b)
            out.emplace_back(Q.dof(qs[i], 0), V.dof(vs[j], b), w * Nq[i] * Gx[j][b]);
        }
      }
    }
  }
}

/*! Load vector ∫ f(x)·v (f returns Vector2d for vector spaces, double for scalar). */
template <class F>
inline void add_load(const FunctionSpace& V, std::optional<Phase> ph, F f, Eigen::VectorXd& rhs) {
  const Mesh2D& m = V.mesh();
  int slots[6];
  for (int t = 0; t < m.n_tris(); ++t) {
    if (!V.active(t)) continue;
    if (ph && m.tri_phase[static_cast<size_t>(t)] != *ph) continue;
    ElemGeom g = elem_geom(m, t);
    V.gather(t, slots);
    for (const auto& qp : tri_quadrature_order4()) {
      double N[6];
      Eigen::Vector2d Gr[6];
      int n;
      detail::shape_at(V.elem(), qp.x, qp.y, N, Gr, n);
      Eigen::Vector2d x = g.p0 + g.J * Eigen::Vector2d(qp.x, qp.y);
      double w = qp.w * g.area;
      if constexpr (std::is_convertible_v<decltype(f(x)), double>) {
        double fv = f(x);
        for (int i = 0; i < n; ++i)
          if (slots[i] >= 0) rhs[V.dof(slots[i], 0)] += w * fv * N[i];
      } else {
        Eigen::Vector2d fv = f(x);
        for (int i = 0; i < n; ++i)
          if (slots[i] >= 0)
            for (int a = 0; a < V.comps(); ++a) rhs[V.dof(slots[i], a)] += w * fv[a] * N[i];
      }
    }
  }
}

/*! Load vector ∫ wfun(x) (A S) : D(v) for a constant symmetric matrix S. */
template <class W>
inline void add_strain_load(const FunctionSpace& V, std::optional<Phase> ph,
                            const ElasticityTensor& A, const Eigen::Matrix2d& S, W wfun, double c,
                            Eigen::VectorXd& rhs) {
  const Mesh2D& m = V.mesh();
  const Eigen::Matrix2d AS = A.apply(S);
  int slots[6];
  for (int t = 0; t < m.n_tris(); ++t) {
    if (!V.active(t)) continue;
    if (ph && m.tri_phase[static_cast<size_t>(t)] != *ph) continue;
    ElemGeom g = elem_geom(m, t);
    V.gather(t, slots);
    for (const auto& qp : tri_quadrature_order4()) {
      double N[6];
      Eigen::Vector2d Gr[6];
      int n;
      detail::shape_at(V.elem(), qp.x, qp.y, N, Gr, n);
      Eigen::Vector2d x = g.p0 + g.J * Eigen::Vector2d(qp.x, qp.y);
      double w = qp.w * g.area * c * wfun(x);
      for (int i = 0; i < n; ++i) {
        if (slots[i] < 0) continue;
        Eigen::Vector2d Gx = g.JinvT * Gr[i];
        for (int a = 0; a < 2; ++a)
          rhs[V.dof(slots[i], a)] += w * AS.row(a).dot(Gx);  // (A S) : D(phi e_a)
      }
    }
  }
}

/*! Interface load ∫_Γ g(x, ν)·v over the fluid/solid interface; ν points from
 *  solid into fluid. Traces are taken edgewise with a 3-point Gauss rule. */
template <class G>
inline void add_interface_load(const FunctionSpace& V, G gfun, Eigen::VectorXd& rhs) {
  const Mesh2D& m = V.mesh();
  for (const auto& te : m.interface) {
    const auto& ed = m.edges[static_cast<size_t>(te.edge)];
    auto [nu, len] = m.interface_normal(te);
    const Eigen::Vector2d pa = m.nodes[static_cast<size_t>(ed.a)];
    const Eigen::Vector2d pb = m.nodes[static_cast<size_t>(ed.b)];
    int sa = V.vertex_slot(ed.a), sb = V.vertex_slot(ed.b);
    int se = V.elem() == ElemType::P2 ? V.edge_slot(te.edge) : -1;
    for (const auto& gp : gauss3()) {
      double s = 0.5 * (gp.t + 1.0);
      double w = 0.5 * gp.w * len;
      Eigen::Vector2d x = pa + s * (pb - pa);
      Eigen::Vector2d gv = gfun(x, nu);
      double Na, Nb, Ne;
      if (V.elem() == ElemType::P2) {
        Na = (1.0 - s) * (1.0 - 2.0 * s);
        Nb = s * (2.0 * s - 1.0);
        Ne = 4.0 * s * (1.0 - s);
      } else {
        Na = 1.0 - s;
        Nb = s;
        Ne = 0.0;
      }
      for (int a = 0; a < V.comps(); ++a) {
        if (sa >= 0) rhs[V.dof(sa, a)] += w * gv[a] * Na;
        if (sb >= 0) rhs[V.dof(sb, a)] += w * gv[a] * Nb;
        if (se >= 0) rhs[V.dof(se, a)] += w * gv[a] * Ne;
      }
    }
  }
}

/*! Interface functional ∫_Γ g(x, ν, u(x)) for a coefficient field u on V. */
template <class G>
inline double integrate_interface(const FunctionSpace& V, const Eigen::VectorXd& coef, G gfun) {
  const Mesh2D& m = V.mesh();
  double acc = 0;
  for (const auto& te : m.interface) {
    const auto& ed = m.edges[static_cast<size_t>(te.edge)];
    auto [nu, len] = m.interface_normal(te);
    const Eigen::Vector2d pa = m.nodes[static_cast<size_t>(ed.a)];
    const Eigen::Vector2d pb = m.nodes[static_cast<size_t>(ed.b)];
    int sa = V.vertex_slot(ed.a), sb = V.vertex_slot(ed.b);
    int se = V.elem() == ElemType::P2 ? V.edge_slot(te.edge) : -1;
    for (const auto& gp : gauss3()) {
      double s = 0.5 * (gp.t + 1.0);
      double w = 0.5 * gp.w * len;
      Eigen::Vector2d x = pa + s * (pb - pa);
      double Na, Nb, Ne;
      if (V.elem() == ElemType::P2) {
        Na = (1.0 - s) * (1.0 - 2.0 * s);
        Nb = s * (2.0 * s - 1.0);
        Ne = 4.0 * s * (1.0 - s);
      } else {
        Na = 1.0 - s;
        Nb = s;
        Ne = 0.0;
      }
      Eigen::Vector2d u = Eigen::Vector2d::Zero();
      for (int a = 0; a < V.comps(); ++a) {
        double val = 0;
        if (sa >= 0) val += coef[V.dof(sa, a)] * Na;
        if (sb >= 0) val += coef[V.dof(sb, a)] * Nb;
        if (se >= 0) val += coef[V.dof(se, a)] * Ne;
        u[a] = val;
      }
      acc += w * gfun(x, nu, u);
    }
  }
  return acc;
}

/*! Value of a coefficient field at barycentric point (xi, eta) of triangle t. */
inline Eigen::Vector2d eval_vec(const FunctionSpace& V, const Eigen::VectorXd& coef, int t,
                                double xi, double eta) {
  double N[6];
  Eigen::Vector2d Gr[6];
  int n;
  detail::shape_at(V.elem(), xi, eta, N, Gr, n);
  int slots[6];
  V.gather(t, slots);
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    if (slots[i] < 0) continue;
    for (int a = 0; a < V.comps(); ++a) u[a] += coef[V.dof(slots[i], a)] * N[i];
  }
  return u;
}

inline double eval_scalar(const FunctionSpace& V, const Eigen::VectorXd& coef, int t, double xi,
                          double eta) {
  return eval_vec(V, coef, t, xi, eta)[0];
}

/*! Gradient (rows = component, cols = x-derivative) of a field at (xi, eta). */
inline Eigen::Matrix2d eval_grad(const FunctionSpace& V, const Eigen::VectorXd& coef, int t,
                                 double xi, double eta) {
  const Mesh2D& m = V.mesh();
  ElemGeom g = elem_geom(m, t);
  double N[6];
  Eigen::Vector2d Gr[6];
  int n;
  detail::shape_at(V.elem(), xi, eta, N, Gr, n);
  int slots[6];
  V.gather(t, slots);
  Eigen::Matrix2d Gu = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    if (slots[i] < 0) continue;
    Eigen::Vector2d Gx = g.JinvT * Gr[i];
    for (int a = 0; a < V.comps(); ++a) Gu.row(a) += coef[V.dof(slots[i], a)] * Gx.transpose();
  }
  return Gu;
}

/*! Quadrature integral of f(x, u, ∇u) over (optionally phase-restricted) triangles. */
template <class F>
inline double integrate_field(const FunctionSpace& V, std::optional<Phase> ph,
                              const Eigen::VectorXd& coef, F f) {
  const Mesh2D& m = V.mesh();
  double acc = 0;
  for (int t = 0; t < m.n_tris(); ++t) {
    if (!V.active(t)) continue;
    if (ph && m.tri_phase[static_cast<size_t>(t)] != *ph) continue;
    ElemGeom g = elem_geom(m, t);
    for (const auto& qp : tri_quadrature_order4()) {
      Eigen::Vector2d x = g.p0 + g.J * Eigen::Vector2d(qp.x, qp.y);
      Eigen::Vector2d u = eval_vec(V, coef, t, qp.x, qp.y);
      Eigen::Matrix2d Gu = eval_grad(V, coef, t, qp.x, qp.y);
      acc += qp.w * g.area * f(x, u, Gu);
    }
  }
  return acc;
}

/*! Plain quadrature integral of f(x) over the mesh (phase-restricted). */
template <class F>
inline double integrate(const Mesh2D& m, std::optional<Phase> ph, F f) {
  double acc = 0;
  for (int t = 0; t < m.n_tris(); ++t) {
    if (ph && m.tri_phase[static_cast<size_t>(t)] != *ph) continue;
    ElemGeom g = elem_geom(m, t);
    for (const auto& qp : tri_quadrature_order4()) {
      Eigen::Vector2d x = g.p0 + g.J * Eigen::Vector2d(qp.x, qp.y);
      acc += qp.w * g.area * f(x);
    }
  }
  return acc;
}

/*! Connected components of one phase (edge adjacency, optionally glued across
 *  the periodic seam). Returns per-triangle component id (-1 off-phase). */
inline std::vector<int> phase_components(const Mesh2D& m, Phase ph,
                                         const std::vector<std::pair<int, int>>* periodic,
                                         int& n_components) {
  std::vector<int> parent(static_cast<size_t>(m.n_tris()));
  for (int t = 0; t < m.n_tris(); ++t) parent[static_cast<size_t>(t)] = t;
  std::function<int(int)> find = [&](int a) {
    while (parent[static_cast<size_t>(a)] != a) {
      parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
      a = parent[static_cast<size_t>(a)];
    }
    return a;
  };
  auto unite = [&](int a, int b) { parent[static_cast<size_t>(find(a))] = find(b); };

  for (const auto& e : m.edges) {
    if (e.tri[1] < 0) continue;
    if (m.tri_phase[static_cast<size_t>(e.tri[0])] == ph &&
        m.tri_phase[static_cast<size_t>(e.tri[1])] == ph)
      unite(e.tri[0], e.tri[1]);
  }
  if (periodic) {
    std::map<std::pair<int, int>, int> edge_lookup;
    for (int e = 0; e < static_cast<int>(m.edges.size()); ++e)
      edge_lookup[{m.edges[static_cast<size_t>(e)].a, m.edges[static_cast<size_t>(e)].b}] = e;
    std::map<int, int> to_right;
    for (const auto& [l, r] : *periodic) to_right[l] = r;
    for (int e = 0; e < static_cast<int>(m.edges.size()); ++e) {
      const auto& ed = m.edges[static_cast<size_t>(e)];
      auto ia = to_right.find(ed.a), ib = to_right.find(ed.b);
      if (ia == to_right.end() || ib == to_right.end()) continue;
      auto it = edge_lookup.find({std::min(ia->second, ib->second), std::max(ia->second, ib->second)});
      if (it == edge_lookup.end()) continue;
      int t0 = m.edges[static_cast<size_t>(e)].tri[0];
      int t1 = m.edges[static_cast<size_t>(it->second)].tri[0];
      if (m.tri_phase[static_cast<size_t>(t0)] == ph && m.tri_phase[static_cast<size_t>(t1)] == ph)
        unite(t0, t1);
    }
  }

  std::vector<int> comp(static_cast<size_t>(m.n_tris()), -1);
  std::map<int, int> relabel;
  n_components = 0;
  for (int t = 0; t < m.n_tris(); ++t) {
    if (m.tri_phase[static_cast<size_t>(t)] != ph) continue;
    int root = find(t);
    auto it = relabel.find(root);
    if (it == relabel.end()) it = relabel.emplace(root, n_components++).first;
    comp[static_cast<size_t>(t)] = it->second;
  }
  return comp;
}

/*! Mean-value rows: row[c*comps + a][dof] = ∫_{component c} v_a. Used as
 *  Lagrange-multiplier blocks enforcing zero mean per component. */
inline std::vector<Eigen::VectorXd> mean_rows(const FunctionSpace& V, Phase ph,
                                              const std::vector<int>& tri_comp, int n_comp) {
  const Mesh2D& m = V.mesh();
  std::vector<Eigen::VectorXd> rows(static_cast<size_t>(n_comp * V.comps()),
                                    Eigen::VectorXd::Zero(V.n_dofs()));
  int slots[6];
  for (int t = 0; t < m.n_tris(); ++t) {
    if (!V.active(t) || m.tri_phase[static_cast<size_t>(t)] != ph) continue;
    int c = tri_comp[static_cast<size_t>(t)];
    ElemGeom g = elem_geom(m, t);
    V.gather(t, slots);
    for (const auto& qp : tri_quadrature_order4()) {
      double N[6];
      Eigen::Vector2d Gr[6];
      int n;
      detail::shape_at(V.elem(), qp.x, qp.y, N, Gr, n);
      double w = qp.w * g.area;
      for (int i = 0; i < n; ++i) {
        if (slots[i] < 0) continue;
        for (int a = 0; a < V.comps(); ++a)
          rows[static_cast<size_t>(c * V.comps() + a)][V.dof(slots[i], a)] += w * N[i];
      }
    }
  }
  return rows;
}

/*! Assemble an SPD block plus mean-value constraint rows into one symmetric
 *  saddle system [[K, R^T], [R, 0]]. */
inline Eigen::SparseMatrix<double> make_saddle_with_rows(const Triplets& K, int n,
                                                         const std::vector<Eigen::VectorXd>& rows) {
  const int nr = static_cast<int>(rows.size());
  Eigen::SparseMatrix<double> A(n + nr, n + nr);
  Triplets trip = K;
  for (int r = 0; r < nr; ++r) {
    const auto& row = rows[static_cast<size_t>(r)];
    for (int j = 0; j < n; ++j) {
      if (row[j] != 0.0) {
        trip.emplace_back(n + r, j, row[j]);
        trip.emplace_back(j, n + r, row[j]);
      }
    }
  }
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

}  // namespace biotplate
