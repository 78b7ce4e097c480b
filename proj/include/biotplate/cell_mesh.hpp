#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "biotplate/cell_geometry.hpp"
#include "biotplate/mesh.hpp"

namespace biotplate {

/*! Conforming periodic triangulation of the cell Z = (0,1) x (-1,1). Lateral
 *  node layouts on y1 = 0 and y1 = 1 are identical up to translation; the
 *  matched pairs are listed explicitly so function spaces can identify them. */
struct PeriodicCellMesh : Mesh2D {
  std::vector<std::pair<int, int>> periodic_pairs;  // (node at y1=0, node at y1=1)
  CellGeometry geometry;
};

namespace detail {

/*! Horizontal coordinate difference on the periodic strip, reduced to [-1/2, 1/2]. */
inline double wrap1(double t) { return t - std::round(t); }

/*! Structured banded grid: uniform in y1, piecewise-uniform in y2 with exact
 *  grid lines at the band breakpoints. bands = list of (y_lo, y_hi, phase). */
inline PeriodicCellMesh banded_grid(const std::vector<std::tuple<double, double, Phase>>& bands,
                                    double h) {
  PeriodicCellMesh m;
  int Nx = std::max(4, static_cast<int>(std::lround(1.0 / h)));
  double hx = 1.0 / Nx;

  std::vector<double> ylines;
  std::vector<Phase> row_phase;
  ylines.push_back(std::get<0>(bands.front()));
  for (const auto& [lo, hi, ph] : bands) {
    int n = std::max(1, static_cast<int>(std::lround((hi - lo) / h)));
    for (int j = 1; j <= n; ++j) {
      ylines.push_back(lo + (hi - lo) * j / n);
      row_phase.push_back(ph);
    }
    ylines.back() = hi;  // exact breakpoint
  }
  int Ny = static_cast<int>(ylines.size()) - 1;

  auto id = [&](int i, int j) { return j * (Nx + 1) + i; };
  for (int j = 0; j <= Ny; ++j)
    for (int i = 0; i <= Nx; ++i)
      m.nodes.emplace_back(i == Nx ? 1.0 : i * hx, ylines[static_cast<size_t>(j)]);
  for (int j = 0; j < Ny; ++j) {
    for (int i = 0; i < Nx; ++i) {
      int A = id(i, j), B = id(i + 1, j), C = id(i + 1, j + 1), D = id(i, j + 1);
      m.tris.push_back({A, B, C});
      m.tris.push_back({A, C, D});
      m.tri_phase.push_back(row_phase[static_cast<size_t>(j)]);
      m.tri_phase.push_back(row_phase[static_cast<size_t>(j)]);
    }
  }
  for (int j = 0; j <= Ny; ++j) m.periodic_pairs.emplace_back(id(0, j), id(Nx, j));
  m.xmin = 0;
  m.xmax = 1;
  m.ymin = ylines.front();
  m.ymax = ylines.back();
  m.target_h = h;
  return m;
}

/*! Cavity generator: uniform periodic grid, vertices near the circle snapped
 *  onto it, remaining crossed edges cut at the exact circle intersection, and
 *  the crossed triangles subdivided. The disk may straddle the periodic seam;
 *  seam nodes only ever move vertically and in matched pairs so periodicity
 *  stays exact. */
inline PeriodicCellMesh cavity_grid(const CellGeometry& g, double h) {
  const double c1 = g.center.x(), c2 = g.center.y(), r = g.radius;
  int Nx = std::max(4, static_cast<int>(std::lround(1.0 / h)));
  int Ny = std::max(8, static_cast<int>(std::lround(2.0 / h)));
  double hx = 1.0 / Nx, hy = 2.0 / Ny;
  double hmin = std::min(hx, hy);
  require_input(2.5 * hmin <= r,
                "meshing-failed: grid too coarse for cavity radius; need h <= r/2.5");
  require_input(1.0 - (std::abs(c2) + r) >= 2.0 * hy,
                "meshing-failed: cavity too close to y2=+-1 for this h");
  const double snap_tol = 0.30 * hmin;

  PeriodicCellMesh m;
  m.geometry = g;
  m.target_h = h;
  auto id = [&](int i, int j) { return j * (Nx + 1) + i; };
  for (int j = 0; j <= Ny; ++j)
    for (int i = 0; i <= Nx; ++i)
      m.nodes.emplace_back(i == Nx ? 1.0 : i * hx, -1.0 + j * hy);

  auto phi_at = [&](const Eigen::Vector2d& p) {
    return std::hypot(wrap1(p.x() - c1), p.y() - c2) - r;
  };

  // Crossing heights of the circle with the lateral seam (shared by both columns).
  std::vector<double> seam_cross;
  {
    double d1 = wrap1(0.0 - c1);
    if (std::abs(d1) < r) {
      double s = std::sqrt(r * r - d1 * d1);
      seam_cross = {c2 - s, c2 + s};
    }
  }

  // Snap pass. Seam nodes move only vertically onto a seam crossing height;
  // interior nodes project radially onto the circle.
  std::vector<char> on_circle(m.nodes.size(), 0);
  for (int j = 0; j <= Ny; ++j) {
    for (int i = 0; i <= Nx; ++i) {
      Eigen::Vector2d& p = m.nodes[static_cast<size_t>(id(i, j))];
      double phi = phi_at(p);
      if (j == 0 || j == Ny) {
        require_input(std::abs(phi) > snap_tol, "meshing-failed: cavity touches y2=+-1 row");
        continue;
      }
      if (i == 0 || i == Nx) {
        for (double yc : seam_cross) {
          if (std::abs(p.y() - yc) < 0.30 * hy) {
            p.y() = yc;
            on_circle[static_cast<size_t>(id(i, j))] = 1;
          }
        }
        continue;
      }
      if (std::abs(phi) < snap_tol) {
        double dx = wrap1(p.x() - c1), dy = p.y() - c2;
        double rho = std::hypot(dx, dy);
        Eigen::Vector2d q = p + (r / rho - 1.0) * Eigen::Vector2d(dx, dy);
        if (q.x() > 1e-12 && q.x() < 1.0 - 1e-12) {
          p = q;
          on_circle[static_cast<size_t>(id(i, j))] = 1;
        }
      }
    }
  }

  // Initial structured triangulation (fixed BL-TR diagonal).
  std::vector<std::array<int, 3>> tris0;
  for (int j = 0; j < Ny; ++j) {
    for (int i = 0; i < Nx; ++i) {
      int A = id(i, j), B = id(i + 1, j), C = id(i + 1, j + 1), D = id(i, j + 1);
      tris0.push_back({A, B, C});
      tris0.push_back({A, C, D});
    }
  }

  auto phi_node = [&](int n) {
    return on_circle[static_cast<size_t>(n)] ? 0.0 : phi_at(m.nodes[static_cast<size_t>(n)]);
  };

  // Cut pass: insert the circle intersection on every strictly sign-changing edge.
  std::map<std::pair<int, int>, int> cut_node;
  std::map<double, std::pair<int, int>> seam_cut;  // height -> (left node, right node)
  auto edge_key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  for (const auto& tr : tris0) {
    for (int k = 0; k < 3; ++k) {
      int a = tr[static_cast<size_t>(k)], b = tr[static_cast<size_t>((k + 1) % 3)];
      auto key = edge_key(a, b);
      if (cut_node.count(key)) continue;
      double fa = phi_node(a), fb = phi_node(b);
      if (!(fa * fb < 0.0)) continue;
      const Eigen::Vector2d& pa = m.nodes[static_cast<size_t>(a)];
      const Eigen::Vector2d& pb = m.nodes[static_cast<size_t>(b)];
      bool seam0 = pa.x() == 0.0 && pb.x() == 0.0;
      bool seam1 = pa.x() == 1.0 && pb.x() == 1.0;
      if (seam0 || seam1) {
        double ylo = std::min(pa.y(), pb.y()), yhi = std::max(pa.y(), pb.y());
        double yc = 0;
        bool found = false;
        for (double s : seam_cross)
          if (s > ylo && s < yhi) {
            yc = s;
            found = true;
          }
        require_input(found, "meshing-failed: inconsistent seam crossing");
        auto& pairslot = seam_cut[yc];
        int nid = static_cast<int>(m.nodes.size());
        m.nodes.emplace_back(seam0 ? 0.0 : 1.0, yc);
        on_circle.push_back(1);
        (seam0 ? pairslot.first : pairslot.second) = nid + 1;  // store id+1, 0 = unset
        cut_node[key] = nid;
        continue;
      }
      // Quadratic |P(t) - c|^2 = r^2 in the unwrapped frame around the edge.
      double shift = std::round(0.5 * (pa.x() + pb.x()) - c1);
      Eigen::Vector2d A(pa.x() - c1 - shift, pa.y() - c2);
      Eigen::Vector2d B(pb.x() - c1 - shift, pb.y() - c2);
      Eigen::Vector2d d = B - A;
      double qa = d.squaredNorm();
      double qb = 2.0 * A.dot(d);
      double qc = A.squaredNorm() - r * r;
      double disc = std::max(0.0, qb * qb - 4.0 * qa * qc);
      double sq = std::sqrt(disc);
      double t1 = (-qb - sq) / (2.0 * qa), t2 = (-qb + sq) / (2.0 * qa);
      double t = (t1 > 0.0 && t1 < 1.0) ? t1 : t2;
      t = std::clamp(t, 1e-6, 1.0 - 1e-6);
      int nid = static_cast<int>(m.nodes.size());
      m.nodes.push_back(pa + t * (pb - pa));
      on_circle.push_back(1);
      cut_node[key] = nid;
    }
  }

  // Subdivide crossed triangles (one or two cut edges per triangle).
  for (const auto& tr : tris0) {
    int cuts[3];
    int ncut = 0;
    for (int k = 0; k < 3; ++k) {
      auto it = cut_node.find(edge_key(tr[static_cast<size_t>(k)], tr[static_cast<size_t>((k + 1) % 3)]));
      cuts[k] = it == cut_node.end() ? -1 : it->second;
      if (cuts[k] >= 0) ++ncut;
    }
    if (ncut == 0) {
      m.tris.push_back(tr);
    } else if (ncut == 1) {
      int k = cuts[0] >= 0 ? 0 : (cuts[1] >= 0 ? 1 : 2);
      int a = tr[static_cast<size_t>(k)], b = tr[static_cast<size_t>((k + 1) % 3)],
          o = tr[static_cast<size_t>((k + 2) % 3)], mnode = cuts[k];
      m.tris.push_back({a, mnode, o});
      m.tris.push_back({mnode, b, o});
    } else if (ncut == 2) {
      // Rotate so the cut edges are (v0,v1) and (v1,v2); v1 is the shared vertex.
      int k0 = -1;
      for (int k = 0; k < 3; ++k)
        if (cuts[k] >= 0 && cuts[(k + 1) % 3] >= 0) k0 = k;
      require_input(k0 >= 0, "meshing-failed: non-adjacent double cut");
      int a = tr[static_cast<size_t>(k0)], b = tr[static_cast<size_t>((k0 + 1) % 3)],
          c = tr[static_cast<size_t>((k0 + 2) % 3)];
      int m1 = cuts[k0], m2 = cuts[(k0 + 1) % 3];
      m.tris.push_back({m1, b, m2});
      // Split the remaining quad (a, m1, m2, c) along its shorter diagonal.
      double d1 = (m.nodes[static_cast<size_t>(a)] - m.nodes[static_cast<size_t>(m2)]).norm();
      double d2 = (m.nodes[static_cast<size_t>(m1)] - m.nodes[static_cast<size_t>(c)]).norm();
      if (d1 <= d2) {
        m.tris.push_back({a, m1, m2});
        m.tris.push_back({a, m2, c});
      } else {
        m.tris.push_back({a, m1, c});
        m.tris.push_back({m1, m2, c});
      }
    } else {
      throw input_error("meshing-failed: triangle crossed on all three edges; reduce h");
    }
  }

  m.tri_phase.resize(m.tris.size());
  for (size_t t = 0; t < m.tris.size(); ++t) {
    Eigen::Vector2d cen = (m.nodes[static_cast<size_t>(m.tris[t][0])] +
                           m.nodes[static_cast<size_t>(m.tris[t][1])] +
                           m.nodes[static_cast<size_t>(m.tris[t][2])]) /
                          3.0;
    m.tri_phase[t] = phi_at(cen) < 0.0 ? Phase::fluid : Phase::solid;
  }

  // Periodic pairs: original grid rows plus inserted seam crossings.
  for (int j = 0; j <= Ny; ++j) m.periodic_pairs.emplace_back(id(0, j), id(Nx, j));
  for (const auto& [yc, pr] : seam_cut) {
    require_input(pr.first > 0 && pr.second > 0,
                  "meshing-failed: seam crossing inserted on one column only");
    m.periodic_pairs.emplace_back(pr.first - 1, pr.second - 1);
  }
  m.xmin = 0;
  m.xmax = 1;
  m.ymin = -1;
  m.ymax = 1;
  return m;
}

}  // namespace detail

inline PeriodicCellMesh generate_cell_mesh(const CellGeometry& g, double h) {
  require_input(h > 0 && h < 0.5, "meshing-failed: target h must lie in (0, 0.5)");
  g.validate();
  PeriodicCellMesh m;
  switch (g.family) {
    case CellGeometry::Family::channel:
      m = detail::banded_grid({{-1.0, g.h1, Phase::solid},
                               {g.h1, g.h2, Phase::fluid},
                               {g.h2, 1.0, Phase::solid}},
                              h);
      break;
    case CellGeometry::Family::solid:
      m = detail::banded_grid({{-1.0, 1.0, Phase::solid}}, h);
      break;
    case CellGeometry::Family::cavity:
      m = detail::cavity_grid(g, h);
      break;
  }
  m.geometry = g;
  m.target_h = h;
  m.finalize();

  double af = m.phase_area(Phase::fluid), as = m.phase_area(Phase::solid);
  require_input(std::abs(af + as - 2.0) < 1e-10, "meshing-failed: area additivity violated");
  return m;
}

}  // namespace biotplate
