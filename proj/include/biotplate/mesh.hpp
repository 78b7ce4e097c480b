#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "biotplate/core.hpp"

namespace biotplate {

enum class Phase : int { solid = 0, fluid = 1 };

/*! Tags for mesh boundary/interface edges. Cell meshes use left/right/bottom/top;
 *  layer meshes reuse the same enum with left/right meaning x1 = a / x1 = b and
 *  bottom/top meaning x2 = -eps / x2 = +eps. */
enum class EdgeTag : int { left = 0, right = 1, bottom = 2, top = 3, interface = 4 };

struct MeshEdge {
  int a, b;        // endpoint node ids, a < b
  int tri[2];      // adjacent triangles (-1 if none)
};

struct TaggedEdge {
  int edge;        // index into edges
  EdgeTag tag;
  int inside_tri;  // adjacent triangle on the domain side (solid side for interface)
};

/*! Conforming triangle mesh of a rectangle with solid/fluid subdomain tags.
 *  Triangles are CCW. Connectivity (edges, boundary, interface) is built once
 *  via finalize(). */
struct Mesh2D {
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 3>> tris;
  std::vector<Phase> tri_phase;

  // Derived connectivity (finalize()):
  std::vector<MeshEdge> edges;
  std::vector<std::array<int, 3>> tri_edges;  // edge k is opposite... no: edge k joins local vertices k,(k+1)%3
  std::vector<TaggedEdge> boundary;           // edges with exactly one adjacent triangle
  std::vector<TaggedEdge> interface;          // fluid/solid edges, inside_tri = solid neighbor

  double xmin = 0, xmax = 1, ymin = -1, ymax = 1;  // bounding rectangle used for tagging
  double target_h = 0;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_tris() const { return static_cast<int>(tris.size()); }

  double tri_area(int t) const {
    const auto& tr = tris[t];
    Eigen::Vector2d u = nodes[tr[1]] - nodes[tr[0]];
    Eigen::Vector2d v = nodes[tr[2]] - nodes[tr[0]];
    return 0.5 * (u.x() * v.y() - u.y() * v.x());
  }

  double phase_area(Phase p) const {
    double s = 0;
    for (int t = 0; t < n_tris(); ++t)
      if (tri_phase[t] == p) s += tri_area(t);
    return s;
  }

  /*! Outward unit normal of triangle t across its local edge le. */
  Eigen::Vector2d edge_outward_normal(int t, int le) const {
    const auto& tr = tris[t];
    Eigen::Vector2d p = nodes[tr[le]];
    Eigen::Vector2d q = nodes[tr[(le + 1) % 3]];
    Eigen::Vector2d tv = q - p;
    Eigen::Vector2d nv(tv.y(), -tv.x());  // right-hand normal = outward for CCW triangles
    return nv.normalized();
  }

  void finalize() {
    for (int t = 0; t < n_tris(); ++t) {
      if (tri_area(t) <= 0.0)
        throw input_error("meshing-failed: non-positive triangle area at tri " + std::to_string(t));
    }
    edges.clear();
    tri_edges.assign(tris.size(), {-1, -1, -1});
    std::map<std::pair<int, int>, int> lookup;
    for (int t = 0; t < n_tris(); ++t) {
      for (int k = 0; k < 3; ++k) {
        int a = tris[t][k], b = tris[t][(k + 1) % 3];
        std::pair<int, int> key(std::min(a, b), std::max(a, b));
        auto it = lookup.find(key);
        int e;
        if (it == lookup.end()) {
          e = static_cast<int>(edges.size());
          edges.push_back({key.first, key.second, {t, -1}});
          lookup.emplace(key, e);
        } else {
          e = it->second;
          if (edges[e].tri[1] != -1)
            throw input_error("meshing-failed: edge shared by more than two triangles");
          edges[e].tri[1] = t;
        }
        tri_edges[t][k] = e;
      }
    }
    boundary.clear();
    interface.clear();
    const double tol = 1e-12 * std::max(xmax - xmin, ymax - ymin);
    for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
      const auto& ed = edges[e];
      if (ed.tri[1] == -1) {
        const Eigen::Vector2d& pa = nodes[ed.a];
        const Eigen::Vector2d& pb = nodes[ed.b];
        EdgeTag tag;
        if (std::abs(pa.x() - xmin) < tol && std::abs(pb.x() - xmin) < tol)
          tag = EdgeTag::left;
        else if (std::abs(pa.x() - xmax) < tol && std::abs(pb.x() - xmax) < tol)
          tag = EdgeTag::right;
        else if (std::abs(pa.y() - ymin) < tol && std::abs(pb.y() - ymin) < tol)
          tag = EdgeTag::bottom;
        else if (std::abs(pa.y() - ymax) < tol && std::abs(pb.y() - ymax) < tol)
          tag = EdgeTag::top;
        else
          throw input_error("meshing-failed: boundary edge not on the bounding rectangle");
        boundary.push_back({e, tag, ed.tri[0]});
      } else if (tri_phase[ed.tri[0]] != tri_phase[ed.tri[1]]) {
        int solid_tri = tri_phase[ed.tri[0]] == Phase::solid ? ed.tri[0] : ed.tri[1];
        interface.push_back({e, EdgeTag::interface, solid_tri});
      }
    }
  }

  /*! Unit normal of interface entry k pointing from solid into fluid, with the
   *  edge length. */
  std::pair<Eigen::Vector2d, double> interface_normal(const TaggedEdge& te) const {
    const auto& ed = edges[te.edge];
    const auto& tr = tris[te.inside_tri];
    int le = -1;
    for (int k = 0; k < 3; ++k)
      if (tri_edges[te.inside_tri][k] == te.edge) le = k;
    Eigen::Vector2d nv = edge_outward_normal(te.inside_tri, le);
    double len = (nodes[ed.b] - nodes[ed.a]).norm();
    return {nv, len};
  }

  double min_angle_deg() const {
    double worst = 180.0;
    for (int t = 0; t < n_tris(); ++t) {
      const auto& tr = tris[t];
      for (int k = 0; k < 3; ++k) {
        Eigen::Vector2d u = nodes[tr[(k + 1) % 3]] - nodes[tr[k]];
        Eigen::Vector2d v = nodes[tr[(k + 2) % 3]] - nodes[tr[k]];
        double ang = std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0));
        worst = std::min(worst, ang * 180.0 / M_PI);
      }
    }
    return worst;
  }
};

struct MeshQualityReport {
  int n_nodes = 0, n_tris = 0, n_fluid_tris = 0, n_solid_tris = 0;
  double min_angle_deg = 0;
  double area_fluid = 0, area_solid = 0;
  double max_min_area_ratio = 0;
  double h_max = 0;  // longest edge
};

inline MeshQualityReport mesh_quality_report(const Mesh2D& m) {
  MeshQualityReport r;
  r.n_nodes = m.n_nodes();
  r.n_tris = m.n_tris();
  double amin = 1e300, amax = 0;
  for (int t = 0; t < m.n_tris(); ++t) {
    double a = m.tri_area(t);
    amin = std::min(amin, a);
    amax = std::max(amax, a);
    if (m.tri_phase[t] == Phase::fluid)
      ++r.n_fluid_tris;
    else
      ++r.n_solid_tris;
  }
  r.min_angle_deg = m.min_angle_deg();
  r.area_fluid = m.phase_area(Phase::fluid);
  r.area_solid = m.phase_area(Phase::solid);
  r.max_min_area_ratio = amax / amin;
  for (const auto& e : m.edges)
    r.h_max = std::max(r.h_max, (m.nodes[e.a] - m.nodes[e.b]).norm());
  return r;
}

}  // namespace biotplate
