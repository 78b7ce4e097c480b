#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "biotplate/cell_mesh.hpp"

namespace biotplate {

/*! Mesh of the thin layer (a,b) x (-eps, eps), built by scaling the periodic
 *  cell mesh by eps and replicating it (b-a)/eps times, gluing copies along
 *  the matched lateral node layouts. Every triangle/node keeps provenance to
 *  the generating cell mesh, which makes unfolding of cell-periodic fields
 *  onto the layer exact. */
struct LayerMesh : Mesh2D {
  double eps = 0;
  double sigma_a = 0, sigma_b = 1;
  int n_cells_x = 0;
  PeriodicCellMesh cell;           // unscaled generating mesh
  std::vector<int> tri_cell;       // layer tri -> cell copy index k
  std::vector<int> tri_cell_tri;   // layer tri -> triangle id in `cell`
};

inline LayerMesh extrude_layer_mesh(const PeriodicCellMesh& cell, double sigma_a, double sigma_b,
                                    double eps) {
  require_input(eps > 0 && sigma_b > sigma_a, "layer-invalid: need eps > 0 and a < b");
  double ratio = (sigma_b - sigma_a) / eps;
  int nc = static_cast<int>(std::lround(ratio));
  require_input(std::abs(ratio - nc) < 1e-9 && nc >= 1,
                "layer-invalid: (b-a)/eps must be a positive integer");

  LayerMesh L;
  L.eps = eps;
  L.sigma_a = sigma_a;
  L.sigma_b = sigma_b;
  L.n_cells_x = nc;
  L.cell = cell;
  L.target_h = cell.target_h * eps;

  std::map<int, int> right_of;  // cell left-seam node -> matched right-seam node
  for (const auto& [l, r] : cell.periodic_pairs) right_of[l] = r;

  const int nn = cell.n_nodes();
  std::vector<int> prev_map;                    // cell node -> layer node for copy k-1
  std::vector<int> cur_map(static_cast<size_t>(nn), -1);
  for (int k = 0; k < nc; ++k) {
    std::fill(cur_map.begin(), cur_map.end(), -1);
    if (k > 0) {
      // Glue: left-seam nodes of copy k coincide with right-seam nodes of copy k-1.
      for (const auto& [l, r] : cell.periodic_pairs)
        cur_map[static_cast<size_t>(l)] = prev_map[static_cast<size_t>(r)];
    }
    for (int n = 0; n < nn; ++n) {
      if (cur_map[static_cast<size_t>(n)] >= 0) continue;
      const Eigen::Vector2d& y = cell.nodes[static_cast<size_t>(n)];
      double x1 = sigma_a + eps * (k + y.x());
      if (k == nc - 1 && y.x() == 1.0) x1 = sigma_b;  // exact outer boundary
      cur_map[static_cast<size_t>(n)] = L.n_nodes();
      L.nodes.emplace_back(x1, eps * y.y());
    }
    for (int t = 0; t < cell.n_tris(); ++t) {
      const auto& tr = cell.tris[static_cast<size_t>(t)];
      L.tris.push_back({cur_map[static_cast<size_t>(tr[0])], cur_map[static_cast<size_t>(tr[1])],
                        cur_map[static_cast<size_t>(tr[2])]});
      L.tri_phase.push_back(cell.tri_phase[static_cast<size_t>(t)]);
      L.tri_cell.push_back(k);
      L.tri_cell_tri.push_back(t);
    }
    prev_map = cur_map;
  }
  L.xmin = sigma_a;
  L.xmax = sigma_b;
  L.ymin = -eps;
  L.ymax = eps;
  L.finalize();
  return L;
}

/*! Boundary condition classes for the layer problem. Lateral solid boundary is
 *  always clamped; lateral fluid boundary is velocity-clamped or stress-free
 *  per side; the horizontal faces are traction-free (and always solid, since
 *  admissible geometries keep the fluid clear of y2 = +-1). */
enum class LayerBC : int { dirichlet_solid = 0, dirichlet_fluid = 1, neumann_fluid = 2, stress_free = 3 };

inline std::vector<LayerBC> classify_boundaries(const LayerMesh& L, bool fluid_dirichlet_left,
                                                bool fluid_dirichlet_right) {
  std::vector<LayerBC> out;
  out.reserve(L.boundary.size());
  for (const auto& be : L.boundary) {
    Phase ph = L.tri_phase[static_cast<size_t>(be.inside_tri)];
    switch (be.tag) {
      case EdgeTag::bottom:
      case EdgeTag::top:
        require_input(ph == Phase::solid, "layer-invalid: fluid touches a horizontal face");
        out.push_back(LayerBC::stress_free);
        break;
      case EdgeTag::left:
        out.push_back(ph == Phase::solid ? LayerBC::dirichlet_solid
                       : (fluid_dirichlet_left ? LayerBC::dirichlet_fluid : LayerBC::neumann_fluid));
        break;
      case EdgeTag::right:
        out.push_back(ph == Phase::solid ? LayerBC::dirichlet_solid
                       : (fluid_dirichlet_right ? LayerBC::dirichlet_fluid : LayerBC::neumann_fluid));
        break;
      default:
        throw input_error("layer-invalid: unexpected boundary tag");
    }
  }
  return out;
}

}  // namespace biotplate
