#include <catch2/catch_amalgamated.hpp>

#include "biotplate/cell_mesh.hpp"
#include "biotplate/fem.hpp"
#include "biotplate/linalg.hpp"

using namespace biotplate;

namespace {
SpMat build(const Triplets& t, int n, int m) {
  SpMat A(n, m);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}
}  // namespace

TEST_CASE("P2 interpolation reproduces quadratics exactly") {
  auto mesh = generate_cell_mesh(CellGeometry::solid(), 0.25);
  FunctionSpace V(mesh, ElemType::P2, 1);
  auto f = [](const Eigen::Vector2d& x) { return x.x() * x.x() + 0.5 * x.x() * x.y() - x.y(); };
  Vec c = V.interpolate(f);
  for (int t = 0; t < mesh.n_tris(); t += 7) {
    ElemGeom g = elem_geom(mesh, t);
    Eigen::Vector2d x = g.p0 + g.J * Eigen::Vector2d(0.31, 0.17);
    REQUIRE(eval_scalar(V, c, t, 0.31, 0.17) == Catch::Approx(f(x)).margin(1e-13));
  }
}

TEST_CASE("mass, Laplace, symmetric gradient and elastic forms match analytic energies") {
  auto mesh = generate_cell_mesh(CellGeometry::solid(), 0.2);
  FunctionSpace V(mesh, ElemType::P2, 2);

  Triplets tm;
  assemble_mass(V, std::nullopt, 1.0, tm);
  SpMat M = build(tm, V.n_dofs(), V.n_dofs());
  Vec ones = V.interpolate([](const Eigen::Vector2d&) { return Eigen::Vector2d(1.0, 1.0); });
  REQUIRE(ones.dot(M * ones) == Catch::Approx(4.0).margin(1e-12));  // 2 comps * |Z|

  // u = (y, x): D(u) has off-diagonal 1 -> D:D = 2, A D(u):D(u) = 2 mu * 2 (isotropic).
  Vec shear = V.interpolate([](const Eigen::Vector2d& x) { return Eigen::Vector2d(x.y(), x.x()); });
  Triplets ts;
  assemble_symgrad(V, std::nullopt, 1.0, ts);
  SpMat S = build(ts, V.n_dofs(), V.n_dofs());
  REQUIRE(shear.dot(S * shear) == Catch::Approx(2.0 * 2.0).margin(1e-12));

  Triplets te;
  assemble_elastic(V, std::nullopt, ElasticityTensor::isotropic(1.0, 1.0), 1.0, te);
  SpMat E = build(te, V.n_dofs(), V.n_dofs());
  REQUIRE(shear.dot(E * shear) == Catch::Approx(2.0 * 2.0 * 2.0).margin(1e-12));

  // u = (x, y): tr D = 2, |D|^2 = 2 -> A D : D = lambda*4 + 2 mu*2 = 8.
  Vec dil = V.interpolate([](const Eigen::Vector2d& x) { return Eigen::Vector2d(x.x(), x.y()); });
  REQUIRE(dil.dot(E * dil) == Catch::Approx(8.0 * 2.0).margin(1e-12));

  Triplets tl;
  assemble_laplace(V, std::nullopt, 1.0, tl);
  SpMat Lap = build(tl, V.n_dofs(), V.n_dofs());
  REQUIRE(shear.dot(Lap * shear) == Catch::Approx(2.0 * 2.0).margin(1e-12));
}

TEST_CASE("divergence coupling against a constant pressure") {
  auto mesh = generate_cell_mesh(CellGeometry::channel(-0.3, 0.3), 0.1);
  FunctionSpace V(mesh, ElemType::P2, 2);
  FunctionSpace Q(mesh, ElemType::P1, 1, Phase::fluid);
  Triplets tb;
  assemble_div_coupling(Q, V, 1.0, tb);
  SpMat B = build(tb, Q.n_dofs(), V.n_dofs());
  Vec dil = V.interpolate([](const Eigen::Vector2d& x) { return Eigen::Vector2d(x.x(), x.y()); });
  Vec q1 = Q.interpolate([](const Eigen::Vector2d&) { return 1.0; });
  REQUIRE(q1.dot(B * dil) == Catch::Approx(2.0 * 0.6).margin(1e-12));  // div = 2 over |Z_f|
}

TEST_CASE("periodic identification merges seam dofs and fields evaluate consistently") {
  auto mesh = generate_cell_mesh(CellGeometry::solid(), 0.25);
  FunctionSpace Vp(mesh, ElemType::P2, 1, std::nullopt, &mesh.periodic_pairs);
  FunctionSpace Vn(mesh, ElemType::P2, 1);
  REQUIRE(Vp.n_scalar() < Vn.n_scalar());
  Vec c = Vp.interpolate(
      [](const Eigen::Vector2d& x) { return std::sin(2.0 * M_PI * x.x()) + x.y(); });
  // Left- and right-seam triangles see the same dof values.
  for (const auto& [l, r] : mesh.periodic_pairs) {
    REQUIRE(Vp.vertex_slot(l) == Vp.vertex_slot(r));
  }
  (void)c;
}

TEST_CASE("Dirichlet marks remove boundary dofs") {
  auto mesh = generate_cell_mesh(CellGeometry::solid(), 0.25);
  DirichletSet bc(mesh);
  for (const auto& be : mesh.boundary)
    if (be.tag == EdgeTag::left || be.tag == EdgeTag::right) bc.mark_edge_with_nodes(mesh, be.edge);
  FunctionSpace V(mesh, ElemType::P2, 2, std::nullopt, nullptr, &bc);
  FunctionSpace Vfree(mesh, ElemType::P2, 2);
  REQUIRE(V.n_dofs() < Vfree.n_dofs());
  int slots[6];
  for (int t = 0; t < mesh.n_tris(); ++t) {
    V.gather(t, slots);
    for (int k = 0; k < 3; ++k) {
      double x = mesh.nodes[mesh.tris[t][k]].x();
      if (x == 0.0 || x == 1.0) REQUIRE(slots[k] == -1);
    }
  }
}

TEST_CASE("solid components and mean rows") {
  auto mesh = generate_cell_mesh(CellGeometry::channel(-0.3, 0.3), 0.1);
  int nc = 0;
  auto comp = phase_components(mesh, Phase::solid, &mesh.periodic_pairs, nc);
  REQUIRE(nc == 2);  // bands above and below the channel stay separate
  int nf = 0;
  phase_components(mesh, Phase::fluid, &mesh.periodic_pairs, nf);
  REQUIRE(nf == 1);

  FunctionSpace V(mesh, ElemType::P2, 2, Phase::solid, &mesh.periodic_pairs);
  auto rows = mean_rows(V, Phase::solid, comp, nc);
  REQUIRE(rows.size() == 4);
  Vec ones = V.interpolate([](const Eigen::Vector2d&) { return Eigen::Vector2d(1.0, 1.0); });
  double total = 0;
  for (const auto& r : rows) total += r.dot(ones);
  REQUIRE(total == Catch::Approx(2.0 * 1.4).margin(1e-12));  // both comps, both bands

  int ncc = 0;
  auto compc = phase_components(generate_cell_mesh(CellGeometry::cavity({0.5, 0.0}, 0.25), 0.05),
                                Phase::solid, nullptr, ncc);
  REQUIRE(ncc == 1);
  (void)compc;
}

TEST_CASE("interface quadrature: length, normals, divergence identity") {
  auto g = CellGeometry::cavity({0.5, 0.0}, 0.25);
  auto mesh = generate_cell_mesh(g, 0.05);
  FunctionSpace V(mesh, ElemType::P2, 2);
  Vec xfield = V.interpolate([](const Eigen::Vector2d& x) { return x; });
  double len = integrate_interface(
      V, xfield, [](const Eigen::Vector2d&, const Eigen::Vector2d&, const Eigen::Vector2d&) {
        return 1.0;
      });
  REQUIRE(std::abs(len - 2.0 * M_PI * 0.25) < 2e-2);
  double xn = integrate_interface(V, xfield,
                                  [](const Eigen::Vector2d&, const Eigen::Vector2d& nu,
                                     const Eigen::Vector2d& u) { return u.dot(nu); });
  REQUIRE(xn == Catch::Approx(-2.0 * mesh.phase_area(Phase::fluid)).margin(1e-10));
}

TEST_CASE("integrate_field evaluates solution-dependent quantities") {
  auto mesh = generate_cell_mesh(CellGeometry::solid(), 0.2);
  FunctionSpace V(mesh, ElemType::P2, 2);
  Vec quad = V.interpolate([](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(x.y() * x.y(), 0.0);
  });
  // int over Z of u_x = int y^2 over (0,1)x(-1,1) = 2/3
  double s = integrate_field(V, std::nullopt, quad,
                             [](const Eigen::Vector2d&, const Eigen::Vector2d& u,
                                const Eigen::Matrix2d&) { return u.x(); });
  REQUIRE(s == Catch::Approx(2.0 / 3.0).margin(1e-12));
  // energy of grad: d(y^2)/dy = 2y -> int 4y^2 = 8/3
  double e = integrate_field(V, std::nullopt, quad,
                             [](const Eigen::Vector2d&, const Eigen::Vector2d&,
                                const Eigen::Matrix2d& G) { return G.squaredNorm(); });
  REQUIRE(e == Catch::Approx(8.0 / 3.0).margin(1e-12));
}
