#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "biotplate/cell_mesh.hpp"
#include "biotplate/cell_problems.hpp"
#include "biotplate/effective_tensors.hpp"

using namespace biotplate;
using Catch::Approx;

namespace {

std::shared_ptr<const PeriodicCellMesh> make_mesh(const CellGeometry& g, double h) {
  return std::make_shared<PeriodicCellMesh>(generate_cell_mesh(g, h));
}

EffectiveCoefficients coeffs_for(const CellGeometry& g, double h, const ElasticityTensor& A) {
  auto set = solve_all_cells(make_mesh(g, h), A);
  return assemble_effective_coefficients(set);
}

}  // namespace

TEST_CASE("full solid cell: closed-form plate coefficients") {
  // lam = mu = 1: a* = 4 mu (lam+mu)/(lam+2 mu) * |Z| = 16/3 and c* = a*/3 = 16/9
  // (the bending strain carries the extra second moment ∫ y2^2 / |Z| = 1/3).
  auto A = ElasticityTensor::isotropic(1.0, 1.0);
  auto c = coeffs_for(CellGeometry::solid(), 0.1, A);

  CHECK(c.a_star == Approx(16.0 / 3.0).epsilon(1e-9));
  CHECK(c.c_star == Approx(16.0 / 9.0).epsilon(1e-9));
  CHECK(std::abs(c.b_star) < 1e-9);  // odd/even parity in y2
  CHECK(c.a_star_per_solid_area == Approx(8.0 / 3.0).epsilon(1e-9));
  CHECK(c.c_star_per_solid_area == Approx(8.0 / 9.0).epsilon(1e-9));

  CHECK(c.degenerate_interface);
  CHECK(std::abs(c.alpha_h) < 1e-10);
  CHECK(std::abs(c.B1) < 1e-10);
  CHECK(std::abs(c.B2) < 1e-10);
  CHECK(c.K.norm() == 0.0);

  CHECK(c.vol_s == Approx(2.0).margin(1e-12));
  CHECK(c.vol_f == Approx(0.0).margin(1e-12));
  CHECK(std::abs(c.d_n_s) < 1e-10);
  CHECK_FALSE(c.percolating);

  auto pr = check_positivity(c);
  CHECK(pr.pass);
  CHECK(pr.min_eig_block > 0.0);
  CHECK(pr.min_eig_K >= -1e-12);

  SECTION("coefficients are mesh-size independent (corrector space is exact)") {
    auto c2 = coeffs_for(CellGeometry::solid(), 0.05, A);
    CHECK(c2.a_star == Approx(c.a_star).epsilon(1e-9));
    CHECK(c2.c_star == Approx(c.c_star).epsilon(1e-9));
  }
}

TEST_CASE("cavity cell: pressure couplings, duality, and moments") {
  auto A = ElasticityTensor::isotropic(1.0, 1.0);

  SECTION("centered cavity: parity and duality identities") {
    auto c = coeffs_for(CellGeometry::cavity({0.5, 0.0}, 0.25), 0.05, A);

    CHECK_FALSE(c.degenerate_interface);
    CHECK(c.alpha_h == Approx(0.214396315942).margin(1e-8));
    CHECK(c.alpha_energy_gap <= 1e-8 * (1.0 + c.alpha_h));

    // Interface representations of the couplings agree with the volume ones.
    CHECK(c.duality_gap_B1 <= 1e-7);
    CHECK(c.duality_gap_B2 <= 1e-7);

    // Geometry symmetric about y2 = 0: bending-membrane coupling and the
    // first-moment pressure coupling vanish by parity.
    CHECK(std::abs(c.b_star) <= 0.01 * c.a_star);
    CHECK(std::abs(c.B2) <= 0.01 * (1.0 + std::abs(c.B1)));
    CHECK(std::abs(c.d_n_f) < 1e-8);

    // Enclosed fluid cannot conduct: permeability is zero but the closure
    // remains positive where it must be.
    CHECK(c.K.norm() < 1e-12);
    CHECK_FALSE(c.percolating);
    auto pr = check_positivity(c);
    CHECK(pr.pass);
    CHECK(pr.min_eig_block > 0.0);
  }

  SECTION("off-center cavity: geometric moments") {
    const double r = 0.25, c2 = 0.2;
    auto c = coeffs_for(CellGeometry::cavity({0.5, c2}, r), 0.05, A);

    const double disk = M_PI * r * r;
    CHECK(c.vol_f == Approx(disk).margin(2e-3));
    CHECK(c.vol_f + c.vol_s == Approx(2.0).margin(1e-12));
    CHECK(c.d_n_f == Approx(c2 * disk).margin(1.5e-3));  // = 0.2 * pi/16
    CHECK(c.d_n_f + c.d_n_s == Approx(0.0).margin(1e-10));

    // Duality must hold for asymmetric geometries too.
    CHECK(c.duality_gap_B1 <= 1e-7);
    CHECK(c.duality_gap_B2 <= 1e-7);
    CHECK(c.alpha_h > 0.0);
  }
}

TEST_CASE("scaling the elastic tensor by 2 transforms each coefficient exactly") {
  // A -> 2A leaves the correctors chi unchanged, scales chi0 by 1/2, and the
  // fluid problem never sees A. With a power-of-two factor every solve is
  // bitwise reproducible, so the covariance laws hold to roundoff.
  auto mesh = make_mesh(CellGeometry::cavity({0.5, 0.0}, 0.25), 0.05);
  auto base = assemble_effective_coefficients(solve_all_cells(mesh, ElasticityTensor::isotropic(1.0, 1.0)));
  auto scaled =
      assemble_effective_coefficients(solve_all_cells(mesh, ElasticityTensor::isotropic(2.0, 2.0)));

  CHECK(scaled.a_star == Approx(2.0 * base.a_star).epsilon(1e-13));
  CHECK(scaled.b_star == Approx(2.0 * base.b_star).margin(1e-13 * std::abs(base.a_star)));
  CHECK(scaled.c_star == Approx(2.0 * base.c_star).epsilon(1e-13));
  CHECK(scaled.B1 == Approx(base.B1).epsilon(1e-13));
  CHECK(scaled.B2 == Approx(base.B2).margin(1e-13 * (1.0 + std::abs(base.B1))));
  CHECK(scaled.alpha_h == Approx(0.5 * base.alpha_h).epsilon(1e-13));
  CHECK((scaled.K - base.K).norm() <= 1e-14);
}

TEST_CASE("channel cell: permeability matches plane Poiseuille flow") {
  const double h0 = 0.3;
  auto A = ElasticityTensor::isotropic(1.0, 1.0);
  auto c = coeffs_for(CellGeometry::channel(-h0, h0), 0.025, A);

  // K_11 = ∫_{-h0}^{h0} D(q_1):D(q_1) with q_1 = (h0^2 - y2^2) e_1, which the
  // quadratic velocity space reproduces exactly: K_11 = 4 h0^3 / 3.
  CHECK(c.K(0, 0) == Approx(4.0 * h0 * h0 * h0 / 3.0).epsilon(1e-9));
  CHECK(std::abs(c.K(0, 1)) < 1e-10);
  CHECK(std::abs(c.K(1, 1)) < 1e-10);
  CHECK(c.percolating);
  CHECK(std::abs(c.d_n_f) < 1e-10);

  auto pr = check_positivity(c);
  CHECK(pr.pass);
  CHECK(pr.min_eig_K >= -1e-12);

  CHECK(c.duality_gap_B1 <= 1e-7);
  CHECK(c.duality_gap_B2 <= 1e-7);
  CHECK(c.alpha_h > 0.0);
}

TEST_CASE("positivity check rejects corrupted coefficient sets") {
  auto A = ElasticityTensor::isotropic(1.0, 1.0);
  auto good = coeffs_for(CellGeometry::solid(), 0.1, A);
  REQUIRE(check_positivity(good).pass);

  SECTION("zeroed bending stiffness breaks the block form") {
    auto bad = good;
    bad.c_star = 0.0;
    auto pr = check_positivity(bad);
    CHECK_FALSE(pr.pass);
    CHECK(pr.min_eig_block <= 0.0);
  }
  SECTION("negative permeability eigenvalue is rejected") {
    auto bad = good;
    bad.K(0, 0) = -1.0;
    CHECK_FALSE(check_positivity(bad).pass);
  }
  SECTION("a percolating geometry must conduct") {
    auto bad = good;
    bad.percolating = true;  // K stays zero
    CHECK_FALSE(check_positivity(bad).pass);
  }
}
