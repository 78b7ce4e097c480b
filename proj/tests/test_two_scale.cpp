#include <biotplate/cell_problems.hpp>
#include <biotplate/effective_tensors.hpp>
#include <biotplate/macro_plate.hpp>
#include <biotplate/micro_fsi.hpp>
#include <biotplate/two_scale.hpp>
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

using namespace biotplate;
using Catch::Approx;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::shared_ptr<const PeriodicCellMesh> cavity_cell(double h = 0.12) {
  return std::make_shared<const PeriodicCellMesh>(
      generate_cell_mesh(CellGeometry::cavity({0.5, 0.0}, 0.3), h));
}

std::shared_ptr<const PeriodicCellMesh> channel_cell(double h = 0.2) {
  return std::make_shared<const PeriodicCellMesh>(
      generate_cell_mesh(CellGeometry::channel(-0.3, 0.3), h));
}

/*! Forcing for the convergence study: smooth in time and zero at rest; the
 *  tangential shape is chosen so the limit membrane strain (and with it the
 *  limit pressure of a sealed-pore layer) vanishes at the right end, where
 *  the macro model pins the pressure. */
MicroForcing study_forcing() {
  auto amp = [](double t) { return 1.0 - std::cos(2.0 * kPi * t); };
  MicroForcing f;
  f.g0 = [=](double t, double x) {
    return amp(t) * (std::cos(kPi * x) - std::sin(2.0 * kPi * x) +
                     (2.0 / kPi - 0.5) * std::sin(kPi * x));
  };
  f.g1n = [=](double t, double x) { return amp(t) * (std::sin(kPi * x) + 0.2); };
  return f;
}

MacroForcing macro_counterpart(const MicroForcing& f, const EffectiveCoefficients& ec) {
  MacroForcing MF;
  MF.f0 = f.f0;
  MF.g0 = f.g0;
  if (f.f1n) {
    double vf = ec.vol_f;
    auto f1 = f.f1n;
    MF.fbar1n = [=](double t, double x) { return vf * f1(t, x); };
  }
  if (f.g1n) {
    double vs = ec.vol_s;
    auto g1 = f.g1n;
    MF.gbar1n = [=](double t, double x) { return vs * g1(t, x); };
  }
  return MF;
}

}  // namespace

TEST_CASE("two-scale pairing: constant field and exact unfolding") {
  auto cm = channel_cell(0.25);

  for (double eps : {0.25, 0.125}) {
    LayerMesh L = extrude_layer_mesh(*cm, 0.0, 1.0, eps);

    // w = 1, phi = 1: (1/eps) |layer| = 2 |midline|
    double pair_one = two_scale_pair(
        L, std::nullopt, [](const Eigen::Vector2d&) { return 1.0; },
        [](double, const Eigen::Vector2d&) { return 1.0; });
    REQUIRE(pair_one == Approx(2.0).margin(1e-10));

    // cell-periodic field, phi = 1: the pairing reproduces the cell integral
    // of psi at any eps because the layer quadrature points unfold onto the
    // cell quadrature points exactly
    auto psi = [](const Eigen::Vector2d& y) {
      return std::exp(std::sin(2.0 * kPi * y[0])) * std::cos(0.5 * kPi * y[1]) + y[1] * y[1];
    };
    for (auto ph : {std::optional<Phase>{}, std::optional<Phase>{Phase::fluid},
                    std::optional<Phase>{Phase::solid}}) {
      double cell_integral = integrate(*cm, ph, psi);
      double pair = integrate_with_cell_coords(
                        L, ph,
                        [&](int, int, const Eigen::Vector2d&, const Eigen::Vector2d& y, double,
                            double) { return psi(y); }) /
                    eps;
      REQUIRE(pair == Approx(cell_integral).margin(1e-10 * (1.0 + std::abs(cell_integral))));
    }

    // phase split: fluid pairing + solid pairing = whole pairing
    auto wfun = [](const Eigen::Vector2d& x) { return 1.0 + x[0] * x[0] - 0.3 * x[1]; };
    auto phif = [](double xb, const Eigen::Vector2d& y) { return std::cos(kPi * xb) + y[1]; };
    double whole = two_scale_pair(L, std::nullopt, wfun, phif);
    double parts = two_scale_pair(L, Phase::fluid, wfun, phif) +
                   two_scale_pair(L, Phase::solid, wfun, phif);
    REQUIRE(whole == Approx(parts).margin(1e-12 * (1.0 + std::abs(whole))));
  }
}

TEST_CASE("micro reconstruction: zero states, validation, pressure profile") {
  auto cm = cavity_cell();
  ElasticityTensor A = ElasticityTensor::isotropic(1.0, 1.0);
  CellSolutionSet cells = solve_all_cells(cm, A);
  LayerMesh L = extrude_layer_mesh(*cm, 0.0, 1.0, 0.25);

  SigmaMesh sm = make_sigma_mesh(0.0, 1.0, 21);
  MacroSpaces sp = build_macro_spaces(sm, MacroBC{});
  MacroSystem M(assemble_effective_coefficients(cells), sp, 0.1);

  MacroState z0 = M.initial_state();
  MacroState z1 = z0;
  z1.t = 0.1;

  SECTION("zero macro states reconstruct zero fields") {
    MicroReconstruction rec(L, cells, sp, z0, z1);
    for (int t : {0, L.n_tris() / 2, L.n_tris() - 1}) {
      REQUIRE(rec.displacement(t, 0.3, 0.3).norm() == 0.0);
      REQUIRE(rec.velocity(t, 0.3, 0.3).norm() == 0.0);
    }
    REQUIRE(rec.pressure(0.5) == 0.0);
  }

  SECTION("validation failures") {
    CellSolutionSet empty;
    REQUIRE_THROWS_AS(MicroReconstruction(L, empty, sp, z0, z1), input_error);

    auto other = cavity_cell(0.09);  // different cell discretization
    CellSolutionSet mismatched = solve_all_cells(other, A);
    REQUIRE_THROWS_AS(MicroReconstruction(L, mismatched, sp, z0, z1), input_error);

    MacroState bad = z1;
    bad.t = z0.t;  // not consecutive
    REQUIRE_THROWS_AS(MicroReconstruction(L, cells, sp, z0, bad), input_error);
  }

  SECTION("reconstructed pressure is constant across the thickness") {
    MacroState s1 = z1;
    s1.p = Vec::LinSpaced(s1.p.size(), 0.2, 1.0);  // nonzero macro pressure
    MicroReconstruction rec(L, cells, sp, z0, s1);
    REQUIRE(rec.pressure(0.4) == Approx(eval_pressure(sp, s1.p, 0.4)));
    REQUIRE(rec.pressure(0.4) != 0.0);
  }
}

TEST_CASE("two-scale errors: trivial zero run and consistency validation") {
  auto cm = cavity_cell();
  ElasticityTensor A = ElasticityTensor::isotropic(1.0, 1.0);
  CellSolutionSet cells = solve_all_cells(cm, A);
  EffectiveCoefficients ec = assemble_effective_coefficients(cells);

  const double dt = 0.05, T = 0.2;
  LayerMesh L = extrude_layer_mesh(*cm, 0.0, 1.0, 0.25);
  MicroSolver S(L, A, dt);
  MicroTrajectory micro = run_micro(S, MicroForcing{}, T);

  SigmaMesh sm = make_sigma_mesh(0.0, 1.0, 21);
  MacroSpaces sp = build_macro_spaces(sm, MacroBC{});
  MacroSystem M(ec, sp, dt);
  MacroTrajectory macro = run_macro(M, MacroForcing{}, T);

  SECTION("zero forcing gives all-zero errors") {
    TwoScaleErrors e = two_scale_errors(S, micro, cells, sp, macro, MacroForcing{});
    REQUIRE(e.e_p == 0.0);
    REQUIRE(e.e_v == 0.0);
    REQUIRE(e.e_u == 0.0);
    REQUIRE(e.e_rec == 0.0);
  }

  SECTION("step-count mismatch is rejected") {
    MacroTrajectory longer = macro;
    longer.states.push_back(longer.states.back());
    REQUIRE_THROWS_AS(two_scale_errors(S, micro, cells, sp, longer, MacroForcing{}), input_error);
  }

  SECTION("time-step mismatch is rejected") {
    MacroSystem M2(ec, sp, dt / 2);
    MacroTrajectory other = run_macro(M2, MacroForcing{}, T / 2);
    REQUIRE(other.states.size() == micro.states.size());
    REQUIRE_THROWS_AS(two_scale_errors(S, micro, cells, sp, other, MacroForcing{}), input_error);
  }

  SECTION("domain mismatch is rejected") {
    SigmaMesh sm2 = make_sigma_mesh(0.0, 2.0, 21);
    MacroSpaces sp2 = build_macro_spaces(sm2, MacroBC{});
    MacroSystem M2(ec, sp2, dt);
    MacroTrajectory other = run_macro(M2, MacroForcing{}, T);
    REQUIRE_THROWS_AS(two_scale_errors(S, micro, cells, sp2, other, MacroForcing{}), input_error);
  }
}

TEST_CASE("sealed-pore layer: pairing and reconstruction errors shrink with eps") {
  auto cm = cavity_cell();
  ElasticityTensor A = ElasticityTensor::isotropic(1.0, 1.0);
  CellSolutionSet cells = solve_all_cells(cm, A);
  EffectiveCoefficients ec = assemble_effective_coefficients(cells);

  MicroForcing mf = study_forcing();
  MacroForcing MF = macro_counterpart(mf, ec);

  const double T = 1.0, dt = T / 100.0;
  SigmaMesh sm = make_sigma_mesh(0.0, 1.0, 41);
  MacroSpaces sp = build_macro_spaces(sm, MacroBC{});
  MacroSystem M(ec, sp, dt);
  MacroTrajectory mac = run_macro(M, MF, T);

  TwoScaleErrors prev{};
  bool first = true;
  for (double eps : {0.25, 0.125}) {
    LayerMesh L = extrude_layer_mesh(*cm, 0.0, 1.0, eps);
    MicroSolver S(L, A, dt);
    MicroTrajectory tr = run_micro(S, mf, T);
    TwoScaleErrors e = two_scale_errors(S, tr, cells, sp, mac, MF);

    REQUIRE(e.e_p > 0.0);
    REQUIRE(e.e_v > 0.0);
    REQUIRE(e.e_u > 0.0);
    REQUIRE(e.e_rec > 0.0);
    if (!first) {
      REQUIRE(e.e_p <= 0.65 * prev.e_p);
      REQUIRE(e.e_v <= 0.65 * prev.e_v);
      REQUIRE(e.e_u <= 0.65 * prev.e_u);
      REQUIRE(e.e_rec <= 0.65 * prev.e_rec);
    }
    prev = e;
    first = false;
  }
  // at eps = 1/8 the pressure pairing is already below a 20% relative error
  REQUIRE(prev.e_p < 0.2);
}
