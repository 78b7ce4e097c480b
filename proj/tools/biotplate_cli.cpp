/*! Command-line driver for the thin-layer poroelastic upscaling pipeline.
 *
 *  biotplate <cell|macro|micro|compare|check> --config <path>
 *            [--out <dir>] [--eps <val>] [--tol <val>]
 *
 *  Exit codes: 0 success, 2 check failure, 3 input error, 4 solver failure.
 */

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "biotplate/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config;
  std::string out;
  double eps = 0;
  bool has_eps = false;
  double tol = 0;
  bool has_tol = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config, "run configuration JSON")->required();
  cmd->add_option("--out", o.out, "output directory (overrides the config's out_dir)");
  cmd->add_option("--eps", o.eps, "single layer half-thickness to run (must be in micro.eps)")
      ->each([&](const std::string&) { o.has_eps = true; });
  cmd->add_option("--tol", o.tol, "tolerance override for file-consistency checks")
      ->each([&](const std::string&) { o.has_tol = true; });
}

biotplate::RunSpec load(const CommonOpts& o) {
  biotplate::RunSpec spec = biotplate::load_config(o.config);
  if (!o.out.empty()) spec.out_dir = o.out;
  if (o.has_tol) {
    biotplate::require_input(o.tol > 0.0, "input-error: --tol must be > 0");
    spec.tol = o.tol;
  }
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thin-layer poroelastic upscaling pipeline"};
  app.require_subcommand(1);

  CommonOpts oc, om, oi, op, ok;
  CLI::App* c_cell = app.add_subcommand("cell", "solve the periodic cell problems and export coefficients");
  CLI::App* c_macro = app.add_subcommand("macro", "run the homogenized plate/pressure model from a coefficients file");
  CLI::App* c_micro = app.add_subcommand("micro", "run the eps-resolved layer solver and scaling monitors");
  CLI::App* c_compare = app.add_subcommand("compare", "run both scales and tabulate two-scale convergence errors");
  CLI::App* c_check = app.add_subcommand("check", "run the invariant-check suites");
  add_common(c_cell, oc);
  add_common(c_macro, om);
  add_common(c_micro, oi);
  add_common(c_compare, op);
  add_common(c_check, ok);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 3;
  }

  try {
    if (c_cell->parsed()) return biotplate::cmd_cell(load(oc));
    if (c_macro->parsed()) return biotplate::cmd_macro(load(om));
    if (c_micro->parsed()) {
      std::optional<double> eps;
      if (oi.has_eps) eps = oi.eps;
      return biotplate::cmd_micro(load(oi), eps);
    }
    if (c_compare->parsed()) return biotplate::cmd_compare(load(op));
    if (c_check->parsed()) return biotplate::cmd_check(load(ok));
  } catch (const biotplate::check_error& e) {
    std::cerr << "check failure: " << e.what() << "\n";
    return 2;
  } catch (const biotplate::input_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const biotplate::solver_error& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 3;
}
