#pragma once

/*! Orchestration of the full upscaling pipeline as runnable commands:
 *  geometry -> cell problems -> effective coefficients -> macro plate run ->
 *  eps-resolved micro runs -> scale comparison, plus the invariant-check
 *  suite. Every command persists its outputs (JSON for field dumps and
 *  reports, RFC-4180-style CSV with '.' decimals for time series and tables)
 *  under one output directory and records them in a manifest with content
 *  hashes, so re-running a config reproduces identical data bytes. */

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "biotplate/cell_mesh.hpp"
#include "biotplate/cell_problems.hpp"
#include "biotplate/config.hpp"
#include "biotplate/effective_tensors.hpp"
#include "biotplate/forcing.hpp"
#include "biotplate/galerkin_dae.hpp"
#include "biotplate/layer_mesh.hpp"
#include "biotplate/macro_plate.hpp"
#include "biotplate/micro_fsi.hpp"
#include "biotplate/two_scale.hpp"

namespace biotplate {

inline constexpr const char* kArtifactVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Formatting, hashing and file helpers
// ---------------------------------------------------------------------------

namespace io {

/*! Shortest exact decimal form of a double ('.' decimal point, no locale). */
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline void append_csv_row(std::string& csv, const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) csv += ',';
    csv += cells[i];
  }
  csv += '\n';
}

}  // namespace io

// ---------------------------------------------------------------------------
// Mesh and field JSON dumps
// ---------------------------------------------------------------------------

/*! Mesh export: {nodes, triangles (with phase tag), periodic_pairs,
 *  boundary_edges (with side tag)} — the shared field-dump container. */
inline Json mesh_to_json(const Mesh2D& m, const std::vector<std::pair<int, int>>* periodic) {
  Json nodes = Json::array();
  for (const Eigen::Vector2d& p : m.nodes) nodes.push_back(Json::array({p.x(), p.y()}));
  Json tris = Json::array();
  for (int t = 0; t < m.n_tris(); ++t)
    tris.push_back(Json::array({m.tris[static_cast<size_t>(t)][0], m.tris[static_cast<size_t>(t)][1],
                                m.tris[static_cast<size_t>(t)][2],
                                static_cast<int>(m.tri_phase[static_cast<size_t>(t)])}));
  Json pp = Json::array();
  if (periodic)
    for (const auto& [a, b] : *periodic) pp.push_back(Json::array({a, b}));
  Json be = Json::array();
  for (const TaggedEdge& te : m.boundary) {
    const MeshEdge& e = m.edges[static_cast<size_t>(te.edge)];
    be.push_back(Json::array({e.a, e.b, static_cast<int>(te.tag)}));
  }
  Json j;
  j["nodes"] = std::move(nodes);
  j["triangles"] = std::move(tris);
  j["periodic_pairs"] = std::move(pp);
  j["boundary_edges"] = std::move(be);
  return j;
}

inline std::string mesh_hash_hex(const Mesh2D& m, const std::vector<std::pair<int, int>>* periodic) {
  return hex64(fnv1a(mesh_to_json(m, periodic).dump()));
}

inline Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

// ---------------------------------------------------------------------------
// Artifact writing and the run manifest
// ---------------------------------------------------------------------------

struct OutputRecord {
  std::string path;  // relative to the output directory
  std::string hash;  // fnv1a of the bytes written
};

struct StageRecord {
  std::string name;
  bool pass = true;
  double wall_ms = 0;
  std::vector<OutputRecord> outputs;
};

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

/*! Writes files under the output directory and tracks them for the manifest. */
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::string out_dir) : root_(std::move(out_dir)) {
    require_input(!root_.empty(), "input-error: empty output directory");
    std::filesystem::create_directories(root_);
  }

  const std::filesystem::path& root() const { return root_; }

  void write(StageRecord& stage, const std::string& rel, const std::string& bytes) {
    std::filesystem::path p = root_ / rel;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    require_solver(static_cast<bool>(out), "io-error: cannot open " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    require_solver(static_cast<bool>(out), "io-error: short write to " + p.string());
    stage.outputs.push_back({rel, hex64(fnv1a(bytes))});
  }

  void write_json(StageRecord& stage, const std::string& rel, const Json& j) {
    write(stage, rel, j.dump(2) + "\n");
  }

  /*! Manifest: config hash, artifact version, per-stage outputs with content
   *  hashes, wall clock and pass flag. It is the one file whose bytes are not
   *  reproducible (wall_ms); the hashes it lists are. */
  void manifest(const RunSpec& spec, const std::string& command,
                const std::vector<StageRecord>& stages, bool all_pass) {
    Json j;
    j["artifact_version"] = kArtifactVersion;
    j["command"] = command;
    j["config_hash"] = hex64(fnv1a(spec.canonical.dump()));
    j["pass"] = all_pass;
    Json st = Json::array();
    for (const StageRecord& s : stages) {
      Json e;
      e["name"] = s.name;
      e["pass"] = s.pass;
      e["wall_ms"] = s.wall_ms;
      Json outs = Json::array();
      for (const OutputRecord& o : s.outputs) {
        Json oe;
        oe["path"] = o.path;
        oe["fnv1a"] = o.hash;
        outs.push_back(std::move(oe));
      }
      e["outputs"] = std::move(outs);
      st.push_back(std::move(e));
    }
    j["stages"] = std::move(st);
    StageRecord dummy{"manifest"};
    write(dummy, "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::filesystem::path root_;
};

// ---------------------------------------------------------------------------
// Cell stage
// ---------------------------------------------------------------------------

struct CellStageResult {
  std::shared_ptr<const PeriodicCellMesh> mesh;
  CellSolutionSet cells;
  EffectiveCoefficients coeffs;
  CellVerifyReport report;
  std::string mesh_hash;
};

inline CellStageResult compute_cell_stage(const RunSpec& spec) {
  CellStageResult r;
  r.mesh = std::make_shared<const PeriodicCellMesh>(
      generate_cell_mesh(spec.geometry.make(), spec.geometry.h_cell));
  r.mesh_hash = mesh_hash_hex(*r.mesh, &r.mesh->periodic_pairs);
  r.cells = solve_all_cells(r.mesh, spec.material);
  r.coeffs = assemble_effective_coefficients(r.cells);
  r.report = verify_analytic_cells(r.cells);
  return r;
}

inline Json coefficients_to_json(const EffectiveCoefficients& c, const RunSpec& spec,
                                 const std::string& mesh_hash) {
  Json j;
  j["a_star"] = c.a_star;
  j["b_star"] = c.b_star;
  j["c_star"] = c.c_star;
  j["a_star_per_solid_area"] = c.a_star_per_solid_area;
  j["b_star_per_solid_area"] = c.b_star_per_solid_area;
  j["c_star_per_solid_area"] = c.c_star_per_solid_area;
  j["B1"] = c.B1;
  j["B2"] = c.B2;
  j["alpha_h"] = c.alpha_h;
  j["K"] = Json::array({Json::array({c.K(0, 0), c.K(0, 1)}), Json::array({c.K(1, 0), c.K(1, 1)})});
  j["d_n_f"] = c.d_n_f;
  j["d_n_s"] = c.d_n_s;
  j["vol_f"] = c.vol_f;
  j["vol_s"] = c.vol_s;
  j["percolating"] = c.percolating;
  j["degenerate_interface"] = c.degenerate_interface;
  j["duality_gap_B1"] = c.duality_gap_B1;
  j["duality_gap_B2"] = c.duality_gap_B2;
  j["alpha_energy_gap"] = c.alpha_energy_gap;
  Json prov;
  prov["geometry"] = spec.geometry.family;
  prov["h"] = spec.geometry.h_cell;
  const Eigen::Matrix3d& A = spec.material.voigt();
  prov["A"] = Json::array({Json::array({A(0, 0), A(0, 1), A(0, 2)}),
                           Json::array({A(1, 0), A(1, 1), A(1, 2)}),
                           Json::array({A(2, 0), A(2, 1), A(2, 2)})});
  prov["mesh_hash"] = mesh_hash;
  j["provenance"] = std::move(prov);
  return j;
}

inline EffectiveCoefficients coefficients_from_json(const Json& j) {
  auto num = [&](const char* k) {
    require_input(j.contains(k) && j.at(k).is_number(),
                  std::string("coefficients-file: missing numeric field ") + k);
    return j.at(k).get<double>();
  };
  auto flag = [&](const char* k) {
    require_input(j.contains(k) && j.at(k).is_boolean(),
                  std::string("coefficients-file: missing boolean field ") + k);
    return j.at(k).get<bool>();
  };
  EffectiveCoefficients c;
  c.a_star = num("a_star");
  c.b_star = num("b_star");
  c.c_star = num("c_star");
  c.a_star_per_solid_area = num("a_star_per_solid_area");
  c.b_star_per_solid_area = num("b_star_per_solid_area");
  c.c_star_per_solid_area = num("c_star_per_solid_area");
  c.B1 = num("B1");
  c.B2 = num("B2");
  c.alpha_h = num("alpha_h");
  require_input(j.contains("K") && j.at("K").is_array() && j.at("K").size() == 2,
                "coefficients-file: missing 2x2 field K");
  for (int i = 0; i < 2; ++i) {
    const Json& row = j.at("K")[static_cast<size_t>(i)];
    require_input(row.is_array() && row.size() == 2 && row[0].is_number() && row[1].is_number(),
                  "coefficients-file: missing 2x2 field K");
    c.K(i, 0) = row[0].get<double>();
    c.K(i, 1) = row[1].get<double>();
  }
  c.d_n_f = num("d_n_f");
  c.d_n_s = num("d_n_s");
  c.vol_f = num("vol_f");
  c.vol_s = num("vol_s");
  c.percolating = flag("percolating");
  c.degenerate_interface = flag("degenerate_interface");
  c.duality_gap_B1 = num("duality_gap_B1");
  c.duality_gap_B2 = num("duality_gap_B2");
  c.alpha_energy_gap = num("alpha_energy_gap");
  return c;
}

inline Json cell_report_to_json(const CellVerifyReport& r) {
  Json j;
  j["all_pass"] = r.all_pass;
  j["max_error"] = r.max_error;
  Json checks = Json::array();
  for (const AnalyticCheck& c : r.checks) {
    Json e;
    e["name"] = c.name;
    e["error"] = c.error;
    e["tol"] = c.tol;
    e["pass"] = c.pass;
    e["informational"] = c.informational;
    checks.push_back(std::move(e));
  }
  j["checks"] = std::move(checks);
  return j;
}

inline void write_cell_outputs(ArtifactWriter& art, StageRecord& st, const CellStageResult& r,
                               const RunSpec& spec) {
  art.write_json(st, "cell_mesh.json", mesh_to_json(*r.mesh, &r.mesh->periodic_pairs));

  Json sol;
  sol["mesh_hash"] = r.mesh_hash;
  Json fields;
  const char* dir[2] = {"1", "2"};
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) {
      fields[std::string("chi_") + dir[i] + dir[k]] =
          vec_to_json(r.cells.chi[static_cast<size_t>(i)][static_cast<size_t>(k)]);
      fields[std::string("chiB_") + dir[i] + dir[k]] =
          vec_to_json(r.cells.chiB[static_cast<size_t>(i)][static_cast<size_t>(k)]);
    }
  fields["chi0"] = vec_to_json(r.cells.chi0);
  if (r.cells.has_fluid)
    for (int i = 0; i < 2; ++i) {
      fields[std::string("q_") + dir[i]] = vec_to_json(r.cells.q[static_cast<size_t>(i)]);
      fields[std::string("pi_") + dir[i]] = vec_to_json(r.cells.pi[static_cast<size_t>(i)]);
    }
  sol["fields"] = std::move(fields);
  art.write_json(st, "cell_solutions.json", sol);

  art.write_json(st, "coefficients.json", coefficients_to_json(r.coeffs, spec, r.mesh_hash));
  art.write_json(st, "cell_report.json", cell_report_to_json(r.report));
}

// ---------------------------------------------------------------------------
// Macro stage
// ---------------------------------------------------------------------------

struct MacroStageResult {
  SigmaMesh sm;
  std::unique_ptr<MacroSpaces> sp;
  std::unique_ptr<MacroSystem> sys;
  MacroForcing mf;
  MacroTrajectory traj;
};

inline MacroStageResult compute_macro_stage(const RunSpec& spec, const EffectiveCoefficients& ec) {
  require_input(spec.macro.has_value(), "schema-violation: missing field config.macro");
  const MacroConfig& mc = *spec.macro;
  MacroStageResult r;
  r.sm = make_sigma_mesh(mc.a, mc.b, mc.n_nodes);
  r.sp = std::make_unique<MacroSpaces>(
      build_macro_spaces(r.sm, MacroBC{mc.fix_pressure_left, mc.fix_pressure_right}));
  r.sys = std::make_unique<MacroSystem>(ec, *r.sp, mc.dt);
  r.mf = build_macro_forcing(spec.forcing, mc.a, mc.b, ec);
  r.traj = run_macro(*r.sys, r.mf, mc.T);
  return r;
}

inline void write_macro_outputs(ArtifactWriter& art, StageRecord& st, const MacroStageResult& r,
                                const RunSpec& spec) {
  const MacroSpaces& sp = *r.sp;
  const MacroConfig& mc = *spec.macro;

  std::string csv;
  {
    std::vector<std::string> head = {"t"};
    for (int i = 0; i < sp.n_pressure(); ++i) head.push_back("p" + std::to_string(i));
    for (int i = 0; i < sp.n_inplane(); ++i) head.push_back("u" + std::to_string(i));
    for (int i = 0; i < sp.n_deflection(); ++i) head.push_back("w" + std::to_string(i));
    io::append_csv_row(csv, head);
    for (const MacroState& s : r.traj.states) {
      std::vector<std::string> row = {io::fmt(s.t)};
      for (Eigen::Index i = 0; i < s.p.size(); ++i) row.push_back(io::fmt(s.p[i]));
      for (Eigen::Index i = 0; i < s.u.size(); ++i) row.push_back(io::fmt(s.u[i]));
      for (Eigen::Index i = 0; i < s.w.size(); ++i) row.push_back(io::fmt(s.w[i]));
      io::append_csv_row(csv, row);
    }
  }
  art.write(st, "macro_trajectory.csv", csv);

  std::string ecsv;
  io::append_csv_row(ecsv, {"t", "E", "dissipation"});
  for (size_t k = 0; k < r.traj.states.size(); ++k) {
    double d = k == 0 ? 0.0 : r.traj.dissipation[k - 1];
    io::append_csv_row(ecsv, {io::fmt(r.traj.states[k].t), io::fmt(r.traj.energy[k]), io::fmt(d)});
  }
  art.write(st, "macro_energy.csv", ecsv);

  Json meta;
  meta["a"] = mc.a;
  meta["b"] = mc.b;
  meta["n_nodes"] = mc.n_nodes;
  meta["dt"] = mc.dt;
  meta["T"] = mc.T;
  meta["n_steps"] = static_cast<int>(r.traj.states.size()) - 1;
  meta["n_pressure"] = sp.n_pressure();
  meta["n_inplane"] = sp.n_inplane();
  meta["n_deflection"] = sp.n_deflection();
  meta["fix_pressure"] = mc.fix_pressure_left ? "left" : "right";
  art.write_json(st, "macro_meta.json", meta);

  const MacroState& fin = r.traj.states.back();
  double dis = 0;
  for (double d : r.traj.dissipation) dis += d;
  Json sum;
  sum["t"] = fin.t;
  sum["max_abs_p"] = fin.p.size() ? fin.p.cwiseAbs().maxCoeff() : 0.0;
  sum["max_abs_u"] = fin.u.size() ? fin.u.cwiseAbs().maxCoeff() : 0.0;
  sum["max_abs_w"] = fin.w.size() ? fin.w.cwiseAbs().maxCoeff() : 0.0;
  sum["final_energy"] = r.traj.energy.back();
  sum["total_dissipation"] = dis;
  art.write_json(st, "macro_summary.json", sum);
}

// ---------------------------------------------------------------------------
// Micro stage
// ---------------------------------------------------------------------------

struct MicroStageResult {
  double eps = 0;
  std::unique_ptr<LayerMesh> layer;
  std::unique_ptr<MicroSolver> solver;
  MicroTrajectory traj;
  ScalingMonitors mon;
};

inline MicroStageResult compute_micro_stage(const RunSpec& spec,
                                            const std::shared_ptr<const PeriodicCellMesh>& cm,
                                            double eps) {
  require_input(spec.macro.has_value(), "schema-violation: missing field config.macro");
  require_input(spec.micro.has_value(), "schema-violation: missing field config.micro");
  const MacroConfig& mc = *spec.macro;
  const MicroConfig& mic = *spec.micro;
  MicroStageResult r;
  r.eps = eps;
  r.layer = std::make_unique<LayerMesh>(extrude_layer_mesh(*cm, mc.a, mc.b, eps));
  ForcingConfig fc = spec.forcing;
  if (!mic.forcing_override.is_null())
    fc = cfg::parse_forcing(mic.forcing_override, "micro.forcing");
  MicroForcing F = build_micro_forcing(fc, mc.a, mc.b);
  r.solver = std::make_unique<MicroSolver>(*r.layer, spec.material, mic.dt_micro,
                                           mic.fluid_dirichlet_left, mic.fluid_dirichlet_right);
  r.traj = run_micro(*r.solver, F, mc.T);
  r.mon = apriori_monitors(*r.solver, r.traj);
  return r;
}

/*! Snapshot step indices: every step when short, else 11 evenly spaced
 *  (always including the first and last step). */
inline std::vector<size_t> snapshot_steps(size_t n_states) {
  std::vector<size_t> out;
  if (n_states == 0) return out;
  const size_t cap = 11;
  if (n_states <= 2 * cap) {
    for (size_t k = 0; k < n_states; ++k) out.push_back(k);
    return out;
  }
  for (size_t k = 0; k < cap; ++k) out.push_back(k * (n_states - 1) / (cap - 1));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline void write_micro_outputs(ArtifactWriter& art, StageRecord& st, const MicroStageResult& r,
                                const std::string& dir) {
  const MicroSolver& S = *r.solver;

  Json tj;
  tj["epsilon"] = r.eps;
  tj["dt"] = S.dt();
  tj["mesh"] = mesh_to_json(*r.layer, nullptr);
  std::vector<size_t> snaps = snapshot_steps(r.traj.states.size());
  Json steps = Json::array();
  Json shots = Json::array();
  for (size_t k : snaps) {
    steps.push_back(k);
    const MicroState& s = r.traj.states[k];
    Json e;
    e["t"] = s.t;
    Json f;
    f["w"] = vec_to_json(s.w);
    f["u"] = vec_to_json(s.u);
    f["p"] = vec_to_json(s.p);
    e["fields"] = std::move(f);
    shots.push_back(std::move(e));
  }
  tj["snapshot_steps"] = std::move(steps);
  tj["snapshots"] = std::move(shots);
  art.write_json(st, dir + "/trajectory.json", tj);

  std::string csv;
  io::append_csv_row(csv, {"t", "fluid_strain_rate", "solid_strain", "tangential_velocity",
                           "relative_velocity", "pressure_l2", "elastic_energy"});
  for (const MicroState& s : r.traj.states) {
    double fr = std::sqrt(std::max(0.0, S.fluid_strain_sq(s.w)));
    double ss = std::sqrt(std::max(0.0, S.solid_strain_sq(s.u)));
    double tv = S.has_fluid() ? std::sqrt(std::max(0.0, S.tangential_sq(s.w))) : 0.0;
    double rv = 0.0, pl = 0.0;
    if (S.has_fluid()) {
      Vec z = S.interface_relative_velocity(s.w);
      rv = std::sqrt(std::max(0.0, S.relative_velocity_sq(z)));
      pl = std::sqrt(std::max(0.0, s.p.size() ? s.p.dot(S.pressure_mass() * s.p) : 0.0));
    }
    io::append_csv_row(csv, {io::fmt(s.t), io::fmt(fr), io::fmt(ss), io::fmt(tv), io::fmt(rv),
                             io::fmt(pl), io::fmt(S.elastic_energy(s.u))});
  }
  art.write(st, dir + "/norms.csv", csv);
}

/*! Two-scale reconstruction sampled at layer-triangle barycenters and dumped
 *  in the mesh JSON field format (displacement on solid, velocity on fluid,
 *  pressure constant across the thickness). */
inline void write_reconstruction(ArtifactWriter& art, StageRecord& st, const std::string& dir,
                                 const MicroStageResult& r, const CellSolutionSet& cells,
                                 const MacroSpaces& sp, const MacroTrajectory& macro,
                                 const MacroForcing& mf) {
  const LayerMesh& L = *r.layer;
  const size_t n = macro.states.size();
  MicroReconstruction rec(L, cells, sp, macro.states[n - 2], macro.states[n - 1], mf.f0);
  Json disp = Json::array(), vel = Json::array(), pre = Json::array();
  for (int t = 0; t < L.n_tris(); ++t) {
    Eigen::Vector2d u = rec.displacement(t, 1.0 / 3.0, 1.0 / 3.0);
    Eigen::Vector2d v = rec.velocity(t, 1.0 / 3.0, 1.0 / 3.0);
    disp.push_back(u[0]);
    disp.push_back(u[1]);
    vel.push_back(v[0]);
    vel.push_back(v[1]);
    if (L.tri_phase[static_cast<size_t>(t)] == Phase::fluid) {
      ElemGeom g = elem_geom(L, t);
      Eigen::Vector2d x = g.p0 + g.J * Eigen::Vector2d(1.0 / 3.0, 1.0 / 3.0);
      pre.push_back(rec.pressure(x[0]));
    } else {
      pre.push_back(0.0);
    }
  }
  Json j;
  j["epsilon"] = r.eps;
  j["t"] = rec.t();
  j["sampling"] = "triangle-barycenter";
  j["mesh"] = mesh_to_json(L, nullptr);
  Json f;
  f["displacement"] = std::move(disp);
  f["velocity"] = std::move(vel);
  f["pressure"] = std::move(pre);
  j["fields"] = std::move(f);
  art.write_json(st, dir + "/reconstruction.json", j);
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_cell(const RunSpec& spec) {
  ArtifactWriter art(spec.out_dir);
  StageRecord st{"cell"};
  Stopwatch sw;
  CellStageResult r = compute_cell_stage(spec);
  write_cell_outputs(art, st, r, spec);
  st.wall_ms = sw.ms();
  st.pass = r.report.all_pass;
  art.manifest(spec, "cell", {st}, st.pass);

  int gating = 0, gpass = 0;
  for (const AnalyticCheck& c : r.report.checks)
    if (!c.informational) {
      ++gating;
      gpass += c.pass ? 1 : 0;
    }
  std::cout << "[cell] geometry=" << spec.geometry.family << " h=" << io::fmt_short(spec.geometry.h_cell)
            << " fluid_area=" << io::fmt_short(r.coeffs.vol_f) << "\n";
  std::cout << "[cell] a*=" << io::fmt_short(r.coeffs.a_star) << " c*=" << io::fmt_short(r.coeffs.c_star)
            << " alpha=" << io::fmt_short(r.coeffs.alpha_h) << " K11=" << io::fmt_short(r.coeffs.K(0, 0))
            << " B1=" << io::fmt_short(r.coeffs.B1) << "\n";
  std::cout << "[cell] identities: " << gpass << "/" << gating
            << " pass (max gating error " << io::fmt_short(r.report.max_error) << ")\n";
  if (!st.pass) {
    for (const AnalyticCheck& c : r.report.checks)
      if (!c.informational && !c.pass)
        std::cout << "[cell] FAIL " << c.name << " error=" << io::fmt_short(c.error)
                  << " tol=" << io::fmt_short(c.tol) << "\n";
    return 2;
  }
  return 0;
}

inline int cmd_macro(const RunSpec& spec) {
  ArtifactWriter art(spec.out_dir);
  std::filesystem::path cpath = art.root() / "coefficients.json";
  require_input(std::filesystem::exists(cpath),
                "input-error: missing coefficients file: " + cpath.string() +
                    " (run the cell command first)");
  std::ifstream in(cpath);
  Json cj;
  try {
    cj = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw input_error(std::string("coefficients-file: invalid JSON: ") + e.what());
  }
  EffectiveCoefficients ec = coefficients_from_json(cj);

  StageRecord st{"macro"};
  Stopwatch sw;
  MacroStageResult r = compute_macro_stage(spec, ec);
  write_macro_outputs(art, st, r, spec);
  st.wall_ms = sw.ms();
  art.manifest(spec, "macro", {st}, true);

  const MacroState& fin = r.traj.states.back();
  std::cout << "[macro] " << (r.traj.states.size() - 1) << " steps to T=" << io::fmt_short(fin.t)
            << " dt=" << io::fmt_short(spec.macro->dt) << " nodes=" << spec.macro->n_nodes << "\n";
  std::cout << "[macro] final max|p|=" << io::fmt_short(fin.p.size() ? fin.p.cwiseAbs().maxCoeff() : 0.0)
            << " max|w|=" << io::fmt_short(fin.w.size() ? fin.w.cwiseAbs().maxCoeff() : 0.0)
            << " energy=" << io::fmt_short(r.traj.energy.back()) << "\n";
  return 0;
}

/*! Resolve the requested eps values: either the full configured list or the
 *  single --eps value, which must match a configured entry. */
inline std::vector<double> select_eps(const RunSpec& spec, std::optional<double> eps_cli) {
  require_input(spec.micro.has_value(), "schema-violation: missing field config.micro");
  if (!eps_cli) return spec.micro->eps;
  for (double e : spec.micro->eps)
    if (std::abs(e - *eps_cli) <= 1e-12 * (1.0 + e)) return {e};
  throw input_error("input-error: --eps " + io::fmt_short(*eps_cli) +
                    " is not in the configured micro.eps list");
}

inline std::string micro_dir(double eps) { return std::string("micro_") + io::fmt_short(eps); }

inline int cmd_micro(const RunSpec& spec, std::optional<double> eps_cli = std::nullopt) {
  std::vector<double> eps_list = select_eps(spec, eps_cli);
  ArtifactWriter art(spec.out_dir);
  auto cm = std::make_shared<const PeriodicCellMesh>(
      generate_cell_mesh(spec.geometry.make(), spec.geometry.h_cell));

  std::vector<StageRecord> stages;
  std::string mon_csv;
  io::append_csv_row(mon_csv, {"epsilon", "r_v", "r_u", "r_p", "r_w", "r_vi"});
  for (double eps : eps_list) {
    StageRecord st{micro_dir(eps)};
    Stopwatch sw;
    MicroStageResult r = compute_micro_stage(spec, cm, eps);
    write_micro_outputs(art, st, r, micro_dir(eps));
    st.wall_ms = sw.ms();
    io::append_csv_row(mon_csv, {io::fmt(eps), io::fmt(r.mon.r_v), io::fmt(r.mon.r_u),
                                 io::fmt(r.mon.r_p), io::fmt(r.mon.r_w), io::fmt(r.mon.r_vi)});
    std::cout << "[micro] eps=" << io::fmt_short(eps) << " dofs=" << r.solver->n_velocity_dofs()
              << " r_v=" << io::fmt_short(r.mon.r_v) << " r_u=" << io::fmt_short(r.mon.r_u)
              << " r_p=" << io::fmt_short(r.mon.r_p) << "\n";
    stages.push_back(std::move(st));
  }
  StageRecord stm{"monitors"};
  art.write(stm, "micro_monitors.csv", mon_csv);
  stages.push_back(std::move(stm));
  art.manifest(spec, "micro", stages, true);
  return 0;
}

struct CompareRow {
  double eps = 0;
  ScalingMonitors mon;
  TwoScaleErrors err;
};

inline int cmd_compare(const RunSpec& spec) {
  require_input(spec.macro.has_value(), "schema-violation: missing field config.macro");
  require_input(spec.micro.has_value(), "schema-violation: missing field config.micro");
  if (!spec.micro->forcing_override.is_null() && spec.micro->forcing_override != spec.forcing_json)
    throw input_error(
        "inconsistent-data: micro.forcing differs from the shared forcing block; the scale "
        "comparison needs identical forcing on both scales");
  require_input(std::abs(spec.micro->dt_micro - spec.macro->dt) <= 1e-12 * (1.0 + spec.macro->dt),
                "inconsistent-data: micro.dt_micro differs from macro.dt; the scale comparison "
                "pairs states step by step");

  ArtifactWriter art(spec.out_dir);
  std::vector<StageRecord> stages;

  StageRecord stc{"cell"};
  Stopwatch swc;
  CellStageResult cell = compute_cell_stage(spec);
  write_cell_outputs(art, stc, cell, spec);
  stc.wall_ms = swc.ms();
  stc.pass = cell.report.all_pass;
  stages.push_back(stc);
  if (!cell.report.all_pass) {
    art.manifest(spec, "compare", stages, false);
    std::cout << "[compare] FAIL: cell identities failed; coefficients not trustworthy\n";
    return 2;
  }

  StageRecord stm{"macro"};
  Stopwatch swm;
  MacroStageResult mac = compute_macro_stage(spec, cell.coeffs);
  write_macro_outputs(art, stm, mac, spec);
  stm.wall_ms = swm.ms();
  stages.push_back(std::move(stm));

  // one core available: the per-eps runs execute as a sequential loop
  std::vector<CompareRow> rows;
  for (double eps : spec.micro->eps) {
    StageRecord st{micro_dir(eps)};
    Stopwatch sw;
    MicroStageResult r = compute_micro_stage(spec, cell.mesh, eps);
    write_micro_outputs(art, st, r, micro_dir(eps));
    write_reconstruction(art, st, micro_dir(eps), r, cell.cells, *mac.sp, mac.traj, mac.mf);
    CompareRow row;
    row.eps = eps;
    row.mon = r.mon;
    row.err = two_scale_errors(*r.solver, r.traj, cell.cells, *mac.sp, mac.traj, mac.mf);
    st.wall_ms = sw.ms();
    rows.push_back(row);
    stages.push_back(std::move(st));
  }

  StageRecord stt{"compare"};
  std::string csv;
  io::append_csv_row(csv, {"epsilon", "r_v", "r_u", "r_p", "r_w", "e_p", "e_v", "e_u", "e_rec"});
  for (const CompareRow& r : rows)
    io::append_csv_row(csv, {io::fmt(r.eps), io::fmt(r.mon.r_v), io::fmt(r.mon.r_u),
                             io::fmt(r.mon.r_p), io::fmt(r.mon.r_w), io::fmt(r.err.e_p),
                             io::fmt(r.err.e_v), io::fmt(r.err.e_u), io::fmt(r.err.e_rec)});
  art.write(stt, "compare.csv", csv);

  std::cout << "[compare] epsilon      r_v        r_u        r_p        r_w        e_p        "
               "e_v        e_u        e_rec\n";
  for (const CompareRow& r : rows) {
    char line[256];
    std::snprintf(line, sizeof line,
                  "[compare] %-10g %-10.4g %-10.4g %-10.4g %-10.4g %-10.4g %-10.4g %-10.4g %-10.4g",
                  r.eps, r.mon.r_v, r.mon.r_u, r.mon.r_p, r.mon.r_w, r.err.e_p, r.err.e_v,
                  r.err.e_u, r.err.e_rec);
    std::cout << line << "\n";
  }

  // Trend verdict: every error column must shrink by at least the acceptance
  // ratio per eps-halving (a zero-to-zero column passes trivially).
  const double kTrendRatio = 0.75;
  bool trend_checked = rows.size() >= 2;
  bool pass = true;
  double worst = 0;
  Json ratios = Json::array();
  if (trend_checked) {
    for (size_t k = 0; k + 1 < rows.size(); ++k) {
      auto cols = [](const CompareRow& r) {
        return std::array<double, 4>{r.err.e_p, r.err.e_v, r.err.e_u, r.err.e_rec};
      };
      std::array<double, 4> a = cols(rows[k]), b = cols(rows[k + 1]);
      Json rr = Json::array();
      for (int c = 0; c < 4; ++c) {
        double ratio;
        if (a[static_cast<size_t>(c)] <= 1e-14)
          ratio = b[static_cast<size_t>(c)] <= 1e-14 ? 0.0 : 1e30;
        else
          ratio = b[static_cast<size_t>(c)] / a[static_cast<size_t>(c)];
        worst = std::max(worst, ratio);
        pass = pass && ratio <= kTrendRatio;
        rr.push_back(ratio);
      }
      ratios.push_back(std::move(rr));
    }
  }

  Json verdict;
  verdict["trend_checked"] = trend_checked;
  verdict["threshold"] = kTrendRatio;
  verdict["pass"] = pass;
  verdict["worst_ratio"] = worst;
  verdict["ratios"] = std::move(ratios);
  if (!trend_checked)
    verdict["warning"] = "single epsilon: error table emitted, trend check skipped";
  art.write_json(stt, "compare_verdict.json", verdict);
  stt.pass = pass;
  stages.push_back(std::move(stt));
  art.manifest(spec, "compare", stages, pass);

  if (!trend_checked) {
    std::cout << "[compare] WARNING: single epsilon, trend check skipped\n";
    return 0;
  }
  std::cout << "[compare] verdict: " << (pass ? "PASS" : "FAIL") << " (worst error ratio "
            << io::fmt_short(worst) << ", threshold " << io::fmt_short(kTrendRatio) << ")\n";
  return pass ? 0 : 2;
}

// ---------------------------------------------------------------------------
// Invariant-check command
// ---------------------------------------------------------------------------

struct CheckItem {
  std::string suite, name;
  double value = 0;
  double tol = 0;
  bool pass = false;
  bool gating = true;
};

inline const char* kConventionNote =
    "convention note: the plate moduli a*, b*, c* are plain unit-cell integrals over the solid "
    "phase (c* carries the one-third thickness-moment prefactor); the *_per_solid_area variants "
    "divide by the solid cell area. External references may use either normalization, so pick "
    "one convention before comparing coefficient values.";

inline int cmd_check(const RunSpec& spec) {
  ArtifactWriter art(spec.out_dir);
  std::vector<CheckItem> items;
  auto add = [&](const std::string& suite, const std::string& name, double value, double tol,
                 bool pass, bool gating = true) {
    items.push_back({suite, name, value, tol, pass, gating});
  };

  StageRecord st{"check"};
  Stopwatch sw;

  // -- cell identities ------------------------------------------------------
  CellStageResult cell = compute_cell_stage(spec);
  for (const AnalyticCheck& c : cell.report.checks)
    add("cell", c.name, c.error, c.tol, c.informational || c.pass, !c.informational);

  // -- effective-tensor certificates ---------------------------------------
  const EffectiveCoefficients& co = cell.coeffs;
  PositivityReport pos = check_positivity(co);
  add("tensors", "duality_gap_B1", co.duality_gap_B1, 1e-7, co.duality_gap_B1 <= 1e-7);
  add("tensors", "duality_gap_B2", co.duality_gap_B2, 1e-7, co.duality_gap_B2 <= 1e-7);
  add("tensors", "alpha_energy_gap", co.alpha_energy_gap, 1e-8, co.alpha_energy_gap <= 1e-8);
  add("tensors", "positivity_min_eig_block", pos.min_eig_block, 0.0, pos.pass);
  add("tensors", "K_offdiag", std::max(std::abs(co.K(0, 1)), std::abs(co.K(1, 0))), 1e-10,
      std::max(std::abs(co.K(0, 1)), std::abs(co.K(1, 0))) <= 1e-10);
  add("tensors", "K_vertical", std::abs(co.K(1, 1)), 1e-10, std::abs(co.K(1, 1)) <= 1e-10);

  // -- macro assembly and uniqueness surrogate ------------------------------
  if (pos.pass) {
    MacroConfig mc = spec.macro.value_or(MacroConfig{});
    SigmaMesh sm = make_sigma_mesh(mc.a, mc.b, mc.n_nodes);
    MacroSpaces sp =
        build_macro_spaces(sm, MacroBC{mc.fix_pressure_left, mc.fix_pressure_right});
    MacroSystem sys(co, sp, mc.dt);
    double tgap =
        (sys.pressure_to_plate() - sys.plate_to_pressure().transpose()).cwiseAbs().maxCoeff();
    add("macro", "coupling_transpose_gap", tgap, 1e-12, tgap <= 1e-12);
    MacroTrajectory z = run_macro(sys, MacroForcing{}, 5 * mc.dt);
    double zmax = 0;
    for (const MacroState& s : z.states) {
      if (s.p.size()) zmax = std::max(zmax, s.p.cwiseAbs().maxCoeff());
      if (s.u.size()) zmax = std::max(zmax, s.u.cwiseAbs().maxCoeff());
      if (s.w.size()) zmax = std::max(zmax, s.w.cwiseAbs().maxCoeff());
    }
    add("macro", "zero_forcing_zero_state", zmax, 1e-14, zmax <= 1e-14);
  } else {
    add("macro", "skipped_coefficients_not_positive", 1.0, 0.0, false);
  }

  // -- micro stepper on a coarse probe layer --------------------------------
  {
    double hp = std::max(spec.geometry.h_cell,
                         spec.geometry.family == "cavity" ? spec.geometry.r / 2.5 : 0.15);
    auto pm = std::make_shared<const PeriodicCellMesh>(generate_cell_mesh(spec.geometry.make(), hp));
    LayerMesh L = extrude_layer_mesh(*pm, 0.0, 0.5, 0.25);
    MicroSolver S(L, spec.material, 0.05);

    SpMat M = S.system_matrix();
    SpMat D = M - SpMat(M.transpose());
    double sym = 0;
    for (int k = 0; k < D.outerSize(); ++k)
      for (SpMat::InnerIterator it(D, k); it; ++it) sym = std::max(sym, std::abs(it.value()));
    add("micro", "step_matrix_symmetry", sym, 1e-12, sym <= 1e-12);

    MicroState s0 = S.initial_state();
    MicroState z = S.step(s0, MicroForcing{});
    double zw = z.w.size() ? z.w.cwiseAbs().maxCoeff() : 0.0;
    add("micro", "zero_forcing_zero_step", zw, 1e-12, zw <= 1e-12);

    MicroForcing F;
    F.f0 = [](double t, double) { return t; };
    F.g0 = [](double t, double) { return t; };
    MicroState s1 = S.step(s0, F);
    if (S.has_fluid()) {
      double div = (S.divergence_matrix() * s1.w).norm();
      add("micro", "divergence_residual", div, 1e-9, div <= 1e-9);
    }
    double forced = s1.w.size() ? s1.w.cwiseAbs().maxCoeff() : 0.0;
    add("micro", "forced_step_responds", forced, 0.0, forced > 0.0);
  }

  // -- Galerkin reduction identities on a fixed tiny layer ------------------
  {
    auto gm = std::make_shared<const PeriodicCellMesh>(
        generate_cell_mesh(CellGeometry::channel(-0.3, 0.3), 0.25));
    LayerMesh L = extrude_layer_mesh(*gm, 0.0, 0.5, 0.5);
    MicroSolver S(L, spec.material, 0.1);
    GalerkinSystem G = galerkin_reduce(S);
    double gap =
        (G.B + G.C - Eigen::MatrixXd::Identity(G.B.rows(), G.B.cols())).cwiseAbs().maxCoeff();
    add("galerkin", "B_plus_C_identity", gap, 1e-10, gap <= 1e-10);
    double lo = G.D.minCoeff(), hi = G.D.maxCoeff();
    add("galerkin", "eigenvalues_in_unit_interval", std::max(-lo, hi - 1.0), 1e-12,
        lo >= -1e-12 && hi <= 1.0 + 1e-12);
  }

  // -- on-disk coefficients file, when present ------------------------------
  std::filesystem::path cpath = art.root() / "coefficients.json";
  if (std::filesystem::exists(cpath)) {
    std::ifstream in(cpath);
    Json cj;
    try {
      cj = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw input_error(std::string("coefficients-file: invalid JSON: ") + e.what());
    }
    EffectiveCoefficients fc = coefficients_from_json(cj);
    PositivityReport fpos = check_positivity(fc);
    add("coefficients-file", "positivity_min_eig_block", fpos.min_eig_block, 0.0, fpos.pass);
    add("coefficients-file", "duality_gap_B1", fc.duality_gap_B1, 1e-7, fc.duality_gap_B1 <= 1e-7);
    add("coefficients-file", "duality_gap_B2", fc.duality_gap_B2, 1e-7, fc.duality_gap_B2 <= 1e-7);
    double ftol = std::max(spec.tol, 1e-9);
    double drift = 0;
    drift = std::max(drift, std::abs(fc.a_star - co.a_star) / (1.0 + std::abs(co.a_star)));
    drift = std::max(drift, std::abs(fc.c_star - co.c_star) / (1.0 + std::abs(co.c_star)));
    drift = std::max(drift, std::abs(fc.alpha_h - co.alpha_h) / (1.0 + std::abs(co.alpha_h)));
    drift = std::max(drift, std::abs(fc.B1 - co.B1) / (1.0 + std::abs(co.B1)));
    drift = std::max(drift, std::abs(fc.K(0, 0) - co.K(0, 0)) / (1.0 + std::abs(co.K(0, 0))));
    add("coefficients-file", "matches_fresh_solve", drift, ftol, drift <= ftol);
  }

  // -- report ----------------------------------------------------------------
  bool all_pass = true;
  for (const CheckItem& c : items) all_pass = all_pass && (c.pass || !c.gating);
  Json rep;
  rep["all_pass"] = all_pass;
  Json list = Json::array();
  for (const CheckItem& c : items) {
    Json e;
    e["suite"] = c.suite;
    e["name"] = c.name;
    e["value"] = c.value;
    e["tol"] = c.tol;
    e["pass"] = c.pass;
    e["gating"] = c.gating;
    list.push_back(std::move(e));
  }
  rep["checks"] = std::move(list);
  rep["notes"] = Json::array({kConventionNote});
  art.write_json(st, "check_report.json", rep);
  st.wall_ms = sw.ms();
  st.pass = all_pass;
  art.manifest(spec, "check", {st}, all_pass);

  for (const CheckItem& c : items)
    std::cout << "[" << c.suite << "] " << (c.pass ? "PASS" : (c.gating ? "FAIL" : "info")) << " "
              << c.name << " value=" << io::fmt_short(c.value)
              << (c.tol > 0 ? " tol=" + io::fmt_short(c.tol) : "") << "\n";
  std::cout << "[check] " << kConventionNote << "\n";
  std::cout << "[check] " << (all_pass ? "PASS" : "FAIL") << "\n";
  return all_pass ? 0 : 2;
}

}  // namespace biotplate
