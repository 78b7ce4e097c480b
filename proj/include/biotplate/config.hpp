#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "biotplate/cell_geometry.hpp"
#include "biotplate/core.hpp"
#include "biotplate/elasticity.hpp"
#include "biotplate/forcing.hpp"

namespace biotplate {

using Json = nlohmann::ordered_json;

namespace cfg {

inline void expect_object(const Json& j, const std::string& path) {
  require_input(j.is_object(), "schema-violation: " + path + " must be an object");
}

/*! Reject any key not in the allowed list, naming the offending field path. */
inline void expect_keys(const Json& j, const std::string& path,
                        std::initializer_list<const char*> allowed) {
  expect_object(j, path);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    require_input(ok, "schema-violation: unexpected field " + path + "." + it.key());
  }
}

inline double get_number(const Json& j, const std::string& path, const char* key,
                         std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    require_input(fallback.has_value(), "schema-violation: missing field " + path + "." + key);
    return *fallback;
  }
  require_input(j.at(key).is_number(),
                "schema-violation: " + path + "." + key + " must be a number");
  return j.at(key).get<double>();
}

inline std::string get_string(const Json& j, const std::string& path, const char* key,
                              std::optional<std::string> fallback = std::nullopt) {
  if (!j.contains(key)) {
    require_input(fallback.has_value(), "schema-violation: missing field " + path + "." + key);
    return *fallback;
  }
  require_input(j.at(key).is_string(),
                "schema-violation: " + path + "." + key + " must be a string");
  return j.at(key).get<std::string>();
}

inline int get_int(const Json& j, const std::string& path, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  require_input(j.at(key).is_number_integer(),
                "schema-violation: " + path + "." + key + " must be an integer");
  return j.at(key).get<int>();
}

}  // namespace cfg

struct GeometryConfig {
  std::string family;  // cavity | channel | solid
  double cx = 0.5, cy = 0.0, r = 0.3;
  double lo = -0.3, hi = 0.3;
  double h_cell = 0.05;

  CellGeometry make() const {
    if (family == "cavity") return CellGeometry::cavity({cx, cy}, r);
    if (family == "channel") return CellGeometry::channel(lo, hi);
    return CellGeometry::solid();
  }
};

struct MacroConfig {
  double a = 0.0, b = 1.0;
  int n_nodes = 41;
  bool fix_pressure_left = false, fix_pressure_right = true;
  double T = 1.0;
  double dt = 0.01;
};

struct MicroConfig {
  std::vector<double> eps;
  double dt_micro = 0.01;
  bool fluid_dirichlet_left = true, fluid_dirichlet_right = false;
  Json forcing_override;  // optional stage-local forcing block (null if absent)
};

struct RunSpec {
  GeometryConfig geometry;
  ElasticityTensor material;
  std::optional<MacroConfig> macro;
  ForcingConfig forcing;
  Json forcing_json;  // canonical forcing block for cross-stage comparison
  std::optional<MicroConfig> micro;
  std::string out_dir = "out";
  double tol = 1e-10;
  bool deterministic = true;  // no seeded randomness anywhere; kept for the schema
  Json canonical;  // the validated config document (with defaults applied)
};

namespace cfg {

inline ForcingComponent parse_component(const Json& j, const std::string& path) {
  expect_keys(j, path, {"time", "shape"});
  ForcingComponent c;
  if (j.contains("time")) {
    const Json& t = j.at("time");
    expect_keys(t, path + ".time", {"family", "amplitude", "t_ramp", "t_cut", "period"});
    c.time.family = get_string(t, path + ".time", "family", c.time.family);
    c.time.amplitude = get_number(t, path + ".time", "amplitude", c.time.amplitude);
    c.time.t_ramp = get_number(t, path + ".time", "t_ramp", c.time.t_ramp);
    c.time.t_cut = get_number(t, path + ".time", "t_cut", c.time.t_cut);
    c.time.period = get_number(t, path + ".time", "period", c.time.period);
  }
  if (j.contains("shape")) {
    const Json& s = j.at("shape");
    expect_keys(s, path + ".shape", {"family", "offset"});
    c.shape.family = get_string(s, path + ".shape", "family", c.shape.family);
    c.shape.offset = get_number(s, path + ".shape", "offset", c.shape.offset);
  }
  c.validate();
  return c;
}

inline ForcingConfig parse_forcing(const Json& j, const std::string& path) {
  expect_keys(j, path, {"f0", "g0", "f1n", "g1n"});
  ForcingConfig f;
  if (j.contains("f0")) f.f0 = parse_component(j.at("f0"), path + ".f0");
  if (j.contains("g0")) f.g0 = parse_component(j.at("g0"), path + ".g0");
  if (j.contains("f1n")) f.f1n = parse_component(j.at("f1n"), path + ".f1n");
  if (j.contains("g1n")) f.g1n = parse_component(j.at("g1n"), path + ".g1n");
  return f;
}

}  // namespace cfg

/*! Validate a parsed config document and fill defaults. Throws input_error
 *  with the offending field path on any schema violation. */
inline RunSpec validate_config(const Json& root) {
  using namespace cfg;
  RunSpec spec;
  expect_keys(root, "config",
              {"geometry", "material", "macro", "forcing", "micro", "out_dir", "tol",
               "deterministic"});
  require_input(root.contains("geometry"), "schema-violation: missing field config.geometry");
  require_input(root.contains("material"), "schema-violation: missing field config.material");

  {  // geometry
    const Json& g = root.at("geometry");
    expect_keys(g, "geometry", {"family", "center", "radius", "lo", "hi", "h_cell"});
    spec.geometry.family = get_string(g, "geometry", "family");
    require_input(spec.geometry.family == "cavity" || spec.geometry.family == "channel" ||
                      spec.geometry.family == "solid",
                  "schema-violation: geometry.family must be cavity, channel or solid");
    if (spec.geometry.family == "cavity") {
      if (g.contains("center")) {
        const Json& c = g.at("center");
        require_input(c.is_array() && c.size() == 2 && c[0].is_number() && c[1].is_number(),
                      "schema-violation: geometry.center must be [x, y]");
        spec.geometry.cx = c[0].get<double>();
        spec.geometry.cy = c[1].get<double>();
      }
      spec.geometry.r = get_number(g, "geometry", "radius", spec.geometry.r);
    } else {
      require_input(!g.contains("center") && !g.contains("radius"),
                    "schema-violation: geometry.center/radius only apply to cavity");
    }
    if (spec.geometry.family == "channel") {
      spec.geometry.lo = get_number(g, "geometry", "lo", spec.geometry.lo);
      spec.geometry.hi = get_number(g, "geometry", "hi", spec.geometry.hi);
    } else {
      require_input(!g.contains("lo") && !g.contains("hi"),
                    "schema-violation: geometry.lo/hi only apply to channel");
    }
    spec.geometry.h_cell = get_number(g, "geometry", "h_cell", 0.05);
    require_input(spec.geometry.h_cell > 0.0, "schema-violation: geometry.h_cell must be > 0");
  }

  {  // material
    const Json& m = root.at("material");
    if (m.contains("voigt")) {
      expect_keys(m, "material", {"voigt"});
      const Json& v = m.at("voigt");
      require_input(v.is_array() && v.size() == 3, "schema-violation: material.voigt must be 3x3");
      Eigen::Matrix3d C;
      for (int i = 0; i < 3; ++i) {
        require_input(v[i].is_array() && v[i].size() == 3,
                      "schema-violation: material.voigt must be 3x3");
        for (int j = 0; j < 3; ++j) {
          require_input(v[i][j].is_number(), "schema-violation: material.voigt entries");
          C(i, j) = v[i][j].get<double>();
        }
      }
      spec.material = ElasticityTensor::from_voigt(C);
    } else {
      expect_keys(m, "material", {"lambda", "mu"});
      spec.material = ElasticityTensor::isotropic(get_number(m, "material", "lambda"),
                                                  get_number(m, "material", "mu"));
    }
  }

  if (root.contains("macro")) {
    const Json& ma = root.at("macro");
    expect_keys(ma, "macro", {"a", "b", "n_nodes", "fix_pressure", "T", "dt"});
    MacroConfig mc;
    mc.a = get_number(ma, "macro", "a", 0.0);
    mc.b = get_number(ma, "macro", "b", 1.0);
    mc.n_nodes = get_int(ma, "macro", "n_nodes", 41);
    std::string fp = get_string(ma, "macro", "fix_pressure", std::string("right"));
    require_input(fp == "left" || fp == "right",
                  "schema-violation: macro.fix_pressure must be left or right");
    mc.fix_pressure_left = fp == "left";
    mc.fix_pressure_right = fp == "right";
    mc.T = get_number(ma, "macro", "T");
    require_input(mc.T > 0.0, "schema-violation: macro.T must be > 0");
    mc.dt = get_number(ma, "macro", "dt", mc.T / 100.0);
    require_input(mc.dt > 0.0, "schema-violation: macro.dt must be > 0");
    spec.macro = mc;
  }

  if (root.contains("forcing")) {
    spec.forcing = cfg::parse_forcing(root.at("forcing"), "forcing");
    spec.forcing_json = root.at("forcing");
  }

  if (root.contains("micro")) {
    const Json& mi = root.at("micro");
    cfg::expect_keys(mi, "micro", {"eps", "dt_micro", "fluid_dirichlet", "forcing"});
    MicroConfig mc;
    require_input(mi.contains("eps") && mi.at("eps").is_array() && !mi.at("eps").empty(),
                  "schema-violation: missing field micro.eps (nonempty array)");
    double prev = 0.0;
    for (size_t i = 0; i < mi.at("eps").size(); ++i) {
      const Json& e = mi.at("eps")[i];
      require_input(e.is_number() && e.get<double>() > 0.0,
                    "schema-violation: micro.eps entries must be positive numbers");
      double v = e.get<double>();
      require_input(i == 0 || v < prev,
                    "schema-violation: micro.eps must be strictly decreasing");
      prev = v;
      mc.eps.push_back(v);
    }
    mc.dt_micro = get_number(mi, "micro", "dt_micro", spec.macro ? spec.macro->dt : 0.01);
    require_input(mc.dt_micro > 0.0, "schema-violation: micro.dt_micro must be > 0");
    if (mi.contains("fluid_dirichlet")) {
      const Json& fd = mi.at("fluid_dirichlet");
      require_input(fd.is_array(), "schema-violation: micro.fluid_dirichlet must be an array");
      mc.fluid_dirichlet_left = mc.fluid_dirichlet_right = false;
      for (const Json& s : fd) {
        require_input(s.is_string() && (s == "left" || s == "right"),
                      "schema-violation: micro.fluid_dirichlet entries must be left/right");
        if (s == "left") mc.fluid_dirichlet_left = true;
        if (s == "right") mc.fluid_dirichlet_right = true;
      }
    }
    if (mi.contains("forcing")) {
      cfg::parse_forcing(mi.at("forcing"), "micro.forcing");  // validate only
      mc.forcing_override = mi.at("forcing");
    }
    spec.micro = mc;
  }

  if (root.contains("out_dir")) spec.out_dir = cfg::get_string(root, "config", "out_dir");
  spec.tol = cfg::get_number(root, "config", "tol", 1e-10);
  require_input(spec.tol > 0.0, "schema-violation: tol must be > 0");
  if (root.contains("deterministic")) {
    require_input(root.at("deterministic").is_boolean(),
                  "schema-violation: deterministic must be a boolean");
    spec.deterministic = root.at("deterministic").get<bool>();
  }

  spec.canonical = root;
  return spec;
}

inline RunSpec load_config(const std::string& path) {
  std::ifstream in(path);
  require_input(static_cast<bool>(in), "input-error: file-not-found: " + path);
  Json root;
  try {
    root = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw input_error(std::string("schema-violation: invalid JSON: ") + e.what());
  }
  return validate_config(root);
}

}  // namespace biotplate
