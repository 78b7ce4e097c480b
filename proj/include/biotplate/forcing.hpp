#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "biotplate/core.hpp"
#include "biotplate/effective_tensors.hpp"
#include "biotplate/macro_plate.hpp"
#include "biotplate/micro_fsi.hpp"

namespace biotplate {

/*! Named analytic time envelopes. Every family vanishes at t = 0 so any
 *  combination is a valid start-from-rest load.
 *    ramp-hold   amplitude * min(t/t_ramp, 1)
 *    ramp-cut    amplitude * min(t/t_ramp, 1) while t < t_cut, then 0
 *    smooth      amplitude * (1 - cos(2 pi t / period))
 */
struct TimeEnvelope {
  std::string family = "ramp-hold";
  double amplitude = 1.0;
  double t_ramp = 0.25;
  double t_cut = 0.5;
  double period = 1.0;

  double operator()(double t) const {
    if (family == "ramp-hold") return amplitude * std::min(t / t_ramp, 1.0);
    if (family == "ramp-cut")
      return t < t_cut ? amplitude * std::min(t / t_ramp, 1.0) : 0.0;
    if (family == "smooth")
      return amplitude * (1.0 - std::cos(2.0 * M_PI * t / period));
    throw input_error("schema-violation: unknown time envelope family '" + family + "'");
  }

  void validate() const {
    require_input(family == "ramp-hold" || family == "ramp-cut" || family == "smooth",
                  "schema-violation: unknown time envelope family '" + family + "'");
    require_input(t_ramp > 0.0, "schema-violation: t_ramp must be positive");
    require_input(period > 0.0, "schema-violation: period must be positive");
  }
};

/*! Named analytic midline shapes, evaluated on the normalized coordinate
 *  xi = (x - a)/(b - a):
 *    const         1
 *    sine          sin(pi xi)
 *    cosine        cos(pi xi)
 *    offset-sine   sin(pi xi) + offset
 *    end-balanced  cos(pi xi) - sin(2 pi xi) + (2/pi - 1/2) sin(pi xi)
 *  "end-balanced" integrates so that a clamped membrane loaded with it has
 *  zero strain at the right end; useful when the limit pressure is pinned
 *  there and the pores are sealed.
 */
struct SpaceShape {
  std::string family = "const";
  double offset = 0.0;

  double operator()(double xi) const {
    if (family == "const") return 1.0;
    if (family == "sine") return std::sin(M_PI * xi);
    if (family == "cosine") return std::cos(M_PI * xi);
    if (family == "offset-sine") return std::sin(M_PI * xi) + offset;
    if (family == "end-balanced")
      return std::cos(M_PI * xi) - std::sin(2.0 * M_PI * xi) +
             (2.0 / M_PI - 0.5) * std::sin(M_PI * xi);
    throw input_error("schema-violation: unknown shape family '" + family + "'");
  }

  void validate() const {
    require_input(family == "const" || family == "sine" || family == "cosine" ||
                      family == "offset-sine" || family == "end-balanced",
                  "schema-violation: unknown shape family '" + family + "'");
  }
};

/*! One load component: separable envelope(t) * shape(xi(x)). */
struct ForcingComponent {
  TimeEnvelope time;
  SpaceShape shape;

  void validate() const {
    time.validate();
    shape.validate();
  }

  std::function<double(double, double)> bind(double a, double b) const {
    TimeEnvelope te = time;
    SpaceShape sh = shape;
    double inv_w = 1.0 / (b - a);
    return [te, sh, a, inv_w](double t, double x) { return te(t) * sh((x - a) * inv_w); };
  }
};

/*! The four load channels shared by the micro and macro problems: tangential
 *  fluid/solid loads f0/g0 and vertical profile loads f1n/g1n (the micro
 *  solver applies the vertical ones scaled by eps; the macro model receives
 *  their fluid/solid-volume averages). */
struct ForcingConfig {
  std::optional<ForcingComponent> f0, g0, f1n, g1n;

  void validate() const {
    if (f0) f0->validate();
    if (g0) g0->validate();
    if (f1n) f1n->validate();
    if (g1n) g1n->validate();
  }
};

inline MicroForcing build_micro_forcing(const ForcingConfig& c, double a, double b) {
  MicroForcing f;
  if (c.f0) f.f0 = c.f0->bind(a, b);
  if (c.g0) f.g0 = c.g0->bind(a, b);
  if (c.f1n) f.f1n = c.f1n->bind(a, b);
  if (c.g1n) f.g1n = c.g1n->bind(a, b);
  return f;
}

inline MacroForcing build_macro_forcing(const ForcingConfig& c, double a, double b,
                                        const EffectiveCoefficients& ec) {
  MacroForcing f;
  if (c.f0) f.f0 = c.f0->bind(a, b);
  if (c.g0) f.g0 = c.g0->bind(a, b);
  if (c.f1n) {
    auto f1 = c.f1n->bind(a, b);
    double vf = ec.vol_f;
    f.fbar1n = [f1, vf](double t, double x) { return vf * f1(t, x); };
  }
  if (c.g1n) {
    auto g1 = c.g1n->bind(a, b);
    double vs = ec.vol_s;
    f.gbar1n = [g1, vs](double t, double x) { return vs * g1(t, x); };
  }
  return f;
}

}  // namespace biotplate
