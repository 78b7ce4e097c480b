#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "biotplate/core.hpp"

namespace biotplate {

/*! Geometry of the unit cell Z = (0,1) x (-1,1) with a fluid inclusion.
 *  Families:
 *    cavity  - disk of radius r centered at (c1, c2); c1 is periodic in y1 and
 *              the disk may straddle the lateral seam, but must stay clear of
 *              the horizontal faces y2 = +-1.
 *    channel - horizontal fluid band h1 < y2 < h2 spanning the full period
 *              (percolating in y1).
 *    solid   - no fluid (degenerate reference case used by tests).
 */
struct CellGeometry {
  enum class Family { cavity, channel, solid };

  Family family = Family::solid;
  Eigen::Vector2d center{0.5, 0.0};  // cavity
  double radius = 0.0;               // cavity
  double h1 = 0.0, h2 = 0.0;         // channel band

  static constexpr double min_clearance = 0.02;

  static CellGeometry cavity(const Eigen::Vector2d& c, double r) {
    CellGeometry g;
    g.family = Family::cavity;
    g.center = Eigen::Vector2d(c.x() - std::floor(c.x()), c.y());
    g.radius = r;
    g.validate();
    return g;
  }

  static CellGeometry channel(double lo, double hi) {
    CellGeometry g;
    g.family = Family::channel;
    g.h1 = lo;
    g.h2 = hi;
    g.validate();
    return g;
  }

  static CellGeometry solid() { return CellGeometry{}; }

  void validate() const {
    switch (family) {
      case Family::cavity:
        require_input(radius > 0.0, "geometry-invalid: cavity radius must be positive");
        require_input(radius < 0.5 - min_clearance,
                      "geometry-invalid: cavity radius must be below half the period");
        require_input(std::abs(center.y()) + radius < 1.0 - min_clearance,
                      "geometry-invalid: cavity must keep clearance from y2 = +-1");
        break;
      case Family::channel:
        require_input(h1 < h2, "geometry-invalid: channel needs h1 < h2");
        require_input(h2 - h1 >= min_clearance, "geometry-invalid: channel band too thin");
        require_input(h1 > -1.0 + min_clearance && h2 < 1.0 - min_clearance,
                      "geometry-invalid: channel must keep clearance from y2 = +-1");
        break;
      case Family::solid:
        break;
    }
  }

  double area_fluid_analytic() const {
    switch (family) {
      case Family::cavity:
        return M_PI * radius * radius;
      case Family::channel:
        return h2 - h1;
      default:
        return 0.0;
    }
  }
  double area_solid_analytic() const { return 2.0 - area_fluid_analytic(); }

  /*! True when the fluid connects the lateral faces y1 = 0 and y1 = 1. */
  bool percolates() const { return family == Family::channel; }

  std::string family_name() const {
    switch (family) {
      case Family::cavity:
        return "cavity";
      case Family::channel:
        return "channel";
      default:
        return "solid";
    }
  }
};

}  // namespace biotplate
