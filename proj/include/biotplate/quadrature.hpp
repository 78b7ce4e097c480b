#pragma once

#include <array>
#include <vector>

namespace biotplate {

/*! Quadrature node on the reference triangle (vertices (0,0),(1,0),(0,1)),
 *  weight normalized so that weights sum to 1 (multiply by element area). */
struct TriQuadPoint {
  double x, y, w;
};

/*! Six-point, order-4 symmetric triangle rule (two three-fold orbits). */
inline const std::array<TriQuadPoint, 6>& tri_quadrature_order4() {
  static const double a1 = 0.445948490915965;
  static const double w1 = 0.223381589678011;
  static const double a2 = 0.091576213509771;
  static const double w2 = 0.109951743655322;
  static const std::array<TriQuadPoint, 6> pts = {{
      {a1, a1, w1},
      {1.0 - 2.0 * a1, a1, w1},
      {a1, 1.0 - 2.0 * a1, w1},
      {a2, a2, w2},
      {1.0 - 2.0 * a2, a2, w2},
      {a2, 1.0 - 2.0 * a2, w2},
  }};
  return pts;
}

struct GaussPoint {
  double t, w;  // on [-1, 1], weights sum to 2
};

/*! Three-point Gauss-Legendre rule (order 5); used on edges. */
inline const std::array<GaussPoint, 3>& gauss3() {
  static const double s = 0.774596669241483;  // sqrt(3/5)
  static const std::array<GaussPoint, 3> pts = {{
      {-s, 5.0 / 9.0},
      {0.0, 8.0 / 9.0},
      {s, 5.0 / 9.0},
  }};
  return pts;
}

/*! Five-point Gauss-Legendre rule (order 9); used for 1D macro assembly. */
inline const std::array<GaussPoint, 5>& gauss5() {
  static const double a = 0.906179845938664;
  static const double b = 0.538469310105683;
  static const double wa = 0.236926885056189;
  static const double wb = 0.478628670499366;
  static const double w0 = 0.568888888888889;
  static const std::array<GaussPoint, 5> pts = {{
      {-a, wa},
      {-b, wb},
      {0.0, w0},
      {b, wb},
      {a, wa},
  }};
  return pts;
}

}  // namespace biotplate
