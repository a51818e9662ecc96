#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "smallscat/geometry.hpp"
#include "smallscat/linalg.hpp"

namespace smallscat {

// How a panel containing the singular point is integrated.
enum class SingularStrategy {
  duffy_polar,  // split at the singular point, map each piece to a square
  subdivide,    // uniform 4x refinement only (cheaper, less accurate)
};

struct QuadratureSpec {
  int order = 3;              // symmetric triangle rule order (1..5)
  SingularStrategy strategy = SingularStrategy::duffy_polar;
  int near_refine = 2;        // 4x subdivision levels for panels adjacent to the singularity
  int duffy_points = 5;       // 1D Gauss points per direction inside Duffy cells
  int panel_budget = 20000;   // dense panel-operator refusal threshold
};

// Symmetric Gauss rule on the reference triangle; weights sum to 1.
struct TriangleRule {
  std::vector<double> b0, b1, b2;  // barycentric coordinates
  std::vector<double> w;
};
const TriangleRule& triangle_rule(int order);

// Gauss-Legendre nodes/weights on [0,1], cached per n.
void gauss_legendre_01(int n, std::vector<double>& x, std::vector<double>& w);

template <typename T, typename F>
T integrate_triangle(const Vec3& a, const Vec3& b, const Vec3& c, const TriangleRule& rule,
                     F&& f) {
  const double area = 0.5 * (b - a).cross(c - a).norm();
  T acc{};
  for (size_t i = 0; i < rule.w.size(); ++i) {
    const Vec3 p = rule.b0[i] * a + rule.b1[i] * b + rule.b2[i] * c;
    acc += T(rule.w[i] * area * f(p));
  }
  return acc;
}

template <typename T, typename F>
T integrate_triangle_subdivided(const Vec3& a, const Vec3& b, const Vec3& c,
                                const TriangleRule& rule, int levels, F&& f) {
  if (levels <= 0) return integrate_triangle<T>(a, b, c, rule, f);
  const Vec3 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  return integrate_triangle_subdivided<T>(a, ab, ca, rule, levels - 1, f) +
         integrate_triangle_subdivided<T>(b, bc, ab, rule, levels - 1, f) +
         integrate_triangle_subdivided<T>(c, ca, bc, rule, levels - 1, f) +
         integrate_triangle_subdivided<T>(ab, bc, ca, rule, levels - 1, f);
}

// Integrates f over triangle (a,b,c) when f has an integrable point singularity
// at x (x in or near the panel plane).  The triangle is split into the three
// triangles meeting at x; each is mapped to the unit square so that the radial
// Jacobian cancels a 1/r singularity.  Degenerate pieces (x on an edge or at a
// vertex) contribute zero and are skipped naturally.
template <typename T, typename F>
T integrate_triangle_duffy(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& x,
                           int n1d, F&& f) {
  std::vector<double> gx, gw;
  gauss_legendre_01(n1d, gx, gw);
  const Vec3 corner[3] = {a, b, c};
  T acc{};
  for (int e = 0; e < 3; ++e) {
    const Vec3 p = corner[e] - x;
    const Vec3 q = corner[(e + 1) % 3] - x;
    const double jac0 = p.cross(q).norm();  // = 2 * area of (x, pe, qe)
    if (jac0 == 0.0) continue;
    for (int iu = 0; iu < n1d; ++iu) {
      const double u = gx[iu];
      for (int iv = 0; iv < n1d; ++iv) {
        const double v = gx[iv];
        const Vec3 pt = x + u * ((1.0 - v) * p + v * q);
        acc += T(gw[iu] * gw[iv] * u * jac0 * f(pt));
      }
    }
  }
  return acc;
}

// Closest point on triangle (a,b,c) to p.
Vec3 closest_point_on_triangle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& p);

// Integral of f(point, outward normal) over the whole mesh.  If singular_at is
// given, the panel containing (or closest to) that point is integrated with the
// configured singular strategy and panels touching it with near_refine
// subdivision.  Non-finite integrand values raise EvaluationError with the
// panel index.
double surface_integral(const SurfaceMesh& mesh,
                        const std::function<double(const Vec3&, const Vec3&)>& f,
                        const QuadratureSpec& spec,
                        std::optional<Vec3> singular_at = std::nullopt);

cdouble surface_integral_c(const SurfaceMesh& mesh,
                           const std::function<cdouble(const Vec3&, const Vec3&)>& f,
                           const QuadratureSpec& spec,
                           std::optional<Vec3> singular_at = std::nullopt);

}  // namespace smallscat
