#include "smallscat/quadrature.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

#include "smallscat/errors.hpp"

namespace smallscat {

namespace {

TriangleRule make_rule(int order) {
  TriangleRule r;
  auto add = [&](double b0, double b1, double b2, double w) {
    r.b0.push_back(b0);
    r.b1.push_back(b1);
    r.b2.push_back(b2);
    r.w.push_back(w);
  };
  auto add_sym3 = [&](double a, double b, double w) {
    add(a, b, b, w);
    add(b, a, b, w);
    add(b, b, a, w);
  };
  switch (order) {
    case 1:
      add(1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0);
      break;
    case 2:
      add_sym3(2.0 / 3, 1.0 / 6, 1.0 / 3);
      break;
    case 3:
      add(1.0 / 3, 1.0 / 3, 1.0 / 3, -27.0 / 48);
      add_sym3(0.6, 0.2, 25.0 / 48);
      break;
    default: {  // degree-5 seven-point rule
      add(1.0 / 3, 1.0 / 3, 1.0 / 3, 9.0 / 40);
      const double a1 = 0.059715871789769820459117580973104;
      const double b1 = 0.470142064105115089770441209513447;
      add_sym3(a1, b1, 0.132394152788506180737649387833151);
      const double a2 = 0.797426985353087322398025276169754;
      const double b2 = 0.101286507323456338800987361915123;
      add_sym3(a2, b2, 0.125939180544827152595683945500181);
      break;
    }
  }
  return r;
}

}  // namespace

const TriangleRule& triangle_rule(int order) {
  if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
  static const TriangleRule rules[4] = {make_rule(1), make_rule(2), make_rule(3), make_rule(5)};
  if (order == 1) return rules[0];
  if (order == 2) return rules[1];
  if (order == 3) return rules[2];
  return rules[3];
}

void gauss_legendre_01(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("gauss_legendre_01: n must be >= 1");
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it == cache.end()) {
    // Newton iteration on P_n over [-1,1], then map to [0,1].
    std::vector<double> xs(n), ws(n);
    for (int i = 0; i < n; ++i) {
      double t = std::cos(pi * (i + 0.75) / (n + 0.5));
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = t;
        for (int k = 2; k <= n; ++k) {
          const double pk = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        const double dp = n * (t * p1 - p0) / (t * t - 1.0);
        const double dt = p1 / dp;
        t -= dt;
        if (std::abs(dt) < 1e-15) break;
      }
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      const double dp = n * (t * p1 - p0) / (t * t - 1.0);
      xs[i] = 0.5 * (t + 1.0);
      ws[i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    it = cache.emplace(n, std::make_pair(std::move(xs), std::move(ws))).first;
  }
  x = it->second.first;
  w = it->second.second;
}

Vec3 closest_point_on_triangle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& p) {
  // Ericson, Real-Time Collision Detection, 5.1.5.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

namespace {

template <typename T>
T surface_integral_impl(const SurfaceMesh& mesh,
                        const std::function<T(const Vec3&, const Vec3&)>& f,
                        const QuadratureSpec& spec, const std::optional<Vec3>& singular_at) {
  const TriangleRule& rule = triangle_rule(spec.order);

  int host = -1;
  if (singular_at) {
    double best = std::numeric_limits<double>::max();
    for (int t = 0; t < mesh.panel_count(); ++t) {
      const double d =
          (closest_point_on_triangle(mesh.v0(t), mesh.v1(t), mesh.v2(t), *singular_at) -
           *singular_at)
              .norm();
      if (d < best) {
        best = d;
        host = t;
      }
    }
  }

  T total{};
  for (int t = 0; t < mesh.panel_count(); ++t) {
    const Vec3& n = mesh.normal[t];
    auto g = [&](const Vec3& p) { return f(p, n); };
    T part{};
    if (singular_at && t == host && spec.strategy == SingularStrategy::duffy_polar) {
      const Vec3 proj =
          closest_point_on_triangle(mesh.v0(t), mesh.v1(t), mesh.v2(t), *singular_at);
      part = integrate_triangle_duffy<T>(mesh.v0(t), mesh.v1(t), mesh.v2(t), proj,
                                         spec.duffy_points, g);
    } else if (singular_at &&
               (t == host || mesh.shares_vertex(t, host) ||
                (mesh.centroid[t] - *singular_at).norm() < 2.0 * mesh.diameter[t])) {
      part = integrate_triangle_subdivided<T>(mesh.v0(t), mesh.v1(t), mesh.v2(t), rule,
                                              spec.near_refine, g);
    } else {
      part = integrate_triangle<T>(mesh.v0(t), mesh.v1(t), mesh.v2(t), rule, g);
    }
    if (!std::isfinite(std::abs(part))) {
      std::ostringstream os;
      os << "integrand produced a non-finite value on panel " << t;
      throw EvaluationError(os.str(), t);
    }
    total += part;
  }
  return total;
}

}  // namespace

double surface_integral(const SurfaceMesh& mesh,
                        const std::function<double(const Vec3&, const Vec3&)>& f,
                        const QuadratureSpec& spec, std::optional<Vec3> singular_at) {
  return surface_integral_impl<double>(mesh, f, spec, singular_at);
}

cdouble surface_integral_c(const SurfaceMesh& mesh,
                           const std::function<cdouble(const Vec3&, const Vec3&)>& f,
                           const QuadratureSpec& spec, std::optional<Vec3> singular_at) {
  return surface_integral_impl<cdouble>(mesh, f, spec, singular_at);
}

}  // namespace smallscat
