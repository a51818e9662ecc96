#include "smallscat/nearfield.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "smallscat/errors.hpp"
#include "smallscat/quadrature.hpp"

namespace smallscat {

namespace {

// Gradient factor of e^{ikr}/(2 pi r): grad = psi1(r) * rhat.
cdouble psi1(double k, double r) {
  return std::exp(cdouble(0.0, k * r)) * cdouble(-1.0, k * r) / (2.0 * pi * r * r);
}

// Gradient factor of the dimensionless wave e^{ikr}/(kr).
cdouble g0(double k, double r) { return std::exp(cdouble(0.0, k * r)) / (k * r); }
cdouble g1(double k, double r) {
  return std::exp(cdouble(0.0, k * r)) * cdouble(-1.0, k * r) / (k * r * r);
}
cdouble g2(double k, double r) {
  const double kr = k * r;
  return std::exp(cdouble(0.0, kr)) * cdouble(2.0 - kr * kr, -2.0 * kr) / (k * r * r * r);
}

cdouble cdot(const Vec3& a, const Vec3c& b) {
  return a.x() * b.x() + a.y() * b.y() + a.z() * b.z();
}

using Bary = Eigen::Vector3d;

// Curved panel: corners plus the lifting normals chosen at construction.
struct PanelGeom {
  Vec3 v0, v1, v2;
  Vec3 n0, n1, n2;
};

Vec3 corner_lift_normal(const Vec3& facet_n, const Vec3& vertex_n) {
  return facet_n.dot(vertex_n) > 0.7071 ? vertex_n : facet_n;
}

PanelGeom panel_geom(const SurfacePanels& panels, int q) {
  const SurfaceMesh& mesh = panels.mesh;
  PanelGeom g;
  g.v0 = mesh.v0(q);
  g.v1 = mesh.v1(q);
  g.v2 = mesh.v2(q);
  const Vec3& fn = mesh.normal[q];
  g.n0 = corner_lift_normal(fn, panels.vertex_normal[mesh.triangles[q][0]]);
  g.n1 = corner_lift_normal(fn, panels.vertex_normal[mesh.triangles[q][1]]);
  g.n2 = corner_lift_normal(fn, panels.vertex_normal[mesh.triangles[q][2]]);
  return g;
}

// Half-blend of the corner tangent-plane projections; second-order accurate
// for any smooth surface, and flat when all lifting normals equal the facet
// normal.
Vec3 lift_point(const PanelGeom& g, const Bary& b) {
  const Vec3 p = b(0) * g.v0 + b(1) * g.v1 + b(2) * g.v2;
  const Vec3 p0 = p - (p - g.v0).dot(g.n0) * g.n0;
  const Vec3 p1 = p - (p - g.v1).dot(g.n1) * g.n1;
  const Vec3 p2 = p - (p - g.v2).dot(g.n2) * g.n2;
  return 0.5 * (p + b(0) * p0 + b(1) * p1 + b(2) * p2);
}

Vec3 lift_normal(const PanelGeom& g, const Bary& b) {
  return (b(0) * g.n0 + b(1) * g.n1 + b(2) * g.n2).normalized();
}

// Quadrature over the curved panel.  Subdivision runs in barycentric space;
// each leaf places rule points on the lifted sub-facet and reports their
// barycentric position so callers can interpolate densities and normals.
// fn(point, bary, weight)
template <typename F>
void curved_quad(const PanelGeom& g, const Bary& a, const Bary& b, const Bary& c,
                 const TriangleRule& rule, int levels, F&& fn) {
  if (levels <= 0) {
    const Vec3 pa = lift_point(g, a), pb = lift_point(g, b), pc = lift_point(g, c);
    const double area = 0.5 * (pb - pa).cross(pc - pa).norm();
    for (size_t i = 0; i < rule.w.size(); ++i) {
      const Bary bi = rule.b0[i] * a + rule.b1[i] * b + rule.b2[i] * c;
      fn(lift_point(g, bi), bi, rule.w[i] * area);
    }
    return;
  }
  const Bary ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  curved_quad(g, a, ab, ca, rule, levels - 1, fn);
  curved_quad(g, b, bc, ab, rule, levels - 1, fn);
  curved_quad(g, c, ca, bc, rule, levels - 1, fn);
  curved_quad(g, ab, bc, ca, rule, levels - 1, fn);
}

template <typename F>
void curved_panel(const PanelGeom& g, const TriangleRule& rule, int levels, F&& fn) {
  curved_quad(g, Bary(1, 0, 0), Bary(0, 1, 0), Bary(0, 0, 1), rule, levels, fn);
}

// Geometrically graded quadrature toward the corner s of the barycentric
// triangle (s, b, c); used when the evaluation point sits on the panel and
// the curved sheet makes the integrand weakly singular there.
template <typename F>
void graded_corner(const PanelGeom& g, const Bary& s, const Bary& b, const Bary& c,
                   const TriangleRule& rule, int grade, F&& fn) {
  if (grade <= 0) {
    curved_quad(g, s, b, c, rule, 0, fn);
    return;
  }
  const Bary sb = 0.5 * (s + b), sc = 0.5 * (s + c), bc = 0.5 * (b + c);
  curved_quad(g, sb, b, bc, rule, 0, fn);
  curved_quad(g, sc, bc, c, rule, 0, fn);
  curved_quad(g, sb, bc, sc, rule, 0, fn);
  graded_corner(g, s, sb, sc, rule, grade - 1, fn);
}

// Principal-value quadrature over a panel containing the evaluation point at
// barycentric position s (strictly inside).
template <typename F>
void panel_pv(const PanelGeom& g, const Bary& s, const TriangleRule& rule, int grade,
              F&& fn) {
  const Bary e0(1, 0, 0), e1(0, 1, 0), e2(0, 0, 1);
  graded_corner(g, s, e0, e1, rule, grade, fn);
  graded_corner(g, s, e1, e2, rule, grade, fn);
  graded_corner(g, s, e2, e0, rule, grade, fn);
}

// Flat-facet quadrature; the assembled matrix uses it to radiate the constant
// panel basis, which is cheap and close enough for the correction loop to
// finish the job.
template <typename F>
void quad_points(const Vec3& a, const Vec3& b, const Vec3& c, const TriangleRule& rule,
                 int levels, F&& fn) {
  if (levels <= 0) {
    const double area = 0.5 * (b - a).cross(c - a).norm();
    for (size_t i = 0; i < rule.w.size(); ++i)
      fn(Vec3(rule.b0[i] * a + rule.b1[i] * b + rule.b2[i] * c), rule.w[i] * area);
    return;
  }
  const Vec3 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  quad_points(a, ab, ca, rule, levels - 1, fn);
  quad_points(b, bc, ab, rule, levels - 1, fn);
  quad_points(c, ca, bc, rule, levels - 1, fn);
  quad_points(ab, bc, ca, rule, levels - 1, fn);
}

// Vertex-averaged continuous current.  The panel-constant solution jumps
// across edges, and the 1/r^2 evaluation kernel amplifies those jumps near
// the surface; interpolating through shared vertices removes them.
std::vector<Vec3c> vertex_currents(const SurfacePanels& panels, const CurrentSolution& cur) {
  const SurfaceMesh& mesh = panels.mesh;
  std::vector<Vec3c> jv(mesh.vertex_count(), Vec3c::Zero());
  std::vector<double> wv(mesh.vertex_count(), 0.0);
  for (int p = 0; p < mesh.panel_count(); ++p) {
    const Vec3c j = cur.current(panels, p);
    for (int corner = 0; corner < 3; ++corner) {
      const int v = mesh.triangles[p][corner];
      jv[v] += mesh.area[p] * j;
      wv[v] += mesh.area[p];
    }
  }
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (wv[v] == 0.0) continue;
    jv[v] /= wv[v];
    const Vec3& n = panels.vertex_normal[v];
    jv[v] -= cdot(n, jv[v]) * n.cast<cdouble>();
  }
  return jv;
}

int source_levels(double dist, double diam) {
  if (dist < diam) return 3;
  if (dist < 2.0 * diam) return 2;
  if (dist < 4.0 * diam) return 1;
  return 0;
}

// Exterior E trace of the interpolated current at a point of panel i given in
// barycentric coordinates, evaluated with the fine source quadrature.  The
// excitation part is not included.
Vec3c current_trace(const SurfacePanels& panels, const std::vector<Vec3c>& jv,
                    int i, const Bary& bs, const WaveContext& ctx) {
  const SurfaceMesh& mesh = panels.mesh;
  const TriangleRule& rule = triangle_rule(2);
  const PanelGeom gi = panel_geom(panels, i);
  const Vec3 s = lift_point(gi, bs);
  const Vec3 n = lift_normal(gi, bs);

  auto interp = [&](const PanelGeom& g, int q, const Bary& b) {
    Vec3c j = b(0) * jv[mesh.triangles[q][0]] + b(1) * jv[mesh.triangles[q][1]] +
              b(2) * jv[mesh.triangles[q][2]];
    const Vec3 nq = lift_normal(g, b);
    j -= cdot(nq, j) * nq.cast<cdouble>();
    return j;
  };

  Vec3c js = interp(gi, i, bs);
  Vec3c e = -(2.0 * pi / ctx.k) * ccross(n, js);
  auto accumulate = [&](const PanelGeom& g, int q) {
    return [&, q](const Vec3& t, const Bary& b, double w) {
      const Vec3 d = s - t;
      const double r = d.norm();
      if (!(r > 0.0)) return;  // graded quadrature leaves a negligible hole
      e += (w * g1(ctx.k, r) / r) * ccross(d, interp(g, q, b));
    };
  };
  for (int q = 0; q < mesh.panel_count(); ++q) {
    if (q == i) continue;
    const PanelGeom gq = panel_geom(panels, q);
    const int levels = source_levels((s - mesh.centroid[q]).norm(), mesh.diameter[q]);
    curved_panel(gq, rule, levels, accumulate(gq, q));
  }
  panel_pv(gi, bs, rule, 6, accumulate(gi, i));
  return e;
}

// Residual of the boundary equation at the collocation points, evaluated with
// the interpolated current and the fine source quadrature.  Units match the
// assembled system, so a correction can be solved through the same matrix.
Eigen::VectorXcd equation_residual(const SurfacePanels& panels, const CurrentSolution& cur,
                                   const IncidentField& excitation, const WaveContext& ctx) {
  const int p = panels.count();
  const std::vector<Vec3c> jv = vertex_currents(panels, cur);
  const Bary bc(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
  Eigen::VectorXcd r(2 * p);
#pragma omp parallel for schedule(dynamic, 8)
  for (int i = 0; i < p; ++i) {
    const Vec3c e = excitation(panels.colloc[i]).head<3>() +
                    current_trace(panels, jv, i, bc, ctx);
    const Vec3c ne = ccross(panels.cnormal[i], e);
    r(2 * i + 0) = (ctx.k / (2.0 * pi)) * cdot(panels.t1[i], ne);
    r(2 * i + 1) = (ctx.k / (2.0 * pi)) * cdot(panels.t2[i], ne);
  }
  return r;
}

}  // namespace

SurfacePanels::SurfacePanels(SurfaceMesh m) : mesh(std::move(m)) {
  mesh.finalize();
  mesh.validate();
  const int p = mesh.panel_count();

  vertex_normal.assign(mesh.vertex_count(), Vec3::Zero());
  for (int i = 0; i < p; ++i)
    for (int corner = 0; corner < 3; ++corner)
      vertex_normal[mesh.triangles[i][corner]] += mesh.area[i] * mesh.normal[i];
  for (Vec3& n : vertex_normal) {
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
  }

  colloc.resize(p);
  cnormal.resize(p);
  t1.resize(p);
  t2.resize(p);
  const Bary bc(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
  for (int i = 0; i < p; ++i) {
    const PanelGeom g = panel_geom(*this, i);
    colloc[i] = lift_point(g, bc);
    cnormal[i] = lift_normal(g, bc);
    Vec3 e = mesh.v1(i) - mesh.v0(i);
    e -= e.dot(cnormal[i]) * cnormal[i];
    t1[i] = e.normalized();
    t2[i] = cnormal[i].cross(t1[i]);
  }
}

Vec3c CurrentSolution::current(const SurfacePanels& panels, int panel) const {
  return j1[panel] * panels.t1[panel].cast<cdouble>() +
         j2[panel] * panels.t2[panel].cast<cdouble>();
}

Eigen::MatrixXcd assemble_boundary_matrix(const SurfacePanels& panels, const WaveContext& ctx,
                                          const NearFieldOptions& opt) {
  const SurfaceMesh& mesh = panels.mesh;
  const int p = panels.count();
  const TriangleRule& rule = triangle_rule(2);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(2 * p, 2 * p);

#pragma omp parallel for schedule(dynamic, 8)
  for (int row = 0; row < p; ++row) {
    const Vec3& xp = panels.colloc[row];
    Eigen::Matrix<double, 2, 3> left;
    left.row(0) = panels.t1[row].transpose();
    left.row(1) = panels.t2[row].transpose();
    left = left * cross_matrix(panels.cnormal[row]);
    for (int col = 0; col < p; ++col) {
      if (col == row) continue;  // the flat self block is exactly zero
      const double dist = (xp - mesh.centroid[col]).norm();
      int levels = 0;
      if (mesh.shares_vertex(row, col))
        levels = opt.near_refine;
      else if (dist < opt.near_factor * std::max(mesh.diameter[row], mesh.diameter[col]))
        levels = 1;
      Eigen::Matrix<cdouble, 3, 2> inner = Eigen::Matrix<cdouble, 3, 2>::Zero();
      quad_points(mesh.v0(col), mesh.v1(col), mesh.v2(col), rule, levels,
                  [&](const Vec3& t, double w) {
                    const Vec3 d = xp - t;
                    const double r = d.norm();
                    const Vec3c grad = (w * psi1(ctx.k, r) / r) * d.cast<cdouble>();
                    inner.col(0) += ccross(grad, panels.t1[col].cast<cdouble>());
                    inner.col(1) += ccross(grad, panels.t2[col].cast<cdouble>());
                  });
      m.block<2, 2>(2 * row, 2 * col) = left.cast<cdouble>() * inner;
    }
  }
  return m;
}

CurrentSolution solve_surface_current(const SurfacePanels& panels,
                                      const IncidentField& excitation, const WaveContext& ctx,
                                      const NearFieldOptions& opt) {
  const int p = panels.count();
  if (p == 0) throw InvalidConfiguration("surface has no panels");

  Eigen::VectorXcd b(2 * p);
  for (int i = 0; i < p; ++i) {
    const Vec3c e = excitation(panels.colloc[i]).head<3>();
    const Vec3c ne = ccross(panels.cnormal[i], e);
    b(2 * i + 0) = -(ctx.k / (2.0 * pi)) * cdot(panels.t1[i], ne);
    b(2 * i + 1) = -(ctx.k / (2.0 * pi)) * cdot(panels.t2[i], ne);
  }

  CurrentSolution out;
  out.j1.assign(p, cdouble(0.0, 0.0));
  out.j2.assign(p, cdouble(0.0, 0.0));
  const double bnorm = b.cwiseAbs().maxCoeff();
  if (bnorm == 0.0) return out;

  const Eigen::MatrixXcd m = assemble_boundary_matrix(panels, ctx, opt);

  Eigen::BiCGSTAB<Eigen::MatrixXcd> solver;
  solver.setTolerance(opt.tol);
  solver.setMaxIterations(opt.max_iter);
  solver.compute(m);
  Eigen::VectorXcd x = solver.solve(b);
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "surface-current iteration stalled at error " << solver.error() << " after "
       << solver.iterations() << " iterations";
    throw NonConvergence(os.str(), solver.error(), {});
  }
  out.iterations = static_cast<int>(solver.iterations());

  auto store = [&](const Eigen::VectorXcd& v) {
    for (int i = 0; i < p; ++i) {
      out.j1[i] = v(2 * i + 0);
      out.j2[i] = v(2 * i + 1);
    }
  };
  store(x);

  // The collocation matrix radiates flat panel-constant currents, while the
  // field evaluators radiate the interpolated current on the curved sheet.
  // Correcting the panel values against the finely integrated residual of
  // that current closes the gap, reusing the assembled matrix.
  Eigen::VectorXcd rho = equation_residual(panels, out, excitation, ctx);
  double rho_norm = rho.cwiseAbs().maxCoeff();
  for (int step = 0; step < opt.defect_steps && rho_norm > opt.tol * bnorm; ++step) {
    const Eigen::VectorXcd delta = solver.solve(-rho);
    if (solver.info() != Eigen::Success) break;
    out.iterations += static_cast<int>(solver.iterations());
    x += delta;
    store(x);
    const Eigen::VectorXcd rho_next = equation_residual(panels, out, excitation, ctx);
    const double rho_next_norm = rho_next.cwiseAbs().maxCoeff();
    if (rho_next_norm >= rho_norm) {  // stalled; keep the better current
      x -= delta;
      store(x);
      break;
    }
    rho = rho_next;
    rho_norm = rho_next_norm;
  }
  out.residual = rho_norm / bnorm;

  const double mnorm = m.cwiseAbs().rowwise().sum().maxCoeff();
  std::mt19937 rng(opt.seed);
  Eigen::VectorXcd probe(2 * p);
  for (int i = 0; i < 2 * p; ++i) {
    switch (rng() & 3u) {
      case 0: probe(i) = cdouble(1.0, 0.0); break;
      case 1: probe(i) = cdouble(-1.0, 0.0); break;
      case 2: probe(i) = cdouble(0.0, 1.0); break;
      default: probe(i) = cdouble(0.0, -1.0); break;
    }
  }
  const Eigen::VectorXcd y = solver.solve(probe);
  out.condition_estimate = mnorm * y.cwiseAbs().maxCoeff();
  if (solver.info() == Eigen::Success && out.condition_estimate > opt.condition_limit) {
    std::ostringstream os;
    os << "boundary operator is near-singular: condition estimate "
       << out.condition_estimate;
    throw NearEigenvalue(os.str(), out.condition_estimate);
  }

  double defect = 0.0, jmax = 0.0;
  for (int i = 0; i < p; ++i) {
    const Vec3c j = out.current(panels, i);
    defect = std::max(defect, std::abs(cdot(panels.cnormal[i], j)));
    jmax = std::max(jmax, j.norm());
  }
  out.tangential_defect = jmax > 0.0 ? defect / jmax : 0.0;
  return out;
}

namespace {

void check_off_sheet(const Vec3& x, const SurfacePanels& panels) {
  const SurfaceMesh& mesh = panels.mesh;
  for (int q = 0; q < mesh.panel_count(); ++q) {
    if ((x - mesh.centroid[q]).norm() > mesh.diameter[q]) continue;
    if ((x - panels.colloc[q]).norm() < 1e-9 * mesh.diameter[q])
      throw SingularEvaluation("evaluation point lies on the current sheet");
    const Vec3 cp = closest_point_on_triangle(mesh.v0(q), mesh.v1(q), mesh.v2(q), x);
    if ((x - cp).norm() < 1e-9 * mesh.diameter[q])
      throw SingularEvaluation("evaluation point lies on the current sheet");
  }
}

template <typename F>
void for_scatter_sources(const Vec3& x, const SurfacePanels& panels,
                         const std::vector<Vec3c>& jv, F&& fn) {
  const SurfaceMesh& mesh = panels.mesh;
  const TriangleRule& rule = triangle_rule(2);
  for (int q = 0; q < mesh.panel_count(); ++q) {
    const PanelGeom g = panel_geom(panels, q);
    const int levels = source_levels((x - mesh.centroid[q]).norm(), mesh.diameter[q]);
    curved_panel(g, rule, levels, [&](const Vec3& t, const Bary& b, double w) {
      Vec3c j = b(0) * jv[mesh.triangles[q][0]] + b(1) * jv[mesh.triangles[q][1]] +
                b(2) * jv[mesh.triangles[q][2]];
      const Vec3 nq = lift_normal(g, b);
      j -= cdot(nq, j) * nq.cast<cdouble>();
      fn(t, j, w);
    });
  }
}

}  // namespace

Vec3c scattered_E(const Vec3& x, const SurfacePanels& panels, const CurrentSolution& cur,
                  const WaveContext& ctx) {
  check_off_sheet(x, panels);
  const std::vector<Vec3c> jv = vertex_currents(panels, cur);
  Vec3c acc = Vec3c::Zero();
  for_scatter_sources(x, panels, jv, [&](const Vec3& t, const Vec3c& j, double w) {
    const Vec3 d = x - t;
    const double r = d.norm();
    acc += (w * g1(ctx.k, r) / r) * ccross(d, j);
  });
  return acc;
}

Vec3c scattered_H(const Vec3& x, const SurfacePanels& panels, const CurrentSolution& cur,
                  const WaveContext& ctx) {
  check_off_sheet(x, panels);
  const std::vector<Vec3c> jv = vertex_currents(panels, cur);
  // H = curl E / (i omega mu0) and curl curl (g j) = grad(grad g . j) + k^2 g j.
  const cdouble front = ctx.admittance() / cdouble(0.0, ctx.k);
  const double k2 = ctx.k * ctx.k;
  Vec3c acc = Vec3c::Zero();
  for_scatter_sources(x, panels, jv, [&](const Vec3& t, const Vec3c& j, double w) {
    const Vec3 d = x - t;
    const double r = d.norm();
    const Vec3 rh = d / r;
    const cdouble rj = cdot(rh, j);
    const Vec3c hess = g2(ctx.k, r) * rj * rh.cast<cdouble>() +
                       (g1(ctx.k, r) / r) * (j - rj * rh.cast<cdouble>());
    acc += (w * front) * (hess + k2 * g0(ctx.k, r) * j);
  });
  return acc;
}

Vec6c near_field(const Vec3& x, const SurfacePanels& panels, const CurrentSolution& cur,
                 const IncidentField& excitation, const WaveContext& ctx) {
  Vec6c u = excitation(x);
  u.head<3>() += scattered_E(x, panels, cur, ctx);
  u.tail<3>() += scattered_H(x, panels, cur, ctx);
  return u;
}

double tangential_residual(const SurfacePanels& panels, const CurrentSolution& cur,
                           const IncidentField& excitation, const WaveContext& ctx) {
  const int p = panels.count();

  double exc_scale = 0.0;
  for (int i = 0; i < p; ++i)
    exc_scale = std::max(exc_scale, excitation(panels.colloc[i]).head<3>().norm());
  if (exc_scale == 0.0) return 0.0;

  const std::vector<Vec3c> jv = vertex_currents(panels, cur);
  double worst = 0.0;
#pragma omp parallel for schedule(dynamic, 8) reduction(max : worst)
  for (int i = 0; i < p; ++i) {
    const PanelGeom gi = panel_geom(panels, i);
    for (int corner = 0; corner < 3; ++corner) {
      // centroid of the corner subpanel, never a collocation point
      Bary bs(1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0);
      bs(corner) = 4.0 / 6.0;
      Vec3c e = excitation(lift_point(gi, bs)).head<3>() +
                current_trace(panels, jv, i, bs, ctx);
      const Vec3 n = lift_normal(gi, bs);
      e -= cdot(n, e) * n.cast<cdouble>();
      worst = std::max(worst, e.norm());
    }
  }
  return worst / exc_scale;
}

IncidentField particle_excitation(int j, const LocalFields& fields, const Scene& scene,
                                  const IncidentField& incident) {
  if (j < 0 || j >= scene.size())
    throw InvalidConfiguration("excitation requested for a particle outside the scene");
  auto f = std::make_shared<const LocalFields>(fields);
  auto s = std::make_shared<const Scene>(scene);
  IncidentField out;
  out.sampler = [j, f, s, base = incident](const Vec3& x) {
    return Vec6c(base(x) + scattered_excluding(j, x, *f, *s));
  };
  return out;
}

}  // namespace smallscat
