#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Geometry>

#include "smallscat/errors.hpp"
#include "smallscat/geometry.hpp"
#include "smallscat/nearfield.hpp"
#include "smallscat/polarizability.hpp"
#include "smallscat/quadrature.hpp"
#include "smallscat/scattering.hpp"

using namespace smallscat;

namespace {

CurrentSolution zero_current(const SurfacePanels& panels) {
  CurrentSolution cur;
  cur.j1.assign(panels.count(), cdouble(0.0, 0.0));
  cur.j2.assign(panels.count(), cdouble(0.0, 0.0));
  return cur;
}

double max_current_diff(const SurfacePanels& pa, const CurrentSolution& a,
                        const SurfacePanels& pb, const CurrentSolution& b, const Mat3c& map) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < pa.count(); ++i) {
    const Vec3c want = map * a.current(pa, i);
    num = std::max(num, (b.current(pb, i) - want).norm());
    den = std::max(den, want.norm());
  }
  return num / den;
}

}  // namespace

TEST_CASE("panel frames are orthonormal and tangent") {
  const SurfacePanels panels(make_sphere(1.0, 1));
  for (int i = 0; i < panels.count(); ++i) {
    CHECK(std::abs(panels.t1[i].norm() - 1.0) < 1e-13);
    CHECK(std::abs(panels.t2[i].norm() - 1.0) < 1e-13);
    CHECK(std::abs(panels.cnormal[i].norm() - 1.0) < 1e-13);
    CHECK(std::abs(panels.t1[i].dot(panels.cnormal[i])) < 1e-13);
    CHECK((panels.t2[i] - panels.cnormal[i].cross(panels.t1[i])).norm() < 1e-13);
    // collocation point sits near the panel, lifted toward the sphere
    CHECK((panels.colloc[i] - panels.mesh.centroid[i]).norm() < panels.mesh.diameter[i]);
    CHECK(panels.colloc[i].norm() > panels.mesh.centroid[i].norm());
  }
  for (size_t v = 0; v < panels.vertex_normal.size(); ++v) {
    const Vec3 radial = panels.mesh.vertices[v].normalized();
    CHECK(panels.vertex_normal[v].dot(radial) > 0.99);
  }
}

TEST_CASE("zero excitation produces zero current") {
  const WaveContext ctx(1.0);
  const SurfacePanels panels(make_sphere(0.1, 1));
  const CurrentSolution sol = solve_surface_current(panels, IncidentField::zero(), ctx);
  CHECK(sol.iterations == 0);
  CHECK(sol.residual == 0.0);
  for (int i = 0; i < panels.count(); ++i) CHECK(sol.current(panels, i).norm() == 0.0);
}

TEST_CASE("zero current radiates nothing") {
  const WaveContext ctx(1.0);
  const SurfacePanels panels(make_sphere(0.1, 1));
  const CurrentSolution cur = zero_current(panels);
  const IncidentField inc = IncidentField::plane_wave(Vec3(0, 0, 1), Vec3c(1.0, 0.0, 0.0), ctx);
  std::mt19937 rng(4);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    Vec3 x(g(rng), g(rng), g(rng));
    if (x.norm() < 0.3) x *= 0.3 / x.norm() + 1.0;
    CHECK(scattered_E(x, panels, cur, ctx).norm() == 0.0);
    CHECK(scattered_H(x, panels, cur, ctx).norm() == 0.0);
    CHECK((near_field(x, panels, cur, inc, ctx) - inc(x)).norm() == 0.0);
  }
  CHECK(tangential_residual(panels, cur, IncidentField::zero(), ctx) == 0.0);
}

TEST_CASE("boundary matrix against a numeric kernel gradient") {
  const WaveContext ctx(0.7);
  const SurfacePanels panels(make_sphere(1.0, 1));
  const SurfaceMesh& mesh = panels.mesh;
  NearFieldOptions opt;
  const Eigen::MatrixXcd m = assemble_boundary_matrix(panels, ctx, opt);

  for (int i = 0; i < panels.count(); ++i) {
    CHECK((m.block<2, 2>(2 * i, 2 * i) - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() ==
          0.0);
  }

  // a pair far enough apart that the plain rule is used
  int row = 0, col = -1;
  double best = 0.0;
  for (int q = 1; q < panels.count(); ++q) {
    const double dist = (panels.colloc[row] - mesh.centroid[q]).norm();
    if (dist > best) {
      best = dist;
      col = q;
    }
  }
  REQUIRE(best > 2.0 * std::max(mesh.diameter[row], mesh.diameter[col]));
  REQUIRE_FALSE(mesh.shares_vertex(row, col));

  // same nodes, but the kernel gradient of e^{ikr}/(2 pi r) by central
  // differences instead of the closed form
  const auto f = [&](double r) { return std::exp(cdouble(0.0, ctx.k * r)) / (2.0 * pi * r); };
  const double h = 1e-6;
  Eigen::Matrix<cdouble, 3, 2> inner = Eigen::Matrix<cdouble, 3, 2>::Zero();
  const TriangleRule& rule = triangle_rule(2);
  const Vec3 a = mesh.v0(col), b = mesh.v1(col), c = mesh.v2(col);
  const double area = 0.5 * (b - a).cross(c - a).norm();
  const Vec3& xp = panels.colloc[row];
  for (size_t n = 0; n < rule.w.size(); ++n) {
    const Vec3 t = rule.b0[n] * a + rule.b1[n] * b + rule.b2[n] * c;
    const double r = (xp - t).norm();
    const cdouble fp = (f(r + h) - f(r - h)) / (2.0 * h);
    const Vec3c grad = (rule.w[n] * area * fp / r) * (xp - t).cast<cdouble>();
    inner.col(0) += ccross(grad, panels.t1[col].cast<cdouble>());
    inner.col(1) += ccross(grad, panels.t2[col].cast<cdouble>());
  }
  Eigen::Matrix<double, 2, 3> left;
  left.row(0) = panels.t1[row].transpose();
  left.row(1) = panels.t2[row].transpose();
  left = left * cross_matrix(panels.cnormal[row]);
  const Eigen::Matrix2cd want = left.cast<cdouble>() * inner;
  const Eigen::Matrix2cd got = m.block<2, 2>(2 * row, 2 * col);
  CHECK((got - want).cwiseAbs().maxCoeff() / want.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("current scales linearly with the excitation") {
  const WaveContext ctx(1.0);
  const SurfacePanels panels(make_sphere(0.1, 1));
  const IncidentField inc = IncidentField::plane_wave(Vec3(0, 0, 1), Vec3c(1.0, 0.0, 0.0), ctx);
  const cdouble cscale(0.7, -1.3);
  IncidentField scaled;
  scaled.sampler = [inc, cscale](const Vec3& x) { return Vec6c(cscale * inc(x)); };
  const CurrentSolution sol = solve_surface_current(panels, inc, ctx);
  const CurrentSolution sol_c = solve_surface_current(panels, scaled, ctx);
  CHECK(max_current_diff(panels, sol, panels, sol_c, cscale * Mat3c::Identity()) < 1e-10);
}

TEST_CASE("solution rotates with the scene") {
  const WaveContext ctx(1.0);
  const Mat3 R = Eigen::AngleAxisd(0.83, Vec3(1.0, 2.0, -0.5).normalized()).toRotationMatrix();
  const SurfacePanels panels(make_sphere(0.1, 1));
  const SurfacePanels rpanels(make_sphere(0.1, 1).rotated(R));
  const IncidentField inc = IncidentField::plane_wave(Vec3(0, 0, 1), Vec3c(1.0, 0.0, 0.0), ctx);
  const Vec3c rE0 = (R * Vec3(1, 0, 0)).cast<cdouble>();
  const IncidentField rinc = IncidentField::plane_wave(R * Vec3(0, 0, 1), rE0, ctx);
  const CurrentSolution sol = solve_surface_current(panels, inc, ctx);
  const CurrentSolution rsol = solve_surface_current(rpanels, rinc, ctx);
  CHECK(max_current_diff(panels, sol, rpanels, rsol, R.cast<cdouble>()) < 1e-9);
  const Vec3 x(0.5, -0.3, 0.9);
  const Vec3c e = scattered_E(x, panels, sol, ctx);
  const Vec3c re = scattered_E(R * x, rpanels, rsol, ctx);
  CHECK((re - R.cast<cdouble>() * e).norm() / e.norm() < 1e-10);
}

TEST_CASE("conducting sphere solve sharpens under refinement") {
  const WaveContext ctx(1.0);
  const IncidentField inc = IncidentField::plane_wave(Vec3(0, 0, 1), Vec3c(1.0, 0.0, 0.0), ctx);
  double prev_tres = 0.0, prev_resid = 0.0;
  for (int ref : {1, 2}) {
    const SurfacePanels panels(make_sphere(0.1, ref));
    const CurrentSolution sol = solve_surface_current(panels, inc, ctx);
    CHECK(sol.iterations > 0);
    CHECK(sol.tangential_defect < 1e-12);
    CHECK(sol.condition_estimate > 1.0);
    CHECK(sol.condition_estimate < 100.0);
    const double tres = tangential_residual(panels, sol, inc, ctx);
    if (ref == 1) {
      CHECK(tres < 0.08);
      CHECK(sol.residual < 0.05);
    } else {
      CHECK(tres < 0.04);
      CHECK(sol.residual < 0.03);
      CHECK(tres < prev_tres);
      CHECK(sol.residual < prev_resid);
    }
    prev_tres = tres;
    prev_resid = sol.residual;
  }
}

TEST_CASE("scattered far field matches the dipole route") {
  const double k = 1.0, a = 0.1;
  const WaveContext ctx(k);
  const IncidentField inc = IncidentField::plane_wave(Vec3(0, 0, 1), Vec3c(1.0, 0.0, 0.0), ctx);
  const SurfacePanels panels(make_sphere(a, 2));
  const CurrentSolution sol = solve_surface_current(panels, inc, ctx);

  // conducting small sphere: electric response 3 I, magnetic response -3/2 I
  const double V = 4.0 * pi / 3.0 * a * a * a;
  const Vec6c u0 = inc(Vec3::Zero());
  const DipoleMoments mom =
      induced_moments(3.0 * Mat3c::Identity(), -1.5 * Mat3c::Identity(), V, ctx.eps0, ctx.mu0,
                      Vec3c(u0.head<3>()), Vec3c(u0.tail<3>()));
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  const double r = 50.0 / k;
  for (int trial = 0; trial < 6; ++trial) {
    Vec3 dir(g(rng), g(rng), g(rng));
    dir.normalize();
    const Vec3c F = far_field_from_moments(mom, dir, ctx);
    const Vec3c want = F * std::exp(cdouble(0.0, k * r)) / r;
    const Vec3c got = scattered_E(r * dir, panels, sol, ctx);
    CHECK((got - want).norm() / want.norm() < 0.09);
  }
}

TEST_CASE("scattered H is the scaled curl of scattered E") {
  const WaveContext ctx(1.0, 3.0, 1.5);
  const SurfacePanels panels(make_sphere(0.1, 1));
  const IncidentField inc = IncidentField::plane_wave(Vec3(0, 0, 1), Vec3c(1.0, 0.0, 0.0), ctx);
  const CurrentSolution sol = solve_surface_current(panels, inc, ctx);
  const Vec3 x(0.5, -0.3, 0.9);
  const double h = 1e-4;
  Eigen::Matrix3cd jac;
  for (int c = 0; c < 3; ++c) {
    Vec3 dx = Vec3::Zero();
    dx[c] = h;
    jac.col(c) =
        (scattered_E(x + dx, panels, sol, ctx) - scattered_E(x - dx, panels, sol, ctx)) /
        (2.0 * h);
  }
  const Vec3c curl(jac(2, 1) - jac(1, 2), jac(0, 2) - jac(2, 0), jac(1, 0) - jac(0, 1));
  const Vec3c want = cdouble(0.0, ctx.omega() * ctx.mu0) * scattered_H(x, panels, sol, ctx);
  CHECK((curl - want).norm() / want.norm() < 1e-5);
}

TEST_CASE("evaluation on the current sheet is refused") {
  const WaveContext ctx(1.0);
  const SurfacePanels panels(make_sphere(0.1, 1));
  const CurrentSolution cur = zero_current(panels);
  CHECK_THROWS_AS(scattered_E(panels.colloc[0], panels, cur, ctx), SingularEvaluation);
  CHECK_THROWS_AS(scattered_H(panels.mesh.centroid[3], panels, cur, ctx), SingularEvaluation);
  CHECK_NOTHROW(scattered_E(Vec3(0.0, 0.0, 0.4), panels, cur, ctx));
}

TEST_CASE("particle excitation reproduces the local field at its own center") {
  const WaveContext ctx(1.0);
  Scene scene;
  scene.ctx = ctx;
  const MaterialContrast m(cdouble(3.0, 0.0), 1.0, 0.0, 1.0, 1.0, 1.0, 0.05);
  scene.particles.push_back(ball_particle(Vec3(0, 0, -10), 0.05, m));
  scene.particles.push_back(ball_particle(Vec3(0, 0, 10), 0.05, m));
  const IncidentField inc = IncidentField::plane_wave(Vec3(1, 0, 0), Vec3c(0.0, 1.0, 0.0), ctx);
  const LocalFields lf = solve_direct(scene, inc);
  for (int j = 0; j < 2; ++j) {
    const IncidentField exc = particle_excitation(j, lf, scene, inc);
    const Vec6c at_center = exc(scene.particles[j].x);
    CHECK((at_center - lf.v[j]).norm() < 1e-12);
  }
  CHECK_THROWS_AS(particle_excitation(5, lf, scene, inc), InvalidConfiguration);
}
