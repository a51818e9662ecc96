// Acceptance gate: one check per release criterion, one PASS/FAIL line each.
// Exit code is the number of failed checks.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "smallscat/geometry.hpp"
#include "smallscat/linalg.hpp"
#include "smallscat/medium.hpp"
#include "smallscat/multiparticle.hpp"
#include "smallscat/nearfield.hpp"
#include "smallscat/polarizability.hpp"
#include "smallscat/run.hpp"
#include "smallscat/scattering.hpp"

using namespace smallscat;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MaterialContrast dielectric(double eps, double scale, double omega = 1.0) {
  return MaterialContrast(cdouble(eps, 0.0), 1.0, 0.0, omega, 1.0, 1.0, scale);
}

double diag_err(const Mat3c& m, double want) {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(m(i, i) - want));
  return worst / std::abs(want);
}

double offdiag_max(const Mat3c& m) {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) worst = std::max(worst, std::abs(m(i, j)));
  return worst;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// Well separated random dielectric balls; dominant by construction.
Scene random_scene(std::mt19937& rng, int n, double k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scene scene;
  scene.ctx = WaveContext(k);
  const double d = 30.0 / k;
  int side = 1;
  while (side * side * side < n) ++side;
  std::vector<Vec3> sites;
  for (int iz = 0; iz < side; ++iz)
    for (int iy = 0; iy < side; ++iy)
      for (int ix = 0; ix < side; ++ix) sites.push_back(d * Vec3(ix, iy, iz));
  std::shuffle(sites.begin(), sites.end(), rng);
  for (int i = 0; i < n; ++i) {
    const double a = (0.02 + 0.08 * u(rng)) / k;
    const double eps = 2.0 + 2.0 * u(rng);
    const Vec3 jit = 0.2 * d * Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
    scene.particles.push_back(ball_particle(sites[i] + jit, a, dielectric(eps, a)));
  }
  return scene;
}

double max_rel_diff(const std::vector<Vec6c>& a, const std::vector<Vec6c>& b) {
  double scale = 0.0, diff = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    scale = std::max(scale, a[i].norm());
    diff = std::max(diff, (a[i] - b[i]).norm());
  }
  return diff / std::max(scale, 1e-300);
}

void check_ball_tensor() {
  const auto t0 = std::chrono::steady_clock::now();
  PolarizabilitySolver solver(make_sphere(1.0, 4), QuadratureSpec{});
  const MaterialContrast m = dielectric(3.0, 1.0);
  const Mat3c a = solver.alpha(m.gamma_eps, 8).value;
  const double el = seconds_since(t0);
  const double derr = diag_err(a, 1.2);
  const double off = offdiag_max(a) / 1.2;
  report(1, "dielectric ball tensor at refinement 4",
         derr <= 0.02 && off <= 1e-2 && el <= 120.0,
         fmt("diag err %.2e (<= 2e-2), offdiag %.2e (<= 1e-2), %.1f s (<= 120)", derr, off, el));
}

void check_correction_ratios() {
  bool ok = true;
  std::string detail;
  for (const char* shape : {"sphere", "ellipsoid 2:1"}) {
    const SurfaceMesh mesh = shape[0] == 's' ? make_sphere(1.0, 3)
                                             : make_ellipsoid(1.0, 1.0, 2.0, 3);
    PolarizabilitySolver solver(mesh, QuadratureSpec{});
    const PolarizabilityTensor t = solver.alpha(cdouble(0.5, 0.0), 7);
    double lo = 1e300, hi = 0.0;
    for (int n = 2; n <= 6; ++n) {
      const double r = t.correction_norms[n + 1] / t.correction_norms[n];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    ok = ok && hi < 1.0 && hi / lo <= 2.5;
    detail += std::string(shape) + fmt(" ratios %.3f..%.3f (< 1, spread <= 2.5x); ", lo, hi);
  }
  report(2, "correction ratios stay geometric, orders 2..6", ok, detail);
}

void check_conductor_beta() {
  PolarizabilitySolver solver(make_sphere(1.0, 3), QuadratureSpec{});
  const Mat3c b = solver.beta(MaterialContrast::perfect_conductor(), 25).value;
  const double derr = diag_err(b, -1.5);
  const double off = offdiag_max(b) / 1.5;
  report(3, "conductor magnetic response -1.5 I", derr <= 0.02 && off <= 1e-2,
         fmt("diag err %.2e (<= 2e-2), offdiag %.2e", derr, off));
}

void check_b_tensor() {
  const double want = 16.0 * pi * pi / 9.0;
  double prev = 1e300;
  bool monotone = true;
  double final_err = 0.0;
  for (int ref = 2; ref <= 4; ++ref) {
    const BChainTensor b = compute_b_tensor(make_sphere(1.0, ref), 0, QuadratureSpec{});
    const double err = std::abs(b.value.trace() / 3.0 - want) / want;
    monotone = monotone && err < prev;
    prev = err;
    final_err = err;
  }
  report(4, "normal-pair tensor of the unit sphere", monotone && final_err <= 0.02,
         fmt("err %.2e at refinement 4 (<= 2e-2), improving over refinements 2..4", final_err));
}

void check_lattice_bound() {
  const double k = 1.0, a = 0.1, d = 20.0;
  const MaterialContrast m = dielectric(3.0, a);
  Scene scene;
  scene.ctx = WaveContext(k);
  for (const Vec3& p : lattice_positions(100, d, 0.0, 1))
    scene.particles.push_back(ball_particle(p, a, m));
  const DominanceReport dom = dominance_bound(scene);
  const IncidentField inc =
      IncidentField::plane_wave(Vec3(0, 0, 1), Vec3c(1.0, 0.0, 0.0), scene.ctx);
  const LocalFields lf = solve_fixed_point(scene, inc);
  const bool ok = dom.bound <= 3e-2 && !lf.rerouted && lf.residual <= 1e-10 &&
                  lf.rate <= dom.bound;
  report(5, "100-site lattice, ka 0.1, kd 20", ok,
         fmt("bound %.2e (<= 3e-2), empirical rate %.2e <= bound, residual %.1e", dom.bound,
             lf.rate, lf.residual));
}

void check_route_agreement() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(23);
  std::uniform_int_distribution<int> size(2, 50);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Scene scene = random_scene(rng, size(rng), 1.0);
    const IncidentField inc = IncidentField::plane_wave(
        Vec3(0, 0, 1), Vec3c(1.0, cdouble(0.0, 0.5), 0.0), scene.ctx);
    const LocalFields fp = solve_fixed_point(scene, inc);
    const LocalFields dr = solve_direct(scene, inc);
    worst = std::max(worst, max_rel_diff(fp.v, dr.v));
  }
  const double el = seconds_since(t0);
  report(6, "fixed point vs direct, 20 scenes up to N = 50",
         worst <= 1e-8 && el <= 60.0,
         fmt("worst rel diff %.2e (<= 1e-8), %.1f s (<= 60)", worst, el));
}

void check_far_field_routes() {
  const WaveContext ctx(1.7, 2.0, 0.5);
  std::mt19937 rng(31);
  std::normal_distribution<double> g;
  auto rmat = [&] {
    Mat3c m;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = cdouble(g(rng), g(rng));
    return m;
  };
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Mat3c alpha = rmat(), beta = rmat();
    const double V = 0.5 + std::abs(g(rng));
    Vec3 n0(g(rng), g(rng), g(rng));
    n0.normalize();
    Vec3c e(g(rng) + cdouble(0, 1) * g(rng), g(rng) + cdouble(0, 1) * g(rng),
            g(rng) + cdouble(0, 1) * g(rng));
    e -= n0.cast<cdouble>().dot(e) * n0.cast<cdouble>();
    const Vec3c h = ctx.admittance() * ccross(n0, e);
    Vec3 dir(g(rng), g(rng), g(rng));
    dir.normalize();

    Vec6c u;
    u.head<3>() = e;
    u.tail<3>() = h;
    const Vec6c su = s_operator(alpha, beta, dir, ctx, V).matrix * u;
    const Vec3c via_matrix = Vec3c(su.head<3>()) / ctx.k;
    const DipoleMoments mom = induced_moments(alpha, beta, V, ctx.eps0, ctx.mu0, e, h);
    const Vec3c via_moments = far_field_from_moments(mom, dir, ctx);
    worst = std::max(worst, (via_matrix - via_moments).norm() / via_moments.norm());
  }
  report(7, "scattering operator vs dipole radiation, 100 draws", worst <= 1e-10,
         fmt("worst rel diff %.2e (<= 1e-10)", worst));
}

void check_surface_current() {
  const double k = 1.0, a = 0.1;
  const WaveContext ctx(k);
  const IncidentField inc = IncidentField::plane_wave(Vec3(0, 0, 1), Vec3c(1.0, 0.0, 0.0), ctx);
  const auto t0 = std::chrono::steady_clock::now();
  const SurfacePanels panels(make_sphere(a, 4));
  const CurrentSolution sol = solve_surface_current(panels, inc, ctx);
  const double tres = tangential_residual(panels, sol, inc, ctx);

  const double V = 4.0 * pi / 3.0 * a * a * a;
  const Vec6c u0 = inc(Vec3::Zero());
  const DipoleMoments mom =
      induced_moments(3.0 * Mat3c::Identity(), -1.5 * Mat3c::Identity(), V, ctx.eps0, ctx.mu0,
                      Vec3c(u0.head<3>()), Vec3c(u0.tail<3>()));
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  const double r = 50.0 / k;
  // worst deviation over directions, against the strongest probe direction
  double far_num = 0.0, far_scale = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    Vec3 dir(g(rng), g(rng), g(rng));
    dir.normalize();
    const Vec3c want = far_field_from_moments(mom, dir, ctx) * std::exp(cdouble(0.0, k * r)) / r;
    const Vec3c got = scattered_E(r * dir, panels, sol, ctx);
    far_num = std::max(far_num, (got - want).norm());
    far_scale = std::max(far_scale, want.norm());
  }
  const double far_dev = far_num / far_scale;
  const double el = seconds_since(t0);
  report(8, "conducting sphere current sheet at refinement 4",
         tres <= 0.01 && far_dev <= 0.05,
         fmt("tangential residual %.2e (<= 1e-2), far route dev %.2e (<= 5e-2), %.0f s", tres,
             far_dev, el));
}

void check_medium_consistency() {
  const double k = 1.0, L = 1.0, jitter = 0.3;
  const WaveContext ctx(k);
  const IncidentField inc = IncidentField::plane_wave(Vec3(0, 0, 1), Vec3c(1.0, 0.0, 0.0), ctx);

  std::vector<Vec3> dirs;
  std::mt19937 drng(2);
  std::normal_distribution<double> g;
  for (int i = 0; i < 10; ++i) {
    Vec3 d(g(drng), g(drng), g(drng));
    dirs.push_back(d.normalized());
  }

  struct Level {
    int m;
    double aod;
  };
  std::vector<double> discrepancy;
  for (const Level lv : {Level{3, 0.12}, Level{5, 0.10}, Level{7, 0.08}}) {
    const double d = L / lv.m;
    const double a = lv.aod * d;
    const int M = lv.m * lv.m * lv.m;
    const MaterialContrast mat = dielectric(3.0, a, ctx.omega());

    double mean_rel = 0.0;
    for (unsigned seed : {99u, 100u, 101u}) {
      Scene scene;
      scene.ctx = ctx;
      for (const Vec3& p : lattice_positions(M, d, jitter, seed))
        scene.particles.push_back(ball_particle(p, a, mat));
      const LocalFields lf = solve_direct(scene, inc);

      DensityField df;
      df.grid.h = d;
      df.grid.nx = df.grid.ny = df.grid.nz = lv.m;
      df.grid.origin = Vec3::Constant(-0.5 * L);
      df.density.assign(M, 1.0 / (d * d * d));
      df.templates = {ball_template(a, mat)};
      const PotentialQ q = q_from_density(df, ctx, 1);
      const EffectiveField ef = solve_effective_field(q, inc);

      double acc = 0.0;
      for (const Vec3& dir : dirs) {
        const Vec3 x = 1000.0 * L * dir;
        const Vec6c sd = evaluate_field(x, lf, scene, inc) - inc(x);
        const Vec6c sc = evaluate_effective(x, ef, q, inc) - inc(x);
        acc += ((sd - sc).norm() / sd.norm()) / dirs.size();
      }
      mean_rel += acc / 3.0;
    }
    discrepancy.push_back(mean_rel);
  }
  const bool monotone = discrepancy[1] < discrepancy[0] && discrepancy[2] < discrepancy[1];

  // a vanishing potential hands back the incident field exactly
  VoxelGrid zg;
  zg.nx = zg.ny = zg.nz = 3;
  zg.origin = Vec3::Constant(-1.5);
  const PotentialQ zq = scalar_potential(zg, std::vector<cdouble>(27, cdouble(0.0, 0.0)), ctx);
  const EffectiveField zf = solve_effective_field(zq, inc);
  double zero_dev = 0.0;
  for (int v = 0; v < zg.count(); ++v)
    zero_dev = std::max(zero_dev, (zf.u[v] - inc(zg.center(v))).cwiseAbs().maxCoeff());

  // the scaling diagnostics satisfy w * kappa = eps - eps0 by construction
  const LimitDiagnostics ld = limit_diagnostics(cdouble(3.0, 0.0), 1.0, 0.0, ctx.omega(), 0.1,
                                                cdouble(0.0, 0.0));
  const double w_dev = std::abs(ld.w - (cdouble(3.0, 0.0) - 1.0) / ld.kappa_implied);

  report(9, "dilute cloud vs continuum medium",
         monotone && zero_dev == 0.0 && w_dev <= 1e-12,
         fmt("far-field gap %.1e > %.1e > %.1e (monotone), ", discrepancy[0], discrepancy[1],
             discrepancy[2]) +
             fmt("zero-potential dev %.1e, scaling identity dev %.1e (<= 1e-12)", zero_dev,
                 w_dev));
}

void check_invariances() {
  std::mt19937 rng(41);
  const Scene scene = random_scene(rng, 8, 1.0);
  const IncidentField inc1 =
      IncidentField::plane_wave(Vec3(0, 0, 1), Vec3c(1.0, 0.0, 0.0), scene.ctx);
  const IncidentField inc2 = IncidentField::plane_wave(
      Vec3(1, 0, 0).normalized(), Vec3c(0.0, cdouble(0.0, 1.0), 0.0), scene.ctx);

  // linearity
  const cdouble c1(2.0, -1.0), c2(-0.5, 3.0);
  IncidentField mix;
  mix.sampler = [inc1, inc2, c1, c2](const Vec3& x) {
    return Vec6c(c1 * inc1(x) + c2 * inc2(x));
  };
  const LocalFields f1 = solve_direct(scene, inc1);
  const LocalFields f2 = solve_direct(scene, inc2);
  const LocalFields fm = solve_direct(scene, mix);
  double lin = 0.0;
  for (size_t j = 0; j < fm.v.size(); ++j)
    lin = std::max(lin, (fm.v[j] - c1 * f1.v[j] - c2 * f2.v[j]).norm() / fm.v[j].norm());

  // rotation equivariance
  const Mat3 R = Eigen::AngleAxisd(0.83, Vec3(1, 2, -0.5).normalized()).toRotationMatrix();
  Scene rsc = scene;
  for (ParticleInstance& p : rsc.particles) p.x = R * p.x;
  const IncidentField rinc = IncidentField::plane_wave(
      R * Vec3(0, 0, 1), (R * Vec3(1, 0, 0)).cast<cdouble>(), scene.ctx);
  const LocalFields fr = solve_direct(rsc, rinc);
  double rot = 0.0;
  for (size_t j = 0; j < fr.v.size(); ++j) {
    Vec6c want;
    want.head<3>() = R.cast<cdouble>() * Vec3c(f1.v[j].head<3>());
    want.tail<3>() = R.cast<cdouble>() * Vec3c(f1.v[j].tail<3>());
    rot = std::max(rot, (fr.v[j] - want).norm() / want.norm());
  }

  // permutation invariance
  std::vector<int> perm = {3, 0, 5, 1, 4, 2, 7, 6};
  Scene psc = scene;
  for (size_t j = 0; j < perm.size(); ++j) psc.particles[j] = scene.particles[perm[j]];
  const LocalFields fp = solve_direct(psc, inc1);
  double per = 0.0;
  for (size_t j = 0; j < perm.size(); ++j)
    per = std::max(per, (fp.v[j] - f1.v[perm[j]]).norm() / fp.v[j].norm());

  // determinism, both routes, bitwise
  double det = 0.0;
  for (LocalFields (*route)(const Scene&, const IncidentField&, const SolveOptions&) :
       {&solve_direct, &solve_fixed_point}) {
    const LocalFields a = route(scene, inc1, SolveOptions{});
    const LocalFields b = route(scene, inc1, SolveOptions{});
    for (size_t j = 0; j < a.v.size(); ++j)
      det = std::max(det, (a.v[j] - b.v[j]).cwiseAbs().maxCoeff());
  }

  report(10, "linearity, rotation, permutation, determinism",
         lin <= 1e-12 && rot <= 1e-10 && per <= 1e-12 && det == 0.0,
         fmt("linearity %.1e (<= 1e-12), rotation %.1e (<= 1e-10), ", lin, rot) +
             fmt("permutation %.1e (<= 1e-12), rerun diff %.1e (= 0)", per, det));
}

}  // namespace

int main() {
  check_ball_tensor();
  check_correction_ratios();
  check_conductor_beta();
  check_b_tensor();
  check_lattice_bound();
  check_route_agreement();
  check_far_field_routes();
  check_surface_current();
  check_medium_consistency();
  check_invariances();
  std::printf("%d/10 checks passed\n", 10 - failures);
  return failures;
}
