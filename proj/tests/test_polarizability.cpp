#include <doctest.h>

#include <cmath>
#include <random>

#include "smallscat/errors.hpp"
#include "smallscat/geometry.hpp"
#include "smallscat/linalg.hpp"
#include "smallscat/material.hpp"
#include "smallscat/polarizability.hpp"

using namespace smallscat;

namespace {

double diag_mean(const Mat3c& m) { return m.diagonal().real().mean(); }

double offdiag_max(const Mat3c& m) {
  double worst = 0.0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (r != c) worst = std::max(worst, std::abs(m(r, c)));
  return worst;
}

}  // namespace

TEST_CASE("double-layer kernel point values") {
  // -((t-s).N)/|s-t|^3 with t = (1,0,0), s = (-1,0,0), N = (1,0,0).
  CHECK(psi_kernel(Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(1, 0, 0)) ==
        doctest::Approx(-0.25).epsilon(1e-15));
  CHECK_THROWS_AS(psi_kernel(Vec3(1, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 0)), SingularEvaluation);
}

TEST_CASE("double-layer kernel on a sphere is -1/(2r)") {
  // For t, s on a sphere about the origin and N = t/|t|, the kernel collapses
  // to -1 / (2 |t - s|).
  std::mt19937 rng(7);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 t = Vec3(g(rng), g(rng), g(rng)).normalized();
    const Vec3 s = Vec3(g(rng), g(rng), g(rng)).normalized();
    if ((t - s).norm() < 1e-3) continue;
    CHECK(psi_kernel(t, s, t) ==
          doctest::Approx(-0.5 / (t - s).norm()).epsilon(1e-13));
  }
}

TEST_CASE("bare chain moment of the unit sphere approaches 16 pi^2 / 9") {
  const double exact = 16.0 * pi * pi / 9.0;
  const QuadratureSpec spec;
  double prev_err = 1e9;
  for (int ref = 1; ref <= 3; ++ref) {
    const BChainTensor b = compute_b_tensor(make_sphere(1.0, ref), 0, spec);
    const double v = b.value.trace() / 3.0;
    const double err = std::abs(v - exact) / exact;
    CHECK(err < prev_err);
    CHECK(offdiag_max(b.value.cast<cdouble>()) < 0.02 * std::abs(v));
    prev_err = err;
  }
  CHECK(prev_err < 0.01);
}

TEST_CASE("one chain step multiplies the sphere moment by -2 pi / 3") {
  const QuadratureSpec spec;
  const SurfaceMesh mesh = make_sphere(1.0, 3);
  const double b0 = compute_b_tensor(mesh, 0, spec).value.trace() / 3.0;
  const double b1 = compute_b_tensor(mesh, 1, spec).value.trace() / 3.0;
  CHECK(b1 / b0 == doctest::Approx(-2.0 * pi / 3.0).epsilon(0.02));
}

TEST_CASE("panel operator self entries") {
  PanelOperators ops(make_sphere(1.0, 1), QuadratureSpec{});
  const int n = static_cast<int>(ops.single_layer().rows());
  for (int p = 0; p < n; ++p) {
    CHECK(ops.single_layer()(p, p) > 0.0);
    CHECK(ops.chain_step()(p, p) == 0.0);
    CHECK(ops.normal_derivative()(p, p) == 0.0);
  }
}

TEST_CASE("series reproduces the closed-form ball polarizability") {
  PolarizabilitySolver solver(make_sphere(1.0, 3), QuadratureSpec{});

  SUBCASE("dielectric eps = 3") {
    const PolarizabilityTensor t = solver.alpha(cdouble(0.5, 0.0), 10);
    CHECK(diag_mean(t.value) == doctest::Approx(1.2).epsilon(0.01));
    CHECK(offdiag_max(t.value) < 1e-3 * std::abs(diag_mean(t.value)));
    CHECK(t.q_hat < 1.0);
  }
  SUBCASE("ideal conductor limit gamma = 1") {
    // On the convergence boundary the corrections bottom out at the
    // discretization floor, so the truncation order stays moderate.
    const PolarizabilityTensor t = solver.alpha(cdouble(1.0, 0.0), 10);
    CHECK(diag_mean(t.value) == doctest::Approx(3.0).epsilon(0.02));
  }
  SUBCASE("magnetic response gamma = -1") {
    const PolarizabilityTensor t = solver.alpha(cdouble(-1.0, 0.0), 25);
    CHECK(diag_mean(t.value) == doctest::Approx(-1.5).epsilon(0.02));
  }
}

TEST_CASE("correction ratios stay below one and roughly constant") {
  for (const char* shape : {"sphere", "ellipsoid"}) {
    const SurfaceMesh mesh = shape == std::string("sphere")
                                 ? make_sphere(1.0, 2)
                                 : make_ellipsoid(1.0, 1.0, 2.0, 2);
    PolarizabilitySolver solver(mesh, QuadratureSpec{});
    const PolarizabilityTensor t = solver.alpha(cdouble(0.5, 0.0), 7);
    REQUIRE(t.correction_norms.size() >= 7);
    std::vector<double> ratios;
    for (size_t j = 2; j + 1 < 7; ++j)
      ratios.push_back(t.correction_norms[j + 1] / t.correction_norms[j]);
    double lo = 1e300, hi = 0.0;
    for (double r : ratios) {
      CHECK(r < 1.0);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    CHECK(hi / lo < 2.5);
  }
}

TEST_CASE("alpha is scale invariant") {
  PolarizabilitySolver small(make_sphere(1.0, 2), QuadratureSpec{});
  PolarizabilitySolver large(make_sphere(3.0, 2), QuadratureSpec{});
  const Mat3c a = small.alpha(cdouble(0.5, 0.0), 8).value;
  const Mat3c b = large.alpha(cdouble(0.5, 0.0), 8).value;
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("contrast outside the convergence disk is rejected") {
  PolarizabilitySolver solver(make_sphere(1.0, 1), QuadratureSpec{});
  CHECK_THROWS_AS(solver.alpha(cdouble(1.6, 0.0), 8), Error);
}

TEST_CASE("magnetic polarizability routes") {
  PolarizabilitySolver solver(make_sphere(1.0, 3), QuadratureSpec{});

  SUBCASE("plain dielectric has no magnetic response") {
    const MaterialContrast m(cdouble(3.0, 0.0), 1.0, 0.0, 1.0, 1.0, 1.0, 1.0);
    CHECK(solver.beta(m, 10).value.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("perfect conductor") {
    const MaterialContrast m = MaterialContrast::perfect_conductor();
    const PolarizabilityTensor t = solver.beta(m, 25);
    CHECK(diag_mean(t.value) == doctest::Approx(-1.5).epsilon(0.02));
  }
  SUBCASE("permeability contrast mu = 4") {
    const MaterialContrast m(cdouble(1.0, 0.0), 4.0, 0.0, 1.0, 1.0, 1.0, 1.0);
    const PolarizabilityTensor t = solver.beta(m, 16);
    // ball limit 3 (mu - mu0) / (mu + 2 mu0) = 1.5
    CHECK(diag_mean(t.value) == doctest::Approx(1.5).epsilon(0.015));
  }
}

TEST_CASE("closed-form ball polarizability") {
  CHECK(ball_polarizability(cdouble(3.0, 0.0), 1.0) == cdouble(1.2, 0.0));
  CHECK(std::abs(ball_polarizability(cdouble(1e9, 0.0), 1.0) - cdouble(3.0, 0.0)) < 1e-8);
  CHECK(std::abs(ball_polarizability(cdouble(1.0, 0.0), 1.0)) == 0.0);
}

TEST_CASE("induced moments scale with volume and permittivity") {
  const Mat3c alpha = 2.0 * Mat3c::Identity();
  const Mat3c beta = cdouble(0.0, 1.0) * Mat3c::Identity();
  const Vec3c E(1.0, 0.0, 0.0), H(0.0, 1.0, 0.0);
  const DipoleMoments d = induced_moments(alpha, beta, 0.5, 3.0, 2.0, E, H);
  CHECK((d.P - Vec3c(3.0, 0.0, 0.0)).norm() < 1e-15);            // eps0 V alpha E
  CHECK((d.M - Vec3c(0.0, cdouble(0.0, 1.0), 0.0)).norm() < 1e-15);  // mu0 V beta H
}
