#pragma once

#include <cmath>

#include "smallscat/linalg.hpp"
#include "smallscat/polarizability.hpp"

namespace smallscat {

// Background wave parameters.  Everything downstream works in the dimensionless
// convention where the outgoing wave is e^{ikr}/(kr) and time dependence is
// e^{-i omega t}.
struct WaveContext {
  double k = 1.0;
  double eps0 = 1.0;
  double mu0 = 1.0;

  WaveContext() = default;
  WaveContext(double k_in, double eps0_in = 1.0, double mu0_in = 1.0);

  double wavelength() const { return 2.0 * pi / k; }
  double omega() const { return k / std::sqrt(eps0 * mu0); }
  // sqrt(eps0/mu0), the E -> H far-zone factor.
  double admittance() const { return std::sqrt(eps0 / mu0); }
};

// Outgoing dimensionless wave e^{ik|x-y|}/(k|x-y|).
cdouble green(const Vec3& x, const Vec3& y, double k);

// Error budget of the far-zone simplifications: g(x, x_i) factored out of the
// particle integral (relative error ~ a/d + k a^2/d) and 1/r dropped against ik
// in the gradient (relative error 1/(kd)).
struct FarZoneReport {
  bool regime_ok = false;
  double g_error = 0.0;
  double grad_error = 0.0;
  double ka = 0.0;
  double kd = 0.0;
  double ka_limit = 0.2;
  double kd_limit = 10.0;
};

FarZoneReport farzone_error_report(double a, double d, double k, double ka_limit = 0.2,
                                   double kd_limit = 10.0);

// Incident/scattered direction pair with the two right-handed frames used by
// the 2x2 far-field matrix.  Unprimed axes: z along the incident direction,
// x perpendicular to the scattering plane, y = z cross x.  Primed axes: z'
// along the scattered direction, x' = x, y' = z' cross x'.  When the
// directions are (anti)parallel the plane is fixed by the global x axis (or y
// if the directions nearly coincide with x).
struct ScatterFrame {
  Vec3 incident = Vec3::UnitZ();
  Vec3 beta = Vec3::UnitZ();
  double theta = 0.0;
  Vec3 ax_x, ax_y, ax_z;     // unprimed frame, global components
  Vec3 ax_xp, ax_yp, ax_zp;  // primed frame

  ScatterFrame(const Vec3& incident_dir, const Vec3& scatter_dir);

  Mat3 axes() const;        // columns x, y, z
  Mat3 axes_out() const;    // columns x', y', z'
};

// 2x2 far-field matrix for transverse electric components, acting as
// S_E (E_2, E_1)^T = (E'_2, E'_1)^T where subscript 1 is the component along
// the frame's x axis (normal to the scattering plane) and 2 along y (in the
// plane).  alpha and beta_t must already be expressed in the frame's xyz axes.
Mat2c s_matrix_E(const Mat3c& alpha, const Mat3c& beta_t, const ScatterFrame& frame,
                 const WaveContext& ctx, double volume);

// Far-zone H' from E': H' = sqrt(eps0/mu0) beta x E'.  E' must be transverse
// to the scattering direction.
Vec3c h_from_e(const Vec3c& e_prime, const ScatterFrame& frame, const WaveContext& ctx);

// 6x6 map from the local 6-vector (E, H) at a particle to the outgoing
// amplitude: U'(x) = (e^{ikr}/(kr)) S U + o(1/r).  Built from the radiation of
// the induced dipole pair, which handles arbitrary local fields, not just
// plane waves.
struct SOperator6 {
  Mat6c matrix = Mat6c::Zero();
  double prefactor = 0.0;  // k^3 V / 4 pi

  Vec6c apply(const Vec6c& u) const { return matrix * u; }
};

SOperator6 s_operator(const Mat3c& alpha, const Mat3c& beta_t, const ScatterFrame& frame,
                      const WaveContext& ctx, double volume);

// Same operator from the scattering direction alone; the dipole route never
// needs the incident direction.
SOperator6 s_operator(const Mat3c& alpha, const Mat3c& beta_t, const Vec3& scatter_dir,
                      const WaveContext& ctx, double volume);

// Classical radiation of the dipole pair (P, M): the coefficient of e^{ikr}/r
// in the scattered E.  Independent route used to cross-check s_operator.
Vec3c far_field_from_moments(const DipoleMoments& d, const Vec3& beta_dir,
                             const WaveContext& ctx);

// Route through the 2x2 matrix: extract transverse components in the frame,
// apply s_matrix_E, rebuild E' in global axes, derive H'.  Valid for
// plane-wave-consistent 6-vectors; coefficient convention matches s_operator.
Vec6c apply_via_matrix_E(const Mat3c& alpha, const Mat3c& beta_t, const ScatterFrame& frame,
                         const WaveContext& ctx, double volume, const Vec6c& u);

}  // namespace smallscat
