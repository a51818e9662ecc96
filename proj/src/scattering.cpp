#include "smallscat/scattering.hpp"

#include <sstream>

#include "smallscat/errors.hpp"

namespace smallscat {

WaveContext::WaveContext(double k_in, double eps0_in, double mu0_in)
    : k(k_in), eps0(eps0_in), mu0(mu0_in) {
  if (!(k > 0.0)) throw InvalidConfiguration("wavenumber k must be positive");
  if (!(eps0 > 0.0) || !(mu0 > 0.0))
    throw InvalidConfiguration("background eps0 and mu0 must be positive");
}

cdouble green(const Vec3& x, const Vec3& y, double k) {
  const double r = (x - y).norm();
  if (r == 0.0) throw SingularEvaluation("green function evaluated at coincident points");
  const double kr = k * r;
  return std::exp(cdouble(0.0, kr)) / kr;
}

FarZoneReport farzone_error_report(double a, double d, double k, double ka_limit,
                                   double kd_limit) {
  FarZoneReport rep;
  rep.ka = k * a;
  rep.kd = k * d;
  rep.ka_limit = ka_limit;
  rep.kd_limit = kd_limit;
  rep.g_error = a / d + k * a * a / d;
  rep.grad_error = 1.0 / (k * d);
  rep.regime_ok = rep.ka <= ka_limit && rep.kd >= kd_limit;
  return rep;
}

namespace {

Vec3 stable_plane_axis(const Vec3& z) {
  Vec3 ref = Vec3::UnitX();
  if (std::abs(z.dot(ref)) > 1.0 - 1e-6) ref = Vec3::UnitY();
  return (ref - ref.dot(z) * z).normalized();
}

}  // namespace

ScatterFrame::ScatterFrame(const Vec3& incident_dir, const Vec3& scatter_dir) {
  const double ni = incident_dir.norm();
  const double ns = scatter_dir.norm();
  if (!(ni > 0.0) || !(ns > 0.0))
    throw InvalidConfiguration("scatter frame needs nonzero directions");
  incident = incident_dir / ni;
  beta = scatter_dir / ns;

  const Vec3 cp = beta.cross(incident);
  const double s = cp.norm();
  const double c = incident.dot(beta);
  theta = std::atan2(s, c);

  // x perpendicular to the scattering plane, oriented so the scattered
  // direction lies in the +y half-plane.
  ax_z = incident;
  ax_x = s > 1e-12 ? Vec3(cp / s) : stable_plane_axis(ax_z);
  ax_y = ax_z.cross(ax_x);
  ax_xp = ax_x;
  ax_zp = beta;
  ax_yp = ax_zp.cross(ax_xp);
}

Mat3 ScatterFrame::axes() const {
  Mat3 m;
  m.col(0) = ax_x;
  m.col(1) = ax_y;
  m.col(2) = ax_z;
  return m;
}

Mat3 ScatterFrame::axes_out() const {
  Mat3 m;
  m.col(0) = ax_xp;
  m.col(1) = ax_yp;
  m.col(2) = ax_zp;
  return m;
}

Mat2c s_matrix_E(const Mat3c& alpha, const Mat3c& beta_t, const ScatterFrame& frame,
                 const WaveContext& ctx, double volume) {
  const double ct = std::cos(frame.theta);
  const double st = std::sin(frame.theta);
  const double mu0 = ctx.mu0;
  const double pref = ctx.k * ctx.k * ctx.k * volume / (4.0 * pi);
  Mat2c s;
  s(0, 0) = mu0 * beta_t(0, 0) + alpha(1, 1) * ct - alpha(2, 1) * st;
  s(0, 1) = alpha(1, 0) * ct - alpha(2, 0) * st - mu0 * beta_t(0, 1);
  s(1, 0) = alpha(0, 1) - mu0 * beta_t(1, 0) * ct + mu0 * beta_t(2, 0) * st;
  s(1, 1) = alpha(0, 0) + mu0 * beta_t(1, 1) * ct - mu0 * beta_t(2, 1) * st;
  return pref * s;
}

Vec3c h_from_e(const Vec3c& e_prime, const ScatterFrame& frame, const WaveContext& ctx) {
  const double n = e_prime.norm();
  const double along = std::abs(e_prime.dot(frame.beta.cast<cdouble>()));
  if (n > 0.0 && along > 1e-8 * n) {
    std::ostringstream os;
    os << "far-field E has a component " << along / n
       << " (relative) along the scattering direction; expected transverse";
    throw InvalidConfiguration(os.str());
  }
  return ctx.admittance() * ccross(frame.beta, e_prime);
}

SOperator6 s_operator(const Mat3c& alpha, const Mat3c& beta_t, const ScatterFrame& frame,
                      const WaveContext& ctx, double volume) {
  return s_operator(alpha, beta_t, frame.beta, ctx, volume);
}

SOperator6 s_operator(const Mat3c& alpha, const Mat3c& beta_t, const Vec3& scatter_dir,
                      const WaveContext& ctx, double volume) {
  SOperator6 op;
  op.prefactor = ctx.k * ctx.k * ctx.k * volume / (4.0 * pi);

  const Vec3 b = scatter_dir.normalized();
  const Mat3 proj = Mat3::Identity() - b * b.transpose();
  const Mat3 bx = cross_matrix(b);
  const double y0 = ctx.admittance();  // sqrt(eps0/mu0)

  // E block rows: radiation of P = eps0 V alpha E and M = mu0 V beta H,
  // re-expressed as the coefficient of e^{ikr}/(kr).
  const Mat3c s_ee = op.prefactor * (proj * alpha).eval();
  const Mat3c s_eh = -op.prefactor * (ctx.mu0 / y0) * (bx * beta_t).eval();
  op.matrix.block<3, 3>(0, 0) = s_ee;
  op.matrix.block<3, 3>(0, 3) = s_eh;
  // H block rows: H' = sqrt(eps0/mu0) beta x E'.
  op.matrix.block<3, 3>(3, 0) = y0 * (bx * s_ee).eval();
  op.matrix.block<3, 3>(3, 3) = y0 * (bx * s_eh).eval();
  return op;
}

Vec3c far_field_from_moments(const DipoleMoments& d, const Vec3& beta_dir,
                             const WaveContext& ctx) {
  const Vec3 b = beta_dir.normalized();
  const double k2 = ctx.k * ctx.k;
  const Vec3c term_p = ccross(ccross(b, d.P), b.cast<cdouble>().eval()) / ctx.eps0;
  const Vec3c term_m = std::sqrt(ctx.mu0 / ctx.eps0) * ccross(b, d.M);
  return (k2 / (4.0 * pi)) * (term_p - term_m);
}

Vec6c apply_via_matrix_E(const Mat3c& alpha, const Mat3c& beta_t, const ScatterFrame& frame,
                         const WaveContext& ctx, double volume, const Vec6c& u) {
  const Mat3c rot = frame.axes().cast<cdouble>();
  const Mat3c alpha_f = rot.adjoint() * alpha * rot;
  const Mat3c beta_f = rot.adjoint() * beta_t * rot;
  const Mat2c s = s_matrix_E(alpha_f, beta_f, frame, ctx, volume);

  // Subscript 1 is the component along x (normal to the scattering plane),
  // subscript 2 along y; the 2x2 matrix acts on (E_2, E_1).
  const Vec3c e = u.head<3>();
  const cdouble e2 = frame.ax_y.cast<cdouble>().dot(e);
  const cdouble e1 = frame.ax_x.cast<cdouble>().dot(e);
  const cdouble e2p = s(0, 0) * e2 + s(0, 1) * e1;
  const cdouble e1p = s(1, 0) * e2 + s(1, 1) * e1;

  Vec6c out;
  const Vec3c e_out = e2p * frame.ax_yp.cast<cdouble>() + e1p * frame.ax_xp.cast<cdouble>();
  out.head<3>() = e_out;
  out.tail<3>() = h_from_e(e_out, frame, ctx);
  return out;
}

}  // namespace smallscat
