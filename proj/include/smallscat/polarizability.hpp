#pragma once

#include <memory>
#include <vector>

#include "smallscat/geometry.hpp"
#include "smallscat/linalg.hpp"
#include "smallscat/material.hpp"
#include "smallscat/quadrature.hpp"

namespace smallscat {

// Static double-layer kernel psi(t, s) = d/dN_t (1/|s-t|) = -((t-s).N_t)/|s-t|^3.
// The normal belongs to the first argument.  Throws SingularEvaluation when the
// points coincide.
double psi_kernel(const Vec3& t, const Vec3& s, const Vec3& normal_t);

// Double surface integral of N_i(t) N_j(s) against a chain of chain_length psi
// kernels followed by the 1/r weight.  chain_length = 0 is the bare 1/r-weighted
// double integral.  Units: length^3.
struct BChainTensor {
  Mat3 value = Mat3::Zero();
  int chain_length = 0;
  int panels = 0;
};

struct PolarizabilityTensor {
  Mat3c value = Mat3c::Zero();
  int order = 0;             // series truncation
  double q_hat = 0.0;        // empirical ratio of successive corrections
  double error_estimate = 0.0;
  std::vector<double> correction_norms;  // ||term_j|| for j = 0..order
};

// Dense panel representation of the static surface operators on one mesh.
//
// Functions on the surface are sampled at panel centroids.  Entries carry the
// integral over the source panel, so operator application is a plain
// matrix-vector product:
//   single_layer   S[p][q] = int_{Tq} dt / |c_p - t|
//   chain_step     C[p][q] = int_{Tq} psi(w, c_p) dw      (normal at the source)
//   normal_deriv   D[p][q] = int_{Tq} psi(c_p, t) dt      (normal at the target)
// Self entries of C and D vanish identically on flat panels; the self entry of
// S uses the configured singular strategy.
class PanelOperators {
 public:
  PanelOperators(const SurfaceMesh& mesh, const QuadratureSpec& spec);

  const Eigen::MatrixXd& single_layer() const { return single_layer_; }
  const Eigen::MatrixXd& chain_step() const { return chain_step_; }
  const Eigen::MatrixXd& normal_derivative();  // built on first use

  const SurfaceMesh& mesh() const { return mesh_; }
  const QuadratureSpec& spec() const { return spec_; }

 private:
  SurfaceMesh mesh_;
  QuadratureSpec spec_;
  Eigen::MatrixXd single_layer_;
  Eigen::MatrixXd chain_step_;
  Eigen::MatrixXd normal_derivative_;
  bool have_normal_derivative_ = false;
};

BChainTensor compute_b_tensor(const SurfaceMesh& mesh, int chain_length,
                              const QuadratureSpec& spec);

// Truncated boundary-series evaluation of the polarizability tensors of one
// particle.  Holds the panel operators and the chain tensors so repeated
// evaluations at different contrasts reuse the expensive parts.
class PolarizabilitySolver {
 public:
  PolarizabilitySolver(const SurfaceMesh& mesh, const QuadratureSpec& spec);

  // Electric polarizability at contrast gamma, series truncated at `order`.
  // Requires order >= 1 and |gamma| <= 1 + tol; detects divergence of the
  // correction sequence and throws NonConvergence.
  PolarizabilityTensor alpha(cdouble gamma, int order);

  // Magnetic polarizability: alpha(-1) when the skin regime is active, plus
  // alpha(gamma_mu) when mu != mu0.  Zero tensor when neither applies.
  PolarizabilityTensor beta(const MaterialContrast& m, int order);

  Mat3 b_chain(int chain_length);  // cached chain tensors
  double volume() const { return volume_; }
  PanelOperators& operators() { return *ops_; }

 private:
  Mat3 partial_sum(int p);  // S_p = sum_{m<=p} (2/V)(-1/2pi)^m b^(m)

  std::unique_ptr<PanelOperators> ops_;
  double volume_ = 0.0;
  Mat3 b0_ = Mat3::Zero();                  // closed-surface moment, V * I
  std::vector<Eigen::VectorXd> chain_state_;  // current chain vectors per axis
  std::vector<Mat3> b_cache_;               // index = chain length
  std::vector<Mat3> sums_;                  // partial sums S_p
};

// Analytic ball polarizability 3 (eps_eff - eps0) / (eps_eff + 2 eps0); valid
// for any eps_eff away from -2 eps0, including where the surface series does
// not converge.
cdouble ball_polarizability(cdouble eps_eff, double eps0);

// Induced dipole moments P = eps0 V alpha E, M = mu0 V beta H.
struct DipoleMoments {
  Vec3c P = Vec3c::Zero();
  Vec3c M = Vec3c::Zero();
};
DipoleMoments induced_moments(const Mat3c& alpha, const Mat3c& beta, double volume,
                              double eps0, double mu0, const Vec3c& E, const Vec3c& H);

}  // namespace smallscat
