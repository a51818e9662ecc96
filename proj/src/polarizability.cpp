#include "smallscat/polarizability.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "smallscat/errors.hpp"

namespace smallscat {

double psi_kernel(const Vec3& t, const Vec3& s, const Vec3& normal_t) {
  const Vec3 d = t - s;
  const double r = d.norm();
  if (r == 0.0) throw SingularEvaluation("psi kernel evaluated at coincident points");
  return -d.dot(normal_t) / (r * r * r);
}

namespace {

// Near-pair classification for panel-to-panel quadrature: touching panels get
// the configured subdivision depth, close-but-separate panels one level.
int subdivision_levels(const SurfaceMesh& mesh, int p, int q, const QuadratureSpec& spec) {
  if (mesh.shares_vertex(p, q)) return spec.near_refine;
  const double d = (mesh.centroid[p] - mesh.centroid[q]).norm();
  if (d < 2.0 * std::max(mesh.diameter[p], mesh.diameter[q])) return 1;
  return 0;
}

}  // namespace

PanelOperators::PanelOperators(const SurfaceMesh& mesh, const QuadratureSpec& spec)
    : mesh_(mesh), spec_(spec) {
  const int P = mesh_.panel_count();
  if (P == 0) throw InvalidConfiguration("panel operators need a non-empty mesh");
  if (P > spec_.panel_budget) {
    std::ostringstream os;
    os << "mesh has " << P << " panels, beyond the dense-operator budget of "
       << spec_.panel_budget << " (about " << (2.0 * P * P * 8.0 / 1e9)
       << " GB); refine less or raise the budget";
    throw InvalidConfiguration(os.str());
  }

  single_layer_.resize(P, P);
  chain_step_.resize(P, P);
  const TriangleRule& rule = triangle_rule(spec_.order);
  std::atomic<int> bad_panel{-1};

#pragma omp parallel for schedule(dynamic, 8)
  for (int p = 0; p < P; ++p) {
    const Vec3 cp = mesh_.centroid[p];
    for (int q = 0; q < P; ++q) {
      const Vec3& a = mesh_.v0(q);
      const Vec3& b = mesh_.v1(q);
      const Vec3& c = mesh_.v2(q);
      const Vec3& nq = mesh_.normal[q];
      auto one_over_r = [&](const Vec3& t) { return 1.0 / (cp - t).norm(); };
      auto psi_src = [&](const Vec3& w) {
        const Vec3 d = w - cp;
        const double r = d.norm();
        return -d.dot(nq) / (r * r * r);
      };
      double K, C;
      if (q == p) {
        // Collocation point lies in the panel plane: psi vanishes there, and
        // the 1/r integral is finite once split around the centroid.
        C = 0.0;
        if (spec_.strategy == SingularStrategy::duffy_polar)
          K = integrate_triangle_duffy<double>(a, b, c, cp, spec_.duffy_points, one_over_r);
        else
          K = integrate_triangle_subdivided<double>(a, b, c, rule, spec_.near_refine + 3,
                                                    one_over_r);
      } else {
        const int levels = subdivision_levels(mesh_, p, q, spec_);
        if (levels > 0) {
          K = integrate_triangle_subdivided<double>(a, b, c, rule, levels, one_over_r);
          C = integrate_triangle_subdivided<double>(a, b, c, rule, levels, psi_src);
        } else {
          K = integrate_triangle<double>(a, b, c, rule, one_over_r);
          C = integrate_triangle<double>(a, b, c, rule, psi_src);
        }
      }
      if (!std::isfinite(K) || !std::isfinite(C)) bad_panel.store(q);
      single_layer_(p, q) = K;
      chain_step_(p, q) = C;
    }
  }
  if (bad_panel.load() >= 0)
    throw EvaluationError("non-finite panel-operator entry", bad_panel.load());
}

const Eigen::MatrixXd& PanelOperators::normal_derivative() {
  if (have_normal_derivative_) return normal_derivative_;
  const int P = mesh_.panel_count();
  normal_derivative_.resize(P, P);
  const TriangleRule& rule = triangle_rule(spec_.order);
#pragma omp parallel for schedule(dynamic, 8)
  for (int p = 0; p < P; ++p) {
    const Vec3 cp = mesh_.centroid[p];
    const Vec3 np = mesh_.normal[p];
    for (int q = 0; q < P; ++q) {
      if (q == p) {
        normal_derivative_(p, q) = 0.0;
        continue;
      }
      auto psi_tgt = [&](const Vec3& t) {
        const Vec3 d = cp - t;
        const double r = d.norm();
        return -d.dot(np) / (r * r * r);
      };
      const int levels = subdivision_levels(mesh_, p, q, spec_);
      normal_derivative_(p, q) =
          levels > 0 ? integrate_triangle_subdivided<double>(mesh_.v0(q), mesh_.v1(q),
                                                             mesh_.v2(q), rule, levels, psi_tgt)
                     : integrate_triangle<double>(mesh_.v0(q), mesh_.v1(q), mesh_.v2(q), rule,
                                                  psi_tgt);
    }
  }
  have_normal_derivative_ = true;
  return normal_derivative_;
}

PolarizabilitySolver::PolarizabilitySolver(const SurfaceMesh& mesh, const QuadratureSpec& spec)
    : ops_(std::make_unique<PanelOperators>(mesh, spec)) {
  const SurfaceMesh& m = ops_->mesh();
  volume_ = mesh_measures(m).volume;
  if (!(volume_ > 0.0)) throw InvalidConfiguration("mesh encloses no volume");
  // Closed-surface moment  int s_i N_j dS = V delta_ij  (exact for polyhedra).
  b0_.setZero();
  for (int p = 0; p < m.panel_count(); ++p)
    b0_ += m.area[p] * m.centroid[p] * m.normal[p].transpose();
  chain_state_.clear();
}

Mat3 PolarizabilitySolver::b_chain(int chain_length) {
  if (chain_length < 0) throw std::invalid_argument("chain length must be >= 0");
  const SurfaceMesh& m = ops_->mesh();
  const int P = m.panel_count();
  while (static_cast<int>(b_cache_.size()) <= chain_length) {
    const int len = static_cast<int>(b_cache_.size());
    if (len == 0) {
      chain_state_.assign(3, Eigen::VectorXd(P));
      Eigen::VectorXd nj(P);
      for (int j = 0; j < 3; ++j) {
        for (int p = 0; p < P; ++p) nj[p] = m.normal[p][j];
        chain_state_[j] = ops_->single_layer() * nj;
      }
    } else {
      for (int j = 0; j < 3; ++j)
        chain_state_[j] = ops_->chain_step() * chain_state_[j];
    }
    Mat3 b = Mat3::Zero();
    for (int j = 0; j < 3; ++j)
      for (int p = 0; p < P; ++p)
        for (int i = 0; i < 3; ++i) b(i, j) += m.area[p] * m.normal[p][i] * chain_state_[j][p];
    b_cache_.push_back(b);
  }
  return b_cache_[chain_length];
}

Mat3 PolarizabilitySolver::partial_sum(int p) {
  while (static_cast<int>(sums_.size()) <= p) {
    const int m = static_cast<int>(sums_.size());
    if (m == 0) {
      sums_.push_back((2.0 / volume_) * b0_);
    } else {
      const double coef = (2.0 / volume_) * std::pow(-1.0 / (2.0 * pi), m);
      sums_.push_back(sums_.back() + coef * b_chain(m - 1));
    }
  }
  return sums_[p];
}

PolarizabilityTensor PolarizabilitySolver::alpha(cdouble gamma, int order) {
  if (order < 1) throw std::invalid_argument("series order must be >= 1");
  if (std::abs(gamma) > 1.0 + 1e-9) {
    std::ostringstream os;
    os << "|gamma| = " << std::abs(gamma) << " > 1: outside the series' validity";
    throw OutOfRegion(os.str(), -1);
  }

  PolarizabilityTensor out;
  out.order = order;
  if (gamma == cdouble(0.0, 0.0)) return out;

  // The truncated series is sum_{j=0..order} gamma^{j+1} S_j with S_j the
  // partial sums of the weighted chain tensors; successive corrections are
  // exactly gamma^{j+1} S_j, which gives the empirical ratio directly.
  Mat3c acc = Mat3c::Zero();
  cdouble gp = gamma;
  std::vector<double> corr;
  int growing = 0;
  double worst_ratio = 0.0;
  for (int j = 0; j <= order; ++j) {
    const Mat3c delta = gp * partial_sum(j).cast<cdouble>();
    acc += delta;
    corr.push_back(delta.norm());
    if (j >= 1 && corr[j - 1] > 0.0) {
      const double ratio = corr[j] / corr[j - 1];
      worst_ratio = std::max(worst_ratio, ratio);
      growing = ratio > 1.0 ? growing + 1 : 0;
      if (growing >= 3) {
        std::ostringstream os;
        os << "correction norms grew for 3 consecutive orders (ratio " << ratio
           << "); series diverges for this shape/contrast";
        throw NonConvergence(os.str(), worst_ratio, corr);
      }
    }
    gp *= gamma;
  }
  out.value = acc;
  out.correction_norms = corr;
  const int n = static_cast<int>(corr.size());
  out.q_hat = (n >= 2 && corr[n - 2] > 0.0) ? corr[n - 1] / corr[n - 2] : 0.0;
  out.error_estimate = out.q_hat < 1.0 && out.q_hat > 0.0
                           ? corr.back() * out.q_hat / (1.0 - out.q_hat)
                           : corr.back();
  return out;
}

PolarizabilityTensor PolarizabilitySolver::beta(const MaterialContrast& m, int order) {
  PolarizabilityTensor out;
  out.order = order;
  if (m.skin) {
    PolarizabilityTensor part = alpha(cdouble(-1.0, 0.0), order);
    out.value += part.value;
    out.q_hat = std::max(out.q_hat, part.q_hat);
    out.error_estimate += part.error_estimate;
  }
  if (m.gamma_mu != 0.0) {
    PolarizabilityTensor part = alpha(cdouble(m.gamma_mu, 0.0), order);
    out.value += part.value;
    out.q_hat = std::max(out.q_hat, part.q_hat);
    out.error_estimate += part.error_estimate;
  }
  return out;
}

BChainTensor compute_b_tensor(const SurfaceMesh& mesh, int chain_length,
                              const QuadratureSpec& spec) {
  PolarizabilitySolver solver(mesh, spec);
  BChainTensor out;
  out.value = solver.b_chain(chain_length);
  out.chain_length = chain_length;
  out.panels = mesh.panel_count();
  return out;
}

cdouble ball_polarizability(cdouble eps_eff, double eps0) {
  const cdouble den = eps_eff + 2.0 * eps0;
  if (std::abs(den) == 0.0)
    throw InvalidConfiguration("ball polarizability is singular at eps = -2 eps0");
  return 3.0 * (eps_eff - eps0) / den;
}

DipoleMoments induced_moments(const Mat3c& alpha, const Mat3c& beta, double volume,
                              double eps0, double mu0, const Vec3c& E, const Vec3c& H) {
  DipoleMoments d;
  d.P = eps0 * volume * (alpha * E);
  d.M = mu0 * volume * (beta * H);
  return d;
}

}  // namespace smallscat
