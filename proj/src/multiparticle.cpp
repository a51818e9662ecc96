#include "smallscat/multiparticle.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

#include "smallscat/errors.hpp"

namespace smallscat {

namespace {

// Closed-form ball series limit 2 gamma / (1 - gamma/3).
cdouble ball_alpha(cdouble gamma) {
  const cdouble den = 1.0 - gamma / 3.0;
  if (std::abs(den) < 1e-14)
    throw InvalidConfiguration("ball polarizability is resonant at gamma = 3");
  return 2.0 * gamma / den;
}

}  // namespace

ParticleInstance make_particle(const SurfaceMesh& mesh, const MaterialContrast& m,
                               const Vec3& position, const QuadratureSpec& spec,
                               int series_order) {
  PolarizabilitySolver solver(mesh, spec);
  ParticleInstance p;
  p.x = position;
  p.alpha = solver.alpha(m.gamma_eps, series_order).value;
  p.beta = solver.beta(m, series_order).value;
  p.volume = solver.volume();
  p.a = mesh.characteristic_a;
  p.shape = "mesh";
  p.material = m;
  return p;
}

ParticleInstance ball_particle(const Vec3& position, double radius,
                               const MaterialContrast& m) {
  if (!(radius > 0.0)) throw InvalidConfiguration("ball radius must be positive");
  ParticleInstance p;
  p.x = position;
  p.alpha = ball_alpha(m.gamma_eps) * Mat3c::Identity();
  cdouble b(0.0, 0.0);
  if (m.skin) b += ball_alpha(cdouble(-1.0, 0.0));
  if (m.gamma_mu != 0.0) b += ball_alpha(cdouble(m.gamma_mu, 0.0));
  p.beta = b * Mat3c::Identity();
  p.volume = 4.0 * pi * radius * radius * radius / 3.0;
  p.a = radius;
  p.shape = "ball";
  p.material = m;
  return p;
}

IncidentField IncidentField::plane_wave(const Vec3& direction, const Vec3c& E0,
                                        const WaveContext& ctx) {
  const double n = direction.norm();
  if (!(n > 0.0)) throw InvalidConfiguration("plane wave needs a nonzero direction");
  const Vec3 khat = direction / n;
  const double e_norm = E0.norm();
  if (e_norm > 0.0) {
    const double along = std::abs(khat.cast<cdouble>().dot(E0));
    if (along > 1e-12 * e_norm) {
      std::ostringstream os;
      os << "plane-wave E0 must be transverse to the propagation direction "
         << "(violation " << along / e_norm << " relative)";
      throw InvalidConfiguration(os.str());
    }
  }
  const Vec3c H0 = ctx.admittance() * ccross(khat, E0);
  const double k = ctx.k;
  IncidentField f;
  f.sampler = [khat, E0, H0, k](const Vec3& x) {
    const cdouble phase = std::exp(cdouble(0.0, k * khat.dot(x)));
    Vec6c u;
    u.head<3>() = phase * E0;
    u.tail<3>() = phase * H0;
    return u;
  };
  return f;
}

IncidentField IncidentField::zero() {
  IncidentField f;
  f.sampler = [](const Vec3&) { return Vec6c::Zero().eval(); };
  return f;
}

double Scene::min_pair_distance() const {
  const int n = size();
  if (n < 2) return std::numeric_limits<double>::infinity();
  double d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double r = (particles[i].x - particles[j].x).norm();
      if (r == 0.0) {
        std::ostringstream os;
        os << "particles " << i << " and " << j << " have coincident centers";
        throw InvalidConfiguration(os.str());
      }
      d = std::min(d, r);
    }
  return d;
}

double Scene::max_characteristic_a() const {
  double a = 0.0;
  for (const auto& p : particles) a = std::max(a, p.a);
  return a;
}

FarZoneReport Scene::regime_report() const {
  return farzone_error_report(max_characteristic_a(), min_pair_distance(), ctx.k);
}

namespace {

Mat6c interaction_block(const Scene& scene, int j, int i) {
  const ParticleInstance& pi = scene.particles[i];
  const Vec3 d = scene.particles[j].x - pi.x;
  const cdouble g = green(scene.particles[j].x, pi.x, scene.ctx.k);
  return g * s_operator(pi.alpha, pi.beta, d, scene.ctx, pi.volume).matrix;
}

double u0_norm(const std::vector<Vec6c>& u0) {
  double m = 0.0;
  for (const auto& u : u0) m = std::max(m, u.cwiseAbs().maxCoeff());
  return m;
}

std::vector<Vec6c> sample_incident(const Scene& scene, const IncidentField& incident) {
  std::vector<Vec6c> u0(scene.size());
  for (int j = 0; j < scene.size(); ++j) u0[j] = incident(scene.particles[j].x);
  return u0;
}

// Residual of the linear system for a candidate solution, max-norm.
double system_residual(const Scene& scene, const std::vector<Vec6c>& u0,
                       const std::vector<Vec6c>& v) {
  const int n = scene.size();
  double worst = 0.0;
#pragma omp parallel for schedule(dynamic) reduction(max : worst)
  for (int j = 0; j < n; ++j) {
    Vec6c r = v[j] - u0[j];
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      r -= interaction_block(scene, j, i) * v[i];
    }
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

DominanceReport dominance_bound(const Scene& scene) {
  DominanceReport rep;
  const int n = scene.size();
  if (n < 2) return rep;
  const double d_min = scene.min_pair_distance();

  double bound = 0.0, crude = 0.0;
#pragma omp parallel for schedule(dynamic) reduction(max : bound, crude)
  for (int j = 0; j < n; ++j) {
    Mat6c row_sum = Mat6c::Zero();
    Eigen::Matrix<double, 6, 1> abs_rows = Eigen::Matrix<double, 6, 1>::Zero();
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      const ParticleInstance& pi = scene.particles[i];
      const Vec3 d = scene.particles[j].x - pi.x;
      const Mat6c s = s_operator(pi.alpha, pi.beta, d, scene.ctx, pi.volume).matrix;
      row_sum += green(scene.particles[j].x, pi.x, scene.ctx.k) * s;
      abs_rows += s.cwiseAbs().rowwise().sum();
    }
    bound = std::max(bound, row_sum_norm(row_sum));
    crude = std::max(crude, abs_rows.maxCoeff() / (scene.ctx.k * d_min));
  }
  rep.bound = bound;
  rep.bound_crude = crude;
  rep.dominant = bound < 1.0;
  return rep;
}

LocalFields solve_direct(const Scene& scene, const IncidentField& incident,
                         const SolveOptions& opt) {
  const int n = scene.size();
  if (n > opt.dense_cap) {
    std::ostringstream os;
    os << "direct solve for " << n << " particles exceeds the dense cap of " << opt.dense_cap;
    throw InvalidConfiguration(os.str());
  }
  LocalFields out;
  out.route = SolverRoute::direct;
  out.v.resize(n);
  if (n == 0) return out;
  scene.min_pair_distance();  // validates distinct centers

  const std::vector<Vec6c> u0 = sample_incident(scene, incident);
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(6 * n, 6 * n);
  Eigen::VectorXcd b(6 * n);
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < n; ++j) {
    b.segment<6>(6 * j) = u0[j];
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      A.block<6, 6>(6 * j, 6 * i) = -interaction_block(scene, j, i);
    }
  }

  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  Eigen::VectorXcd x = lu.solve(b);
  for (int j = 0; j < n; ++j) out.v[j] = x.segment<6>(6 * j);

  out.residual = system_residual(scene, u0, out.v);
  const double scale = std::max(1e-300, u0_norm(u0));
  if (!(out.residual <= 1e-10 * scale) || !x.allFinite()) {
    // Estimate ||A^-1|| from a few solves to report conditioning.
    double ainv = 0.0;
    Eigen::VectorXcd probe = Eigen::VectorXcd::Ones(6 * n);
    for (int it = 0; it < 3; ++it) {
      probe = lu.solve(probe);
      const double nrm = probe.template lpNorm<Eigen::Infinity>();
      ainv = std::max(ainv, nrm);
      if (nrm > 0) probe /= nrm;
    }
    const double cond = ainv * A.cwiseAbs().rowwise().sum().maxCoeff();
    std::ostringstream os;
    os << "direct solve failed the residual check (residual " << out.residual
       << ", rhs scale " << scale << ")";
    throw NearEigenvalue(os.str(), cond);
  }
  return out;
}

LocalFields solve_fixed_point(const Scene& scene, const IncidentField& incident,
                              const SolveOptions& opt) {
  const int n = scene.size();
  LocalFields out;
  out.route = SolverRoute::fixed_point;
  out.v.resize(n);
  if (n == 0) return out;

  const DominanceReport dom = dominance_bound(scene);
  if (!dom.dominant) {
    if (opt.strict_dominance) {
      std::ostringstream os;
      os << "interaction matrix is not diagonally dominant (bound " << dom.bound
         << " >= 1); refusing to iterate in strict mode";
      throw NonConvergence(os.str(), dom.bound, {});
    }
    std::cerr << "warning: dominance bound " << dom.bound
              << " >= 1, rerouting to the direct solver\n";
    LocalFields direct = solve_direct(scene, incident, opt);
    direct.rerouted = true;
    return direct;
  }

  const std::vector<Vec6c> u0 = sample_incident(scene, incident);
  std::vector<Vec6c> cur = u0, next(n);
  for (int sweep = 1; sweep <= opt.max_iter; ++sweep) {
#pragma omp parallel for schedule(dynamic)
    for (int j = 0; j < n; ++j) {
      Vec6c acc = u0[j];
      for (int i = 0; i < n; ++i) {
        if (i == j) continue;
        acc += interaction_block(scene, j, i) * cur[i];
      }
      next[j] = acc;
    }
    double change = 0.0;
    for (int j = 0; j < n; ++j)
      change = std::max(change, (next[j] - cur[j]).cwiseAbs().maxCoeff());
    out.update_history.push_back(change);
    cur.swap(next);
    out.iterations = sweep;
    if (change < opt.tol) break;
    if (sweep == opt.max_iter) {
      std::ostringstream os;
      os << "fixed-point iteration did not reach tol " << opt.tol << " in " << opt.max_iter
         << " sweeps (last change " << change << ")";
      double rate = 0.0;
      if (out.update_history.size() >= 2 && out.update_history.front() > 0.0)
        rate = std::pow(change / out.update_history.front(),
                        1.0 / double(out.update_history.size() - 1));
      throw NonConvergence(os.str(), rate, out.update_history);
    }
  }

  out.v = cur;
  out.residual = system_residual(scene, u0, out.v);
  const auto& h = out.update_history;
  if (h.size() >= 2 && h.front() > 0.0 && h.back() > 0.0)
    out.rate = std::pow(h.back() / h.front(), 1.0 / double(h.size() - 1));
  return out;
}

namespace {

double guard_radius(const Scene& scene, double guard_margin) {
  if (scene.size() == 0) return 0.0;
  if (scene.size() == 1) return guard_margin * 10.0 * scene.particles[0].a;
  return guard_margin * scene.min_pair_distance();
}

Vec6c scattered_sum(const Vec3& x, const LocalFields& fields, const Scene& scene,
                    int skip) {
  Vec6c acc = Vec6c::Zero();
  for (int i = 0; i < scene.size(); ++i) {
    if (i == skip) continue;
    const ParticleInstance& p = scene.particles[i];
    const Vec3 d = x - p.x;
    acc += green(x, p.x, scene.ctx.k) *
           (s_operator(p.alpha, p.beta, d, scene.ctx, p.volume).matrix * fields.v[i]);
  }
  return acc;
}

}  // namespace

Vec6c evaluate_field(const Vec3& x, const LocalFields& fields, const Scene& scene,
                     const IncidentField& incident, double guard_margin) {
  if (static_cast<int>(fields.v.size()) != scene.size())
    throw InvalidConfiguration("local fields do not match the scene size");
  const double guard = guard_radius(scene, guard_margin);
  for (int i = 0; i < scene.size(); ++i) {
    const double r = (x - scene.particles[i].x).norm();
    if (r < guard) {
      std::ostringstream os;
      os << "point (" << x.x() << ", " << x.y() << ", " << x.z()
         << ") is inside the far-zone guard of particle " << i << " (|x-x_i| = " << r
         << " < " << guard << "); use the near-field route";
      throw OutOfRegion(os.str(), i);
    }
  }
  return incident(x) + scattered_sum(x, fields, scene, -1);
}

Vec6c scattered_excluding(int j, const Vec3& x, const LocalFields& fields,
                          const Scene& scene) {
  if (j < 0 || j >= scene.size()) throw InvalidConfiguration("particle index out of range");
  return scattered_sum(x, fields, scene, j);
}

FieldGrid field_grid(const Vec3& lo, const Vec3& hi, int nx, int ny, int nz,
                     const LocalFields& fields, const Scene& scene,
                     const IncidentField& incident, double guard_margin) {
  if (nx < 1 || ny < 1 || nz < 1)
    throw InvalidConfiguration("field grid needs at least one sample per axis");
  FieldGrid g;
  g.origin = lo;
  g.spacing = Vec3(nx > 1 ? (hi.x() - lo.x()) / (nx - 1) : 0.0,
                   ny > 1 ? (hi.y() - lo.y()) / (ny - 1) : 0.0,
                   nz > 1 ? (hi.z() - lo.z()) / (nz - 1) : 0.0);
  g.nx = nx;
  g.ny = ny;
  g.nz = nz;
  g.values.assign(static_cast<size_t>(nx) * ny * nz, Vec6c::Zero());
  g.mask.assign(g.values.size(), 0);

  const double guard = guard_radius(scene, guard_margin);
#pragma omp parallel for collapse(2) schedule(dynamic)
  for (int iz = 0; iz < nz; ++iz) {
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const Vec3 x = g.point(ix, iy, iz);
        bool masked = false;
        for (const auto& p : scene.particles) {
          if ((x - p.x).norm() < guard) {
            masked = true;
            break;
          }
        }
        const int idx = g.index(ix, iy, iz);
        if (masked) continue;
        g.values[idx] = incident(x) + scattered_sum(x, fields, scene, -1);
        g.mask[idx] = 1;
      }
    }
  }
  return g;
}

}  // namespace smallscat
