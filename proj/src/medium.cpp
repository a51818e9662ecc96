#include "smallscat/medium.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <sstream>

#include "smallscat/errors.hpp"

namespace smallscat {

ParticleTemplate ball_template(double radius, const MaterialContrast& m) {
  const ParticleInstance p = ball_particle(Vec3::Zero(), radius, m);
  ParticleTemplate t;
  t.alpha = p.alpha;
  t.beta = p.beta;
  t.volume = p.volume;
  t.a = p.a;
  t.shape = "ball";
  t.material = m;
  return t;
}

ParticleTemplate mesh_template(const SurfaceMesh& mesh, const MaterialContrast& m,
                               const QuadratureSpec& spec, int series_order) {
  const ParticleInstance p = make_particle(mesh, m, Vec3::Zero(), spec, series_order);
  ParticleTemplate t;
  t.alpha = p.alpha;
  t.beta = p.beta;
  t.volume = p.volume;
  t.a = p.a;
  t.shape = "mesh";
  t.material = m;
  return t;
}

void DensityField::validate() const {
  const int n = grid.count();
  if (n <= 0) throw InvalidConfiguration("density grid is empty");
  if (!(grid.h > 0.0)) throw InvalidConfiguration("voxel size must be positive");
  if (static_cast<int>(density.size()) != n)
    throw InvalidConfiguration("density array does not match the grid");
  if (!template_id.empty() && static_cast<int>(template_id.size()) != n)
    throw InvalidConfiguration("template ids do not match the grid");
  for (int v = 0; v < n; ++v) {
    if (!(density[v] >= 0.0) || !std::isfinite(density[v])) {
      std::ostringstream os;
      os << "voxel " << v << " has invalid density " << density[v];
      throw InvalidConfiguration(os.str());
    }
    if (density[v] > 0.0) {
      const int id = template_id.empty() ? 0 : template_id[v];
      if (id < 0 || id >= static_cast<int>(templates.size())) {
        std::ostringstream os;
        os << "voxel " << v << " has density " << density[v]
           << " but no particle template (id " << id << ")";
        throw InvalidConfiguration(os.str());
      }
    }
  }
}

const ParticleTemplate& DensityField::voxel_template(int idx) const {
  const int id = template_id.empty() ? 0 : template_id[idx];
  return templates.at(id);
}

std::vector<Vec3> icosa_directions(int level) {
  if (level < 0 || level > 4)
    throw InvalidConfiguration("direction table level must be between 0 and 4");
  const SurfaceMesh m = make_sphere(1.0, level);
  std::vector<Vec3> dirs(m.vertices.begin(), m.vertices.end());
  for (auto& d : dirs) d.normalize();
  return dirs;
}

namespace {

Mat6c template_operator(const ParticleTemplate& t, const Vec3& beta,
                        const WaveContext& ctx) {
  return s_operator(t.alpha, t.beta, beta, ctx, t.volume).matrix;
}

Mat6c template_operator_averaged(const ParticleTemplate& t, const WaveContext& ctx) {
  // Angular averages: <I - bb^T> = (2/3) I and <[b]x> = 0, so only the
  // diagonal blocks survive.
  const double pref = ctx.k * ctx.k * ctx.k * t.volume / (4.0 * pi);
  Mat6c m = Mat6c::Zero();
  m.block<3, 3>(0, 0) = (2.0 / 3.0) * pref * t.alpha;
  m.block<3, 3>(3, 3) = (2.0 / 3.0) * pref * ctx.mu0 * t.beta;
  return m;
}

// Conjugate each direction's operator into the frame with the direction as z;
// a direction-independent result marks an isotropic template.
bool template_isotropic(const ParticleTemplate& t, const WaveContext& ctx,
                        const std::vector<Vec3>& dirs) {
  Mat6c ref = Mat6c::Zero();
  double scale = 0.0;
  bool first = true;
  for (const auto& d : dirs) {
    const Mat3 r = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), d).toRotationMatrix();
    Mat6c rot6 = Mat6c::Zero();
    rot6.block<3, 3>(0, 0) = r.cast<cdouble>();
    rot6.block<3, 3>(3, 3) = r.cast<cdouble>();
    const Mat6c canon = rot6.adjoint() * template_operator(t, d, ctx) * rot6;
    if (first) {
      ref = canon;
      scale = std::max(1e-300, canon.cwiseAbs().maxCoeff());
      first = false;
      continue;
    }
    if ((canon - ref).cwiseAbs().maxCoeff() > 1e-6 * scale) return false;
  }
  return true;
}

}  // namespace

bool PotentialQ::nonzero(int voxel) const {
  switch (backing) {
    case Backing::scalar:
      return scalar[voxel] != cdouble(0.0, 0.0);
    case Backing::density:
      return density[voxel] > 0.0;
    case Backing::table: {
      const size_t nd = directions.size();
      for (size_t j = 0; j < nd; ++j)
        if (table[voxel * nd + j].cwiseAbs().maxCoeff() > 0.0) return true;
      return false;
    }
  }
  return false;
}

Mat6c PotentialQ::op(int voxel, const Vec3& beta) const {
  switch (backing) {
    case Backing::scalar:
      return scalar[voxel] * Mat6c::Identity();
    case Backing::density: {
      const double n = density[voxel];
      if (n == 0.0) return Mat6c::Zero();
      const int id = template_id.empty() ? 0 : template_id[voxel];
      return n * template_operator(templates.at(id), beta, ctx);
    }
    case Backing::table: {
      const size_t nd = directions.size();
      if (nd == 0) throw InvalidConfiguration("direction table is empty");
      size_t best = 0;
      double best_dot = -2.0;
      const Vec3 b = beta.normalized();
      for (size_t j = 0; j < nd; ++j) {
        const double dot = b.dot(directions[j]);
        if (dot > best_dot) {
          best_dot = dot;
          best = j;
        }
      }
      return table[voxel * nd + best];
    }
  }
  return Mat6c::Zero();
}

Mat6c PotentialQ::op_self(int voxel) const {
  switch (backing) {
    case Backing::scalar:
      return scalar[voxel] * Mat6c::Identity();
    case Backing::density: {
      const double n = density[voxel];
      if (n == 0.0) return Mat6c::Zero();
      const int id = template_id.empty() ? 0 : template_id[voxel];
      return n * template_operator_averaged(templates.at(id), ctx);
    }
    case Backing::table: {
      const size_t nd = directions.size();
      Mat6c acc = Mat6c::Zero();
      for (size_t j = 0; j < nd; ++j) acc += table[voxel * nd + j];
      return acc / double(nd);
    }
  }
  return Mat6c::Zero();
}

PotentialQ q_from_density(const DensityField& density, const WaveContext& ctx,
                          int direction_level) {
  density.validate();
  PotentialQ q;
  q.grid = density.grid;
  q.backing = PotentialQ::Backing::density;
  q.ctx = ctx;
  q.density = density.density;
  q.templates = density.templates;
  q.template_id = density.template_id;
  q.directions = icosa_directions(direction_level);

  q.isotropic = true;
  for (size_t t = 0; t < q.templates.size(); ++t) {
    bool used = false;
    for (int v = 0; v < q.grid.count() && !used; ++v)
      used = density.density[v] > 0.0 &&
             (q.template_id.empty() ? 0 : q.template_id[v]) == static_cast<int>(t);
    if (used && !template_isotropic(q.templates[t], ctx, q.directions)) {
      q.isotropic = false;
      break;
    }
  }
  return q;
}

PotentialQ scalar_potential(const VoxelGrid& grid, std::vector<cdouble> values,
                            const WaveContext& ctx) {
  if (static_cast<int>(values.size()) != grid.count())
    throw InvalidConfiguration("scalar potential does not match the grid");
  for (const auto& v : values)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw InvalidConfiguration("scalar potential has non-finite entries");
  PotentialQ q;
  q.grid = grid;
  q.backing = PotentialQ::Backing::scalar;
  q.ctx = ctx;
  q.scalar = std::move(values);
  q.isotropic = true;
  return q;
}

LimitDiagnostics limit_diagnostics(cdouble eps, double eps0, double sigma, double omega,
                                   double a_over_d, cdouble kappa) {
  if (!(a_over_d > 0.0 && a_over_d < 1.0))
    throw InvalidConfiguration("a/d must lie in (0, 1)");
  if (!(omega > 0.0)) throw InvalidConfiguration("omega must be positive");
  const double rho = a_over_d * a_over_d * a_over_d;
  const cdouble eps_eff = eps + cdouble(0.0, sigma / omega);
  const cdouble denom = eps_eff + 2.0 * eps0;

  LimitDiagnostics d;
  if (std::abs(denom) == 0.0) {
    if (kappa == cdouble(0.0, 0.0))
      throw InvalidConfiguration(
          "eps = -2 eps0 exactly with kappa = 0: the medium limit is singular");
    d.w = cdouble(std::numeric_limits<double>::infinity(), 0.0);
    d.kappa_implied = cdouble(0.0, 0.0);
    d.regime = LimitDiagnostics::Regime::resonant;
    return d;
  }
  d.w = rho * (eps_eff - eps0) / denom;
  d.kappa_implied = denom / rho;
  if (std::abs(d.w) < 1e-12)
    d.regime = LimitDiagnostics::Regime::vanishing;
  else if (sigma != 0.0)
    d.regime = LimitDiagnostics::Regime::dispersive;
  else
    d.regime = LimitDiagnostics::Regime::static_eps;
  return d;
}

cdouble self_ball_kernel(double k, double voxel_volume) {
  if (!(k > 0.0) || !(voxel_volume > 0.0))
    throw InvalidConfiguration("self kernel needs positive k and volume");
  const double rho = std::cbrt(3.0 * voxel_volume / (4.0 * pi));
  const cdouble ik(0.0, k);
  const cdouble e = std::exp(ik * rho);
  const double k2 = k * k;
  return (4.0 * pi / k) * (e * (rho / ik + 1.0 / k2) - 1.0 / k2);
}

namespace {

// Per-voxel scalar factor that can be folded into the state, leaving a kernel
// that depends only on the voxel offset.  Valid for scalar backing and for a
// single shared template.
bool foldable(const PotentialQ& q) {
  if (q.backing == PotentialQ::Backing::scalar) return true;
  if (q.backing != PotentialQ::Backing::density) return false;
  if (q.templates.size() == 1) return true;
  if (q.template_id.empty()) return true;
  for (int id : q.template_id)
    if (id != q.template_id.front()) return false;
  return true;
}

cdouble fold_factor(const PotentialQ& q, int voxel) {
  return q.backing == PotentialQ::Backing::scalar ? q.scalar[voxel]
                                                  : cdouble(q.density[voxel], 0.0);
}

struct OffsetKernel {
  // 6x6 kernel blocks for every voxel offset, self offset included.
  int nx, ny, nz;
  std::vector<Mat6c> blocks;
  std::vector<double> row_norms;

  int index(int dx, int dy, int dz) const {
    return (dx + nx - 1) + (2 * nx - 1) * ((dy + ny - 1) + (2 * ny - 1) * (dz + nz - 1));
  }
};

OffsetKernel build_offset_kernel(const PotentialQ& q) {
  const VoxelGrid& g = q.grid;
  OffsetKernel ker;
  ker.nx = g.nx;
  ker.ny = g.ny;
  ker.nz = g.nz;
  const int mx = 2 * g.nx - 1, my = 2 * g.ny - 1, mz = 2 * g.nz - 1;
  ker.blocks.resize(static_cast<size_t>(mx) * my * mz);
  ker.row_norms.resize(ker.blocks.size());

  const ParticleTemplate* tmpl = nullptr;
  if (q.backing == PotentialQ::Backing::density)
    tmpl = &q.templates.at(q.template_id.empty() ? 0 : q.template_id.front());

  const double h3 = g.cell_volume();
  const cdouble self = self_ball_kernel(q.ctx.k, h3);

#pragma omp parallel for collapse(2) schedule(static)
  for (int dz = -(ker.nz - 1); dz <= ker.nz - 1; ++dz) {
    for (int dy = -(ker.ny - 1); dy <= ker.ny - 1; ++dy) {
      for (int dx = -(ker.nx - 1); dx <= ker.nx - 1; ++dx) {
        const int idx = ker.index(dx, dy, dz);
        Mat6c block;
        if (dx == 0 && dy == 0 && dz == 0) {
          block = tmpl ? (self * template_operator_averaged(*tmpl, q.ctx)).eval()
                       : (self * Mat6c::Identity()).eval();
        } else {
          const Vec3 delta(dx * g.h, dy * g.h, dz * g.h);
          const double r = delta.norm();
          const cdouble gval = std::exp(cdouble(0.0, q.ctx.k * r)) / (q.ctx.k * r);
          block = tmpl ? (gval * h3 * template_operator(*tmpl, delta / r, q.ctx)).eval()
                       : (gval * h3 * Mat6c::Identity()).eval();
        }
        ker.blocks[idx] = block;
        ker.row_norms[idx] = row_sum_norm(block);
      }
    }
  }
  return ker;
}

struct SupportInfo {
  std::vector<int> voxels;      // grid indices with nonzero q
  std::vector<int> ix, iy, iz;  // unpacked coordinates
};

SupportInfo find_support(const PotentialQ& q) {
  SupportInfo s;
  const VoxelGrid& g = q.grid;
  for (int iz = 0; iz < g.nz; ++iz)
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix) {
        const int v = g.index(ix, iy, iz);
        if (q.nonzero(v)) {
          s.voxels.push_back(v);
          s.ix.push_back(ix);
          s.iy.push_back(iy);
          s.iz.push_back(iz);
        }
      }
  return s;
}

}  // namespace

EffectiveField solve_effective_field(const PotentialQ& q, const IncidentField& incident,
                                     const MediumSolveOptions& opt) {
  const VoxelGrid& g = q.grid;
  if (g.count() <= 0) throw InvalidConfiguration("effective-field grid is empty");
  if (!foldable(q))
    throw InvalidConfiguration(
        "effective-field solver requires a scalar potential or a single shared template");

  EffectiveField out;
  out.grid = g;
  out.u.resize(g.count());
  std::vector<Vec6c> u0(g.count());
  for (int v = 0; v < g.count(); ++v) u0[v] = incident(g.center(v));

  const SupportInfo supp = find_support(q);
  const int ns = static_cast<int>(supp.voxels.size());
  if (ns == 0) {
    out.u = u0;
    out.route = SolverRoute::fixed_point;
    return out;
  }

  const OffsetKernel ker = build_offset_kernel(q);

  // Kernel norm: max over support targets of the summed row norms, with the
  // per-voxel factor folded in.
  double knorm = 0.0;
#pragma omp parallel for schedule(static) reduction(max : knorm)
  for (int t = 0; t < ns; ++t) {
    double acc = 0.0;
    for (int s = 0; s < ns; ++s) {
      const int idx =
          ker.index(supp.ix[t] - supp.ix[s], supp.iy[t] - supp.iy[s], supp.iz[t] - supp.iz[s]);
      acc += ker.row_norms[idx] * std::abs(fold_factor(q, supp.voxels[s]));
    }
    knorm = std::max(knorm, acc);
  }
  out.kernel_norm_estimate = knorm;

  // Folded state w_s = c_s u_s so the sweep is a pure offset convolution.
  std::vector<Vec6c> us(ns);
  for (int s = 0; s < ns; ++s) us[s] = u0[supp.voxels[s]];

  auto sweep = [&](const std::vector<Vec6c>& cur, std::vector<Vec6c>& next) {
    std::vector<Vec6c> folded(ns);
    for (int s = 0; s < ns; ++s) folded[s] = fold_factor(q, supp.voxels[s]) * cur[s];
#pragma omp parallel for schedule(static)
    for (int t = 0; t < ns; ++t) {
      Vec6c acc = u0[supp.voxels[t]];
      for (int s = 0; s < ns; ++s) {
        const int idx = ker.index(supp.ix[t] - supp.ix[s], supp.iy[t] - supp.iy[s],
                                  supp.iz[t] - supp.iz[s]);
        acc += ker.blocks[idx] * folded[s];
      }
      next[t] = acc;
    }
  };

  const bool want_direct = opt.force_direct;
  if (want_direct) {
    if (ns > opt.direct_cap) {
      std::ostringstream os;
      os << "direct medium solve needs " << ns << " support voxels, above the cap of "
         << opt.direct_cap;
      throw InvalidConfiguration(os.str());
    }
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(6 * ns, 6 * ns);
    Eigen::VectorXcd b(6 * ns);
    for (int t = 0; t < ns; ++t) {
      b.segment<6>(6 * t) = u0[supp.voxels[t]];
      for (int s = 0; s < ns; ++s) {
        const int idx = ker.index(supp.ix[t] - supp.ix[s], supp.iy[t] - supp.iy[s],
                                  supp.iz[t] - supp.iz[s]);
        A.block<6, 6>(6 * t, 6 * s) -= ker.blocks[idx] * fold_factor(q, supp.voxels[s]);
      }
    }
    const Eigen::VectorXcd x = Eigen::PartialPivLU<Eigen::MatrixXcd>(A).solve(b);
    for (int t = 0; t < ns; ++t) us[t] = x.segment<6>(6 * t);
    out.route = SolverRoute::direct;
    out.iterations = 0;
  } else {
    std::vector<Vec6c> next(ns);
    double prev_change = std::numeric_limits<double>::infinity();
    int growth = 0;
    std::vector<double> history;
    for (int sweep_i = 1; sweep_i <= opt.max_iter; ++sweep_i) {
      sweep(us, next);
      double change = 0.0;
      for (int t = 0; t < ns; ++t)
        change = std::max(change, (next[t] - us[t]).cwiseAbs().maxCoeff());
      history.push_back(change);
      us.swap(next);
      out.iterations = sweep_i;
      if (change < opt.tol) break;
      growth = change > prev_change ? growth + 1 : 0;
      prev_change = change;
      if (growth >= 3) {
        std::ostringstream os;
        os << "medium iteration diverges (kernel norm estimate " << knorm
           << " with growing updates); use the direct solve";
        throw NonConvergence(os.str(), knorm, history);
      }
      if (sweep_i == opt.max_iter) {
        std::ostringstream os;
        os << "medium iteration did not reach tol " << opt.tol << " in " << opt.max_iter
           << " sweeps";
        throw NonConvergence(os.str(), knorm, history);
      }
    }
    out.route = SolverRoute::fixed_point;
  }

  // Residual of the discrete equation on the support.
  {
    std::vector<Vec6c> check(ns);
    sweep(us, check);
    double resid = 0.0;
    for (int t = 0; t < ns; ++t)
      resid = std::max(resid, (check[t] - us[t]).cwiseAbs().maxCoeff());
    out.residual = resid;
  }

  // Fill the full grid: support voxels take the solved values, the rest get
  // one kernel application.
  std::vector<Vec6c> folded(ns);
  for (int s = 0; s < ns; ++s) folded[s] = fold_factor(q, supp.voxels[s]) * us[s];
  std::vector<char> in_support(g.count(), 0);
  for (int s = 0; s < ns; ++s) in_support[supp.voxels[s]] = 1;
#pragma omp parallel for collapse(2) schedule(static)
  for (int iz = 0; iz < g.nz; ++iz) {
    for (int iy = 0; iy < g.ny; ++iy) {
      for (int ix = 0; ix < g.nx; ++ix) {
        const int v = g.index(ix, iy, iz);
        if (in_support[v]) continue;
        Vec6c acc = u0[v];
        for (int s = 0; s < ns; ++s) {
          const int idx = ker.index(ix - supp.ix[s], iy - supp.iy[s], iz - supp.iz[s]);
          acc += ker.blocks[idx] * folded[s];
        }
        out.u[v] = acc;
      }
    }
  }
  for (int s = 0; s < ns; ++s) out.u[supp.voxels[s]] = us[s];
  return out;
}

Vec6c evaluate_effective(const Vec3& x, const EffectiveField& field, const PotentialQ& q,
                         const IncidentField& incident) {
  const VoxelGrid& g = q.grid;
  if (static_cast<int>(field.u.size()) != g.count())
    throw InvalidConfiguration("effective field does not match the potential grid");
  const double h3 = g.cell_volume();
  const double rho_eq = std::cbrt(3.0 * h3 / (4.0 * pi));
  Vec6c acc = incident(x);
  for (int v = 0; v < g.count(); ++v) {
    if (!q.nonzero(v)) continue;
    const Vec3 d = x - g.center(v);
    const double r = d.norm();
    if (r < rho_eq) {
      acc += self_ball_kernel(q.ctx.k, h3) * (q.op_self(v) * field.u[v]);
    } else {
      const cdouble gval = std::exp(cdouble(0.0, q.ctx.k * r)) / (q.ctx.k * r);
      acc += gval * h3 * (q.op(v, d / r) * field.u[v]);
    }
  }
  return acc;
}

}  // namespace smallscat
