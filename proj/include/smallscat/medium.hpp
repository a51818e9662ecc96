#pragma once

#include <string>
#include <vector>

#include "smallscat/multiparticle.hpp"

namespace smallscat {

// Particle type used to populate a medium: tensors and volume without a
// position.
struct ParticleTemplate {
  Mat3c alpha = Mat3c::Zero();
  Mat3c beta = Mat3c::Zero();
  double volume = 0.0;
  double a = 0.0;
  std::string shape = "ball";
  MaterialContrast material;
};

ParticleTemplate ball_template(double radius, const MaterialContrast& m);
ParticleTemplate mesh_template(const SurfaceMesh& mesh, const MaterialContrast& m,
                               const QuadratureSpec& spec, int series_order);

// Cubic-voxel grid, cell centers at origin + (i + 1/2) h.
struct VoxelGrid {
  Vec3 origin = Vec3::Zero();
  double h = 1.0;
  int nx = 0, ny = 0, nz = 0;

  int count() const { return nx * ny * nz; }
  int index(int ix, int iy, int iz) const { return ix + nx * (iy + ny * iz); }
  Vec3 center(int ix, int iy, int iz) const {
    return origin + Vec3((ix + 0.5) * h, (iy + 0.5) * h, (iz + 0.5) * h);
  }
  Vec3 center(int idx) const {
    const int ix = idx % nx, iy = (idx / nx) % ny, iz = idx / (nx * ny);
    return center(ix, iy, iz);
  }
  double cell_volume() const { return h * h * h; }
};

// Number density of embedded particles per voxel, with the particle type per
// voxel (template_id empty means template 0 everywhere).
struct DensityField {
  VoxelGrid grid;
  std::vector<double> density;  // 1/length^3, >= 0
  std::vector<ParticleTemplate> templates;
  std::vector<int> template_id;

  void validate() const;
  const ParticleTemplate& voxel_template(int idx) const;
};

// Unit direction nodes from the subdivided icosahedron: 12, 42, 162 for
// levels 0, 1, 2.
std::vector<Vec3> icosa_directions(int level);

// The density-weighted scattering strength entering the medium equation.
// Three backings:
//   scalar:   user-supplied complex q(y) acting as a plain scalar
//   table:    per-voxel operators tabulated on icosahedral direction nodes
//             (nearest-node lookup)
//   density:  N(y) * S(beta; template), evaluated exactly per direction
struct PotentialQ {
  enum class Backing { scalar, table, density };

  VoxelGrid grid;
  Backing backing = Backing::scalar;
  WaveContext ctx;

  std::vector<cdouble> scalar;  // per voxel

  std::vector<Vec3> directions;  // table nodes
  std::vector<Mat6c> table;      // [voxel * directions.size() + node]

  std::vector<double> density;
  std::vector<ParticleTemplate> templates;
  std::vector<int> template_id;

  bool isotropic = false;

  bool nonzero(int voxel) const;
  // 6x6 operator at a voxel for scattering direction beta.
  Mat6c op(int voxel, const Vec3& beta) const;
  // Direction-averaged operator used for the self-voxel term.
  Mat6c op_self(int voxel) const;
};

PotentialQ q_from_density(const DensityField& density, const WaveContext& ctx,
                          int direction_level = 1);
PotentialQ scalar_potential(const VoxelGrid& grid, std::vector<cdouble> values,
                            const WaveContext& ctx);

// Existence diagnostics of the nonzero medium limit: evaluates
// w = (a/d)^3 (eps - eps0)/(eps + 2 eps0) and classifies the material
// against the resonance-tuned permittivity regime.
struct LimitDiagnostics {
  cdouble w{0.0, 0.0};
  cdouble kappa_implied{0.0, 0.0};  // (eps_eff + 2 eps0) / (a/d)^3
  enum class Regime { static_eps, dispersive, vanishing, resonant } regime = Regime::vanishing;
};

LimitDiagnostics limit_diagnostics(cdouble eps, double eps0, double sigma, double omega,
                                   double a_over_d, cdouble kappa);

// Closed-form integral of e^{ikr}/(kr) over the ball of the same volume as a
// voxel; regularizes the self-voxel kernel.
cdouble self_ball_kernel(double k, double voxel_volume);

struct EffectiveField {
  VoxelGrid grid;
  std::vector<Vec6c> u;  // at every voxel center
  int iterations = 0;
  double residual = 0.0;
  double kernel_norm_estimate = 0.0;
  SolverRoute route = SolverRoute::fixed_point;
};

struct MediumSolveOptions {
  double tol = 1e-10;
  int max_iter = 400;
  bool force_direct = false;
  int direct_cap = 1000;  // max support voxels for the dense route
};

EffectiveField solve_effective_field(const PotentialQ& q, const IncidentField& incident,
                                     const MediumSolveOptions& opt = {});

// Field at an arbitrary point from a solved medium state.
Vec6c evaluate_effective(const Vec3& x, const EffectiveField& field, const PotentialQ& q,
                         const IncidentField& incident);

}  // namespace smallscat
