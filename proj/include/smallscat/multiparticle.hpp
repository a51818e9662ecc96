#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "smallscat/material.hpp"
#include "smallscat/scattering.hpp"

namespace smallscat {

// One particle reduced to its point data: position, cached polarizability
// tensors in global axes, volume and characteristic size.
struct ParticleInstance {
  Vec3 x = Vec3::Zero();
  Mat3c alpha = Mat3c::Zero();
  Mat3c beta = Mat3c::Zero();
  double volume = 0.0;
  double a = 0.0;
  std::string shape = "ball";
  MaterialContrast material;
};

// Tensor pipeline: run the boundary series on the mesh and cache the results.
ParticleInstance make_particle(const SurfaceMesh& mesh, const MaterialContrast& m,
                               const Vec3& position, const QuadratureSpec& spec,
                               int series_order);

// Analytic small ball: isotropic tensors from the closed-form ball limit.
ParticleInstance ball_particle(const Vec3& position, double radius,
                               const MaterialContrast& m);

// Incident 6-vector field.  The plane-wave factory enforces transversality and
// slaves H0 to E0.
struct IncidentField {
  std::function<Vec6c(const Vec3&)> sampler;

  Vec6c operator()(const Vec3& x) const { return sampler(x); }

  static IncidentField plane_wave(const Vec3& direction, const Vec3c& E0,
                                  const WaveContext& ctx);
  static IncidentField zero();
};

struct Scene {
  std::vector<ParticleInstance> particles;
  WaveContext ctx;

  int size() const { return static_cast<int>(particles.size()); }
  // Minimum pairwise center distance; throws for coincident centers.
  double min_pair_distance() const;
  double max_characteristic_a() const;
  FarZoneReport regime_report() const;
};

// Diagonal-dominance diagnostics of the interaction matrix.
//   bound:       max_j row-sum norm of sum_{i != j} S_i g(x_j, x_i)
//   bound_crude: max_j (1/(k d_min)) max_m sum_l sum_{i != j} |(S_i)_ml|,
//                the distance-free overestimate.
struct DominanceReport {
  double bound = 0.0;
  double bound_crude = 0.0;
  bool dominant = true;
};

DominanceReport dominance_bound(const Scene& scene);

enum class SolverRoute { fixed_point, direct };

struct LocalFields {
  std::vector<Vec6c> v;  // local 6-vectors at particle centers
  int iterations = 0;
  double residual = 0.0;  // linear-system residual, component max-norm
  std::vector<double> update_history;  // successive-change norms per sweep
  double rate = 0.0;  // empirical contraction factor of the sweeps
  SolverRoute route = SolverRoute::direct;
  bool rerouted = false;  // fixed point requested but dominance failed
};

struct SolveOptions {
  double tol = 1e-12;
  int max_iter = 200;
  bool strict_dominance = false;
  int dense_cap = 2000;
};

LocalFields solve_fixed_point(const Scene& scene, const IncidentField& incident,
                              const SolveOptions& opt = {});
LocalFields solve_direct(const Scene& scene, const IncidentField& incident,
                         const SolveOptions& opt = {});

// Total field U0 + sum_i g(x, x_i) S_i V_i at an exterior point.  The guard
// keeps evaluation out of the near zones: |x - x_i| must be at least
// guard_margin * d (scene min pair distance; 10a for a single particle).
Vec6c evaluate_field(const Vec3& x, const LocalFields& fields, const Scene& scene,
                     const IncidentField& incident, double guard_margin = 1.0);

// Scattered-field sum skipping particle j, evaluated without the guard; this
// is the excitation the near-field stage needs on particle j's surface.
Vec6c scattered_excluding(int j, const Vec3& x, const LocalFields& fields,
                          const Scene& scene);

struct FieldGrid {
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Zero();
  int nx = 0, ny = 0, nz = 0;
  std::vector<Vec6c> values;       // x fastest, then y, then z
  std::vector<std::uint8_t> mask;  // 1 = evaluated, 0 = inside a guard ball

  int index(int ix, int iy, int iz) const { return ix + nx * (iy + ny * iz); }
  Vec3 point(int ix, int iy, int iz) const {
    return origin + Vec3(ix * spacing.x(), iy * spacing.y(), iz * spacing.z());
  }
};

FieldGrid field_grid(const Vec3& lo, const Vec3& hi, int nx, int ny, int nz,
                     const LocalFields& fields, const Scene& scene,
                     const IncidentField& incident, double guard_margin = 1.0);

}  // namespace smallscat
