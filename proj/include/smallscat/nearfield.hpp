#pragma once

#include <Eigen/Dense>

#include "smallscat/multiparticle.hpp"

namespace smallscat {

// Triangulated surface prepared for the boundary solver.  Quadrature and
// collocation points are lifted onto the smooth surface implied by averaged
// vertex normals; a corner whose vertex normal kinks more than 45 degrees
// away from the facet stays flat, which keeps sharp edges sharp.
struct SurfacePanels {
  SurfaceMesh mesh;
  std::vector<Vec3> vertex_normal;  // area-averaged unit normals
  std::vector<Vec3> colloc;         // collocation point on the curved panel
  std::vector<Vec3> cnormal;        // surface normal at the collocation point
  std::vector<Vec3> t1, t2;         // tangent frame at the collocation point

  explicit SurfacePanels(SurfaceMesh m);
  int count() const { return mesh.panel_count(); }
};

// Per-panel tangential surface current solved from the boundary equation of a
// perfectly conducting surface.  Field evaluation interpolates the panel
// values through shared vertices, so the radiated current is continuous.
struct CurrentSolution {
  std::vector<cdouble> j1, j2;  // components in the panel tangent frame
  int iterations = 0;
  // Boundary-equation residual of the interpolated current at the collocation
  // points, relative to the excitation term.
  double residual = 0.0;
  double condition_estimate = 0.0;  // infinity-norm condition estimate
  double tangential_defect = 0.0;   // max |n . j|; zero by construction

  Vec3c current(const SurfacePanels& panels, int panel) const;
};

struct NearFieldOptions {
  double tol = 1e-10;
  int max_iter = 600;
  int near_refine = 2;       // source subdivision levels for touching panels
  double near_factor = 2.0;  // "touching" distance in units of panel diameters
  int defect_steps = 4;      // corrections against the interpolated-current equation
  double condition_limit = 1e8;
  unsigned seed = 1234;      // probe of the condition estimator
};

// Dense collocation matrix of the second-kind boundary operator (identity
// plus the tangentially projected curl kernel).
Eigen::MatrixXcd assemble_boundary_matrix(const SurfacePanels& panels, const WaveContext& ctx,
                                          const NearFieldOptions& opt = {});

// Solves for the surface current driven by the E part of the excitation.
CurrentSolution solve_surface_current(const SurfacePanels& panels,
                                      const IncidentField& excitation, const WaveContext& ctx,
                                      const NearFieldOptions& opt = {});

// Scattered fields of the current sheet at a point off the surface.  Panels
// close to x are integrated with subdivision; a point on the sheet itself
// raises SingularEvaluation.
Vec3c scattered_E(const Vec3& x, const SurfacePanels& panels, const CurrentSolution& cur,
                  const WaveContext& ctx);
Vec3c scattered_H(const Vec3& x, const SurfacePanels& panels, const CurrentSolution& cur,
                  const WaveContext& ctx);

// Excitation plus the scattered pair at x.
Vec6c near_field(const Vec3& x, const SurfacePanels& panels, const CurrentSolution& cur,
                 const IncidentField& excitation, const WaveContext& ctx);

// Largest tangential component of the exterior E trace, sampled at the three
// corner-subpanel centroids of every panel (none of which is a collocation
// point), relative to the largest excitation E on the surface.
double tangential_residual(const SurfacePanels& panels, const CurrentSolution& cur,
                           const IncidentField& excitation, const WaveContext& ctx);

// Excitation seen by particle j of a solved scene: the incident field plus
// every other particle's scattered contribution.
IncidentField particle_excitation(int j, const LocalFields& fields, const Scene& scene,
                                  const IncidentField& incident);

}  // namespace smallscat
