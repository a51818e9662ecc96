#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smallscat/medium.hpp"
#include "smallscat/multiparticle.hpp"
#include "smallscat/nearfield.hpp"

namespace smallscat {

// One particle entry of the scene file.  Which geometry fields apply depends
// on shape: sphere/ball use radius, ellipsoid semi_axes, box size, mesh path.
struct ParticleSpec {
  std::string shape = "sphere";
  double radius = 1.0;
  Vec3 semi_axes = Vec3(1.0, 1.0, 1.0);
  Vec3 size = Vec3(1.0, 1.0, 1.0);
  std::string path;
  int refinement = 3;
  Vec3 center = Vec3::Zero();
  cdouble eps{1.0, 0.0};
  double mu = 1.0;
  double sigma = 0.0;
  bool pec = false;
};

// Replicates the first particle over a centered cubic lattice; jitter is the
// uniform per-axis displacement as a fraction of the spacing.
struct LatticeSpec {
  int count = 1;
  double spacing = 1.0;
  double jitter = 0.0;
  unsigned seed = 1;
};

struct GridSpec {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  int nx = 1, ny = 1, nz = 1;
  double guard_margin = 1.0;
};

struct MediumSpec {
  VoxelGrid grid;
  enum class Source { scalar, scalar_csv, density, density_csv } source = Source::scalar;
  cdouble q{0.0, 0.0};    // uniform scalar potential
  std::string csv;        // per-voxel values file
  double density = 0.0;   // uniform particle number density
  int direction_level = 1;
  MediumSolveOptions solver;

  bool has_limit = false;  // run the nonzero-limit diagnostics
  cdouble limit_eps{1.0, 0.0};
  double limit_sigma = 0.0;
  double limit_omega = 1.0;
  double limit_a_over_d = 0.1;
  cdouble limit_kappa{0.0, 0.0};
};

struct NearfieldSpec {
  int particle = 0;
  std::vector<Vec3> probes;
  bool residual_check = true;
  NearFieldOptions options;
};

struct RunConfig {
  std::string mode = "tensors";  // tensors | single | nbody | medium | nearfield
  WaveContext ctx;
  unsigned seed = 1;
  std::string output_dir = "out";
  int series_order = 8;
  QuadratureSpec quadrature;

  std::vector<ParticleSpec> particles;
  std::optional<LatticeSpec> lattice;

  bool has_incident = false;
  Vec3 incident_direction = Vec3::UnitZ();
  Vec3c incident_E0 = Vec3c(1.0, 0.0, 0.0);

  SolveOptions solver;
  std::string route = "auto";  // auto | direct | fixed_point

  std::optional<GridSpec> grid;
  std::vector<Vec3> directions;  // S-operator export directions (mode single)
  std::optional<MediumSpec> medium;
  std::optional<NearfieldSpec> nearfield;
};

// Parse and validate; throws InvalidConfiguration with the offending field in
// the message.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace smallscat
