#pragma once

#include "smallscat/linalg.hpp"

namespace smallscat {

// Material of one particle against the background (eps0, mu0).
//
// Conduction folds into the effective permittivity eps + i*sigma/omega (time
// convention exp(-i omega t)).  The skin flag records whether the skin depth
// sqrt(2/(omega sigma mu)) is small against the particle size, which switches
// on the perfect-conductor part of the magnetic response.
struct MaterialContrast {
  cdouble eps{1.0, 0.0};
  double mu = 1.0;
  double sigma = 0.0;
  double omega = 1.0;
  double eps0 = 1.0;
  double mu0 = 1.0;

  cdouble eps_eff{1.0, 0.0};  // eps + i*sigma/omega
  cdouble gamma_eps{0.0, 0.0};
  double gamma_mu = 0.0;
  double skin_depth = 0.0;  // 0 means "no conduction"
  bool skin = false;
  bool pec = false;

  MaterialContrast() = default;

  // particle_scale is the characteristic radius used to classify the skin
  // regime (delta <= skin_margin * scale).
  MaterialContrast(cdouble eps_in, double mu_in, double sigma_in, double omega_in,
                   double eps0_in, double mu0_in, double particle_scale,
                   double skin_margin = 0.1);

  // Idealized perfect conductor: gamma_eps = 1, skin regime, no mu contrast.
  static MaterialContrast perfect_conductor(double omega_in = 1.0, double eps0_in = 1.0,
                                            double mu0_in = 1.0);
};

}  // namespace smallscat
