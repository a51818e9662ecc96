#include "smallscat/material.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "smallscat/errors.hpp"

namespace smallscat {

MaterialContrast::MaterialContrast(cdouble eps_in, double mu_in, double sigma_in,
                                   double omega_in, double eps0_in, double mu0_in,
                                   double particle_scale, double skin_margin)
    : eps(eps_in), mu(mu_in), sigma(sigma_in), omega(omega_in), eps0(eps0_in), mu0(mu0_in) {
  if (!(eps0 > 0.0) || !(mu0 > 0.0)) throw std::invalid_argument("background eps0, mu0 must be positive");
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  if (sigma < 0.0) throw std::invalid_argument("sigma must be >= 0");
  if (!(omega > 0.0)) throw std::invalid_argument("omega must be positive");

  eps_eff = eps + cdouble(0.0, 1.0) * (sigma / omega);
  gamma_eps = (eps_eff - eps0) / (eps_eff + eps0);
  gamma_mu = (mu - mu0) / (mu + mu0);
  if (sigma > 0.0) {
    skin_depth = std::sqrt(2.0 / (omega * sigma * mu));
    skin = particle_scale > 0.0 && skin_depth <= skin_margin * particle_scale;
  }

  // Passivity: |gamma_eps| <= 1 whenever Re eps_eff >= 0.  (Negative-Re
  // permittivities legitimately exceed 1 and are handled by analytic ball
  // formulas, not the surface series.)
  if (eps_eff.real() >= 0.0 && eps_eff.imag() >= 0.0 &&
      std::abs(gamma_eps) > 1.0 + 1e-12) {
    std::ostringstream os;
    os << "contrast invariant violated: |gamma_eps| = " << std::abs(gamma_eps)
       << " > 1 for Re eps' >= 0";
    throw InvalidConfiguration(os.str());
  }
}

MaterialContrast MaterialContrast::perfect_conductor(double omega_in, double eps0_in,
                                                     double mu0_in) {
  MaterialContrast m;
  m.eps = cdouble(0.0, 0.0);
  m.mu = mu0_in;
  m.sigma = std::numeric_limits<double>::infinity();
  m.omega = omega_in;
  m.eps0 = eps0_in;
  m.mu0 = mu0_in;
  m.eps_eff = cdouble(0.0, std::numeric_limits<double>::infinity());
  m.gamma_eps = cdouble(1.0, 0.0);
  m.gamma_mu = 0.0;
  m.skin_depth = 0.0;
  m.skin = true;
  m.pec = true;
  return m;
}

}  // namespace smallscat
