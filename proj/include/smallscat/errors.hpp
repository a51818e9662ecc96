#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace smallscat {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Mesh is not closed / not consistently oriented / not outward.
struct TopologyError : Error {
  using Error::Error;
};

// Kernel evaluated at a forbidden point (coincident arguments, point on panel).
struct SingularEvaluation : Error {
  using Error::Error;
};

// Integrand produced a non-finite value; carries the offending panel.
struct EvaluationError : Error {
  EvaluationError(const std::string& msg, int panel) : Error(msg), panel_index(panel) {}
  int panel_index = -1;
};

// Series or iteration failed to converge; carries what was observed.
struct NonConvergence : Error {
  NonConvergence(const std::string& msg, double rate, std::vector<double> history = {})
      : Error(msg), estimated_rate(rate), residual_history(std::move(history)) {}
  double estimated_rate = 0.0;
  std::vector<double> residual_history;
};

// Bad scene / config input: coincident centers, missing fields, budget exceeded...
struct InvalidConfiguration : Error {
  using Error::Error;
};

// Field evaluation point violates the minimum-distance guard.
struct OutOfRegion : Error {
  OutOfRegion(const std::string& msg, int particle) : Error(msg), particle_index(particle) {}
  int particle_index = -1;
};

// Boundary system close to an interior resonance: condition estimate too large.
struct NearEigenvalue : Error {
  NearEigenvalue(const std::string& msg, double cond) : Error(msg), condition_estimate(cond) {}
  double condition_estimate = 0.0;
};

}  // namespace smallscat
