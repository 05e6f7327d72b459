#pragma once

// Two-mode heralded source: measurement bases rotated by an angle nu, basis
// optimization, and simultaneous squeezing in both rotated modes.

#include <utility>

#include "nlsq/pdc.hpp"

namespace nlsq {

/// lambda2 = 1 - lambda1 and f2 = sqrt(1 - f1^2).
struct TwoModeConfig {
  double lambda1 = 1.0;
  Complex gamma = 0.0;
  double f1 = 1.0;
  double nu = 0.0;

  /// Throws ValidationError unless lambda1 and f1 lie in [0, 1].
  void validate() const;
};

/// B1 = cos(nu) A1 + sin(nu) A2, B2 = cos(nu) A2 - sin(nu) A1.
MeasurementBasis rotation_basis(double nu);

HeraldedCoefficients two_mode_coeffs(const TwoModeConfig& config);

/// Reduced state of B_{j+1} (j = 0 or 1).
QuantumState two_mode_reduced(const TwoModeConfig& config, int j, int dim = 6);

struct BasisOptions {
  int nu_points = 360;
  double nu_tolerance = 1e-8;
  int dim = 6;
  OptimizerOptions optimizer;
};

struct BasisOptimum {
  double nu = 0.0;
  NonlinearSqueezingResult result;
};

/// Minimizes the squeezing of B1 over nu in [-pi/2, pi/2), with z and theta
/// re-optimized at every nu.  Ties go to the smallest |nu|.
BasisOptimum optimize_basis(double lambda1, Complex gamma, double f1, const BasisOptions& options = {});

/// Both reduced states for f1 = f2 = 1/sqrt(2) and nu = -pi/4, written in
/// closed form.
std::pair<QuantumState, QuantumState> simultaneous_states(double lambda1, Complex gamma, int dim = 6);

}  // namespace nlsq
