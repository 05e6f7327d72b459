#pragma once

// Nonlinear (cubic) squeezing: the operator O(z, theta) = P(theta) + z X(theta)^2,
// the Gaussian bound on its variance, and minimization of the ratio over
// cubicity and phase-space angle.

#include <array>
#include <vector>

#include "nlsq/fock.hpp"

namespace nlsq {

struct NonlinearSqueezingResult {
  double xi_linear = 0.0;
  double xi_db = 0.0;
  double z_opt = 0.0;
  /// In [0, 2 pi).
  double theta_opt = 0.0;
  double variance_opt = 0.0;
};

/// var(O(z, theta)) = var_p + 2 z cov_p_x2 + z^2 var_x2 at a fixed angle.
/// cov_p_x2 uses the symmetrized product (P X^2 + X^2 P)/2.
struct VarianceDecomposition {
  double var_p = 0.0;
  double cov_p_x2 = 0.0;
  double var_x2 = 0.0;

  double variance(double z) const { return var_p + 2.0 * z * cov_p_x2 + z * z * var_x2; }
};

struct OptimizerOptions {
  int theta_points = 720;
  double z_min = 1e-6;
  double z_max = 1e3;
  double theta_tolerance = 1e-8;
};

FockOperator nonlinear_operator(int dim, double z, double theta);

/// Minimum of var(O(z, theta)) over Gaussian states: 3 (1/2)^{5/3} |z|^{2/3}.
double gaussian_bound(double z);

double to_db(double xi_linear);

/// All quadrature moments <q_i q_j ...> up to fourth order (q_0 = x,
/// q_1 = p), evaluated exactly in the smallest Fock space that holds the
/// state's support.  Rotated-frame moments then follow by multilinearity.
class QuadratureMoments {
 public:
  explicit QuadratureMoments(const QuantumState& state);

  VarianceDecomposition decomposition(double theta) const;
  /// <P(theta)>, <X(theta)^2>: handy for tests and the homodyne estimator.
  double mean_p(double theta) const;
  double mean_x2(double theta) const;

 private:
  std::array<double, 2> first_{};
  std::array<double, 4> second_{};   // 2i + j, real parts
  std::array<double, 8> third_{};    // 4i + 2j + k, real parts
  std::array<double, 16> fourth_{};  // 8i + 4j + 2k + l, real parts
};

VarianceDecomposition variance_decomposition(const QuantumState& state, double theta);

/// var(O(z, theta)) / gaussian_bound(z).  Throws DomainError for |z| < z_min.
double squeezing_ratio(const QuantumState& state, double z, double theta, double z_min = 1e-6);

struct ZMinimum {
  double z = 0.0;
  double ratio = 0.0;
};

/// Exact minimizer of (A + 2 B z + C z^2) / gaussian_bound(z) over
/// z_min <= |z| <= z_max on both sign branches.  The stationary point of
/// each branch is the positive root of 2 C t^2 +- B t - A = 0.
ZMinimum minimize_over_z(const VarianceDecomposition& decomposition, const OptimizerOptions& options);

/// Global minimum of the squeezing ratio over (z, theta): uniform theta grid,
/// local refinement of every grid minimum, closed-form optimum in z.
/// Ties (within 1e-10) go to the smallest |z|, then the smallest theta.
NonlinearSqueezingResult minimize_squeezing(const QuantumState& state,
                                            const OptimizerOptions& options = {});

/// Same, with z held fixed.
NonlinearSqueezingResult minimize_over_theta(const QuantumState& state, double z,
                                             const OptimizerOptions& options = {});

/// Best member of the phi(c) = eta(c)(c|0> + |1>) family, c >= 0 real.
struct SuperpositionOptimum {
  std::vector<double> amplitudes;  // normalized, real
  NonlinearSqueezingResult result;
};

/// Optimizes |c| of the 0-1 superposition on [c_lo, c_hi].
SuperpositionOptimum optimize_superposition01(double c_lo = 0.3, double c_hi = 4.0,
                                              const OptimizerOptions& options = {});

/// Optimizes real amplitudes of a superposition of |0>..|levels-1> with a
/// Nelder-Mead simplex, starting from `initial` (normalized internally).
SuperpositionOptimum optimize_fock_superposition(const std::vector<double>& initial,
                                                 const OptimizerOptions& options = {});

}  // namespace nlsq
