#pragma once

// Seeded, heralded multimode down-conversion source: joint spectral
// amplitude, Schmidt decomposition, seed overlaps, measurement-basis change,
// and the single-mode reduced states seen by a local oscillator.

#include <filesystem>
#include <utility>
#include <vector>

#include "nlsq/fock.hpp"
#include "nlsq/squeezing.hpp"

namespace nlsq {

using RMatrix = Eigen::MatrixXd;

/// Uniform frequency grid symmetric about 0.
struct FrequencyGrid {
  std::vector<double> omega;
  double step = 0.0;

  static FrequencyGrid symmetric(double half_span, int points);
  /// Default grid for a double-Gaussian source: `points` over
  /// [-span_factor max(a,b), +span_factor max(a,b)].
  static FrequencyGrid for_widths(double a, double b, int points = 512, double span_factor = 5.0);

  int size() const { return static_cast<int>(omega.size()); }
  double half_span() const { return omega.empty() ? 0.0 : omega.back(); }
  bool same_as(const FrequencyGrid& other) const;
};

/// S(w, w') = exp(-(w + w')^2 / a^2) exp(-(w - w')^2 / b^2) on the grid.
/// Throws ValidationError when the grid has fewer than 256 points or does
/// not reach 5 max(a, b).
RMatrix double_gaussian_jsa(double a, double b, const FrequencyGrid& grid);

struct SchmidtDecomposition {
  FrequencyGrid grid;
  /// Descending, renormalized to unit sum over the retained modes.
  RVector lambdas;
  /// Column n holds tau_n (signal) / zeta_n (idler) sampled on the grid,
  /// orthonormal under sum(conj(f) g) * step.
  CMatrix signal_modes;
  CMatrix idler_modes;
  double schmidt_number = 0.0;

  int modes() const { return static_cast<int>(lambdas.size()); }
  /// Mode table (omega, tau_n re/im, zeta_n re/im) and eigenvalue table (n, lambda).
  void write_csv(const std::filesystem::path& modes_path,
                 const std::filesystem::path& eigenvalues_path) const;
};

struct SchmidtOptions {
  double min_eigenvalue = 1e-8;
  int max_modes = 32;
};

/// Quadrature-weighted SVD of the JSA.  Modes are phase-fixed so that each
/// tau_n is real-positive at its largest-magnitude grid point.
SchmidtDecomposition schmidt_decompose(const RMatrix& jsa, const FrequencyGrid& grid,
                                       const SchmidtOptions& options = {});

/// 1 / sum(lambda^2).  Throws ValidationError for empty or unnormalized input.
double schmidt_number(const RVector& lambdas);

/// Unit-norm sampled seed profile f(omega).
CVector gaussian_profile(const FrequencyGrid& grid, double width);

/// f^A_m = integral conj(tau_m) f.  Throws ValidationError if the profile is
/// not sampled on the decomposition grid or is not unit norm.
CVector seed_overlaps(const CVector& profile, const SchmidtDecomposition& decomposition);

/// Unitary u_{nl} taking the Schmidt modes (rows n) to measurement modes
/// (columns l): B_l = sum_n u_{nl} A_n.
class MeasurementBasis {
 public:
  /// Throws ValidationError unless U^dag U = I to 1e-10.
  explicit MeasurementBasis(CMatrix u);

  static MeasurementBasis identity(int modes);
  /// Unitary whose first column is the given nonzero vector (normalized);
  /// the remaining columns complete it by Householder QR.
  static MeasurementBasis with_first_column(const CVector& column);

  const CMatrix& matrix() const { return u_; }
  int modes() const { return static_cast<int>(u_.rows()); }

 private:
  CMatrix u_;
};

struct HeraldedCoefficients {
  RVector lambdas;
  CMatrix u;
  Complex gamma;
  CVector seed_overlaps;
  /// alpha_n = gamma f^A_n (Schmidt basis).
  CVector alpha;
  /// beta_m = sum_n conj(u_{nm}) alpha_n (measurement basis).
  CVector beta;
  /// c_{ll'} = sum_n lambda_n conj(u_{nl}) u_{nl'}.
  CMatrix c;
  double norm = 0.0;
  /// G_j = sum_{m != j} c_{jm} beta_m.
  CVector g;
  /// eta_j = 1/N - c_jj (|beta_j|^2 + 1) - 2 Re(conj(beta_j) G_j).
  RVector eta;

  int modes() const { return static_cast<int>(lambdas.size()); }
};

/// Throws InvalidDimension on size mismatch, ValidationError when lambda is
/// not normalized or sum |f^A|^2 exceeds 1.
HeraldedCoefficients heralded_coeffs(const RVector& lambdas, const MeasurementBasis& basis,
                                     Complex gamma, const CVector& seed_overlaps);

/// State of measurement mode j (0-based) in a dim-level Fock space:
/// N [c_jj |phi><phi| + G_j |phi><0| + conj(G_j) |0><phi| + eta_j |0><0|],
/// |phi> = conj(beta_j)|0> + |1>.  Throws NumericalError if the 2x2 block is
/// negative beyond 1e-8.
QuantumState reduced_state(const HeraldedCoefficients& coeffs, int j, int dim = 6);

/// kappa_j = N c_jj and mu_j = sqrt(2) Im(rho_10) for mode j.
struct ClosedFormTerms {
  double kappa = 0.0;
  double mu = 0.0;
};
ClosedFormTerms closed_form_terms(const HeraldedCoefficients& coeffs, int j);

/// var(p + z x^2) on mode j:
/// -mu^2 - 2 z kappa mu + 1/2 + kappa + z^2 (1/2 + 2 kappa - kappa^2).
double closed_form_variance(const HeraldedCoefficients& coeffs, int j, double z);

enum class Scenario {
  /// Seed and local oscillator in the first Schmidt mode of each source.
  MatchedSeed = 1,
  /// Seed and local oscillator fixed to the separable (a = b) Gaussian mode
  /// of width a, for every (a, b).
  FixedSeed = 2,
};

/// Throws ValidationError unless id is 1 or 2.
Scenario scenario_from_id(int id);

struct ScenarioPoint {
  double a = 0.0;
  double b = 0.0;
  double schmidt_number = 0.0;
  /// |f^A_1|^2 of the seed.
  double seed_weight = 0.0;
  NonlinearSqueezingResult squeezing;
};

struct ScenarioOptions {
  int grid_points = 512;
  int dim = 6;
  int threads = 1;
  SchmidtOptions schmidt;
  OptimizerOptions optimizer;
};

ScenarioPoint scenario_point(Scenario scenario, double a, double b, Complex gamma,
                             const ScenarioOptions& options = {});

std::vector<ScenarioPoint> scenario_sweep(Scenario scenario,
                                          const std::vector<std::pair<double, double>>& widths,
                                          Complex gamma, const ScenarioOptions& options = {});

/// Columns K, a, b, seed_weight, xi_db, z_opt, theta_opt.
void write_scenario_csv(const std::filesystem::path& path, const std::vector<ScenarioPoint>& curve);

/// (a, b) with a fixed and a/b >= 1 chosen so that (a/b + b/a)/2 = K.
std::pair<double, double> widths_for_schmidt_number(double k, double a = 1.0);

}  // namespace nlsq
