#pragma once

// Finite-sample homodyne detection: quadrature distributions of pure states,
// inverse-CDF sampling, histogram moment estimates, and the four-angle
// estimator of var(p' + z x'^2) with Monte Carlo repetition statistics.
//
// Homodyne quadratures are X_h(psi) = cos(psi) x + sin(psi) p.  The estimator
// works in a frame rotated by theta, where p' = P(theta) and x' = X(theta) of
// the squeezing operator; the frame quadrature X'(phi) = cos(phi) x' + sin(phi) p'
// is the homodyne quadrature at psi = theta + phi - pi/2.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "nlsq/fock.hpp"

namespace nlsq {

struct QuadratureDistribution {
  double psi = 0.0;
  std::vector<double> x;
  std::vector<double> density;
  /// Trapezoid cumulative integral, ending at exactly 1.
  std::vector<double> cdf;
};

/// 2^14 points on [-8, 8].
std::vector<double> default_quadrature_grid();

/// |<x| exp(-i psi n) |state>|^2 on the grid, renormalized to unit trapezoid
/// integral.  Throws ValidationError for mixed states and TruncationError if
/// the density at the grid ends exceeds 1e-12 of its peak.
QuadratureDistribution quadrature_pdf(const QuantumState& state, double psi,
                                      const std::vector<double>& x_grid = default_quadrature_grid());

struct HomodyneSampleSet {
  double psi = 0.0;
  std::vector<double> samples;
};

/// Inverse-CDF sampling with linear interpolation; deterministic in the seed.
HomodyneSampleSet sample(const QuadratureDistribution& distribution, std::size_t m, std::uint64_t seed);

/// Raw moments <X^k>, k = 1..4, stored at index k - 1.
using RawMoments = std::array<double, 4>;

struct BinnedMoments {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;
  /// Mean of the samples in each bin (0 for empty bins).
  std::vector<double> bin_means;
  RawMoments moments{};
};

/// Equal-width bins on [min, max] of the samples; moments use each bin's
/// sample mean as its representative value.  Throws ValidationError when
/// the sample set is empty.
BinnedMoments binned_moments(const std::vector<double>& samples, int bins = 1000);

/// Moments straight from the samples (reference for the binned estimate).
RawMoments raw_moments(const std::vector<double>& samples);

/// Exact <X_h(psi)^k> from Fock-space operators.
RawMoments exact_moments(const QuantumState& state, double psi);

/// var(p' + z x'^2) from frame-quadrature moments at phi = 0, pi/2, pi/4, -pi/4.
double four_angle_variance(const RawMoments& at_0, const RawMoments& at_pi2, const RawMoments& at_pi4,
                           const RawMoments& at_minus_pi4, double z);

/// Homodyne angles for the four frame angles, in the order used above.
std::array<double, 4> four_angle_psi(double frame_theta);

struct MonteCarloOptions {
  std::size_t samples_per_angle = 100000;
  int repeats = 100;
  std::uint64_t seed = 1;
  /// theta of the squeezing operator defining the frame.
  double frame_theta = 0.0;
  int bins = 1000;
  int threads = 1;
};

struct MonteCarloResult {
  double z = 0.0;
  std::size_t samples_per_angle = 0;
  int repeats = 0;
  std::vector<double> xi_db;
  double mean = 0.0;
  /// Sample standard deviation (N - 1 denominator).
  double std = 0.0;
  /// Value from exact moments, for reference.
  double exact_xi_db = 0.0;

  void write_json(const std::filesystem::path& path) const;
  /// Columns repeat, xi_db.
  void write_csv(const std::filesystem::path& path) const;
};

MonteCarloResult monte_carlo_squeezing(const QuantumState& state, double z, const MonteCarloOptions& options);

struct ZScanPoint {
  double z = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double exact_xi_db = 0.0;
};

/// Same estimator over several z, reusing each repeat's samples for every z.
std::vector<ZScanPoint> monte_carlo_z_scan(const QuantumState& state, const std::vector<double>& zs,
                                           const MonteCarloOptions& options);

/// Per-repeat seed derived from the master seed (splitmix64 stream).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace nlsq
