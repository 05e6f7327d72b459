#include "nlsq/two_mode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "nlsq/errors.hpp"

namespace nlsq {
namespace {

constexpr double kPi = std::numbers::pi;

double wrap_nu(double nu) {
  double t = std::fmod(nu + kPi / 2, kPi);
  if (t < 0.0) t += kPi;
  return t - kPi / 2;
}

bool better(const BasisOptimum& a, const BasisOptimum& b) {
  constexpr double tie = 1e-10;
  if (a.result.xi_linear < b.result.xi_linear - tie) return true;
  if (a.result.xi_linear > b.result.xi_linear + tie) return false;
  return std::abs(a.nu) < std::abs(b.nu);
}

}  // namespace

void TwoModeConfig::validate() const {
  if (!(lambda1 >= 0.0 && lambda1 <= 1.0)) throw ValidationError("lambda1 must lie in [0, 1]");
  if (!(f1 >= 0.0 && f1 <= 1.0)) throw ValidationError("f1 must lie in [0, 1]");
}

MeasurementBasis rotation_basis(double nu) {
  const double c = std::cos(nu);
  const double s = std::sin(nu);
  return MeasurementBasis(CMatrix{{c, -s}, {s, c}});
}

HeraldedCoefficients two_mode_coeffs(const TwoModeConfig& config) {
  config.validate();
  const RVector lambdas{{config.lambda1, 1.0 - config.lambda1}};
  const CVector overlaps{{config.f1, std::sqrt(std::max(0.0, 1.0 - config.f1 * config.f1))}};
  return heralded_coeffs(lambdas, rotation_basis(config.nu), config.gamma, overlaps);
}

QuantumState two_mode_reduced(const TwoModeConfig& config, int j, int dim) {
  return reduced_state(two_mode_coeffs(config), j, dim);
}

BasisOptimum optimize_basis(double lambda1, Complex gamma, double f1, const BasisOptions& options) {
  auto evaluate = [&](double nu) {
    const TwoModeConfig config{lambda1, gamma, f1, nu};
    return BasisOptimum{nu, minimize_squeezing(two_mode_reduced(config, 0, options.dim), options.optimizer)};
  };

  const int n = std::max(options.nu_points, 8);
  const double step = kPi / n;
  std::vector<BasisOptimum> grid;
  grid.reserve(n);
  for (int i = 0; i < n; ++i) grid.push_back(evaluate(-kPi / 2 + i * step));

  const int bits = std::clamp(static_cast<int>(std::ceil(-std::log2(options.nu_tolerance))) + 1, 8,
                              std::numeric_limits<double>::digits / 2 + 4);
  BasisOptimum best = grid[0];
  for (int i = 0; i < n; ++i) {
    if (better(grid[i], best)) best = grid[i];
    const double here = grid[i].result.xi_linear;
    const double prev = grid[(i + n - 1) % n].result.xi_linear;
    const double next = grid[(i + 1) % n].result.xi_linear;
    const double tol = 1e-12 * std::abs(here);
    if (here > prev + tol || here > next + tol || (here >= prev - tol && here >= next - tol)) continue;
    const double centre = grid[i].nu;
    const auto [nu_min, f_min] = boost::math::tools::brent_find_minima(
        [&](double nu) { return evaluate(wrap_nu(nu)).result.xi_linear; }, centre - step, centre + step, bits);
    const BasisOptimum refined = evaluate(wrap_nu(nu_min));
    if (better(refined, best)) best = refined;
  }
  return best;
}

std::pair<QuantumState, QuantumState> simultaneous_states(double lambda1, Complex gamma, int dim) {
  if (!(lambda1 >= 0.0 && lambda1 <= 1.0)) throw ValidationError("lambda1 must lie in [0, 1]");
  if (dim < 2) throw InvalidDimension("simultaneous states need dim >= 2");
  const double norm = 1.0 / (0.5 * std::norm(gamma) + 1.0);
  const Complex g1 = 0.5 * (2.0 * lambda1 - 1.0) * gamma;

  auto build = [&](Complex off_diagonal) {
    CMatrix rho = CMatrix::Zero(dim, dim);
    rho(0, 0) = 0.5 * (std::norm(gamma) + 1.0);
    rho(1, 1) = 0.5;
    rho(1, 0) = off_diagonal;
    rho(0, 1) = std::conj(off_diagonal);
    return QuantumState::mixed(norm * rho);
  };
  return {build(g1), build(0.5 * gamma)};
}

}  // namespace nlsq
