#include "nlsq/squeezing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/tools/minima.hpp>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "nlsq/errors.hpp"

namespace nlsq {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kTieTolerance = 1e-10;
// 3 (1/2)^{5/3}
const double kBoundPrefactor = 3.0 * std::pow(0.5, 5.0 / 3.0);

std::array<double, 2> p_weights(double theta) { return {std::cos(theta), std::sin(theta)}; }
std::array<double, 2> x_weights(double theta) { return {std::sin(theta), -std::cos(theta)}; }

double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  if (t >= kTwoPi) t -= kTwoPi;
  return t;
}

// a better than b: lower ratio, else smaller |z|, else smaller theta.
bool better(const NonlinearSqueezingResult& a, const NonlinearSqueezingResult& b) {
  if (a.xi_linear < b.xi_linear - kTieTolerance) return true;
  if (a.xi_linear > b.xi_linear + kTieTolerance) return false;
  if (std::abs(a.z_opt) < std::abs(b.z_opt) - kTieTolerance) return true;
  if (std::abs(a.z_opt) > std::abs(b.z_opt) + kTieTolerance) return false;
  return a.theta_opt < b.theta_opt;
}

// Minimizes a smooth periodic function of theta: grid scan, then bounded
// Brent refinement of every grid-local minimum.  `evaluate` returns a full
// result for a given angle.
template <class Eval>
NonlinearSqueezingResult scan_theta(Eval&& evaluate, const OptimizerOptions& options) {
  const int n = std::max(options.theta_points, 8);
  const double step = kTwoPi / n;
  std::vector<NonlinearSqueezingResult> grid(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) grid[i] = evaluate(i * step);

  // Bits of relative precision giving roughly theta_tolerance.
  const int bits = std::clamp(static_cast<int>(std::ceil(-std::log2(options.theta_tolerance))) + 1,
                              8, std::numeric_limits<double>::digits / 2 + 4);

  NonlinearSqueezingResult best = grid[0];
  for (int i = 0; i < n; ++i) {
    const double here = grid[i].xi_linear;
    const double left = grid[(i + n - 1) % n].xi_linear;
    const double right = grid[(i + 1) % n].xi_linear;
    if (better(grid[i], best)) best = grid[i];
    const double tol = 1e-12 * std::abs(here);
    if (here > left + tol || here > right + tol || (here >= left - tol && here >= right - tol)) continue;
    const double centre = i * step;
    auto objective = [&](double t) { return evaluate(t).xi_linear; };
    const auto [t_min, f_min] =
        boost::math::tools::brent_find_minima(objective, centre - step, centre + step, bits);
    NonlinearSqueezingResult refined = evaluate(wrap_angle(t_min));
    // Snap refinements that land just below 2 pi back onto 0.
    if (kTwoPi - refined.theta_opt < 10.0 * options.theta_tolerance) {
      NonlinearSqueezingResult at_zero = evaluate(0.0);
      if (at_zero.xi_linear <= refined.xi_linear + 1e-14) refined = at_zero;
    }
    if (better(refined, best)) best = refined;
  }
  return best;
}

NonlinearSqueezingResult finish(double ratio, double z, double theta, double variance) {
  NonlinearSqueezingResult r;
  r.xi_linear = ratio;
  r.xi_db = to_db(ratio);
  r.z_opt = z;
  r.theta_opt = wrap_angle(theta);
  r.variance_opt = variance;
  return r;
}

}  // namespace

FockOperator nonlinear_operator(int dim, double z, double theta) {
  const auto [x_theta, p_theta] = rotated_quadratures(dim, theta);
  return p_theta + z * (x_theta * x_theta);
}

double gaussian_bound(double z) {
  if (z == 0.0 || !std::isfinite(z)) throw DomainError("Gaussian bound vanishes at z = 0");
  return kBoundPrefactor * std::pow(std::abs(z), 2.0 / 3.0);
}

double to_db(double xi_linear) {
  if (!(xi_linear > 0.0)) throw DomainError("dB conversion needs a positive ratio");
  return 10.0 * std::log10(xi_linear);
}

// ---------------------------------------------------------------------------

QuadratureMoments::QuadratureMoments(const QuantumState& state) {
  require_exact_moments(state, 2);
  // Moments of order <= 4 only see levels up to support + 2.
  const int work_dim = std::min(state.dim(), state.support() + 3);
  const QuantumState s = state.resized(work_dim);
  const auto [x, p] = quadrature_ops(std::max(work_dim, 2));
  const CMatrix rho = s.resized(std::max(work_dim, 2)).density();

  const std::array<const CMatrix*, 2> q = {&x.matrix(), &p.matrix()};
  std::array<CMatrix, 4> qq;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) qq[2 * i + j] = (*q[i]) * (*q[j]);

  // Tr(A B) without forming the product.
  auto trace_product = [](const CMatrix& a, const CMatrix& b) {
    return (a.array() * b.transpose().array()).sum();
  };

  for (int i = 0; i < 2; ++i) first_[i] = trace_product(rho, *q[i]).real();
  for (int k = 0; k < 4; ++k) second_[k] = trace_product(rho, qq[k]).real();
  for (int ij = 0; ij < 4; ++ij) {
    const CMatrix rho_qq = rho * qq[ij];
    for (int k = 0; k < 2; ++k) third_[2 * ij + k] = trace_product(rho_qq, *q[k]).real();
    for (int kl = 0; kl < 4; ++kl) fourth_[4 * ij + kl] = trace_product(rho_qq, qq[kl]).real();
  }
}

double QuadratureMoments::mean_p(double theta) const {
  const auto w = p_weights(theta);
  return w[0] * first_[0] + w[1] * first_[1];
}

double QuadratureMoments::mean_x2(double theta) const {
  const auto w = x_weights(theta);
  double m = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) m += w[i] * w[j] * second_[2 * i + j];
  return m;
}

VarianceDecomposition QuadratureMoments::decomposition(double theta) const {
  const auto wp = p_weights(theta);
  const auto wx = x_weights(theta);
  const double mp = mean_p(theta);
  const double mx2 = mean_x2(theta);

  double p2 = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) p2 += wp[i] * wp[j] * second_[2 * i + j];

  // Re <P X^2> equals the symmetrized <(P X^2 + X^2 P)/2>.
  double px2 = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) px2 += wp[i] * wx[j] * wx[k] * third_[4 * i + 2 * j + k];

  double x4 = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
          x4 += wx[i] * wx[j] * wx[k] * wx[l] * fourth_[8 * i + 4 * j + 2 * k + l];

  return {p2 - mp * mp, px2 - mp * mx2, x4 - mx2 * mx2};
}

VarianceDecomposition variance_decomposition(const QuantumState& state, double theta) {
  return QuadratureMoments(state).decomposition(theta);
}

double squeezing_ratio(const QuantumState& state, double z, double theta, double z_min) {
  if (!(std::abs(z) >= z_min)) {
    throw DomainError("cubicity |z| = " + std::to_string(std::abs(z)) + " is below the floor");
  }
  return variance_decomposition(state, theta).variance(z) / gaussian_bound(z);
}

ZMinimum minimize_over_z(const VarianceDecomposition& d, const OptimizerOptions& options) {
  const double a = d.var_p;
  const double b = d.cov_p_x2;
  const double c = d.var_x2;
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c)) {
    throw NumericalError("non-finite variance components");
  }
  const double s = std::sqrt(std::max(b * b + 8.0 * a * c, 0.0));

  // Positive root t of 2 c t^2 + sign*b t - a = 0, in the cancellation-free form.
  auto branch_root = [&](double signed_b) {
    const double denom = s + signed_b;
    double t = denom > 0.0 ? 2.0 * a / denom : options.z_max;
    if (!(t > 0.0)) t = options.z_min;
    return std::clamp(t, options.z_min, options.z_max);
  };

  ZMinimum best{};
  bool have = false;
  for (const double sign : {1.0, -1.0}) {
    const double z = sign * branch_root(sign * b);
    const double ratio = d.variance(z) / gaussian_bound(z);
    const bool take = !have || ratio < best.ratio - kTieTolerance ||
                      (std::abs(ratio - best.ratio) <= kTieTolerance && std::abs(z) < std::abs(best.z));
    if (take) best = {z, ratio};
    have = true;
  }
  return best;
}

NonlinearSqueezingResult minimize_squeezing(const QuantumState& state, const OptimizerOptions& options) {
  const QuadratureMoments moments(state);
  auto evaluate = [&](double theta) {
    const VarianceDecomposition d = moments.decomposition(theta);
    const ZMinimum zm = minimize_over_z(d, options);
    return finish(zm.ratio, zm.z, theta, d.variance(zm.z));
  };
  NonlinearSqueezingResult best = scan_theta(evaluate, options);
  if (!std::isfinite(best.xi_linear)) throw NumericalError("squeezing optimum is not finite");
  return best;
}

NonlinearSqueezingResult minimize_over_theta(const QuantumState& state, double z,
                                             const OptimizerOptions& options) {
  if (!(std::abs(z) >= options.z_min)) throw DomainError("cubicity below the floor");
  const QuadratureMoments moments(state);
  const double bound = gaussian_bound(z);
  auto evaluate = [&](double theta) {
    const double v = moments.decomposition(theta).variance(z);
    return finish(v / bound, z, theta, v);
  };
  return scan_theta(evaluate, options);
}

// ---------------------------------------------------------------------------

SuperpositionOptimum optimize_superposition01(double c_lo, double c_hi, const OptimizerOptions& options) {
  auto objective = [&](double c) {
    return minimize_squeezing(superposition01(4, c), options).xi_linear;
  };
  const auto [c_best, f_best] = boost::math::tools::brent_find_minima(objective, c_lo, c_hi, 30);
  const double eta = 1.0 / std::sqrt(c_best * c_best + 1.0);
  return {{c_best * eta, eta}, minimize_squeezing(superposition01(4, c_best), options)};
}

namespace {

struct SimplexContext {
  const OptimizerOptions* options;
  int levels;
};

double simplex_objective(const gsl_vector* v, void* params) {
  const auto* ctx = static_cast<const SimplexContext*>(params);
  std::vector<Complex> amps(static_cast<std::size_t>(ctx->levels));
  double norm = 0.0;
  for (int i = 0; i < ctx->levels; ++i) {
    amps[i] = gsl_vector_get(v, i);
    norm += std::norm(amps[i]);
  }
  if (!(norm > 1e-12)) return 1e6;
  return minimize_squeezing(superposition(ctx->levels + 3, amps), *ctx->options).xi_linear;
}

}  // namespace

SuperpositionOptimum optimize_fock_superposition(const std::vector<double>& initial,
                                                 const OptimizerOptions& options) {
  const int levels = static_cast<int>(initial.size());
  if (levels < 1) throw ValidationError("need at least one amplitude");
  SimplexContext ctx{&options, levels};

  gsl_multimin_function fn{&simplex_objective, static_cast<std::size_t>(levels), &ctx};
  gsl_vector* start = gsl_vector_alloc(levels);
  gsl_vector* steps = gsl_vector_alloc(levels);
  for (int i = 0; i < levels; ++i) {
    gsl_vector_set(start, i, initial[i]);
    gsl_vector_set(steps, i, 0.1);
  }
  gsl_multimin_fminimizer* solver =
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, levels);
  gsl_multimin_fminimizer_set(solver, &fn, start, steps);

  for (int iter = 0; iter < 2000; ++iter) {
    if (gsl_multimin_fminimizer_iterate(solver) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver), 1e-7) == GSL_SUCCESS) break;
  }

  std::vector<double> amps(static_cast<std::size_t>(levels));
  std::vector<Complex> camps(static_cast<std::size_t>(levels));
  double norm = 0.0;
  for (int i = 0; i < levels; ++i) {
    amps[i] = gsl_vector_get(solver->x, i);
    norm += amps[i] * amps[i];
  }
  norm = std::sqrt(norm);
  for (int i = 0; i < levels; ++i) {
    amps[i] /= norm;
    camps[i] = amps[i];
  }
  gsl_multimin_fminimizer_free(solver);
  gsl_vector_free(steps);
  gsl_vector_free(start);

  return {amps, minimize_squeezing(superposition(levels + 3, camps), options)};
}

}  // namespace nlsq
