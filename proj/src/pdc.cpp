#include "nlsq/pdc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/SVD>

#include "nlsq/csv.hpp"
#include "nlsq/errors.hpp"
#include "nlsq/parallel.hpp"

namespace nlsq {
namespace {

constexpr int kMinGridPoints = 256;
constexpr double kMinSpanFactor = 5.0;
constexpr double kUnitaryTolerance = 1e-10;
constexpr double kNormTolerance = 1e-9;
constexpr double kPsdTolerance = 1e-8;

void require_mode(const HeraldedCoefficients& coeffs, int j) {
  if (j < 0 || j >= coeffs.modes()) {
    throw InvalidDimension("mode index " + std::to_string(j) + " outside [0, " +
                           std::to_string(coeffs.modes()) + ")");
  }
}

// Index of the largest |v_i|; exact ties (symmetric modes) go to the first.
Eigen::Index peak_index(const Eigen::VectorXd& v) {
  const double peak = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) >= peak * (1.0 - 1e-9)) return i;
  }
  return 0;
}

}  // namespace

FrequencyGrid FrequencyGrid::symmetric(double half_span, int points) {
  if (!(half_span > 0.0) || points < 2) {
    throw ValidationError("frequency grid needs a positive span and at least 2 points");
  }
  FrequencyGrid g;
  g.omega = linspace(-half_span, half_span, points);
  g.step = 2.0 * half_span / (points - 1);
  return g;
}

FrequencyGrid FrequencyGrid::for_widths(double a, double b, int points, double span_factor) {
  return symmetric(span_factor * std::max(a, b), points);
}

bool FrequencyGrid::same_as(const FrequencyGrid& other) const {
  return omega.size() == other.omega.size() && std::abs(step - other.step) <= 1e-14 * std::abs(step) &&
         std::abs(half_span() - other.half_span()) <= 1e-12 * std::abs(half_span());
}

RMatrix double_gaussian_jsa(double a, double b, const FrequencyGrid& grid) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("JSA widths must be positive");
  if (grid.size() < kMinGridPoints) {
    throw ValidationError("frequency grid has " + std::to_string(grid.size()) + " points; need >= " +
                          std::to_string(kMinGridPoints));
  }
  const double needed = kMinSpanFactor * std::max(a, b);
  if (grid.half_span() < needed * (1.0 - 1e-12)) {
    throw ValidationError("frequency grid half-span " + std::to_string(grid.half_span()) +
                          " does not cover 5 max(a, b) = " + std::to_string(needed));
  }
  const int n = grid.size();
  RMatrix s(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double sum = grid.omega[i] + grid.omega[k];
      const double diff = grid.omega[i] - grid.omega[k];
      s(i, k) = std::exp(-sum * sum / (a * a) - diff * diff / (b * b));
    }
  }
  return s;
}

SchmidtDecomposition schmidt_decompose(const RMatrix& jsa, const FrequencyGrid& grid,
                                       const SchmidtOptions& options) {
  const int n = grid.size();
  if (jsa.rows() != n || jsa.cols() != n) throw InvalidDimension("JSA does not match the grid");
  if (!jsa.allFinite()) throw NumericalError("JSA contains non-finite entries");

  Eigen::BDCSVD<RMatrix> svd(jsa * grid.step, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD of the JSA failed");
  const Eigen::VectorXd sv = svd.singularValues();
  const double total = sv.squaredNorm();
  if (!(total > 0.0)) throw NumericalError("JSA has zero norm");

  int keep = 0;
  while (keep < std::min<int>(options.max_modes, static_cast<int>(sv.size())) &&
         sv[keep] * sv[keep] / total > options.min_eigenvalue) {
    ++keep;
  }
  keep = std::max(keep, 1);

  SchmidtDecomposition d;
  d.grid = grid;
  d.lambdas = sv.head(keep).array().square() / total;
  d.lambdas /= d.lambdas.sum();
  d.signal_modes.resize(n, keep);
  d.idler_modes.resize(n, keep);
  const double scale = 1.0 / std::sqrt(grid.step);
  for (int m = 0; m < keep; ++m) {
    Eigen::VectorXd tau = svd.matrixU().col(m) * scale;
    Eigen::VectorXd zeta = svd.matrixV().col(m) * scale;
    if (tau[peak_index(tau)] < 0.0) {
      tau = -tau;
      zeta = -zeta;
    }
    d.signal_modes.col(m) = tau.cast<Complex>();
    d.idler_modes.col(m) = zeta.cast<Complex>();
  }
  d.schmidt_number = schmidt_number(d.lambdas);
  return d;
}

void SchmidtDecomposition::write_csv(const std::filesystem::path& modes_path,
                                     const std::filesystem::path& eigenvalues_path) const {
  std::vector<std::string> columns{"omega"};
  for (int m = 1; m <= modes(); ++m) {
    const std::string k = std::to_string(m);
    for (const char* part : {"tau_re_", "tau_im_", "zeta_re_", "zeta_im_"}) columns.push_back(part + k);
  }
  CsvWriter out(modes_path, columns);
  std::vector<double> row(columns.size());
  for (int i = 0; i < grid.size(); ++i) {
    row[0] = grid.omega[i];
    for (int m = 0; m < modes(); ++m) {
      row[1 + 4 * m] = signal_modes(i, m).real();
      row[2 + 4 * m] = signal_modes(i, m).imag();
      row[3 + 4 * m] = idler_modes(i, m).real();
      row[4 + 4 * m] = idler_modes(i, m).imag();
    }
    out.row(row);
  }
  CsvWriter eig(eigenvalues_path, {"n", "lambda"});
  for (int m = 0; m < modes(); ++m) eig.row({static_cast<double>(m + 1), lambdas[m]});
}

double schmidt_number(const RVector& lambdas) {
  if (lambdas.size() == 0) throw ValidationError("empty Schmidt spectrum");
  if ((lambdas.array() < 0.0).any()) throw ValidationError("negative Schmidt eigenvalue");
  if (std::abs(lambdas.sum() - 1.0) > kNormTolerance) {
    throw ValidationError("Schmidt eigenvalues sum to " + std::to_string(lambdas.sum()));
  }
  return 1.0 / lambdas.squaredNorm();
}

CVector gaussian_profile(const FrequencyGrid& grid, double width) {
  if (!(width > 0.0)) throw DomainError("profile width must be positive");
  CVector f(grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    f[i] = std::exp(-2.0 * grid.omega[i] * grid.omega[i] / (width * width));
  }
  return f / (f.norm() * std::sqrt(grid.step));
}

CVector seed_overlaps(const CVector& profile, const SchmidtDecomposition& decomposition) {
  if (profile.size() != decomposition.grid.size()) {
    throw ValidationError("seed profile has " + std::to_string(profile.size()) +
                          " samples; decomposition grid has " +
                          std::to_string(decomposition.grid.size()));
  }
  const double step = decomposition.grid.step;
  const double norm = profile.squaredNorm() * step;
  if (std::abs(norm - 1.0) > kNormTolerance) {
    throw ValidationError("seed profile grid norm " + std::to_string(norm) + " differs from 1");
  }
  return decomposition.signal_modes.adjoint() * profile * step;
}

MeasurementBasis::MeasurementBasis(CMatrix u) : u_(std::move(u)) {
  if (u_.rows() != u_.cols() || u_.rows() == 0) throw InvalidDimension("basis matrix must be square");
  const double err = (u_.adjoint() * u_ - CMatrix::Identity(u_.rows(), u_.cols())).cwiseAbs().maxCoeff();
  if (err > kUnitaryTolerance) {
    throw ValidationError("measurement basis is not unitary (error " + std::to_string(err) + ")");
  }
}

MeasurementBasis MeasurementBasis::identity(int modes) {
  return MeasurementBasis(CMatrix::Identity(modes, modes));
}

MeasurementBasis MeasurementBasis::with_first_column(const CVector& column) {
  const double norm = column.norm();
  if (!(norm > 0.0)) throw DomainError("first basis column must be nonzero");
  const CVector v = column / norm;
  const Eigen::Index n = v.size();
  const CMatrix column_matrix = v;
  Eigen::HouseholderQR<CMatrix> qr(column_matrix);
  CMatrix q = qr.householderQ() * CMatrix::Identity(n, n);
  // q.col(0) equals v up to a unit phase.
  const Complex overlap = q.col(0).dot(v);
  q.col(0) *= overlap / std::abs(overlap);
  return MeasurementBasis(q);
}

HeraldedCoefficients heralded_coeffs(const RVector& lambdas, const MeasurementBasis& basis, Complex gamma,
                                     const CVector& seed_overlaps) {
  const int n = static_cast<int>(lambdas.size());
  if (basis.modes() != n || seed_overlaps.size() != n) {
    throw InvalidDimension("lambda, basis and seed overlaps must have the same mode count");
  }
  if (std::abs(lambdas.sum() - 1.0) > kNormTolerance || (lambdas.array() < 0.0).any()) {
    throw ValidationError("Schmidt eigenvalues must be nonnegative and sum to 1");
  }
  if (seed_overlaps.squaredNorm() > 1.0 + kNormTolerance) {
    throw ValidationError("seed overlaps carry more than unit weight");
  }

  HeraldedCoefficients h;
  h.lambdas = lambdas;
  h.u = basis.matrix();
  h.gamma = gamma;
  h.seed_overlaps = seed_overlaps;
  h.alpha = gamma * seed_overlaps;
  h.beta = h.u.adjoint() * h.alpha;
  h.c = h.u.adjoint() * lambdas.cast<Complex>().asDiagonal() * h.u;
  h.norm = 1.0 / (lambdas.array() * (h.alpha.array().abs2() + 1.0)).sum();
  h.g.resize(n);
  h.eta.resize(n);
  for (int j = 0; j < n; ++j) {
    const Complex cb = h.c.row(j) * h.beta;
    h.g[j] = cb - h.c(j, j) * h.beta[j];
    h.eta[j] = 1.0 / h.norm - h.c(j, j).real() * (std::norm(h.beta[j]) + 1.0) -
               2.0 * (std::conj(h.beta[j]) * h.g[j]).real();
  }
  return h;
}

QuantumState reduced_state(const HeraldedCoefficients& coeffs, int j, int dim) {
  require_mode(coeffs, j);
  if (dim < 2) throw InvalidDimension("reduced state needs dim >= 2");
  const double c = coeffs.c(j, j).real();
  const Complex b = coeffs.beta[j];
  const Complex g = coeffs.g[j];
  // Basis {|0>, |1>}; phi = (conj(b), 1).
  Eigen::Matrix2cd block;
  const Eigen::Vector2cd phi(std::conj(b), 1.0);
  const Eigen::Vector2cd zero(1.0, 0.0);
  block = c * phi * phi.adjoint() + g * phi * zero.adjoint() + std::conj(g) * zero * phi.adjoint() +
          coeffs.eta[j] * zero * zero.adjoint();
  block *= coeffs.norm;
  block = 0.5 * (block + block.adjoint()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> eig(block);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < -kPsdTolerance) {
    throw NumericalError("heralded coefficients give a reduced state with eigenvalue " +
                         std::to_string(min_eig));
  }
  if (min_eig < 0.0) {
    const Eigen::Vector2d clipped = eig.eigenvalues().cwiseMax(0.0);
    block = eig.eigenvectors() * clipped.cast<Complex>().asDiagonal() * eig.eigenvectors().adjoint();
  }
  block /= block.trace().real();

  CMatrix rho = CMatrix::Zero(dim, dim);
  rho.topLeftCorner(2, 2) = block;
  return QuantumState::mixed(rho);
}

ClosedFormTerms closed_form_terms(const HeraldedCoefficients& coeffs, int j) {
  require_mode(coeffs, j);
  Complex sum = 0.0;
  for (int k = 0; k < coeffs.modes(); ++k) {
    sum += coeffs.lambdas[k] * std::conj(coeffs.u(k, j)) * coeffs.alpha[k];
  }
  return {coeffs.norm * coeffs.c(j, j).real(), std::numbers::sqrt2 * coeffs.norm * sum.imag()};
}

double closed_form_variance(const HeraldedCoefficients& coeffs, int j, double z) {
  const auto [kappa, mu] = closed_form_terms(coeffs, j);
  return -mu * mu - 2.0 * z * kappa * mu + 0.5 + kappa + z * z * (0.5 + 2.0 * kappa - kappa * kappa);
}

Scenario scenario_from_id(int id) {
  if (id == 1) return Scenario::MatchedSeed;
  if (id == 2) return Scenario::FixedSeed;
  throw ValidationError("unknown scenario id " + std::to_string(id) + " (expected 1 or 2)");
}

ScenarioPoint scenario_point(Scenario scenario, double a, double b, Complex gamma,
                             const ScenarioOptions& options) {
  const FrequencyGrid grid = FrequencyGrid::for_widths(a, b, options.grid_points);
  const SchmidtDecomposition d = schmidt_decompose(double_gaussian_jsa(a, b, grid), grid, options.schmidt);
  const CVector profile =
      scenario == Scenario::MatchedSeed ? CVector(d.signal_modes.col(0)) : gaussian_profile(grid, a);
  const CVector overlaps = seed_overlaps(profile, d);
  const MeasurementBasis basis = MeasurementBasis::with_first_column(overlaps.conjugate());
  const HeraldedCoefficients h = heralded_coeffs(d.lambdas, basis, gamma, overlaps);

  ScenarioPoint p;
  p.a = a;
  p.b = b;
  p.schmidt_number = d.schmidt_number;
  p.seed_weight = std::norm(overlaps[0]);
  p.squeezing = minimize_squeezing(reduced_state(h, 0, options.dim), options.optimizer);
  return p;
}

std::vector<ScenarioPoint> scenario_sweep(Scenario scenario,
                                          const std::vector<std::pair<double, double>>& widths,
                                          Complex gamma, const ScenarioOptions& options) {
  std::vector<ScenarioPoint> curve(widths.size());
  parallel_for(widths.size(), options.threads, [&](std::size_t i) {
    curve[i] = scenario_point(scenario, widths[i].first, widths[i].second, gamma, options);
  });
  return curve;
}

void write_scenario_csv(const std::filesystem::path& path, const std::vector<ScenarioPoint>& curve) {
  CsvWriter out(path, {"K", "a", "b", "seed_weight", "xi_db", "z_opt", "theta_opt"});
  for (const ScenarioPoint& p : curve) {
    out.row({p.schmidt_number, p.a, p.b, p.seed_weight, p.squeezing.xi_db, p.squeezing.z_opt,
             p.squeezing.theta_opt});
  }
}

std::pair<double, double> widths_for_schmidt_number(double k, double a) {
  if (!(k >= 1.0)) throw DomainError("Schmidt number must be >= 1");
  if (!(a > 0.0)) throw DomainError("width must be positive");
  const double ratio = k + std::sqrt(k * k - 1.0);
  return {a, a / ratio};
}

}  // namespace nlsq
