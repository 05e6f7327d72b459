#include "nlsq/fock.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "nlsq/csv.hpp"
#include "nlsq/errors.hpp"

namespace nlsq {
namespace {

constexpr double kNormTolerance = 1e-12;
constexpr double kPsdTolerance = 1e-10;

void require_dim(int dim, int min_dim = 2) {
  if (dim < min_dim) {
    throw InvalidDimension("Fock dimension " + std::to_string(dim) + " is below the minimum " +
                           std::to_string(min_dim));
  }
}

void require_same_dim(int a, int b) {
  if (a != b) {
    throw InvalidDimension("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

double max_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// Coherent amplitudes e^{-|a|^2/2} a^n / sqrt(n!), by recursion.
CVector coherent_vector(int dim, Complex alpha) {
  CVector v(dim);
  v[0] = std::exp(-0.5 * std::norm(alpha));
  for (int n = 1; n < dim; ++n) v[n] = v[n - 1] * alpha / std::sqrt(static_cast<double>(n));
  return v;
}

void require_guard(int dim, Complex alpha) {
  const double tail = coherent_tail_mass(alpha, dim - 4);
  if (!(tail < kTailTolerance)) {
    throw TruncationError("coherent amplitude |alpha| = " + std::to_string(std::abs(alpha)) +
                          " leaks " + std::to_string(tail) + " into the top levels of dim " +
                          std::to_string(dim) + "; use dim >= " +
                          std::to_string(guarded_dim(alpha, dim)));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// FockOperator

FockOperator::FockOperator(CMatrix matrix, int ladder_order)
    : matrix_(std::move(matrix)), ladder_order_(ladder_order) {
  if (matrix_.rows() != matrix_.cols()) throw InvalidDimension("operator matrix is not square");
  require_dim(static_cast<int>(matrix_.rows()), 1);
}

FockOperator FockOperator::identity(int dim) { return {CMatrix::Identity(dim, dim), 0}; }

FockOperator FockOperator::adjoint() const { return {matrix_.adjoint(), ladder_order_}; }

double FockOperator::hermiticity_error() const { return max_abs(matrix_ - matrix_.adjoint()); }

FockOperator operator+(const FockOperator& lhs, const FockOperator& rhs) {
  require_same_dim(lhs.dim(), rhs.dim());
  return {lhs.matrix_ + rhs.matrix_, std::max(lhs.ladder_order_, rhs.ladder_order_)};
}

FockOperator operator-(const FockOperator& lhs, const FockOperator& rhs) {
  require_same_dim(lhs.dim(), rhs.dim());
  return {lhs.matrix_ - rhs.matrix_, std::max(lhs.ladder_order_, rhs.ladder_order_)};
}

FockOperator operator*(const FockOperator& lhs, const FockOperator& rhs) {
  require_same_dim(lhs.dim(), rhs.dim());
  return {lhs.matrix_ * rhs.matrix_, lhs.ladder_order_ + rhs.ladder_order_};
}

FockOperator operator*(Complex scale, const FockOperator& op) {
  return {scale * op.matrix_, op.ladder_order_};
}

FockOperator operator*(double scale, const FockOperator& op) {
  return {scale * op.matrix_, op.ladder_order_};
}

// ---------------------------------------------------------------------------
// QuantumState

QuantumState QuantumState::pure(CVector amplitudes) {
  require_dim(static_cast<int>(amplitudes.size()), 1);
  const double norm = amplitudes.norm();
  if (!(std::abs(norm - 1.0) <= kNormTolerance)) {
    throw ValidationError("pure state norm " + std::to_string(norm) + " differs from 1");
  }
  QuantumState s;
  s.amplitudes_ = std::move(amplitudes);
  return s;
}

QuantumState QuantumState::mixed(CMatrix density) {
  if (density.rows() != density.cols()) throw InvalidDimension("density matrix is not square");
  require_dim(static_cast<int>(density.rows()), 1);
  const Complex trace = density.trace();
  if (!(std::abs(trace - 1.0) <= kNormTolerance)) {
    throw ValidationError("density matrix trace " + std::to_string(trace.real()) + " differs from 1");
  }
  if (!(max_abs(density - density.adjoint()) <= kNormTolerance)) {
    throw ValidationError("density matrix is not Hermitian");
  }
  const CMatrix herm = 0.5 * (density + density.adjoint());
  // Rows and columns past the last nonzero one only contribute zero eigenvalues.
  Eigen::Index used = herm.rows();
  while (used > 1 && herm.row(used - 1).isZero(0.0) && herm.col(used - 1).isZero(0.0)) --used;
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(herm.topLeftCorner(used, used), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -kPsdTolerance) {
    throw ValidationError("density matrix has eigenvalue " +
                          std::to_string(eig.eigenvalues().minCoeff()));
  }
  QuantumState s;
  s.density_ = herm;
  return s;
}

int QuantumState::dim() const {
  return static_cast<int>(is_pure() ? amplitudes_->size() : density_->rows());
}

const CVector& QuantumState::amplitudes() const {
  if (!is_pure()) throw ValidationError("mixed state has no amplitude vector");
  return *amplitudes_;
}

CMatrix QuantumState::density() const {
  if (is_pure()) return (*amplitudes_) * amplitudes_->adjoint();
  return *density_;
}

RVector QuantumState::populations() const {
  if (is_pure()) return amplitudes_->cwiseAbs2();
  return density_->diagonal().real();
}

double QuantumState::tail_mass(int levels) const {
  const RVector pops = populations();
  const int n = static_cast<int>(pops.size());
  const int from = std::max(0, n - levels);
  return pops.segment(from, n - from).sum();
}

int QuantumState::support() const {
  const RVector pops = populations();
  for (int n = static_cast<int>(pops.size()) - 1; n > 0; --n) {
    if (pops[n] > kSupportEpsilon) return n;
  }
  return 0;
}

QuantumState QuantumState::resized(int new_dim) const {
  require_dim(new_dim, 1);
  const int old_dim = dim();
  if (new_dim < old_dim && support() >= new_dim) {
    throw TruncationError("cannot shrink state with support " + std::to_string(support()) +
                          " to dim " + std::to_string(new_dim));
  }
  const int keep = std::min(old_dim, new_dim);
  QuantumState s;
  if (is_pure()) {
    CVector v = CVector::Zero(new_dim);
    v.head(keep) = amplitudes_->head(keep);
    s.amplitudes_ = v / v.norm();
  } else {
    CMatrix m = CMatrix::Zero(new_dim, new_dim);
    m.topLeftCorner(keep, keep) = density_->topLeftCorner(keep, keep);
    s.density_ = m / m.trace().real();
  }
  return s;
}

// ---------------------------------------------------------------------------
// Operators

LadderOperators make_ladder(int dim) {
  require_dim(dim);
  CMatrix a = CMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  CMatrix a_dag = a.adjoint();
  return {FockOperator(std::move(a), 1), FockOperator(std::move(a_dag), 1)};
}

Quadratures quadrature_ops(int dim) {
  const auto [a, a_dag] = make_ladder(dim);
  const double s = 1.0 / std::numbers::sqrt2;
  const Complex i{0.0, 1.0};
  return {s * (a + a_dag), (s / i) * (a - a_dag)};
}

FockOperator number_operator(int dim) {
  require_dim(dim, 1);
  CMatrix n = CMatrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) n(k, k) = static_cast<double>(k);
  return {std::move(n), 2};
}

Quadratures rotated_quadratures(int dim, double theta) {
  const auto [x, p] = quadrature_ops(dim);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {s * x - c * p, s * p + c * x};
}

double coherent_tail_mass(Complex alpha, int from_level) {
  const double mean = std::norm(alpha);
  from_level = std::max(from_level, 0);
  if (mean == 0.0) return from_level == 0 ? 1.0 : 0.0;
  // Poisson terms summed upward from from_level in log space.
  double total = 0.0;
  for (int n = from_level; n < from_level + 4000; ++n) {
    const double term = std::exp(n * std::log(mean) - mean - std::lgamma(n + 1.0));
    total += term;
    if (n > mean && term < 1e-30 * std::max(total, 1e-300)) break;
  }
  return std::min(total, 1.0);
}

int guarded_dim(Complex alpha, int min_dim) {
  int dim = std::max(min_dim, 6);
  while (!(coherent_tail_mass(alpha, dim - 4) < kTailTolerance)) ++dim;
  return dim;
}

int moment_safe_dim(Complex alpha, int order, int min_dim) {
  // PACS populations pick up a factor ~n over the coherent ones; keep two
  // extra orders of magnitude below the support threshold.
  int dim = std::max(min_dim, order + 3);
  while (!(coherent_tail_mass(alpha, dim - order - 2) < 1e-2 * kSupportEpsilon)) ++dim;
  return dim;
}

FockOperator displacement(int dim, Complex alpha) {
  require_dim(dim);
  require_guard(dim, alpha);
  const auto [a, a_dag] = make_ladder(dim);
  const CMatrix generator = alpha * a_dag.matrix() - std::conj(alpha) * a.matrix();
  CMatrix d = generator.exp();
  const double unitarity = max_abs(d.adjoint() * d - CMatrix::Identity(dim, dim));
  if (!(unitarity < 1e-10)) {
    throw NumericalError("displacement exponential lost unitarity: " + std::to_string(unitarity));
  }
  // Not a finite polynomial in a, a^dag; treat as order 0 so that it does
  // not trip the moment guard when composed.
  return {std::move(d), 0};
}

FockOperator phase_rotation(int dim, double phi) {
  require_dim(dim, 1);
  CMatrix r = CMatrix::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) r(n, n) = std::polar(1.0, -phi * n);
  return {std::move(r), 0};
}

// ---------------------------------------------------------------------------
// States

QuantumState fock_state(int dim, int n) {
  require_dim(dim, n + 1);
  CVector v = CVector::Zero(dim);
  v[n] = 1.0;
  return QuantumState::pure(std::move(v));
}

QuantumState vacuum(int dim) { return fock_state(dim, 0); }

QuantumState coherent(int dim, Complex alpha) {
  require_dim(dim);
  require_guard(dim, alpha);
  CVector v = coherent_vector(dim, alpha);
  return QuantumState::pure(v / v.norm());
}

QuantumState pacs(int dim, Complex alpha) {
  require_dim(dim);
  require_guard(dim, alpha);
  const CVector c = coherent_vector(dim, alpha);
  CVector v = CVector::Zero(dim);
  for (int n = 1; n < dim; ++n) v[n] = std::sqrt(static_cast<double>(n)) * c[n - 1];
  // eta(alpha) = 1/sqrt(|alpha|^2 + 1) up to the (guarded) truncation loss.
  return QuantumState::pure(v / v.norm());
}

QuantumState superposition01(int dim, Complex c) {
  return superposition(dim, {c, Complex{1.0, 0.0}});
}

QuantumState superposition(int dim, const std::vector<Complex>& amplitudes) {
  require_dim(dim, static_cast<int>(amplitudes.size()));
  CVector v = CVector::Zero(dim);
  for (std::size_t n = 0; n < amplitudes.size(); ++n) v[static_cast<Eigen::Index>(n)] = amplitudes[n];
  const double norm = v.norm();
  if (norm == 0.0) throw ValidationError("superposition amplitudes are all zero");
  return QuantumState::pure(v / norm);
}

QuantumState transform(const FockOperator& unitary, const QuantumState& state) {
  require_same_dim(unitary.dim(), state.dim());
  if (state.is_pure()) {
    CVector v = unitary.matrix() * state.amplitudes();
    return QuantumState::pure(v / v.norm());
  }
  CMatrix rho = unitary.matrix() * state.density() * unitary.matrix().adjoint();
  return QuantumState::mixed(rho / rho.trace().real());
}

// ---------------------------------------------------------------------------
// Moments

Complex expectation(const QuantumState& state, const FockOperator& op) {
  require_same_dim(state.dim(), op.dim());
  if (state.is_pure()) {
    const CVector& psi = state.amplitudes();
    return psi.dot(op.matrix() * psi);
  }
  return (state.density() * op.matrix()).trace();
}

void require_exact_moments(const QuantumState& state, int order) {
  const int support = state.support();
  if (support + order > state.dim() - 1) {
    throw TruncationError("state support " + std::to_string(support) + " plus operator order " +
                          std::to_string(order) + " exceeds truncation dim " +
                          std::to_string(state.dim()));
  }
}

double variance(const QuantumState& state, const FockOperator& op) {
  require_same_dim(state.dim(), op.dim());
  require_exact_moments(state, op.ladder_order());
  if (state.is_pure()) {
    const CVector& psi = state.amplitudes();
    const CVector op_psi = op.matrix() * psi;
    const double mean = psi.dot(op_psi).real();
    return op_psi.squaredNorm() - mean * mean;
  }
  const CMatrix rho_op = state.density() * op.matrix();
  const double mean = rho_op.trace().real();
  return (rho_op * op.matrix()).trace().real() - mean * mean;
}

// ---------------------------------------------------------------------------
// Wigner function

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(std::max(n, 0)));
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
  return out;
}

WignerGrid wigner_grid(const QuantumState& state, const std::vector<double>& xs,
                       const std::vector<double>& ps) {
  const CMatrix rho = state.density();
  const int dim = state.dim();

  // W = sum_{m>=n} weight * (-1)^n sqrt(n!/m!) (2 alpha^*)^{m-n}
  //     L_n^{(m-n)}(4|alpha|^2) e^{-2|alpha|^2} / pi,  alpha = (x + i p)/sqrt(2),
  // with weight rho_nn on the diagonal and 2 Re(rho_mn ...) off it.
  struct Term {
    int m, n;
    Complex rho;
    double scale;
  };
  std::vector<Term> terms;
  for (int m = 0; m < dim; ++m) {
    for (int n = 0; n <= m; ++n) {
      if (std::abs(rho(m, n)) < 1e-16) continue;
      const double norm = std::exp(0.5 * (std::lgamma(n + 1.0) - std::lgamma(m + 1.0)));
      terms.push_back({m, n, rho(m, n), (n % 2 ? -1.0 : 1.0) * norm});
    }
  }

  WignerGrid grid{xs, ps, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(xs.size()),
                                                static_cast<Eigen::Index>(ps.size()))};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < ps.size(); ++j) {
      const Complex alpha = Complex{xs[i], ps[j]} / std::numbers::sqrt2;
      const double r = 4.0 * std::norm(alpha);
      const double gauss = std::exp(-0.5 * r);
      double w = 0.0;
      for (const Term& t : terms) {
        const int k = t.m - t.n;
        const Complex value = t.scale * std::pow(2.0 * std::conj(alpha), k) *
                              std::assoc_laguerre(static_cast<unsigned>(t.n),
                                                  static_cast<unsigned>(k), r);
        w += (k == 0 ? 1.0 : 2.0) * (t.rho * value).real();
      }
      grid.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          w * gauss / std::numbers::pi;
    }
  }
  return grid;
}

double WignerGrid::integral() const {
  auto weights = [](const std::vector<double>& g) {
    std::vector<double> w(g.size(), 0.0);
    for (std::size_t k = 0; k + 1 < g.size(); ++k) {
      const double h = 0.5 * (g[k + 1] - g[k]);
      w[k] += h;
      w[k + 1] += h;
    }
    return w;
  };
  const auto wx = weights(xs);
  const auto wp = weights(ps);
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ps.size(); ++j)
      total += wx[i] * wp[j] * values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return total;
}

void WignerGrid::write_csv(const std::filesystem::path& path) const {
  CsvWriter csv(path, {"x", "p", "W"});
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ps.size(); ++j)
      csv.row({xs[i], ps[j], values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
}

}  // namespace nlsq
