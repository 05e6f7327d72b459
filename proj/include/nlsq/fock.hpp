#pragma once

// Truncated single-mode Fock space: states, operators, and exact low-order
// moments.  Conventions: hbar = 1, x = (a + a^dag)/sqrt(2),
// p = (a - a^dag)/(i sqrt(2)), [x, p] = i, vacuum quadrature variance 1/2.

#include <complex>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace nlsq {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr int kDefaultDim = 40;

/// Populations below this are treated as outside a state's support.
inline constexpr double kSupportEpsilon = 1e-24;

/// Tail mass (top four levels) above which a truncation is flagged.
inline constexpr double kTailTolerance = 1e-10;

/// Dense operator on the truncated Fock space.
///
/// Carries its ladder order: the polynomial degree in a, a^dag.  Variance
/// evaluation uses it to decide whether truncated powers are still exact on
/// the state's support.
class FockOperator {
 public:
  FockOperator(CMatrix matrix, int ladder_order);

  static FockOperator identity(int dim);

  int dim() const { return static_cast<int>(matrix_.rows()); }
  int ladder_order() const { return ladder_order_; }
  const CMatrix& matrix() const { return matrix_; }
  Complex operator()(int row, int col) const { return matrix_(row, col); }

  FockOperator adjoint() const;
  /// Largest entry of |M - M^dag|.
  double hermiticity_error() const;
  bool is_hermitian(double tol = 1e-12) const { return hermiticity_error() < tol; }

  friend FockOperator operator+(const FockOperator& lhs, const FockOperator& rhs);
  friend FockOperator operator-(const FockOperator& lhs, const FockOperator& rhs);
  friend FockOperator operator*(const FockOperator& lhs, const FockOperator& rhs);
  friend FockOperator operator*(Complex scale, const FockOperator& op);
  friend FockOperator operator*(double scale, const FockOperator& op);

 private:
  CMatrix matrix_;
  int ladder_order_;
};

/// Pure (amplitude vector) or mixed (density matrix) state.
class QuantumState {
 public:
  /// Validates unit norm to 1e-12.
  static QuantumState pure(CVector amplitudes);
  /// Validates unit trace and Hermiticity to 1e-12 and min eigenvalue >= -1e-10.
  static QuantumState mixed(CMatrix density);

  int dim() const;
  bool is_pure() const { return amplitudes_.has_value(); }

  /// Throws ValidationError for mixed states.
  const CVector& amplitudes() const;
  CMatrix density() const;
  RVector populations() const;

  /// Population on the top `levels` Fock levels.
  double tail_mass(int levels = 4) const;
  bool truncation_adequate() const { return tail_mass(4) < kTailTolerance; }

  /// Highest Fock level whose population exceeds kSupportEpsilon.
  int support() const;

  /// Same state in a larger (zero-padded) or smaller space.  Shrinking throws
  /// TruncationError if population would be dropped.
  QuantumState resized(int new_dim) const;

 private:
  std::optional<CVector> amplitudes_;
  std::optional<CMatrix> density_;
};

struct LadderOperators {
  FockOperator a;
  FockOperator a_dag;
};

struct Quadratures {
  FockOperator x;
  FockOperator p;
};

/// Annihilation/creation pair: a[n-1, n] = sqrt(n).
LadderOperators make_ladder(int dim);
Quadratures quadrature_ops(int dim);
FockOperator number_operator(int dim);

/// Generalized quadratures: P(theta) = sin(theta) p + cos(theta) x and
/// X(theta) = -cos(theta) p + sin(theta) x, so that [X(theta), P(theta)] = i.
Quadratures rotated_quadratures(int dim, double theta);

/// Population of |alpha> on levels >= from_level.
double coherent_tail_mass(Complex alpha, int from_level);
/// Smallest dimension >= min_dim whose top four levels hold < 1e-10 of |alpha>.
int guarded_dim(Complex alpha, int min_dim = kDefaultDim);

/// Smallest dimension in which a displaced state of amplitude alpha (a
/// coherent state or PACS) has exact moments for operators up to `order`.
int moment_safe_dim(Complex alpha, int order = 2, int min_dim = 6);

/// exp(alpha a^dag - alpha^* a), by matrix exponential of the truncated
/// generator.  Throws TruncationError when |alpha> leaks into the top levels.
FockOperator displacement(int dim, Complex alpha);

/// Phase rotation exp(-i phi n).  Maps the quadrature x_phi = cos(phi) x + sin(phi) p
/// of a state onto x of the rotated state.
FockOperator phase_rotation(int dim, double phi);

QuantumState fock_state(int dim, int n);
QuantumState vacuum(int dim);
QuantumState coherent(int dim, Complex alpha);
/// Normalized a^dag |alpha>.
QuantumState pacs(int dim, Complex alpha);
/// eta(c) (c|0> + |1>).
QuantumState superposition01(int dim, Complex c);
/// Normalized sum_n amplitudes[n] |n>.
QuantumState superposition(int dim, const std::vector<Complex>& amplitudes);

/// U |psi> or U rho U^dag.
QuantumState transform(const FockOperator& unitary, const QuantumState& state);

/// <psi|op|psi> or Tr(rho op).
Complex expectation(const QuantumState& state, const FockOperator& op);

/// <op^2> - <op>^2 for a Hermitian op.  Requires the state's support to sit
/// at least ladder_order levels below the truncation so that the result is
/// exact; otherwise throws TruncationError.
double variance(const QuantumState& state, const FockOperator& op);

/// Throws TruncationError unless support + order <= dim - 1.
void require_exact_moments(const QuantumState& state, int order);

struct WignerGrid {
  std::vector<double> xs;
  std::vector<double> ps;
  /// values(i, j) = W(xs[i], ps[j]).
  Eigen::MatrixXd values;

  /// Trapezoid integral over the grid.
  double integral() const;
  /// Columns x, p, W; x-major.
  void write_csv(const std::filesystem::path& path) const;
};

/// Wigner function normalized to unit phase-space integral, so W(0,0) of the
/// vacuum is 1/pi.
WignerGrid wigner_grid(const QuantumState& state, const std::vector<double>& xs,
                       const std::vector<double>& ps);

/// n evenly spaced points on [lo, hi].
std::vector<double> linspace(double lo, double hi, int n);

}  // namespace nlsq
