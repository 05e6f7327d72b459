#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "nlsq/errors.hpp"
#include "nlsq/pdc.hpp"

using namespace nlsq;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;
const double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

CMatrix random_unitary(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  CMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) m(i, k) = {g(rng), g(rng)};
  Eigen::HouseholderQR<CMatrix> qr(m);
  return qr.householderQ() * CMatrix::Identity(n, n);
}

RVector random_lambdas(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  RVector l(n);
  for (int i = 0; i < n; ++i) l[i] = u(rng);
  std::sort(l.data(), l.data() + n, std::greater<>());
  return l / l.sum();
}

CVector random_overlaps(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> w(0.2, 1.0);
  CVector f(n);
  for (int i = 0; i < n; ++i) f[i] = {g(rng), g(rng)};
  return f * (std::sqrt(w(rng)) / f.norm());
}

CVector unit(int n, int k) {
  CVector e = CVector::Zero(n);
  e[k] = 1.0;
  return e;
}

RVector two(double l1) { return RVector{{l1, 1.0 - l1}}; }

SchmidtDecomposition decompose(double a, double b, int points = 512) {
  const FrequencyGrid grid = FrequencyGrid::for_widths(a, b, points);
  return schmidt_decompose(double_gaussian_jsa(a, b, grid), grid);
}

// Leading Schmidt mode of the double-Gaussian JSA on an arbitrary uniform
// grid, by power iteration without storing the matrix: S_ik depends on
// i + k through the sum term and on |i - k| through the difference term.
Eigen::VectorXd leading_mode_matrix_free(double a, double b, const FrequencyGrid& grid) {
  const int n = grid.size();
  const double h = grid.step;
  const double lo = grid.omega.front();
  std::vector<double> sum_term(2 * n - 1), diff_term(n);
  for (int s = 0; s < 2 * n - 1; ++s) {
    const double w = 2.0 * lo + s * h;
    sum_term[s] = std::exp(-w * w / (a * a));
  }
  for (int d = 0; d < n; ++d) diff_term[d] = std::exp(-(d * h) * (d * h) / (b * b));

  Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += sum_term[i + k] * diff_term[std::abs(i - k)] * v[k];
      w[i] = acc;
    }
    w.normalize();
    const double change = (w - v).norm();
    v = w;
    if (change < 1e-14) break;
  }
  return v / std::sqrt(h);
}

}  // namespace

TEST_CASE("frequency grid and JSA") {
  const FrequencyGrid grid = FrequencyGrid::for_widths(1.0, 2.0);
  CHECK(grid.size() == 512);
  CHECK(grid.half_span() == Approx(10.0));
  const RMatrix s = double_gaussian_jsa(1.0, 2.0, grid);
  // 0 is not a grid point of an even-sized grid; use the exact formula at the centre pair.
  const int mid = 255;
  const double w = grid.omega[mid];
  CHECK(s(mid, mid) == Approx(std::exp(-4.0 * w * w)).epsilon(1e-14));
  CHECK(max_abs((s - s.transpose()).cast<Complex>()) == 0.0);

  const FrequencyGrid odd = FrequencyGrid::symmetric(10.0, 301);
  CHECK(double_gaussian_jsa(1.0, 2.0, odd)(150, 150) == 1.0);

  CHECK_THROWS_AS(double_gaussian_jsa(1.0, 3.0, grid), ValidationError);  // span 10 < 15
  CHECK_THROWS_AS(double_gaussian_jsa(1.0, 2.0, FrequencyGrid::symmetric(10.0, 200)), ValidationError);
  CHECK_THROWS_AS(double_gaussian_jsa(0.0, 2.0, grid), DomainError);
}

TEST_CASE("Schmidt decomposition") {
  SUBCASE("separable source") {
    const SchmidtDecomposition d = decompose(1.5, 1.5);
    CHECK(d.lambdas[0] > 1.0 - 1e-8);
    CHECK(d.schmidt_number == Approx(1.0).epsilon(1e-8));
  }

  SUBCASE("geometric eigenvalue law and Schmidt number") {
    for (auto [a, b] : {std::pair{1.0, 2.0}, {1.0, 3.0}, {2.0, 3.0}, {2.0, 1.0}}) {
      const SchmidtDecomposition d = decompose(a, b);
      const double mu = std::abs(a - b) / (a + b);
      for (int n = 0; n < std::min(d.modes(), 12); ++n) {
        CHECK(std::abs(d.lambdas[n] - (1 - mu * mu) * std::pow(mu, 2 * n)) < 1e-6);
      }
      CHECK(std::abs(d.schmidt_number - 0.5 * (a / b + b / a)) < 1e-6);
      CHECK(std::abs(d.lambdas.sum() - 1.0) < 1e-9);
      CHECK(std::abs(d.schmidt_number - 1.0 / d.lambdas.squaredNorm()) < 1e-9);
      const int m = d.modes();
      CHECK(max_abs(d.signal_modes.adjoint() * d.signal_modes * d.grid.step - CMatrix::Identity(m, m)) < 1e-6);
      CHECK(max_abs(d.idler_modes.adjoint() * d.idler_modes * d.grid.step - CMatrix::Identity(m, m)) < 1e-6);
    }
  }

  SUBCASE("reconstruction and phase convention") {
    const SchmidtDecomposition d = decompose(1.0, 2.0);
    const FrequencyGrid& g = d.grid;
    const RMatrix s = double_gaussian_jsa(1.0, 2.0, g);
    // S = sqrt(total) sum sqrt(lambda) tau zeta^T, total = integral |S|^2.
    const double total = s.squaredNorm() * g.step * g.step;
    CMatrix recon = CMatrix::Zero(g.size(), g.size());
    for (int n = 0; n < d.modes(); ++n) {
      recon += std::sqrt(d.lambdas[n] * total) * d.signal_modes.col(n) * d.idler_modes.col(n).transpose();
    }
    CHECK(max_abs(recon - s.cast<Complex>()) < 1e-4);
    for (int n = 0; n < d.modes(); ++n) {
      // Odd modes peak twice with opposite signs; the first peak counts.
      const Eigen::VectorXd mag = d.signal_modes.col(n).cwiseAbs();
      Eigen::Index peak = 0;
      while (mag[peak] < mag.maxCoeff() * (1.0 - 1e-9)) ++peak;
      CHECK(d.signal_modes(peak, n).real() > 0.0);
    }
  }

  SUBCASE("grid doubling") {
    const SchmidtDecomposition coarse = decompose(1.0, 0.5, 512);
    const SchmidtDecomposition fine = decompose(1.0, 0.5, 1024);
    for (int n = 0; n <= 8 && n < coarse.modes(); ++n) {
      CHECK(std::abs(coarse.lambdas[n] - fine.lambdas[n]) < 1e-7);
    }
  }

  SUBCASE("export") {
    const SchmidtDecomposition d = decompose(1.0, 2.0);
    const auto dir = std::filesystem::temp_directory_path();
    d.write_csv(dir / "nlsq_modes.csv", dir / "nlsq_lambda.csv");
    std::ifstream in(dir / "nlsq_lambda.csv");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "n,lambda");
    CHECK(first.rfind("1,0.888888", 0) == 0);
  }
}

TEST_CASE("Schmidt number") {
  CHECK(schmidt_number(RVector{{1.0}}) == 1.0);
  CHECK(schmidt_number(RVector{{0.5, 0.5}}) == 2.0);
  CHECK(schmidt_number(RVector{{0.8, 0.2}}) == Approx(1.0 / 0.68).epsilon(1e-14));
  CHECK_THROWS_AS(schmidt_number(RVector()), ValidationError);
  CHECK_THROWS_AS(schmidt_number(RVector{{0.5, 0.4}}), ValidationError);
  CHECK_THROWS_AS(schmidt_number(RVector{{1.2, -0.2}}), ValidationError);
}

TEST_CASE("seed overlaps") {
  const SchmidtDecomposition d = decompose(1.0, 2.0);
  CHECK(max_abs(seed_overlaps(d.signal_modes.col(0), d) - unit(d.modes(), 0)) < 1e-8);
  CHECK(max_abs(seed_overlaps(d.signal_modes.col(1), d) - unit(d.modes(), 1)) < 1e-8);
  CHECK_THROWS_AS(seed_overlaps(CVector::Ones(100), d), ValidationError);
  CHECK_THROWS_AS(seed_overlaps(2.0 * d.signal_modes.col(0), d), ValidationError);

  SUBCASE("separable-source Gaussian against a correlated source") {
    const double a = 1.0, b = 2.0;
    const CVector f = gaussian_profile(d.grid, a);
    const CVector overlaps = seed_overlaps(f, d);
    const double lead = std::abs(overlaps[0]);
    CHECK(lead < 1.0);
    CHECK(overlaps.squaredNorm() <= 1.0 + 1e-9);

    // Same quantity on a 10x finer grid, without an SVD.
    const FrequencyGrid fine = FrequencyGrid::symmetric(d.grid.half_span(), 10 * (d.grid.size() - 1) + 1);
    const Eigen::VectorXd tau = leading_mode_matrix_free(a, b, fine);
    const CVector f_fine = gaussian_profile(fine, a);
    const double lead_fine = std::abs((tau.cast<Complex>().dot(f_fine)) * fine.step);
    CHECK(std::abs(lead - lead_fine) < 1e-6);

    // Both Gaussians: |f_1|^2 = 2 sqrt(r) / (1 + r), r = a/b.
    const double r = a / b;
    CHECK(std::abs(lead * lead - 2.0 * std::sqrt(r) / (1.0 + r)) < 1e-8);
  }
}

TEST_CASE("measurement basis") {
  CHECK_THROWS_AS(MeasurementBasis(CMatrix::Ones(2, 2)), ValidationError);
  CHECK_THROWS_AS(MeasurementBasis(CMatrix::Identity(2, 3)), InvalidDimension);
  const CVector v = CVector{{Complex(0.3, 0.1), Complex(-0.5, 0.2), Complex(0.1, 0.7)}};
  const MeasurementBasis b = MeasurementBasis::with_first_column(v);
  CHECK(max_abs(b.matrix().col(0) - v / v.norm()) < 1e-14);
  CHECK_THROWS_AS(MeasurementBasis::with_first_column(CVector::Zero(3)), DomainError);
}

TEST_CASE("heralded coefficients") {
  SUBCASE("single mode") {
    const Complex gamma(1.28, 0.0);
    const HeraldedCoefficients h = heralded_coeffs(RVector{{1.0}}, MeasurementBasis::identity(1), gamma, unit(1, 0));
    CHECK(h.norm == Approx(1.0 / (std::norm(gamma) + 1.0)).epsilon(1e-14));
    CHECK(h.c(0, 0).real() == Approx(1.0));
    CHECK(std::abs(h.g[0]) == 0.0);
    CHECK(std::abs(h.eta[0]) < 1e-14);
    const QuantumState rho = reduced_state(h, 0, 6);
    const QuantumState phi = superposition01(6, std::conj(gamma));
    CHECK(max_abs(rho.density() - phi.density()) < 1e-14);
  }

  SUBCASE("two modes, Schmidt basis") {
    const Complex gamma(1.28 * std::numbers::sqrt2, 0.0);
    const CVector f = CVector::Constant(2, kInvSqrt2);
    const HeraldedCoefficients h = heralded_coeffs(two(0.7), MeasurementBasis::identity(2), gamma, f);
    CHECK(h.c(0, 0).real() == Approx(0.7));
    CHECK(h.c(1, 1).real() == Approx(0.3));
    CHECK(std::abs(h.g[0]) < 1e-15);
    CHECK(std::abs(h.g[1]) < 1e-15);
    for (int j = 0; j < 2; ++j) {
      const double lj = h.lambdas[j];
      const double fj2 = std::norm(f[j]);
      CHECK(h.norm * h.eta[j] ==
            Approx((1.0 - lj) * ((1.0 - fj2) * std::norm(gamma) + 1.0) * h.norm).epsilon(1e-13));
      // Incoherent mixture of the PACS-like part and vacuum.
      const QuantumState rho = reduced_state(h, j, 6);
      const CVector phi = superposition01(6, std::conj(h.beta[j])).amplitudes() *
                          std::sqrt(std::norm(h.beta[j]) + 1.0);
      CMatrix expected = h.norm * lj * phi * phi.adjoint();
      expected(0, 0) += h.norm * h.eta[j];
      CHECK(max_abs(rho.density() - expected) < 1e-13);
    }
  }

  SUBCASE("two modes, rotated basis") {
    const Complex gamma(2.0, 0.5);
    const double nu = -kPi / 4;
    const CMatrix u{{std::cos(nu), -std::sin(nu)}, {std::sin(nu), std::cos(nu)}};
    for (double l1 : {1.0, 0.8, 0.3}) {
      const HeraldedCoefficients h =
          heralded_coeffs(two(l1), MeasurementBasis(u), gamma, CVector::Constant(2, kInvSqrt2));
      CHECK(std::abs(h.beta[0]) < 1e-15);
      CHECK(std::abs(h.beta[1] - gamma) < 1e-14);
      CHECK(h.c(0, 0).real() == Approx(0.5));
      CHECK(h.c(1, 1).real() == Approx(0.5));
      CHECK(std::abs(h.g[0] - (2.0 * l1 - 1.0) * gamma / 2.0) < 1e-14);
    }
    const HeraldedCoefficients h =
        heralded_coeffs(two(1.0), MeasurementBasis(u), gamma, CVector::Constant(2, kInvSqrt2));
    CHECK(max_abs(reduced_state(h, 0).density() - reduced_state(h, 1).density()) < 1e-12);
  }

  SUBCASE("invariants over random configurations") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> amp(-2.5, 2.5);
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 2 + trial % 4;
      const HeraldedCoefficients h =
          heralded_coeffs(random_lambdas(rng, n), MeasurementBasis(random_unitary(rng, n)),
                          {amp(rng), amp(rng)}, random_overlaps(rng, n));
      double alpha_weight = 0.0;
      for (int k = 0; k < n; ++k) alpha_weight += h.lambdas[k] * (std::norm(h.alpha[k]) + 1.0);
      CHECK(std::abs(h.norm - 1.0 / alpha_weight) < 1e-12);
      CHECK(std::abs(h.c.trace() - 1.0) < 1e-10);
      CHECK(max_abs(h.c - h.c.adjoint()) < 1e-14);
      Eigen::SelfAdjointEigenSolver<CMatrix> eig(h.c);
      CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
      for (int j = 0; j < n; ++j) {
        const QuantumState rho = reduced_state(h, j, 5);
        CHECK(std::abs(rho.density().trace() - 1.0) < 1e-12);
      }
    }
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(heralded_coeffs(two(0.5), MeasurementBasis::identity(3), 1.0, unit(2, 0)), InvalidDimension);
    CHECK_THROWS_AS(heralded_coeffs(RVector{{0.5, 0.6}}, MeasurementBasis::identity(2), 1.0, unit(2, 0)),
                    ValidationError);
    CHECK_THROWS_AS(heralded_coeffs(two(0.5), MeasurementBasis::identity(2), 1.0, CVector::Ones(2)),
                    ValidationError);
    const HeraldedCoefficients h = heralded_coeffs(two(0.5), MeasurementBasis::identity(2), 1.0, unit(2, 0));
    CHECK_THROWS_AS(reduced_state(h, 2), InvalidDimension);
    CHECK_THROWS_AS(reduced_state(h, 0, 1), InvalidDimension);
    HeraldedCoefficients broken = h;
    broken.eta[0] = -1.0;
    CHECK_THROWS_AS(reduced_state(broken, 0), NumericalError);
  }
}

TEST_CASE("basis change consistency") {
  std::mt19937_64 rng(55);
  const int n = 3;
  const RVector l = random_lambdas(rng, n);
  const CMatrix u = random_unitary(rng, n);
  const CVector f = random_overlaps(rng, n);
  const Complex gamma(1.1, -0.6);
  const HeraldedCoefficients h = heralded_coeffs(l, MeasurementBasis(u), gamma, f);

  // Relabeling measurement modes permutes the reduced states.
  CMatrix perm = CMatrix::Zero(n, n);
  perm(2, 0) = perm(0, 1) = perm(1, 2) = 1.0;  // new mode k = old mode sigma(k)
  const HeraldedCoefficients hp = heralded_coeffs(l, MeasurementBasis(u * perm), gamma, f);
  const int sigma[3] = {2, 0, 1};
  for (int k = 0; k < n; ++k) {
    CHECK(max_abs(reduced_state(hp, k).density() - reduced_state(h, sigma[k]).density()) < 1e-12);
  }

  // Rephasing mode j by exp(i phi_j) rotates its state by the same angle.
  const double phases[3] = {0.4, -1.3, 2.2};
  CMatrix v = CMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k) v(k, k) = std::polar(1.0, phases[k]);
  const HeraldedCoefficients hv = heralded_coeffs(l, MeasurementBasis(u * v), gamma, f);
  for (int k = 0; k < n; ++k) {
    const QuantumState rotated = transform(phase_rotation(6, phases[k]), reduced_state(h, k));
    CHECK(max_abs(reduced_state(hv, k).density() - rotated.density()) < 1e-12);
  }
  CHECK(std::abs(hp.c.trace() - 1.0) < 1e-12);
  CHECK(std::abs(hv.c.trace() - 1.0) < 1e-12);
  CHECK(hp.norm == Approx(h.norm).epsilon(1e-14));
}

TEST_CASE("closed-form variance") {
  SUBCASE("single mode") {
    for (Complex gamma : {Complex(1.28, 0.0), Complex(0.0, 1.28), Complex(0.7, -0.9)}) {
      const HeraldedCoefficients h = heralded_coeffs(RVector{{1.0}}, MeasurementBasis::identity(1), gamma, unit(1, 0));
      const double fock = variance(reduced_state(h, 0, 6), nonlinear_operator(6, 0.49, kPi / 2));
      CHECK(std::abs(closed_form_variance(h, 0, 0.49) - fock) < 1e-10);
    }
  }

  SUBCASE("no seed") {
    std::mt19937_64 rng(3);
    const HeraldedCoefficients h =
        heralded_coeffs(random_lambdas(rng, 3), MeasurementBasis(random_unitary(rng, 3)), 0.0, random_overlaps(rng, 3));
    for (int j = 0; j < 3; ++j) {
      const auto [kappa, mu] = closed_form_terms(h, j);
      CHECK(mu == 0.0);
      const double z = 0.8;
      CHECK(closed_form_variance(h, j, z) ==
            Approx(0.5 + kappa + z * z * (0.5 + 2 * kappa - kappa * kappa)).epsilon(1e-14));
    }
  }

  SUBCASE("random configurations against the Fock-space variance") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> amp(-2.5, 2.5), zs(-1.5, 1.5);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 1 + trial % 5;
      const HeraldedCoefficients h =
          heralded_coeffs(random_lambdas(rng, n), MeasurementBasis(random_unitary(rng, n)),
                          {amp(rng), amp(rng)}, random_overlaps(rng, n));
      const int j = trial % n;
      const double z = zs(rng);
      const double fock = variance(reduced_state(h, j, 6), nonlinear_operator(6, z, kPi / 2));
      worst = std::max(worst, std::abs(closed_form_variance(h, j, z) - fock));
    }
    CHECK(worst < 1e-9);
  }

  SUBCASE("canonical configuration maximizes mu") {
    std::mt19937_64 rng(77);
    for (double gamma_abs : {0.5, 1.28, 2.5}) {
      const Complex gamma(0.0, gamma_abs);
      const RVector l = random_lambdas(rng, 3);
      const double canonical =
          closed_form_terms(heralded_coeffs(l, MeasurementBasis::identity(3), gamma, unit(3, 0)), 0).mu;
      CHECK(canonical > 0.0);
      // Seed in the leading Schmidt mode, arbitrary measurement unitary.
      for (int trial = 0; trial < 500; ++trial) {
        const HeraldedCoefficients h =
            heralded_coeffs(l, MeasurementBasis(random_unitary(rng, 3)), gamma, unit(3, 0));
        REQUIRE(closed_form_terms(h, 0).mu <= canonical + 1e-9);
      }
    }
    // Seed profile free as well: holds while |gamma|^2 lambda_1 <= 1.
    for (int trial = 0; trial < 500; ++trial) {
      const RVector l = random_lambdas(rng, 3);
      const Complex gamma(0.0, 0.999 / std::sqrt(l[0]) * (0.2 + 0.8 * (trial % 10) / 9.0));
      const double canonical =
          closed_form_terms(heralded_coeffs(l, MeasurementBasis::identity(3), gamma, unit(3, 0)), 0).mu;
      const HeraldedCoefficients h =
          heralded_coeffs(l, MeasurementBasis(random_unitary(rng, 3)), gamma, random_overlaps(rng, 3));
      REQUIRE(closed_form_terms(h, 0).mu <= canonical + 1e-9);
    }
  }
}

TEST_CASE("multimode scenarios") {
  const Complex gamma(1.28, 0.0);
  ScenarioOptions options;

  SUBCASE("single-mode endpoint") {
    for (Scenario s : {Scenario::MatchedSeed, Scenario::FixedSeed}) {
      const ScenarioPoint p = scenario_point(s, 1.0, 1.0, gamma, options);
      CHECK(p.schmidt_number == Approx(1.0).epsilon(1e-8));
      CHECK(p.squeezing.xi_db == Approx(-1.45).epsilon(0.02 / 1.45));
    }
  }

  SUBCASE("matched seed dominates") {
    std::vector<std::pair<double, double>> widths;
    for (double k : {1.1, 1.4, 1.7, 2.2}) widths.push_back(widths_for_schmidt_number(k));
    const auto s1 = scenario_sweep(Scenario::MatchedSeed, widths, gamma, options);
    const auto s2 = scenario_sweep(Scenario::FixedSeed, widths, gamma, options);
    for (std::size_t i = 0; i < widths.size(); ++i) {
      CHECK(s1[i].schmidt_number == Approx(s2[i].schmidt_number).epsilon(1e-12));
      CHECK(s1[i].squeezing.xi_db <= s2[i].squeezing.xi_db + 1e-6);
      CHECK(s1[i].seed_weight == Approx(1.0).epsilon(1e-8));
      CHECK(s2[i].seed_weight < 1.0);
    }
  }

  SUBCASE("grid doubling leaves the squeezing unchanged") {
    const auto [a, b] = widths_for_schmidt_number(1.5);
    ScenarioOptions fine = options;
    fine.grid_points = 1024;
    for (Scenario s : {Scenario::MatchedSeed, Scenario::FixedSeed}) {
      CHECK(std::abs(scenario_point(s, a, b, gamma, options).squeezing.xi_db -
                     scenario_point(s, a, b, gamma, fine).squeezing.xi_db) < 1e-4);
    }
  }

  SUBCASE("helpers") {
    const auto [a, b] = widths_for_schmidt_number(1.7);
    CHECK(0.5 * (a / b + b / a) == Approx(1.7).epsilon(1e-14));
    CHECK_THROWS_AS(widths_for_schmidt_number(0.9), DomainError);
    CHECK(scenario_from_id(2) == Scenario::FixedSeed);
    CHECK_THROWS_AS(scenario_from_id(3), ValidationError);
  }
}
