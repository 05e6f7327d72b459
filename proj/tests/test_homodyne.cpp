#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "nlsq/errors.hpp"
#include "nlsq/homodyne.hpp"
#include "nlsq/squeezing.hpp"

using namespace nlsq;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

// Optimized 0-1-2 superposition.
QuantumState phi2_state() {
  static const SuperpositionOptimum opt = optimize_fock_superposition({0.4, 0.8, 0.45});
  return superposition(8, std::vector<Complex>(opt.amplitudes.begin(), opt.amplitudes.end()));
}

double phi2_z() {
  static const double z = minimize_squeezing(phi2_state()).z_opt;
  return z;
}

double trapezoid_moment(const QuadratureDistribution& d, int k, double centre = 0.0) {
  double s = 0.0;
  for (std::size_t i = 1; i < d.x.size(); ++i) {
    const double a = std::pow(d.x[i - 1] - centre, k) * d.density[i - 1];
    const double b = std::pow(d.x[i] - centre, k) * d.density[i];
    s += 0.5 * (a + b) * (d.x[i] - d.x[i - 1]);
  }
  return s;
}

std::array<RawMoments, 4> frame_moments(const QuantumState& s, double frame_theta) {
  const auto psi = four_angle_psi(frame_theta);
  return {exact_moments(s, psi[0]), exact_moments(s, psi[1]), exact_moments(s, psi[2]), exact_moments(s, psi[3])};
}

double exact_four_angle(const QuantumState& s, double z, double frame_theta) {
  const auto m = frame_moments(s, frame_theta);
  return four_angle_variance(m[0], m[1], m[2], m[3], z);
}

}  // namespace

TEST_CASE("quadrature distributions") {
  SUBCASE("vacuum") {
    for (double psi : {0.0, 0.9, kPi / 2}) {
      const QuadratureDistribution d = quadrature_pdf(vacuum(4), psi);
      CHECK(trapezoid_moment(d, 0) == Approx(1.0).epsilon(1e-9));
      CHECK(trapezoid_moment(d, 2) == Approx(0.5).epsilon(1e-9));
      CHECK(d.cdf.back() == 1.0);
      CHECK(std::is_sorted(d.cdf.begin(), d.cdf.end()));
      CHECK(*std::min_element(d.density.begin(), d.density.end()) >= 0.0);
    }
  }

  SUBCASE("first excited state") {
    const QuadratureDistribution d = quadrature_pdf(fock_state(4, 1), 0.4);
    double worst = 0.0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
      const double x = d.x[i];
      worst = std::max(worst, std::abs(d.density[i] - 2.0 * x * x * std::exp(-x * x) / std::sqrt(kPi)));
    }
    CHECK(worst < 1e-9);
  }

  SUBCASE("phase-flip mirror") {
    const QuadratureDistribution a = quadrature_pdf(superposition01(6, 1.28), 0.0);
    const QuadratureDistribution b = quadrature_pdf(superposition01(6, 1.28), kPi);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.x.size(); ++i) {
      worst = std::max(worst, std::abs(a.density[i] - b.density[a.x.size() - 1 - i]));
    }
    CHECK(worst < 1e-12);
    CHECK(std::abs(trapezoid_moment(a, 1)) > 0.1);
  }

  SUBCASE("angle convention") {
    const Complex alpha(1.0, 0.5);
    const QuantumState s = coherent(30, alpha);
    CHECK(trapezoid_moment(quadrature_pdf(s, 0.0), 1) == Approx(std::numbers::sqrt2 * alpha.real()).epsilon(1e-9));
    CHECK(trapezoid_moment(quadrature_pdf(s, kPi / 2), 1) == Approx(std::numbers::sqrt2 * alpha.imag()).epsilon(1e-9));
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(quadrature_pdf(QuantumState::mixed(vacuum(3).density()), 0.0), ValidationError);
    CHECK_THROWS_AS(quadrature_pdf(vacuum(3), 0.0, linspace(-2.0, 2.0, 101)), TruncationError);
  }
}

TEST_CASE("sampling") {
  const QuadratureDistribution vac = quadrature_pdf(vacuum(4), 0.3);
  const HomodyneSampleSet a = sample(vac, 1000000, 11);
  CHECK(a.samples.size() == 1000000);
  const RawMoments m = raw_moments(a.samples);
  CHECK(std::abs(m[1] - m[0] * m[0] - 0.5) < 0.002);
  CHECK(sample(vac, 1000000, 11).samples == a.samples);
  CHECK(sample(vac, 1000, 12).samples != sample(vac, 1000, 11).samples);

  const HomodyneSampleSet one = sample(quadrature_pdf(fock_state(4, 1), 0.0), 1000000, 5);
  CHECK(std::abs(raw_moments(one.samples)[0]) < 0.004);
  for (double v : one.samples) REQUIRE(std::isfinite(v));
}

TEST_CASE("binned moments") {
  SUBCASE("constant samples") {
    const BinnedMoments b = binned_moments(std::vector<double>(500, 0.7));
    CHECK(b.counts[0] == 500);
    CHECK(std::count(b.counts.begin(), b.counts.end(), 0u) == 999);
    for (int k = 0; k < 4; ++k) CHECK(b.moments[k] == Approx(std::pow(0.7, k + 1)).epsilon(1e-14));
  }

  SUBCASE("vacuum") {
    const auto s = sample(quadrature_pdf(vacuum(4), 0.0), 100000, 3).samples;
    const BinnedMoments b = binned_moments(s);
    CHECK(b.counts.size() == 1000);
    std::size_t total = 0;
    for (auto c : b.counts) total += c;
    CHECK(total == s.size());
    CHECK(b.lo == *std::min_element(s.begin(), s.end()));
    CHECK(b.hi == *std::max_element(s.begin(), s.end()));
    CHECK(std::abs(b.moments[1] - 0.5) < 0.01);
    CHECK(std::abs(b.moments[3] - 0.75) < 0.03);
  }

  SUBCASE("binned against direct moments") {
    const auto s = sample(quadrature_pdf(superposition01(6, 1.28), 0.0), 100000, 9).samples;
    const RawMoments binned = binned_moments(s).moments;
    const RawMoments direct = raw_moments(s);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(binned[k] - direct[k]) < 2e-3 * std::abs(direct[k]));
  }

  CHECK_THROWS_AS(binned_moments({}), ValidationError);
  CHECK_THROWS_AS(raw_moments({}), ValidationError);
}

TEST_CASE("four-angle estimator") {
  SUBCASE("vacuum") {
    CHECK(exact_four_angle(vacuum(6), 1.0, 0.0) == Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("zero cubicity is the plain p' variance") {
    const QuantumState s = superposition01(6, 1.28);
    const auto m = frame_moments(s, 0.0);
    CHECK(four_angle_variance(m[0], m[1], m[2], m[3], 0.0) == Approx(m[1][1] - m[1][0] * m[1][0]).epsilon(1e-14));
  }

  SUBCASE("identity with the operator variance") {
    const QuantumState states[] = {vacuum(8), superposition01(8, 1.28), phi2_state()};
    for (const QuantumState& s : states) {
      for (double z : {0.2, 0.35, 0.49, 0.7, 1.0}) {
        const double op = variance(s, nonlinear_operator(s.dim(), z, 0.0));
        CHECK(std::abs(exact_four_angle(s, z, 0.0) - op) < 1e-9);
      }
    }
  }

  SUBCASE("rotated frames") {
    // A PACS with a complex amplitude is symmetric about a tilted axis.
    const QuantumState s = pacs(moment_safe_dim(1.28), std::polar(1.28, 0.9));
    const NonlinearSqueezingResult opt = minimize_squeezing(s);
    const double op = variance(s, nonlinear_operator(s.dim(), opt.z_opt, opt.theta_opt));
    CHECK(std::abs(exact_four_angle(s, opt.z_opt, opt.theta_opt) - op) < 1e-9);

    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> angle(0.0, 2 * kPi);
    for (int trial = 0; trial < 5; ++trial) {
      const QuantumState r = superposition(9, {{g(rng), g(rng)}, {g(rng), g(rng)}, {g(rng), g(rng)}, {g(rng), g(rng)}});
      const double theta = angle(rng);
      const double z = 0.3 + 0.2 * trial;
      CHECK(std::abs(exact_four_angle(r, z, theta) - variance(r, nonlinear_operator(9, z, theta))) < 1e-9);
    }
  }
}

TEST_CASE("Monte Carlo estimator") {
  MonteCarloOptions options;
  options.samples_per_angle = 100000;
  options.repeats = 100;
  options.seed = 7;

  SUBCASE("reproducibility and bookkeeping") {
    MonteCarloOptions small = options;
    small.samples_per_angle = 5000;
    small.repeats = 8;
    const MonteCarloResult a = monte_carlo_squeezing(superposition01(6, 1.28), 0.49, small);
    small.threads = 3;
    const MonteCarloResult b = monte_carlo_squeezing(superposition01(6, 1.28), 0.49, small);
    CHECK(a.xi_db == b.xi_db);
    CHECK(a.mean == b.mean);
    CHECK(a.std == b.std);

    double mean = 0.0;
    for (double v : a.xi_db) mean += v;
    mean /= a.xi_db.size();
    double ss = 0.0;
    for (double v : a.xi_db) ss += (v - mean) * (v - mean);
    CHECK(std::abs(a.mean - mean) < 1e-12);
    CHECK(std::abs(a.std - std::sqrt(ss / (a.xi_db.size() - 1))) < 1e-12);
    CHECK(a.repeats == 8);
    CHECK(a.samples_per_angle == 5000);

    const auto dir = std::filesystem::temp_directory_path();
    a.write_json(dir / "nlsq_mc.json");
    a.write_csv(dir / "nlsq_mc.csv");
    std::ifstream csv(dir / "nlsq_mc.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "repeat,xi_db");
    std::ifstream json(dir / "nlsq_mc.json");
    std::string first;
    std::getline(json, first);
    CHECK(first == "{");
  }

  SUBCASE("three states are resolved") {
    const MonteCarloResult vac = monte_carlo_squeezing(vacuum(6), 1.0 / std::numbers::sqrt2, options);
    const MonteCarloResult p1 = monte_carlo_squeezing(superposition01(6, 1.28), 0.49, options);
    const MonteCarloResult p2 = monte_carlo_squeezing(phi2_state(), phi2_z(), options);
    CHECK(std::abs(vac.mean) < vac.std);
    CHECK(std::abs(vac.exact_xi_db) < 1e-9);
    CHECK(std::abs(p1.mean - p1.exact_xi_db) < p1.std);
    CHECK(std::abs(p2.mean - p2.exact_xi_db) < p2.std);
    CHECK(vac.mean - p1.mean > vac.std + p1.std);
    CHECK(p1.mean - p2.mean > p1.std + p2.std);
  }

  SUBCASE("estimator consistency in M") {
    const QuantumState s = superposition01(6, 1.28);
    MonteCarloOptions o = options;
    o.repeats = 50;
    double previous_std = 0.0;
    for (std::size_t m : {1000u, 10000u, 100000u}) {
      o.samples_per_angle = m;
      const MonteCarloResult r = monte_carlo_squeezing(s, 0.49, o);
      // Mean within three standard errors of the exact value.
      CHECK(std::abs(r.mean - r.exact_xi_db) < 3.0 * r.std / std::sqrt(50.0));
      if (previous_std > 0.0) {
        const double ratio = previous_std / r.std;
        CHECK(ratio > std::sqrt(10.0) / 2.0);
        CHECK(ratio < std::sqrt(10.0) * 2.0);
      }
      previous_std = r.std;
    }
  }

  SUBCASE("more samples shrink the vacuum spread") {
    MonteCarloOptions o = options;
    o.repeats = 10;
    const MonteCarloResult small = monte_carlo_squeezing(vacuum(6), 1.0 / std::numbers::sqrt2, o);
    o.samples_per_angle = 1000000;
    const MonteCarloResult large = monte_carlo_squeezing(vacuum(6), 1.0 / std::numbers::sqrt2, o);
    CHECK(large.std < small.std);
    CHECK(std::abs(large.mean) < large.std);
  }

  SUBCASE("z scan") {
    MonteCarloOptions o = options;
    o.repeats = 20;
    std::vector<double> zs;
    for (int i = 0; i <= 40; ++i) zs.push_back(0.3 + 0.01 * i);
    const auto scan = monte_carlo_z_scan(superposition01(6, 1.28), zs, o);
    const auto best = std::min_element(scan.begin(), scan.end(),
                                       [](const ZScanPoint& a, const ZScanPoint& b) { return a.mean < b.mean; });
    CHECK(std::abs(best->z - 0.49) <= 0.05);
    const auto exact_best = std::min_element(
        scan.begin(), scan.end(), [](const ZScanPoint& a, const ZScanPoint& b) { return a.exact_xi_db < b.exact_xi_db; });
    CHECK(exact_best->z == Approx(0.49).epsilon(0.011 / 0.49));
  }

  SUBCASE("errors") {
    MonteCarloOptions bad = options;
    bad.repeats = 0;
    CHECK_THROWS_AS(monte_carlo_squeezing(vacuum(4), 0.5, bad), ValidationError);
    CHECK_THROWS_AS(monte_carlo_z_scan(vacuum(4), {}, options), ValidationError);
  }
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(7, 0) != derive_seed(7, 1));
  CHECK(derive_seed(7, 0) != derive_seed(8, 0));
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}
