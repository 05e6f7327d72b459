#include "nlsq/homodyne.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include <json.hpp>

#include "nlsq/csv.hpp"
#include "nlsq/errors.hpp"
#include "nlsq/parallel.hpp"
#include "nlsq/squeezing.hpp"

namespace nlsq {
namespace {

constexpr double kPi = std::numbers::pi;

double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Four frame-angle moment sets for one repeat.
std::array<RawMoments, 4> repeat_moments(const std::array<QuadratureDistribution, 4>& pdfs,
                                         const MonteCarloOptions& options, int repeat) {
  std::array<RawMoments, 4> out;
  for (int k = 0; k < 4; ++k) {
    const std::uint64_t seed = derive_seed(options.seed, 4 * static_cast<std::uint64_t>(repeat) + k);
    out[k] = binned_moments(sample(pdfs[k], options.samples_per_angle, seed).samples, options.bins).moments;
  }
  return out;
}

double ratio_db(double var, double z) {
  const double ratio = var / gaussian_bound(z);
  if (!(ratio > 0.0)) throw NumericalError("estimated variance is not positive");
  return to_db(ratio);
}

void require_options(const MonteCarloOptions& options) {
  if (options.samples_per_angle < 1) throw ValidationError("need at least one sample per angle");
  if (options.repeats < 1) throw ValidationError("need at least one repeat");
}

}  // namespace

std::vector<double> default_quadrature_grid() { return linspace(-8.0, 8.0, 1 << 14); }

QuadratureDistribution quadrature_pdf(const QuantumState& state, double psi, const std::vector<double>& x_grid) {
  if (!state.is_pure()) throw ValidationError("quadrature distributions need a pure state");
  if (x_grid.size() < 2) throw ValidationError("quadrature grid needs at least 2 points");
  const CVector& c = state.amplitudes();
  const int levels = state.support() + 1;
  std::vector<Complex> rotated(static_cast<std::size_t>(levels));
  for (int n = 0; n < levels; ++n) rotated[n] = c[n] * std::polar(1.0, -n * psi);

  QuadratureDistribution d;
  d.psi = psi;
  d.x = x_grid;
  d.density.resize(x_grid.size());
  const double h0 = std::pow(kPi, -0.25);
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    const double x = x_grid[i];
    double prev = 0.0;
    double cur = h0 * std::exp(-0.5 * x * x);
    Complex amp = rotated[0] * cur;
    for (int n = 1; n < levels; ++n) {
      const double next = std::sqrt(2.0 / n) * x * cur - std::sqrt((n - 1.0) / n) * prev;
      prev = cur;
      cur = next;
      amp += rotated[n] * cur;
    }
    d.density[i] = std::norm(amp);
  }

  const double peak = *std::max_element(d.density.begin(), d.density.end());
  if (std::max(d.density.front(), d.density.back()) > 1e-12 * peak) {
    throw TruncationError("quadrature grid does not cover the state's distribution");
  }
  d.cdf.resize(x_grid.size());
  d.cdf[0] = 0.0;
  for (std::size_t i = 1; i < x_grid.size(); ++i) {
    d.cdf[i] = d.cdf[i - 1] + 0.5 * (d.density[i] + d.density[i - 1]) * (x_grid[i] - x_grid[i - 1]);
  }
  const double total = d.cdf.back();
  for (double& v : d.density) v /= total;
  for (double& v : d.cdf) v /= total;
  d.cdf.back() = 1.0;
  return d;
}

HomodyneSampleSet sample(const QuadratureDistribution& distribution, std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  HomodyneSampleSet out;
  out.psi = distribution.psi;
  out.samples.resize(m);
  const auto& cdf = distribution.cdf;
  const auto& x = distribution.x;
  for (std::size_t s = 0; s < m; ++s) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t hi = std::clamp<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), 1, cdf.size() - 1);
    const std::size_t lo = hi - 1;
    const double span = cdf[hi] - cdf[lo];
    const double t = span > 0.0 ? (u - cdf[lo]) / span : 0.5;
    out.samples[s] = x[lo] + t * (x[hi] - x[lo]);
  }
  return out;
}

BinnedMoments binned_moments(const std::vector<double>& samples, int bins) {
  if (samples.empty()) throw ValidationError("cannot bin an empty sample set");
  if (bins < 1) throw ValidationError("need at least one bin");
  BinnedMoments b;
  const auto [min_it, max_it] = std::minmax_element(samples.begin(), samples.end());
  b.lo = *min_it;
  b.hi = *max_it;
  b.counts.assign(static_cast<std::size_t>(bins), 0);
  std::vector<double> sums(static_cast<std::size_t>(bins), 0.0);
  const double width = (b.hi - b.lo) / bins;
  for (double v : samples) {
    int k = width > 0.0 ? static_cast<int>((v - b.lo) / width) : 0;
    k = std::clamp(k, 0, bins - 1);
    ++b.counts[k];
    sums[k] += v;
  }
  b.bin_means.assign(static_cast<std::size_t>(bins), 0.0);
  const double m = static_cast<double>(samples.size());
  for (int k = 0; k < bins; ++k) {
    if (b.counts[k] == 0) continue;
    const double mean = sums[k] / static_cast<double>(b.counts[k]);
    b.bin_means[k] = mean;
    const double w = static_cast<double>(b.counts[k]) / m;
    double power = 1.0;
    for (int j = 0; j < 4; ++j) {
      power *= mean;
      b.moments[j] += w * power;
    }
  }
  return b;
}

RawMoments raw_moments(const std::vector<double>& samples) {
  if (samples.empty()) throw ValidationError("cannot take moments of an empty sample set");
  RawMoments r{};
  for (double v : samples) {
    double power = 1.0;
    for (int j = 0; j < 4; ++j) {
      power *= v;
      r[j] += power;
    }
  }
  for (double& v : r) v /= static_cast<double>(samples.size());
  return r;
}

RawMoments exact_moments(const QuantumState& state, double psi) {
  const QuantumState s = state.resized(std::max(state.dim(), state.support() + 5));
  const auto [x, p] = quadrature_ops(s.dim());
  const FockOperator q = std::cos(psi) * x + std::sin(psi) * p;
  RawMoments r{};
  FockOperator power = q;
  for (int j = 0; j < 4; ++j) {
    r[j] = expectation(s, power).real();
    power = power * q;
  }
  return r;
}

double four_angle_variance(const RawMoments& at_0, const RawMoments& at_pi2, const RawMoments& at_pi4,
                           const RawMoments& at_minus_pi4, double z) {
  const double mean = at_pi2[0] + z * at_0[1];
  return at_pi2[1] + z * z * at_0[3] + (2.0 * std::numbers::sqrt2 * z / 3.0) * (at_pi4[2] - at_minus_pi4[2]) -
         (2.0 * z / 3.0) * at_pi2[2] - mean * mean;
}

std::array<double, 4> four_angle_psi(double frame_theta) {
  const double shift = frame_theta - kPi / 2;
  return {shift, shift + kPi / 2, shift + kPi / 4, shift - kPi / 4};
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<ZScanPoint> monte_carlo_z_scan(const QuantumState& state, const std::vector<double>& zs,
                                           const MonteCarloOptions& options) {
  require_options(options);
  if (zs.empty()) throw ValidationError("empty z list");
  const std::array<double, 4> psi = four_angle_psi(options.frame_theta);
  std::array<QuadratureDistribution, 4> pdfs;
  std::array<RawMoments, 4> exact;
  for (int k = 0; k < 4; ++k) {
    pdfs[k] = quadrature_pdf(state, psi[k]);
    exact[k] = exact_moments(state, psi[k]);
  }

  const std::size_t nz = zs.size();
  std::vector<double> xi(static_cast<std::size_t>(options.repeats) * nz);
  parallel_for(static_cast<std::size_t>(options.repeats), options.threads, [&](std::size_t r) {
    const auto m = repeat_moments(pdfs, options, static_cast<int>(r));
    for (std::size_t i = 0; i < nz; ++i) {
      xi[r * nz + i] = ratio_db(four_angle_variance(m[0], m[1], m[2], m[3], zs[i]), zs[i]);
    }
  });

  std::vector<ZScanPoint> out(nz);
  std::vector<double> column(static_cast<std::size_t>(options.repeats));
  for (std::size_t i = 0; i < nz; ++i) {
    for (int r = 0; r < options.repeats; ++r) column[r] = xi[r * nz + i];
    out[i].z = zs[i];
    out[i].mean = sample_mean(column);
    out[i].std = sample_std(column, out[i].mean);
    out[i].exact_xi_db = ratio_db(four_angle_variance(exact[0], exact[1], exact[2], exact[3], zs[i]), zs[i]);
  }
  return out;
}

MonteCarloResult monte_carlo_squeezing(const QuantumState& state, double z, const MonteCarloOptions& options) {
  require_options(options);
  const std::array<double, 4> psi = four_angle_psi(options.frame_theta);
  std::array<QuadratureDistribution, 4> pdfs;
  std::array<RawMoments, 4> exact;
  for (int k = 0; k < 4; ++k) {
    pdfs[k] = quadrature_pdf(state, psi[k]);
    exact[k] = exact_moments(state, psi[k]);
  }

  MonteCarloResult result;
  result.z = z;
  result.samples_per_angle = options.samples_per_angle;
  result.repeats = options.repeats;
  result.xi_db.resize(static_cast<std::size_t>(options.repeats));
  parallel_for(result.xi_db.size(), options.threads, [&](std::size_t r) {
    const auto m = repeat_moments(pdfs, options, static_cast<int>(r));
    result.xi_db[r] = ratio_db(four_angle_variance(m[0], m[1], m[2], m[3], z), z);
  });
  result.mean = sample_mean(result.xi_db);
  result.std = sample_std(result.xi_db, result.mean);
  result.exact_xi_db = ratio_db(four_angle_variance(exact[0], exact[1], exact[2], exact[3], z), z);
  return result;
}

void MonteCarloResult::write_json(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["z"] = z;
  j["samples_per_angle"] = samples_per_angle;
  j["repeats"] = repeats;
  j["mean_xi_db"] = mean;
  j["std_xi_db"] = std;
  j["exact_xi_db"] = exact_xi_db;
  j["xi_db"] = xi_db;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void MonteCarloResult::write_csv(const std::filesystem::path& path) const {
  CsvWriter out(path, {"repeat", "xi_db"});
  for (std::size_t r = 0; r < xi_db.size(); ++r) out.row({static_cast<double>(r), xi_db[r]});
}

}  // namespace nlsq
