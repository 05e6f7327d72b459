#include "nlsq/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "nlsq/csv.hpp"
#include "nlsq/errors.hpp"
#include "nlsq/homodyne.hpp"
#include "nlsq/parallel.hpp"
#include "nlsq/pdc.hpp"
#include "nlsq/two_mode.hpp"

namespace nlsq {
namespace {

using Json = nlohmann::ordered_json;

constexpr double kPi = std::numbers::pi;
const double kSqrt2 = std::numbers::sqrt2;

// Derived optimum of the real 0-1-2 superposition (simplex minimizer).
const std::vector<double> kPhi2Amplitudes{0.430325, 0.783465, 0.448333};

struct ExperimentSpec {
  std::string id;
  std::string anchor;
  std::vector<std::string> ranges;
  std::vector<std::string> params;
};

const std::vector<ExperimentSpec>& specs() {
  static const std::vector<ExperimentSpec> table{
      {"fig1b", "Fig. 1(b)", {"alpha", "z"}, {}},
      {"fig3a", "Fig. 3(a)", {"gamma", "lambda1"}, {"f1"}},
      {"fig3b", "Fig. 3(b)", {"gamma", "lambda1"}, {"f1", "nu_points"}},
      {"fig3c", "Fig. 3(c)", {"lambda1"}, {"gamma", "f1", "nu_points"}},
      {"fig3d", "Fig. 3(d)", {"f1"}, {"gamma", "lambda1", "nu_points"}},
      {"fig4a", "Fig. 4(a)", {"lambda1"}, {"gamma", "z"}},
      {"fig4b", "Fig. 4(b)", {"gamma", "z"}, {"lambda1"}},
      {"fig5a", "Fig. 5(a)", {"K", "gamma"}, {"a", "grid_points"}},
      {"fig5b", "Fig. 5(b)", {"K"}, {"gamma", "a", "grid_points", "threshold_db"}},
      {"fig6a", "Fig. 6(a)", {"M"}, {"repeats", "phi1_c", "phi1_z", "bins"}},
      {"fig6b", "Fig. 6(b)", {"z"}, {"M", "repeats", "phi1_c", "bins"}},
      {"custom", "custom", {"z"}, {}},
  };
  return table;
}

const ExperimentSpec* find_spec(const std::string& id) {
  for (const auto& s : specs()) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Config access

double param(const ExperimentConfig& c, const std::string& key) {
  if (!c.params.contains(key) || !c.params[key].is_number()) {
    throw ValidationError("parameter '" + key + "' is missing or not a number");
  }
  return c.params[key].get<double>();
}

std::vector<double> param_list(const ExperimentConfig& c, const std::string& key) {
  if (!c.params.contains(key) || !c.params[key].is_array()) {
    throw ValidationError("parameter '" + key + "' is missing or not a list");
  }
  std::vector<double> out;
  for (const auto& v : c.params[key]) {
    if (!v.is_number()) throw ValidationError("parameter '" + key + "' holds a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

const std::vector<double>& grid(const ExperimentConfig& c, const std::string& key) {
  const auto it = c.ranges.find(key);
  if (it == c.ranges.end() || it->second.values.empty()) throw ValidationError("empty " + key + " range");
  return it->second.values;
}

int threads_of(const ExperimentConfig& c) { return c.threads > 0 ? c.threads : default_thread_count(); }

Range parse_range(const std::string& name, const Json& j) {
  if (j.is_number()) return Range::single(j.get<double>());
  if (!j.is_object()) throw ValidationError("range '" + name + "' must be a number or an object");
  if (j.contains("values")) {
    if (!j["values"].is_array()) throw ValidationError("range '" + name + "' values must be a list");
    Range r;
    for (const auto& v : j["values"]) {
      if (!v.is_number()) throw ValidationError("range '" + name + "' holds a non-number");
      r.values.push_back(v.get<double>());
    }
    return r;
  }
  for (const char* key : {"min", "max", "points"}) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw ValidationError("range '" + name + "' needs numeric min, max and points");
    }
  }
  return Range::linear(j["min"].get<double>(), j["max"].get<double>(), j["points"].get<int>());
}

// ---------------------------------------------------------------------------
// Small numerical helpers for run summaries

// First bracket [x_i, x_{i+1}] where ys - target strictly changes sign.
// Values within 1e-9 of the target count as touching, not crossing.
std::optional<std::pair<double, double>> bracket_crossing(const std::vector<double>& xs,
                                                          const std::vector<double>& ys, double target) {
  constexpr double kTouch = 1e-9;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double a = ys[i] - target;
    const double b = ys[i + 1] - target;
    if (std::abs(a) <= kTouch || std::abs(b) <= kTouch) continue;
    if ((a < 0.0) != (b < 0.0)) return std::pair{xs[i], xs[i + 1]};
  }
  return std::nullopt;
}

Json refine_crossing(const std::function<double(double)>& f, const std::vector<double>& xs,
                     const std::vector<double>& ys, double target) {
  const auto bracket = bracket_crossing(xs, ys, target);
  if (!bracket) return nullptr;
  std::uintmax_t iterations = 60;
  const auto [lo, hi] = boost::math::tools::toms748_solve([&](double x) { return f(x) - target; }, bracket->first,
                                                          bracket->second, boost::math::tools::eps_tolerance<double>(40),
                                                          iterations);
  return 0.5 * (lo + hi);
}

std::size_t argmin(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

struct Output {
  std::filesystem::path dir;
  std::vector<std::string> files;

  CsvWriter csv(const std::string& name, std::vector<std::string> columns) {
    files.push_back(name);
    return CsvWriter(dir / name, std::move(columns));
  }
};

// ---------------------------------------------------------------------------
// Experiments

Json run_fig1b(const ExperimentConfig& c, Output& out) {
  const auto& alphas = grid(c, "alpha");
  const auto& zs = grid(c, "z");
  const std::size_t nz = zs.size();
  std::vector<NonlinearSqueezingResult> res(alphas.size() * nz);
  parallel_for(alphas.size(), threads_of(c), [&](std::size_t i) {
    const QuantumState s = superposition01(c.dim, alphas[i]);
    for (std::size_t k = 0; k < nz; ++k) res[i * nz + k] = minimize_over_theta(s, zs[k], c.optimizer);
  });
  CsvWriter csv = out.csv("fig1b.csv", {"alpha", "z", "xi_db", "theta_opt"});
  std::vector<double> xi(res.size());
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    for (std::size_t k = 0; k < nz; ++k) {
      const auto& r = res[i * nz + k];
      xi[i * nz + k] = r.xi_db;
      csv.row({alphas[i], zs[k], r.xi_db, r.theta_opt});
    }
  }
  const std::size_t best = argmin(xi);
  const SuperpositionOptimum opt =
      optimize_superposition01(std::max(1e-3, alphas.front()), std::max(alphas.back(), 1e-2), c.optimizer);
  Json s;
  s["grid_minimum"] = {{"alpha", alphas[best / nz]}, {"z", zs[best % nz]}, {"xi_db", xi[best]}};
  s["optimum"] = {{"alpha", opt.amplitudes[0] / opt.amplitudes[1]},
                  {"z", opt.result.z_opt},
                  {"theta", opt.result.theta_opt},
                  {"xi_db", opt.result.xi_db}};
  return s;
}

Json run_fig3a(const ExperimentConfig& c, Output& out) {
  const auto& gammas = grid(c, "gamma");
  const auto& lambdas = grid(c, "lambda1");
  const double f1 = param(c, "f1");
  const std::size_t nl = lambdas.size();
  std::vector<std::pair<NonlinearSqueezingResult, NonlinearSqueezingResult>> res(gammas.size() * nl);
  parallel_for(res.size(), threads_of(c), [&](std::size_t i) {
    const TwoModeConfig cfg{lambdas[i % nl], gammas[i / nl], f1, 0.0};
    res[i] = {minimize_squeezing(two_mode_reduced(cfg, 0, c.dim), c.optimizer),
              minimize_squeezing(two_mode_reduced(cfg, 1, c.dim), c.optimizer)};
  });
  CsvWriter csv = out.csv("fig3a.csv", {"gamma", "lambda1", "xi_db_b1", "z_opt_b1", "theta_opt_b1", "xi_db_b2"});
  std::vector<double> xi(res.size());
  for (std::size_t i = 0; i < res.size(); ++i) {
    const auto& [b1, b2] = res[i];
    xi[i] = b1.xi_db;
    csv.row({gammas[i / nl], lambdas[i % nl], b1.xi_db, b1.z_opt, b1.theta_opt, b2.xi_db});
  }
  const std::size_t best = argmin(xi);
  Json s;
  s["grid_minimum_b1"] = {{"gamma", gammas[best / nl]}, {"lambda1", lambdas[best % nl]}, {"xi_db", xi[best]}};
  return s;
}

BasisOptions basis_options(const ExperimentConfig& c) {
  BasisOptions o;
  o.nu_points = static_cast<int>(param(c, "nu_points"));
  o.dim = c.dim;
  o.optimizer = c.optimizer;
  return o;
}

Json run_fig3b(const ExperimentConfig& c, Output& out) {
  const auto& gammas = grid(c, "gamma");
  const auto& lambdas = grid(c, "lambda1");
  const double f1 = param(c, "f1");
  const BasisOptions bo = basis_options(c);
  const std::size_t nl = lambdas.size();
  std::vector<std::pair<BasisOptimum, NonlinearSqueezingResult>> res(gammas.size() * nl);
  parallel_for(res.size(), threads_of(c), [&](std::size_t i) {
    const BasisOptimum o = optimize_basis(lambdas[i % nl], gammas[i / nl], f1, bo);
    const TwoModeConfig cfg{lambdas[i % nl], gammas[i / nl], f1, o.nu};
    res[i] = {o, minimize_squeezing(two_mode_reduced(cfg, 1, c.dim), c.optimizer)};
  });
  CsvWriter csv =
      out.csv("fig3b.csv", {"gamma", "lambda1", "nu_opt", "xi_db_b1", "z_opt", "theta_opt", "xi_db_b2"});
  double worst_b1 = -1e300;
  double best_b2 = 1e300;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const auto& [o, b2] = res[i];
    csv.row({gammas[i / nl], lambdas[i % nl], o.nu, o.result.xi_db, o.result.z_opt, o.result.theta_opt, b2.xi_db});
    worst_b1 = std::max(worst_b1, o.result.xi_db);
    best_b2 = std::min(best_b2, b2.xi_db);
  }
  Json s;
  s["max_xi_db_b1"] = worst_b1;
  s["min_xi_db_b2"] = best_b2;
  return s;
}

Json run_fig3c(const ExperimentConfig& c, Output& out) {
  const auto& lambdas = grid(c, "lambda1");
  const double gamma = param(c, "gamma");
  const double f1 = param(c, "f1");
  const BasisOptions bo = basis_options(c);
  struct Row {
    double b1, b2;
    BasisOptimum opt;
  };
  std::vector<Row> res(lambdas.size());
  parallel_for(res.size(), threads_of(c), [&](std::size_t i) {
    const TwoModeConfig cfg{lambdas[i], gamma, f1, 0.0};
    res[i] = {minimize_squeezing(two_mode_reduced(cfg, 0, c.dim), c.optimizer).xi_db,
              minimize_squeezing(two_mode_reduced(cfg, 1, c.dim), c.optimizer).xi_db,
              optimize_basis(lambdas[i], gamma, f1, bo)};
  });
  CsvWriter csv = out.csv("fig3c.csv", {"lambda1", "xi_db_b1_schmidt", "xi_db_b2_schmidt", "xi_db_b1_optimized",
                                        "nu_opt", "z_opt", "theta_opt"});
  std::vector<double> b1(res.size());
  for (std::size_t i = 0; i < res.size(); ++i) {
    const Row& r = res[i];
    b1[i] = r.b1;
    csv.row({lambdas[i], r.b1, r.b2, r.opt.result.xi_db, r.opt.nu, r.opt.result.z_opt, r.opt.result.theta_opt});
  }
  auto f = [&](double l) {
    return minimize_squeezing(two_mode_reduced({l, gamma, f1, 0.0}, 0, c.dim), c.optimizer).xi_db;
  };
  Json s;
  s["schmidt_basis_zero_crossing_lambda1"] = refine_crossing(f, lambdas, b1, 0.0);
  return s;
}

Json run_fig3d(const ExperimentConfig& c, Output& out) {
  const auto& f1s = grid(c, "f1");
  const double gamma = param(c, "gamma");
  const double lambda1 = param(c, "lambda1");
  const BasisOptions bo = basis_options(c);
  std::vector<BasisOptimum> res(f1s.size());
  parallel_for(res.size(), threads_of(c), [&](std::size_t i) { res[i] = optimize_basis(lambda1, gamma, f1s[i], bo); });
  CsvWriter csv = out.csv("fig3d.csv", {"f1", "nu_opt", "xi_db_b1", "z_opt", "theta_opt"});
  std::vector<double> xi(res.size());
  for (std::size_t i = 0; i < res.size(); ++i) {
    xi[i] = res[i].result.xi_db;
    csv.row({f1s[i], res[i].nu, xi[i], res[i].result.z_opt, res[i].result.theta_opt});
  }
  auto f = [&](double f1) { return optimize_basis(lambda1, gamma, f1, bo).result.xi_db; };
  Json s;
  s["zero_crossing_f1"] = refine_crossing(f, f1s, xi, 0.0);
  return s;
}

Json run_fig4a(const ExperimentConfig& c, Output& out) {
  const auto& lambdas = grid(c, "lambda1");
  const double gamma = param(c, "gamma");
  const double z = param(c, "z");
  std::vector<std::pair<NonlinearSqueezingResult, NonlinearSqueezingResult>> res(lambdas.size());
  parallel_for(res.size(), threads_of(c), [&](std::size_t i) {
    const auto [r1, r2] = simultaneous_states(lambdas[i], gamma, c.dim);
    res[i] = {minimize_over_theta(r1, z, c.optimizer), minimize_over_theta(r2, z, c.optimizer)};
  });
  CsvWriter csv = out.csv("fig4a.csv", {"lambda1", "xi_db_b1", "xi_db_b2", "theta_b1", "theta_b2"});
  double lo = 1e300, hi = -1e300;
  for (std::size_t i = 0; i < res.size(); ++i) {
    csv.row({lambdas[i], res[i].first.xi_db, res[i].second.xi_db, res[i].first.theta_opt, res[i].second.theta_opt});
    lo = std::min(lo, res[i].second.xi_db);
    hi = std::max(hi, res[i].second.xi_db);
  }
  Json s;
  s["xi_db_b2_spread"] = hi - lo;
  s["xi_db_b2"] = res.front().second.xi_db;
  return s;
}

Json run_fig4b(const ExperimentConfig& c, Output& out) {
  const auto& gammas = grid(c, "gamma");
  const auto& zs = grid(c, "z");
  const double lambda1 = param(c, "lambda1");
  const std::size_t nz = zs.size();
  std::vector<std::pair<NonlinearSqueezingResult, NonlinearSqueezingResult>> res(gammas.size() * nz);
  parallel_for(gammas.size(), threads_of(c), [&](std::size_t i) {
    const auto [r1, r2] = simultaneous_states(lambda1, gammas[i], c.dim);
    for (std::size_t k = 0; k < nz; ++k) {
      res[i * nz + k] = {minimize_over_theta(r1, zs[k], c.optimizer), minimize_over_theta(r2, zs[k], c.optimizer)};
    }
  });
  CsvWriter csv = out.csv("fig4b.csv", {"gamma", "z", "xi_db_b1", "xi_db_b2", "xi_db_common"});
  std::vector<double> common(res.size());
  for (std::size_t i = 0; i < res.size(); ++i) {
    common[i] = std::max(res[i].first.xi_db, res[i].second.xi_db);
    csv.row({gammas[i / nz], zs[i % nz], res[i].first.xi_db, res[i].second.xi_db, common[i]});
  }
  const std::size_t best = argmin(common);
  Json s;
  s["grid_minimum"] = {{"gamma", gammas[best / nz]}, {"z", zs[best % nz]}, {"xi_db", common[best]}};
  // Continuous refinement in |gamma| with z and theta optimized for both modes.
  auto common_opt = [&](double g) {
    const auto [r1, r2] = simultaneous_states(lambda1, g, c.dim);
    return std::max(minimize_squeezing(r1, c.optimizer).xi_db, minimize_squeezing(r2, c.optimizer).xi_db);
  };
  const double g_lo = std::max(gammas.front(), 1e-3);
  const double g_hi = std::max(gammas.back(), g_lo + 1e-3);
  const auto [g_best, xi_best] = boost::math::tools::brent_find_minima(common_opt, g_lo, g_hi, 30);
  s["optimum"] = {{"gamma", g_best}, {"xi_db", xi_best}};
  return s;
}

ScenarioOptions scenario_options(const ExperimentConfig& c) {
  ScenarioOptions o;
  o.grid_points = static_cast<int>(param(c, "grid_points"));
  o.dim = c.dim;
  o.optimizer = c.optimizer;
  o.threads = 1;
  return o;
}

Json run_fig5a(const ExperimentConfig& c, Output& out) {
  const auto& ks = grid(c, "K");
  const auto& gammas = grid(c, "gamma");
  const double a = param(c, "a");
  const ScenarioOptions so = scenario_options(c);
  const std::size_t ng = gammas.size();
  std::vector<NonlinearSqueezingResult> res(ks.size() * ng);
  std::vector<double> kk(ks.size());
  parallel_for(ks.size(), threads_of(c), [&](std::size_t i) {
    const auto [wa, wb] = widths_for_schmidt_number(ks[i], a);
    const FrequencyGrid fg = FrequencyGrid::for_widths(wa, wb, so.grid_points);
    const SchmidtDecomposition d = schmidt_decompose(double_gaussian_jsa(wa, wb, fg), fg, so.schmidt);
    kk[i] = d.schmidt_number;
    const CVector overlaps = seed_overlaps(d.signal_modes.col(0), d);
    const MeasurementBasis basis = MeasurementBasis::with_first_column(overlaps.conjugate());
    for (std::size_t g = 0; g < ng; ++g) {
      const HeraldedCoefficients h = heralded_coeffs(d.lambdas, basis, gammas[g], overlaps);
      res[i * ng + g] = minimize_squeezing(reduced_state(h, 0, c.dim), c.optimizer);
    }
  });
  CsvWriter csv = out.csv("fig5a.csv", {"K", "gamma", "xi_db", "z_opt", "theta_opt"});
  std::vector<double> xi(res.size());
  for (std::size_t i = 0; i < res.size(); ++i) {
    xi[i] = res[i].xi_db;
    csv.row({kk[i / ng], gammas[i % ng], res[i].xi_db, res[i].z_opt, res[i].theta_opt});
  }
  const std::size_t best = argmin(xi);
  Json s;
  s["grid_minimum"] = {{"K", kk[best / ng]}, {"gamma", gammas[best % ng]}, {"xi_db", xi[best]}};
  return s;
}

Json run_fig5b(const ExperimentConfig& c, Output& out) {
  const auto& ks = grid(c, "K");
  const double gamma = param(c, "gamma");
  const double a = param(c, "a");
  const double threshold = param(c, "threshold_db");
  ScenarioOptions so = scenario_options(c);
  so.threads = threads_of(c);
  std::vector<std::pair<double, double>> widths;
  for (double k : ks) widths.push_back(widths_for_schmidt_number(k, a));

  Json s;
  for (int id : {1, 2}) {
    const Scenario scenario = scenario_from_id(id);
    const auto curve = scenario_sweep(scenario, widths, gamma, so);
    const std::string name = "fig5b_scenario" + std::to_string(id) + ".csv";
    out.files.push_back(name);
    write_scenario_csv(out.dir / name, curve);
    std::vector<double> xi;
    for (const auto& p : curve) xi.push_back(p.squeezing.xi_db);
    auto f = [&](double k) {
      const auto [wa, wb] = widths_for_schmidt_number(k, a);
      return scenario_point(scenario, wa, wb, gamma, so).squeezing.xi_db;
    };
    Json entry;
    entry["xi_db_at_first_K"] = xi.front();
    entry["threshold_crossing_K"] = refine_crossing(f, ks, xi, threshold);
    s["scenario" + std::to_string(id)] = entry;
  }
  return s;
}

struct McState {
  std::string name;
  QuantumState state;
  double z;
};

std::vector<McState> fig6_states(const ExperimentConfig& c) {
  const double c1 = param(c, "phi1_c");
  std::vector<Complex> amps;
  for (double v : param_list(c, "phi2_amplitudes")) amps.emplace_back(v, 0.0);
  const QuantumState phi2 = superposition(c.dim, amps);
  return {{"phi0", vacuum(c.dim), 1.0 / kSqrt2},
          {"phi1", superposition01(c.dim, c1), param(c, "phi1_z")},
          {"phi2", phi2, minimize_squeezing(phi2, c.optimizer).z_opt}};
}

MonteCarloOptions mc_options(const ExperimentConfig& c, std::size_t m, std::uint64_t stream, double frame) {
  MonteCarloOptions o;
  o.samples_per_angle = m;
  o.repeats = static_cast<int>(param(c, "repeats"));
  o.seed = derive_seed(c.seed, stream);
  o.frame_theta = frame;
  o.bins = static_cast<int>(param(c, "bins"));
  o.threads = threads_of(c);
  return o;
}

Json run_fig6a(const ExperimentConfig& c, Output& out) {
  const auto& ms = grid(c, "M");
  const auto states = fig6_states(c);
  CsvWriter csv = out.csv("fig6a.csv", {"state", "M", "z", "mean_xi_db", "std_xi_db", "exact_xi_db"});
  std::vector<MonteCarloResult> last(states.size());
  for (std::size_t mi = 0; mi < ms.size(); ++mi) {
    for (std::size_t si = 0; si < states.size(); ++si) {
      const auto& st = states[si];
      const double frame = minimize_squeezing(st.state, c.optimizer).theta_opt;
      const auto m = static_cast<std::size_t>(std::llround(ms[mi]));
      last[si] = monte_carlo_squeezing(st.state, st.z, mc_options(c, m, 16 * mi + si, frame));
      csv.row({static_cast<double>(si), ms[mi], st.z, last[si].mean, last[si].std, last[si].exact_xi_db});
    }
  }
  Json s;
  s["M"] = ms.back();
  bool within = true;
  for (std::size_t si = 0; si < states.size(); ++si) {
    const std::string name = "fig6a_repeats_" + states[si].name + ".csv";
    out.files.push_back(name);
    last[si].write_csv(out.dir / name);
    const auto& r = last[si];
    s[states[si].name] = {{"z", r.z}, {"mean_xi_db", r.mean}, {"std_xi_db", r.std}, {"exact_xi_db", r.exact_xi_db}};
    within = within && std::abs(r.mean - r.exact_xi_db) < r.std;
  }
  s["means_within_one_std"] = within;
  s["pairwise_separated"] = last[0].mean - last[1].mean > last[0].std + last[1].std &&
                            last[1].mean - last[2].mean > last[1].std + last[2].std;
  return s;
}

Json run_fig6b(const ExperimentConfig& c, Output& out) {
  const auto& zs = grid(c, "z");
  const QuantumState s1 = superposition01(c.dim, param(c, "phi1_c"));
  const double frame = minimize_squeezing(s1, c.optimizer).theta_opt;
  const auto m = static_cast<std::size_t>(std::llround(param(c, "M")));
  const auto scan = monte_carlo_z_scan(s1, zs, mc_options(c, m, 0, frame));
  CsvWriter csv = out.csv("fig6b.csv", {"z", "mean_xi_db", "std_xi_db", "exact_xi_db"});
  std::vector<double> means;
  for (const auto& p : scan) {
    csv.row({p.z, p.mean, p.std, p.exact_xi_db});
    means.push_back(p.mean);
  }
  const std::size_t best = argmin(means);
  Json s;
  s["estimated_minimum"] = {{"z", scan[best].z}, {"mean_xi_db", scan[best].mean}, {"std_xi_db", scan[best].std}};
  return s;
}

QuantumState custom_state(const ExperimentConfig& c) {
  if (c.params.contains("pacs_alpha")) {
    const auto v = param_list(c, "pacs_alpha");
    if (v.size() != 2) throw ValidationError("pacs_alpha must be [re, im]");
    const Complex alpha(v[0], v[1]);
    return pacs(std::max(c.dim, moment_safe_dim(alpha)), alpha);
  }
  std::vector<Complex> amps;
  for (double v : param_list(c, "amplitudes")) amps.emplace_back(v, 0.0);
  return superposition(c.dim, amps);
}

Json run_custom(const ExperimentConfig& c, Output& out) {
  const auto& zs = grid(c, "z");
  const QuantumState state = custom_state(c);
  std::vector<NonlinearSqueezingResult> res(zs.size());
  parallel_for(zs.size(), threads_of(c), [&](std::size_t i) { res[i] = minimize_over_theta(state, zs[i], c.optimizer); });
  CsvWriter csv = out.csv("custom.csv", {"z", "xi_db", "theta_opt"});
  for (std::size_t i = 0; i < res.size(); ++i) csv.row({zs[i], res[i].xi_db, res[i].theta_opt});
  const NonlinearSqueezingResult opt = minimize_squeezing(state, c.optimizer);
  Json s;
  s["optimum"] = {{"xi_db", opt.xi_db}, {"z", opt.z_opt}, {"theta", opt.theta_opt}};
  return s;
}

// Rough single-worker cost in seconds, from timings on a desktop core.
double estimate_seconds(const ExperimentConfig& c) {
  auto n = [&](const std::string& key) {
    const auto it = c.ranges.find(key);
    return it == c.ranges.end() ? 0.0 : static_cast<double>(it->second.values.size());
  };
  auto p = [&](const std::string& key, double fallback) {
    return c.params.contains(key) && c.params[key].is_number() ? c.params[key].get<double>() : fallback;
  };
  const double nu_factor = p("nu_points", 360) / 360.0;
  const std::string& id = c.experiment;
  if (id == "fig1b") return 6e-5 * n("alpha") * n("z");
  if (id == "fig3a") return 4e-4 * n("gamma") * n("lambda1");
  if (id == "fig3b") return 0.07 * nu_factor * n("gamma") * n("lambda1");
  if (id == "fig3c" || id == "fig3d") return 0.06 * nu_factor * (n(id == "fig3c" ? "lambda1" : "f1") + 15);
  if (id == "fig4a") return 1e-4 * n("lambda1");
  if (id == "fig4b") return 1e-4 * n("gamma") * n("z") + 0.5;
  if (id == "fig5a" || id == "fig5b") {
    const double svd = 0.25 * std::pow(p("grid_points", 512) / 512.0, 3);
    return id == "fig5a" ? n("K") * (svd + 1e-4 * n("gamma")) : 2.0 * (n("K") + 15) * svd;
  }
  if (id == "fig6a" || id == "fig6b") {
    double samples = 0.0;
    if (id == "fig6a") {
      const auto it = c.ranges.find("M");
      if (it != c.ranges.end()) {
        for (double m : it->second.values) samples += 3.0 * m;
      }
    } else {
      samples = p("M", 1e5);
    }
    return 1.5e-7 * 4.0 * samples * p("repeats", 100);
  }
  return 1e-4 * n("z");
}

}  // namespace

Range Range::linear(double lo, double hi, int points) {
  if (points <= 0) return Range{};
  if (points == 1) return Range{{lo}};
  return Range{linspace(lo, hi, points)};
}

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    for (const auto& s : specs()) v.push_back(s.id);
    return v;
  }();
  return ids;
}

std::string panel_anchor(const std::string& experiment) {
  const ExperimentSpec* spec = find_spec(experiment);
  if (!spec) throw ValidationError("unknown experiment '" + experiment + "'");
  return spec->anchor;
}

ExperimentConfig default_config(const std::string& experiment) {
  if (!find_spec(experiment)) throw ValidationError("unknown experiment '" + experiment + "'");
  ExperimentConfig c;
  c.experiment = experiment;
  c.output = "out/" + experiment;
  auto& r = c.ranges;
  auto& p = c.params;
  const double inv_sqrt2 = 1.0 / kSqrt2;
  if (experiment == "fig1b") {
    r["alpha"] = Range::linear(0.0, 3.0, 301);
    r["z"] = Range::linear(0.01, 1.2, 120);
  } else if (experiment == "fig3a") {
    r["gamma"] = Range::linear(0.0, 4.0, 41);
    r["lambda1"] = Range::linear(0.0, 1.0, 21);
    p["f1"] = inv_sqrt2;
  } else if (experiment == "fig3b") {
    r["gamma"] = Range::linear(0.0, 4.0, 17);
    r["lambda1"] = Range::linear(0.0, 1.0, 21);
    p["f1"] = inv_sqrt2;
    p["nu_points"] = 360;
  } else if (experiment == "fig3c") {
    r["lambda1"] = Range::linear(0.0, 1.0, 101);
    p["gamma"] = 1.28 * kSqrt2;
    p["f1"] = inv_sqrt2;
    p["nu_points"] = 360;
  } else if (experiment == "fig3d") {
    r["f1"] = Range::linear(0.0, 1.0, 51);
    p["gamma"] = 1.28;
    p["lambda1"] = 0.8;
    p["nu_points"] = 360;
  } else if (experiment == "fig4a") {
    r["lambda1"] = Range::linear(0.0, 1.0, 101);
    p["gamma"] = 2.5;
    p["z"] = 0.5;
  } else if (experiment == "fig4b") {
    r["gamma"] = Range::linear(0.0, 4.0, 81);
    r["z"] = Range::linear(0.01, 1.2, 120);
    p["lambda1"] = 1.0;
  } else if (experiment == "fig5a") {
    r["K"] = Range::linear(1.0, 3.0, 21);
    r["gamma"] = Range::linear(0.0, 3.0, 31);
    p["a"] = 1.0;
    p["grid_points"] = 512;
  } else if (experiment == "fig5b") {
    r["K"] = Range::linear(1.0, 3.0, 41);
    p["gamma"] = 1.28;
    p["a"] = 1.0;
    p["grid_points"] = 512;
    p["threshold_db"] = -0.5;
  } else if (experiment == "fig6a") {
    r["M"] = Range{{1e3, 1e4, 1e5}};
    p["repeats"] = 100;
    p["bins"] = 1000;
    p["phi1_c"] = 1.28;
    p["phi1_z"] = 0.49;
    p["phi2_amplitudes"] = kPhi2Amplitudes;
    p["phi2_amplitudes_source"] = "derived: simplex optimum of the real 0-1-2 superposition";
  } else if (experiment == "fig6b") {
    r["z"] = Range::linear(0.2, 0.8, 61);
    p["M"] = 1e5;
    p["repeats"] = 100;
    p["bins"] = 1000;
    p["phi1_c"] = 1.28;
  } else {
    r["z"] = Range::linear(0.05, 1.2, 116);
    p["amplitudes"] = std::vector<double>{1.28, 1.0};
  }
  double amplitude = p.contains("gamma") ? p["gamma"].get<double>() : 0.0;
  if (r.contains("gamma")) amplitude = std::max(amplitude, r["gamma"].values.back());
  if (amplitude > 0.0) c.dim = std::max(c.dim, guarded_dim(amplitude, 1));
  return c;
}

ExperimentConfig config_from_json(const Json& doc) {
  if (!doc.is_object()) throw ValidationError("configuration must be a JSON object");
  if (!doc.contains("experiment") || !doc["experiment"].is_string()) {
    throw ValidationError("configuration needs a string 'experiment' field");
  }
  const std::string id = doc["experiment"].get<std::string>();
  ExperimentConfig c;
  if (find_spec(id)) {
    c = default_config(id);
  } else {
    c.experiment = id;
  }
  try {
    if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("dim")) c.dim = doc["dim"].get<int>();
    if (doc.contains("threads")) c.threads = doc["threads"].get<int>();
    if (doc.contains("output")) c.output = doc["output"].get<std::string>();
    if (doc.contains("optimizer")) {
      const Json& o = doc["optimizer"];
      if (o.contains("theta_points")) c.optimizer.theta_points = o["theta_points"].get<int>();
      if (o.contains("z_min")) c.optimizer.z_min = o["z_min"].get<double>();
      if (o.contains("z_max")) c.optimizer.z_max = o["z_max"].get<double>();
      if (o.contains("theta_tolerance")) c.optimizer.theta_tolerance = o["theta_tolerance"].get<double>();
    }
    if (doc.contains("ranges")) {
      if (!doc["ranges"].is_object()) throw ValidationError("'ranges' must be an object");
      for (const auto& [name, value] : doc["ranges"].items()) c.ranges[name] = parse_range(name, value);
    }
    if (doc.contains("params")) {
      if (!doc["params"].is_object()) throw ValidationError("'params' must be an object");
      for (const auto& [name, value] : doc["params"].items()) c.params[name] = value;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed configuration: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  try {
    return config_from_json(Json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("cannot parse " + path.string() + ": " + e.what());
  }
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["experiment"] = c.experiment;
  j["seed"] = c.seed;
  j["dim"] = c.dim;
  j["threads"] = c.threads;
  j["output"] = c.output;
  j["optimizer"] = {{"theta_points", c.optimizer.theta_points},
                    {"z_min", c.optimizer.z_min},
                    {"z_max", c.optimizer.z_max},
                    {"theta_tolerance", c.optimizer.theta_tolerance}};
  Json ranges = Json::object();
  for (const auto& [name, range] : c.ranges) ranges[name] = {{"values", range.values}};
  j["ranges"] = ranges;
  j["params"] = c.params;
  return j;
}

std::string to_string(Diagnostic::Level level) {
  switch (level) {
    case Diagnostic::Level::Error: return "error";
    case Diagnostic::Level::Warning: return "warning";
    case Diagnostic::Level::Info: return "info";
  }
  return "unknown";
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const Diagnostic& d) { return d.level == Diagnostic::Level::Error; });
}

std::vector<Diagnostic> validate_config(const ExperimentConfig& c) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string m) { out.push_back({Diagnostic::Level::Error, std::move(m)}); };
  auto warn = [&](std::string m) { out.push_back({Diagnostic::Level::Warning, std::move(m)}); };

  const ExperimentSpec* spec = find_spec(c.experiment);
  if (!spec) {
    error("unknown experiment '" + c.experiment + "'");
    return out;
  }
  if (c.dim < 4) error("dim " + std::to_string(c.dim) + " is below 4 (one-photon states need two spare levels)");
  if (c.threads < 0) error("threads must be >= 0");
  if (c.output.empty()) error("empty output path");
  if (c.optimizer.theta_points < 8) error("optimizer.theta_points must be >= 8");
  if (!(c.optimizer.z_min > 0.0) || !(c.optimizer.z_max > c.optimizer.z_min)) {
    error("optimizer needs 0 < z_min < z_max");
  }

  for (const auto& name : spec->ranges) {
    const auto it = c.ranges.find(name);
    if (it == c.ranges.end() || it->second.values.empty()) {
      error("empty " + name + " range");
      continue;
    }
    const auto& v = it->second.values;
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
      error(name + " range holds non-finite values");
    } else if ((name == "lambda1" || name == "f1") && (lo < 0.0 || hi > 1.0)) {
      error(name + " values must lie in [0, 1]");
    } else if (name == "K" && lo < 1.0) {
      error("Schmidt numbers must be >= 1");
    } else if (name == "z" && lo < c.optimizer.z_min) {
      error("z values must be >= optimizer.z_min (the Gaussian bound vanishes at z = 0)");
    } else if ((name == "alpha" || name == "gamma") && lo < 0.0) {
      error(name + " values are magnitudes and must be >= 0");
    } else if (name == "M" && lo < 1.0) {
      error("M values must be >= 1");
    }
    if (name == "M" && lo < 1000.0) warn("M below 1000 makes the 1000-bin histogram sparse");
  }
  for (const auto& name : spec->params) {
    if (!c.params.contains(name) || !c.params[name].is_number()) error("parameter '" + name + "' is missing");
  }
  if (c.experiment == "fig6a" && (!c.params.contains("phi2_amplitudes") || !c.params["phi2_amplitudes"].is_array())) {
    error("parameter 'phi2_amplitudes' is missing");
  }
  if (c.experiment == "custom" && !c.params.contains("amplitudes") && !c.params.contains("pacs_alpha")) {
    error("custom experiment needs 'amplitudes' or 'pacs_alpha'");
  }
  if (c.params.contains("repeats") && c.params["repeats"].is_number() && c.params["repeats"].get<double>() < 2) {
    error("repeats must be >= 2 for a standard deviation");
  }
  if (c.params.contains("M") && c.params["M"].is_number()) {
    const double m = c.params["M"].get<double>();
    if (m < 1.0) {
      error("M must be >= 1");
    } else if (m < 1000.0) {
      warn("M below 1000 makes the 1000-bin histogram sparse");
    }
  }
  if (c.params.contains("nu_points") && c.params["nu_points"].is_number() &&
      c.params["nu_points"].get<double>() < 8) {
    error("nu_points must be >= 8");
  }
  for (const char* key : {"lambda1", "f1"}) {
    if (c.params.contains(key) && c.params[key].is_number()) {
      const double v = c.params[key].get<double>();
      if (v < 0.0 || v > 1.0) error(std::string(key) + " must lie in [0, 1]");
    }
  }

  // Truncation guard: the displaced-frame picture of the largest coherent
  // amplitude must fit in dim.
  double amplitude = 0.0;
  for (const char* key : {"gamma"}) {
    const auto it = c.ranges.find(key);
    if (it != c.ranges.end()) {
      for (double v : it->second.values) amplitude = std::max(amplitude, std::abs(v));
    }
    if (c.params.contains(key) && c.params[key].is_number()) {
      amplitude = std::max(amplitude, std::abs(c.params[key].get<double>()));
    }
  }
  if (amplitude > 0.0 && c.dim >= 1) {
    const int needed = guarded_dim(amplitude, 1);
    if (needed > c.dim) {
      std::ostringstream m;
      m << "coherent amplitude " << amplitude << " needs dim >= " << needed << " to hold the displaced state; dim = "
        << c.dim;
      warn(m.str());
    }
  }

  if (!has_errors(out)) {
    const int workers = c.threads > 0 ? c.threads : default_thread_count();
    std::ostringstream m;
    m.precision(2);
    m << "estimated runtime " << std::fixed << estimate_seconds(c) / workers << " s on " << workers << " worker(s)";
    out.push_back({Diagnostic::Level::Info, m.str()});
  }
  return out;
}

RunRecord run_experiment(const ExperimentConfig& config) {
  const auto diagnostics = validate_config(config);
  if (has_errors(diagnostics)) {
    std::string message = "invalid configuration:";
    for (const auto& d : diagnostics) {
      if (d.level == Diagnostic::Level::Error) message += " " + d.message + ";";
    }
    throw ValidationError(message);
  }

  const auto start = std::chrono::steady_clock::now();
  Output out;
  out.dir = config.output;
  std::error_code ec;
  std::filesystem::create_directories(out.dir, ec);
  if (ec || !std::filesystem::is_directory(out.dir)) {
    throw ValidationError("cannot create output directory " + out.dir.string());
  }

  static const std::map<std::string, Json (*)(const ExperimentConfig&, Output&)> runners{
      {"fig1b", run_fig1b}, {"fig3a", run_fig3a}, {"fig3b", run_fig3b}, {"fig3c", run_fig3c},
      {"fig3d", run_fig3d}, {"fig4a", run_fig4a}, {"fig4b", run_fig4b}, {"fig5a", run_fig5a},
      {"fig5b", run_fig5b}, {"fig6a", run_fig6a}, {"fig6b", run_fig6b}, {"custom", run_custom}};

  RunRecord record;
  record.directory = out.dir;
  record.summary = runners.at(config.experiment)(config, out);

  const Json resolved = to_json(config);
  {
    std::ofstream f(out.dir / "config.json");
    if (!f) throw ValidationError("cannot write " + (out.dir / "config.json").string());
    f << resolved.dump(2) << '\n';
  }
  out.files.push_back("config.json");
  record.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Json manifest;
  manifest["experiment"] = config.experiment;
  manifest["panel"] = panel_anchor(config.experiment);
  manifest["version"] = kVersion;
  manifest["seed"] = config.seed;
  manifest["threads"] = threads_of(config);
  manifest["wall_time_s"] = record.wall_time_s;
  manifest["outputs"] = out.files;
  manifest["summary"] = record.summary;
  manifest["config"] = resolved;
  {
    std::ofstream f(out.dir / "manifest.json");
    if (!f) throw ValidationError("cannot write " + (out.dir / "manifest.json").string());
    f << manifest.dump(2) << '\n';
  }
  out.files.push_back("manifest.json");
  record.files = out.files;
  return record;
}

}  // namespace nlsq
