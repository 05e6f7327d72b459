#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nlsq/errors.hpp"
#include "nlsq/harness.hpp"

namespace {

void print(const std::vector<nlsq::Diagnostic>& diagnostics, std::ostream& os) {
  for (const auto& d : diagnostics) os << nlsq::to_string(d.level) << ": " << d.message << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear squeezing of heralded states: experiment runner"};
  app.set_version_flag("--version", std::string(nlsq::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string experiment;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> dim;
  std::optional<int> threads;

  CLI::App* run = app.add_subcommand("run", "Run an experiment and write CSV/JSON outputs");
  run->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  run->add_option("--experiment", experiment, "Experiment id (see 'nlsq list')");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Master RNG seed");
  run->add_option("--dim", dim, "Fock truncation dimension");
  run->add_option("--threads", threads, "Worker threads (default: NLSQ_THREADS, then hardware)");

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "Check a configuration file without running it");
  validate->add_option("config", validate_path, "JSON configuration file")->required();

  CLI::App* list = app.add_subcommand("list", "List experiment ids");
  bool dump_defaults = false;
  list->add_flag("--defaults", dump_defaults, "Print each experiment's default configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& id : nlsq::experiment_ids()) {
        if (dump_defaults) {
          std::cout << nlsq::to_json(nlsq::default_config(id)).dump(2) << '\n';
        } else {
          std::cout << id << '\t' << nlsq::panel_anchor(id) << '\n';
        }
      }
      return 0;
    }

    if (*validate) {
      const auto diagnostics = nlsq::validate_config(nlsq::load_config(validate_path));
      print(diagnostics, std::cout);
      const bool bad = nlsq::has_errors(diagnostics);
      std::cout << (bad ? "INVALID" : "OK") << '\n';
      return bad ? 1 : 0;
    }

    nlsq::ExperimentConfig config;
    if (!config_path.empty()) {
      config = nlsq::load_config(config_path);
      if (!experiment.empty() && experiment != config.experiment) {
        std::cerr << "error: --experiment " << experiment << " conflicts with config experiment "
                  << config.experiment << '\n';
        return 2;
      }
    } else if (!experiment.empty()) {
      config = nlsq::default_config(experiment);
    } else {
      std::cerr << "error: run needs --experiment or --config\n";
      return 2;
    }
    if (!out_dir.empty()) config.output = out_dir;
    if (seed) config.seed = *seed;
    if (dim) config.dim = *dim;
    if (threads) config.threads = *threads;

    const auto diagnostics = nlsq::validate_config(config);
    print(diagnostics, std::cerr);
    if (nlsq::has_errors(diagnostics)) return 1;

    const auto record = nlsq::run_experiment(config);
    std::cout << "wrote " << record.files.size() << " files to " << record.directory.string() << " in "
              << record.wall_time_s << " s\n";
    std::cout << record.summary.dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
