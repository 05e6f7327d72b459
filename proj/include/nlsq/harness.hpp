#pragma once

// Declarative experiment runner: JSON configurations, validation
// diagnostics, and CSV/JSON outputs for every reproducible figure panel.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlsq/squeezing.hpp"

namespace nlsq {

inline constexpr const char* kVersion = "0.1.0";

/// A parameter grid.  JSON forms: {"min", "max", "points"} (inclusive,
/// evenly spaced), {"values": [...]}, or a bare number.
struct Range {
  std::vector<double> values;

  static Range linear(double lo, double hi, int points);
  static Range single(double value) { return Range{{value}}; }
};

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 7;
  int dim = kDefaultDim;
  /// 0 selects default_thread_count().
  int threads = 0;
  std::string output = "out";
  OptimizerOptions optimizer;
  std::map<std::string, Range> ranges;
  /// Experiment-specific scalars and lists.
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
};

const std::vector<std::string>& experiment_ids();

/// Human-readable figure panel label recorded in the manifest.
std::string panel_anchor(const std::string& experiment);

/// Throws ValidationError for an unknown id.
ExperimentConfig default_config(const std::string& experiment);

/// Fields present in the document override the experiment's defaults.
/// Throws ValidationError when the document is structurally malformed.
ExperimentConfig config_from_json(const nlohmann::ordered_json& document);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const ExperimentConfig& config);

struct Diagnostic {
  enum class Level { Error, Warning, Info };
  Level level;
  std::string message;
};

std::string to_string(Diagnostic::Level level);
std::vector<Diagnostic> validate_config(const ExperimentConfig& config);
bool has_errors(const std::vector<Diagnostic>& diagnostics);

struct RunRecord {
  std::filesystem::path directory;
  std::vector<std::string> files;
  nlohmann::ordered_json summary;
  double wall_time_s = 0.0;
};

/// Writes the panel CSVs, config.json (resolved configuration) and
/// manifest.json into config.output.  Throws ValidationError if validation
/// reports errors or the directory cannot be created.
RunRecord run_experiment(const ExperimentConfig& config);

}  // namespace nlsq
