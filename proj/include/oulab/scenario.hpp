#pragma once

// Scenario files (JSON) and the built-in presets.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "oulab/model.hpp"
#include "oulab/simulate.hpp"

namespace oulab {

inline constexpr int kConfigFormatVersion = 1;
inline constexpr std::string_view kSummarySchema = "oulab.summary/1";
inline constexpr std::string_view kManifestSchema = "oulab.manifest/1";
inline constexpr std::string_view kRatiosHeader = "path_id,t,norm_x,running_max,ratio";
inline constexpr std::string_view kRatiosSchema = "oulab.ratios/1";
inline constexpr std::string_view kDumpHeader = "t,norm_x,norm_noise";
inline constexpr std::uint64_t kDefaultSeed = 42;

enum class ScenarioKind { system, kernel, gumbel };

struct SystemConfig {
  MatrixD A;
  MatrixD D;
  DriftSpec drift;
  std::optional<std::vector<double>> x0;  // absent: stationary draw
};

struct GridConfig {
  double t0 = 10.0;
  double ratio = 1.2589254117941673;
  int n_checkpoints = 51;
  std::optional<double> h;  // absent: 0.25 / lambda0
};

struct EnsembleConfig {
  int n_paths = 64;
  std::uint64_t seed = kDefaultSeed;
  int workers = 0;  // 0: hardware concurrency
};

struct AnalysisConfig {
  int window_decades = 2;
  bool diagnostics = true;
  bool gronwall = true;
  bool linear_twin = false;
  std::optional<double> gronwall_eps;
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats = {"json", "csv"};
  std::int64_t dump_path_steps = 0;  // > 0: first N steps of path 0 to path_dump.csv
};

struct GumbelConfig {
  std::vector<std::int64_t> n_values = {1000, 10000, 100000, 1000000};
  int reps = 32;
};

struct ScenarioConfig {
  int format_version = kConfigFormatVersion;
  std::string name;
  ScenarioKind kind = ScenarioKind::system;
  std::optional<SystemConfig> system;
  std::vector<KernelSpec> kernels;
  std::optional<GumbelConfig> gumbel;
  GridConfig grid;
  EnsembleConfig ensemble;
  AnalysisConfig analysis;
  OutputConfig output;

  void validate() const;
  /// Sets n_checkpoints so the last checkpoint lands at t_max.
  void set_t_max(double t_max);
  double t_max() const;
  TimeGrid time_grid(double h) const;
};

nlohmann::json to_json(const ScenarioConfig& config);
/// Strict: unknown keys, missing required keys and wrong types all throw Errc::config_error.
ScenarioConfig scenario_from_json(const nlohmann::json& j);
ScenarioConfig load_scenario(const std::string& path);

std::vector<std::string> preset_names();
ScenarioConfig preset(std::string_view name);

/// FNV-1a 64-bit, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string config_hash(const ScenarioConfig& config);

nlohmann::json matrix_to_json(const MatrixD& m);
MatrixD matrix_from_json(const nlohmann::json& j, const char* what);

}  // namespace oulab
