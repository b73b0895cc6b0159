#pragma once

// The acceptance suite shared by `oulab verify-all` and the acceptance test binary.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace oulab {

struct CheckResult {
  std::string id;
  std::string title;
  std::string expected;
  std::string observed;
  bool pass = false;
  bool must_pass = true;
  double seconds = 0.0;
};

/// Horizon and ensemble size for the Monte Carlo checks. Runtime limits are enforced only at
/// acceptance scale.
struct CheckScale {
  double t_max = 1e6;
  int n_paths = 64;
  bool enforce_runtime = true;

  static CheckScale acceptance() { return {}; }
  static CheckScale reduced() { return {1e5, 32, false}; }
};

/// Runs every check in order. `on_result` fires as each one finishes. Scratch artifacts go
/// under `work_dir`. A check that throws is reported as a failure and the suite continues.
std::vector<CheckResult> run_all_checks(const CheckScale& scale, const std::filesystem::path& work_dir,
                                        const std::function<void(const CheckResult&)>& on_result = {});

bool suite_green(const std::vector<CheckResult>& results);
std::string format_line(const CheckResult& r);
std::string format_table(const std::vector<CheckResult>& results);
nlohmann::json to_json(const std::vector<CheckResult>& results);

}  // namespace oulab
