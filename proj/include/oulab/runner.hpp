#pragma once

// Ensemble dispatch and the on-disk artifacts of a scenario run.

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "oulab/extremes.hpp"
#include "oulab/scenario.hpp"

namespace oulab {

/// Runs body(i) for i in [0, n) on `workers` threads (0: hardware concurrency). The first
/// exception is rethrown after all workers join.
template <typename Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  std::size_t threads = workers > 0 ? static_cast<std::size_t>(workers) : std::thread::hardware_concurrency();
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

struct PreparedSystem {
  StationaryModel model;
  StepCache cache;
  TimeGrid grid;
  InitialCondition x0;
};

/// Builds the model, picks h (config value or 0.25 / lambda0) and the step cache.
PreparedSystem prepare_system(const ScenarioConfig& config);

/// Path i uses RngStream(seed, i). `perturbed` selects the exponential Euler scheme.
std::vector<PathRecord> run_ensemble(const PreparedSystem& sys, int n_paths, std::uint64_t seed, int workers,
                                     bool perturbed, const StepObserver& path0_observer = {});

/// Path i uses RngStream(seed, stream_offset + i).
std::vector<PathRecord> run_kernel_ensemble(const KernelProcess& process, const TimeGrid& grid, int n_paths,
                                            std::uint64_t seed, std::uint64_t stream_offset, int workers);

nlohmann::json to_json(const GrowthReport& report);
nlohmann::json to_json(const GronwallCertificate& cert, bool with_slack = false);
nlohmann::json to_json(const DecayEnvelope& env);

/// ratios.csv body: fixed header, 17 significant digits.
std::string ratios_csv(const std::vector<PathRecord>& paths, std::uint64_t first_path_id = 0);

struct RunResult {
  nlohmann::json summary;
  nlohmann::json manifest;
  std::filesystem::path directory;
  std::vector<PathRecord> paths;         // primary ensemble (system or kernel kinds)
  std::vector<PathRecord> twin_paths;    // linear twin, when requested
};

/// Runs the scenario and writes summary.json, ratios.csv and manifest.json into `out_dir`.
RunResult run_scenario(const ScenarioConfig& config, const std::filesystem::path& out_dir);

/// Process exit code for an error category.
int exit_code_for(Errc code);

}  // namespace oulab
