// oulab: run scenarios, list presets, run the acceptance suite.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "oulab/checks.hpp"
#include "oulab/runner.hpp"

namespace {

int report_error(const oulab::Error& e) {
  const nlohmann::json j = {{"error", oulab::errc_name(e.code())}, {"message", e.what()}};
  std::cerr << j.dump() << '\n';
  return oulab::exit_code_for(e.code());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extreme-value growth experiments for Ornstein-Uhlenbeck type systems"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario file or a preset");
  std::string config_path, preset_name, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::optional<double> tmax;
  bool run_json = false;
  auto* file_opt = run->add_option("config", config_path, "Scenario JSON file");
  auto* preset_opt = run->add_option("--preset", preset_name, "Built-in preset name");
  file_opt->excludes(preset_opt);
  run->add_option("--out", out_dir, "Output directory (default: config value, or $OULAB_OUT_DIR)");
  run->add_option("--seed", seed, "Base seed");
  run->add_option("--paths", paths, "Number of paths")->check(CLI::PositiveNumber);
  run->add_option("--tmax", tmax, "Final checkpoint time")->check(CLI::PositiveNumber);
  run->add_flag("--json", run_json, "Print summary.json to stdout");

  auto* verify = app.add_subcommand("verify-all", "Run every acceptance check at reduced scale (T = 1e5, 32 paths)");
  bool verify_json = false;
  std::string work_dir = "oulab-verify";
  verify->add_flag("--json", verify_json, "Machine-readable report");
  verify->add_option("--work", work_dir, "Scratch directory for check artifacts");

  app.add_subcommand("presets", "List built-in presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("presets")) {
      for (const auto& n : oulab::preset_names()) std::cout << n << '\n';
      return 0;
    }

    if (app.got_subcommand("verify-all")) {
      const auto results = oulab::run_all_checks(oulab::CheckScale::reduced(), work_dir,
                                                 [&](const oulab::CheckResult& r) {
                                                   if (!verify_json) std::cerr << oulab::format_line(r) << '\n';
                                                 });
      if (verify_json)
        std::cout << oulab::to_json(results).dump(2) << '\n';
      else
        std::cout << oulab::format_table(results);
      return oulab::suite_green(results) ? 0 : 1;
    }

    if (config_path.empty() && preset_name.empty())
      throw oulab::Error(oulab::Errc::config_error, "run: give a config file or --preset NAME");
    oulab::ScenarioConfig config =
        preset_name.empty() ? oulab::load_scenario(config_path) : oulab::preset(preset_name);
    if (seed) config.ensemble.seed = *seed;
    if (paths) config.ensemble.n_paths = *paths;
    if (tmax) config.set_t_max(*tmax);
    if (out_dir.empty()) {
      const char* env = std::getenv("OULAB_OUT_DIR");
      out_dir = env && *env ? env : config.output.directory;
    }
    config.output.directory = out_dir;
    const oulab::RunResult result = oulab::run_scenario(config, out_dir);
    if (run_json)
      std::cout << result.summary.dump(2) << '\n';
    else
      std::cout << "wrote " << out_dir << " (config " << result.manifest.at("config_hash").get<std::string>() << ")\n";
    return 0;
  } catch (const oulab::Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
}
