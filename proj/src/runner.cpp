#include "oulab/runner.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

namespace oulab {

using nlohmann::json;

PreparedSystem prepare_system(const ScenarioConfig& config) {
  if (config.kind != ScenarioKind::system || !config.system)
    throw Error(Errc::config_error, "prepare_system: scenario is not of kind 'system'");
  const auto& s = *config.system;
  SdeSystem sys(s.A, s.D, s.drift);
  StationaryModel model = build_stationary_model(sys);
  const double h = config.grid.h.value_or(0.25 / model.envelope.lambda0);
  StepCache cache = make_step_cache(model, h);
  TimeGrid grid = config.time_grid(h);
  grid.validate();
  InitialCondition x0 = s.x0 ? InitialCondition::at(Eigen::Map<const VectorD>(s.x0->data(), static_cast<Eigen::Index>(s.x0->size())))
                             : InitialCondition::stationary_draw();
  return PreparedSystem{std::move(model), std::move(cache), grid, std::move(x0)};
}

std::vector<PathRecord> run_ensemble(const PreparedSystem& sys, int n_paths, std::uint64_t seed, int workers,
                                     bool perturbed, const StepObserver& path0_observer) {
  std::vector<PathRecord> out(static_cast<std::size_t>(n_paths));
  parallel_for(out.size(), workers, [&](std::size_t i) {
    RngStream rng(seed, i);
    const StepObserver& obs = i == 0 ? path0_observer : StepObserver{};
    out[i] = perturbed ? simulate_perturbed(sys.model, sys.cache, sys.grid, sys.x0, rng, obs)
                       : simulate_linear(sys.model, sys.cache, sys.grid, sys.x0, rng, obs);
  });
  return out;
}

std::vector<PathRecord> run_kernel_ensemble(const KernelProcess& process, const TimeGrid& grid, int n_paths,
                                            std::uint64_t seed, std::uint64_t stream_offset, int workers) {
  std::vector<PathRecord> out(static_cast<std::size_t>(n_paths));
  parallel_for(out.size(), workers, [&](std::size_t i) {
    RngStream rng(seed, stream_offset + i);
    out[i] = simulate_kernel(process, grid, rng);
  });
  return out;
}

json to_json(const GrowthReport& r) {
  return {{"c_hat", r.c_hat},
          {"c_pred", r.c_pred},
          {"rel_err", r.rel_err},
          {"median", r.stats.median},
          {"mean", r.stats.mean},
          {"q10", r.stats.q10},
          {"q90", r.stats.q90},
          {"n_paths", r.n_paths},
          {"t_max", r.t_max},
          {"window_decades", r.window_decades},
          {"per_path", r.per_path}};
}

json to_json(const GronwallCertificate& c, bool with_slack) {
  json j = {{"K", c.params.K},       {"lambda0", c.params.lambda0}, {"C", c.params.C},
            {"eps", c.params.eps},   {"eps0", c.eps0},              {"beta", c.beta},
            {"min_slack", c.min_slack}, {"pass", c.pass}};
  if (with_slack) j["slack"] = c.slack;
  return j;
}

json to_json(const DecayEnvelope& env) { return {{"K", env.K}, {"lambda0", env.lambda0}}; }

namespace {

void append_rows(std::string& out, const std::vector<PathRecord>& paths, std::uint64_t first_id) {
  char buf[256];
  for (std::size_t p = 0; p < paths.size(); ++p) {
    for (const auto& c : paths[p].checkpoints) {
      std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<unsigned long long>(first_id + p), c.t, c.norm_x, c.running_max, c.ratio);
      out += buf;
    }
  }
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write '" + path.string() + "'");
  out << body;
  if (!out) throw Error(Errc::io_error, "write failed for '" + path.string() + "'");
}

bool wants(const ScenarioConfig& c, const char* format) {
  return std::find(c.output.formats.begin(), c.output.formats.end(), format) != c.output.formats.end();
}

json model_json(const StationaryModel& m, double h) {
  json j = {{"dim", m.dim()},
            {"A", matrix_to_json(m.system.A())},
            {"D", matrix_to_json(m.system.D())},
            {"Sigma", matrix_to_json(m.Sigma.matrix())},
            {"Sigma_rank", m.chol_Sigma.rank},
            {"eigenvalues", std::vector<double>(m.spectrum.values.data(), m.spectrum.values.data() + m.spectrum.values.size())},
            {"lambda1", m.lambda1},
            {"alpha", std::vector<double>(m.alpha.data(), m.alpha.data() + m.alpha.size())},
            {"c_pred", m.c_pred},
            {"envelope", to_json(m.envelope)},
            {"h", h}};
  j["hurwitz_certificate"] = {{"ok", m.system.certificate().ok}, {"P", matrix_to_json(m.system.certificate().P->matrix())}};
  return j;
}

struct Artifacts {
  std::string summary;
  std::string ratios;
  std::string dump;
};

}  // namespace

std::string ratios_csv(const std::vector<PathRecord>& paths, std::uint64_t first_path_id) {
  std::string out(kRatiosHeader);
  out += '\n';
  append_rows(out, paths, first_path_id);
  return out;
}

RunResult run_scenario(const ScenarioConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  const std::string started = iso_now();
  RunResult result;
  result.directory = out_dir;
  const auto& ens = config.ensemble;

  json summary = {{"schema", kSummarySchema},
                  {"format_version", config.format_version},
                  {"ratios_csv_schema", kRatiosSchema},
                  {"config", to_json(config)}};
  json seeds = json::array();
  Artifacts art;
  art.ratios = std::string(kRatiosHeader) + "\n";

  switch (config.kind) {
    case ScenarioKind::system: {
      const PreparedSystem sys = prepare_system(config);
      const bool perturbed = !sys.model.system.drift().is_zero();
      summary["model"] = model_json(sys.model, sys.grid.h);

      std::string dump;
      StepObserver dumper;
      if (config.output.dump_path_steps > 0) {
        dump = std::string(kDumpHeader) + "\n";
        dumper = [&dump, cap = config.output.dump_path_steps](const StepEvent& ev) {
          if (ev.step >= cap) return;
          char buf[128];
          std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", ev.t, ev.state.norm(), ev.noise_state.norm());
          dump += buf;
        };
      }
      result.paths = run_ensemble(sys, ens.n_paths, ens.seed, ens.workers, perturbed, dumper);
      art.dump = std::move(dump);
      const GrowthReport report = estimate_limsup(result.paths, sys.model.c_pred, config.analysis.window_decades);
      summary["growth"] = to_json(report);
      append_rows(art.ratios, result.paths, 0);

      if (perturbed && config.analysis.linear_twin) {
        result.twin_paths = run_ensemble(sys, ens.n_paths, ens.seed, ens.workers, false);
        const GrowthReport twin = estimate_limsup(result.twin_paths, sys.model.c_pred, config.analysis.window_decades);
        summary["linear_twin"] = {{"growth", to_json(twin)},
                                  {"abs_diff", std::abs(report.c_hat - twin.c_hat)},
                                  {"tolerance", 0.10 * sys.model.c_pred}};
      }
      if (perturbed && config.analysis.gronwall) {
        const GronwallParams params = fit_gronwall_params(sys.model, config.analysis.gronwall_eps);
        json per_path = json::array();
        std::size_t passed = 0;
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& p : result.paths) {
          const auto cert = gronwall_check(p, params);
          passed += cert.pass ? 1 : 0;
          worst = std::min(worst, cert.min_slack);
          per_path.push_back(cert.min_slack);
        }
        json g = to_json(gronwall_check(result.paths.front(), params));
        g["min_slack"] = worst;
        g["pass_count"] = passed;
        g["n_paths"] = result.paths.size();
        g["pass"] = passed == result.paths.size();
        g["per_path_min_slack"] = per_path;
        summary["gronwall"] = g;
      }
      if (config.analysis.diagnostics && sys.model.Sigma_inverse) {
        const auto q = quadratic_diagnostic(result.paths, sys.model, config.analysis.window_decades);
        summary["quadratic_diagnostic"] = {{"statistic", "max V(X_u) / log t, V(x) = x^T Sigma^-1 x / 2"},
                                           {"median", q.median},
                                           {"per_path", q.per_path}};
      }
      for (int i = 0; i < ens.n_paths; ++i) seeds.push_back({{"path_id", i}, {"seed", ens.seed}, {"stream", i}});
      break;
    }
    case ScenarioKind::kernel: {
      const double h = config.grid.h.value_or(0.25);
      const TimeGrid grid = config.time_grid(h);
      json classes = json::array();
      for (std::size_t c = 0; c < config.kernels.size(); ++c) {
        const KernelProcess proc = make_kernel_process(config.kernels[c], h);
        const std::uint64_t offset = c * static_cast<std::uint64_t>(ens.n_paths);
        auto paths = run_kernel_ensemble(proc, grid, ens.n_paths, ens.seed, offset, ens.workers);
        const auto verdict = kernel_boundedness_check(paths);
        const auto report = estimate_limsup(paths, std::sqrt(2.0 * proc.model.Sigma(proc.coordinate, proc.coordinate)),
                                            config.analysis.window_decades);
        classes.push_back({{"kernel", summary["config"]["kernels"][c]},
                           {"dim", proc.model.dim()},
                           {"stationary_variance", proc.model.Sigma(proc.coordinate, proc.coordinate)},
                           {"growth", to_json(report)},
                           {"pass_fraction", verdict.pass_fraction},
                           {"pass", verdict.pass}});
        append_rows(art.ratios, paths, offset);
        for (int i = 0; i < ens.n_paths; ++i)
          seeds.push_back({{"path_id", offset + i}, {"seed", ens.seed}, {"stream", offset + i}});
        result.paths.insert(result.paths.end(), std::make_move_iterator(paths.begin()), std::make_move_iterator(paths.end()));
      }
      summary["kernels"] = classes;
      summary["grid"] = {{"t_max", grid.t_max()}, {"h", h}};
      break;
    }
    case ScenarioKind::gumbel: {
      json rows = json::array();
      double prev_mean = 0.0, prev_se = 0.0;
      bool monotone = true;
      char buf[256];
      for (std::size_t k = 0; k < config.gumbel->n_values.size(); ++k) {
        const auto n = config.gumbel->n_values[k];
        // Each n gets its own block of streams so the batches are independent across n.
        const GumbelResult g = gumbel_check(n, config.gumbel->reps, ens.seed + 0x9E3779B97F4A7C15ULL * (k + 1));
        if (k > 0 && g.mean < prev_mean - 2.0 * std::hypot(g.std_error, prev_se)) monotone = false;
        prev_mean = g.mean;
        prev_se = g.std_error;
        rows.push_back({{"n", n},
                        {"mean", g.mean},
                        {"stddev", g.stddev},
                        {"std_error", g.std_error},
                        {"expected_ratio", gumbel_expected_ratio(static_cast<double>(n))},
                        {"ratios", g.ratios}});
        for (std::size_t r = 0; r < g.ratios.size(); ++r) {
          const double m = g.ratios[r] * std::sqrt(2.0 * std::log(static_cast<double>(n)));
          std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", r, static_cast<double>(n), m, m, g.ratios[r]);
          art.ratios += buf;
        }
      }
      summary["gumbel"] = {{"batches", rows}, {"monotone_within_2se", monotone}};
      for (int r = 0; r < config.gumbel->reps; ++r) seeds.push_back({{"path_id", r}, {"seed", ens.seed}, {"stream", r}});
      break;
    }
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::io_error, "cannot create output directory '" + out_dir.string() + "': " + ec.message());

  art.summary = summary.dump(2) + "\n";
  json files = json::array();
  auto emit = [&](const char* name, const std::string& body) {
    write_file(out_dir / name, body);
    files.push_back({{"file", name}, {"bytes", body.size()}, {"fnv1a64", fnv1a_hex(body)}});
  };
  if (wants(config, "json")) emit("summary.json", art.summary);
  if (wants(config, "csv")) emit("ratios.csv", art.ratios);
  if (!art.dump.empty()) emit("path_dump.csv", art.dump);

  json manifest = {{"schema", kManifestSchema},
                   {"config_hash", config_hash(config)},
                   {"base_seed", ens.seed},
                   {"paths", seeds},
                   {"started_at", started},
                   {"finished_at", iso_now()},
                   {"artifacts", files}};
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

  result.summary = std::move(summary);
  result.manifest = std::move(manifest);
  return result;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::not_hurwitz: return 2;
    case Errc::model_error:
    case Errc::no_convergence:
    case Errc::overflow:
    case Errc::blow_up:
    case Errc::not_psd:
    case Errc::degenerate: return 3;
    case Errc::io_error: return 4;
    case Errc::config_error:
    case Errc::invalid_argument: return 5;
  }
  return 1;
}

}  // namespace oulab
