#include "oulab/checks.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "oulab/runner.hpp"

namespace oulab {

namespace {

using Clock = std::chrono::steady_clock;

CheckResult make_check(std::string id, std::string title, std::string expected) {
  CheckResult r;
  r.id = std::move(id);
  r.title = std::move(title);
  r.expected = std::move(expected);
  return r;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read '" + p.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ScenarioConfig scaled_preset(const std::string& name, const CheckScale& scale) {
  ScenarioConfig c = preset(name);
  c.set_t_max(scale.t_max);
  c.ensemble.n_paths = scale.n_paths;
  return c;
}

// Applies the runtime limit and the time measurement to a result.
void finish(CheckResult& r, double seconds, double limit, const CheckScale& scale) {
  r.seconds = seconds;
  if (scale.enforce_runtime && seconds >= limit) {
    r.pass = false;
    r.observed += fmt(" [runtime %.1f s >= %.0f s]", seconds, limit);
  }
}

CheckResult lyapunov_check(const CheckScale& scale) {
  CheckResult r = make_check("1", "Lyapunov solve: residual and quadrature agreement", "residual <= 1e-10, oracle <= 1e-6, < 10 s");
  const auto start = Clock::now();
  RngStream rng(0x4c79617075, 0);
  double worst_res = 0.0, worst_oracle = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int d = 1 + i % 10;
    MatrixD s(d, d), dn(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        s(a, b) = rng.normal();
        dn(a, b) = rng.normal();
      }
    const MatrixD a = s + (spectral_norm(s) + 0.1) * MatrixD::Identity(d, d);
    const SymMatrixD q(dn * dn.transpose());
    const SymMatrixD sigma = solve_lyapunov(a, q);
    const MatrixD resid = a * sigma.matrix() + sigma.matrix() * a.transpose() - q.matrix();
    worst_res = std::max(worst_res, resid.norm() / q.matrix().norm());
    const SymMatrixD oracle = sigma_quadrature(a, dn, 1e-8);
    worst_oracle = std::max(worst_oracle, rel_frobenius(sigma.matrix(), oracle.matrix()));
  }
  r.observed = fmt("max residual %.2e, max oracle gap %.2e", worst_res, worst_oracle);
  r.pass = worst_res <= 1e-10 && worst_oracle <= 1e-6;
  finish(r, seconds_since(start), 10.0, scale);
  return r;
}

CheckResult constants_check(const CheckScale& scale) {
  CheckResult r = make_check("2", "Closed-form c_pred of the linear presets",
                "scalar sqrt2, diagonal 1, rotation 1 (1e-6); jordan 1.345040 (1e-5); < 1 s");
  const auto start = Clock::now();
  struct Case {
    const char* name;
    double want;
    double tol;
  };
  const Case cases[] = {{"scalar-sqrt2", std::sqrt(2.0), 1e-6},
                        {"diagonal", 1.0, 1e-6},
                        {"rotation", 1.0, 1e-6},
                        {"jordan", 1.345040, 1e-5}};
  r.pass = true;
  for (const auto& c : cases) {
    const ScenarioConfig pc = preset(c.name);
    const auto& s = *pc.system;
    const StationaryModel m = build_stationary_model(SdeSystem(s.A, s.D, s.drift));
    if (!r.observed.empty()) r.observed += ", ";
    r.observed += fmt("%s %.7f", c.name, m.c_pred);
    r.pass = r.pass && std::abs(m.c_pred - c.want) <= c.tol;
  }
  finish(r, seconds_since(start), 1.0, scale);
  return r;
}

// Itô sum of the kernel against the increments that drove the augmented system.
double kernel_oracle_error(const KernelSpec& spec) {
  constexpr double h = 1e-4;
  constexpr std::int64_t n_steps = 100000;  // T = 10
  constexpr std::int64_t every = 1000;      // 100 evaluation times
  const KernelProcess proc = make_kernel_process(spec, h);
  TimeGrid grid{10.0, 10.0, 1, h};

  std::vector<double> db(n_steps);
  std::vector<std::pair<std::int64_t, double>> sampled;
  StepObserver obs = [&](const StepEvent& ev) {
    if (ev.step == 0) return;
    db[static_cast<std::size_t>(ev.step - 1)] = ev.xi[0];
    if (ev.step % every == 0) sampled.emplace_back(ev.step, ev.state[proc.coordinate]);
  };
  RngStream rng(0x6b65726e656c, static_cast<std::uint64_t>(spec.k));
  simulate_kernel(proc, grid, rng, obs);

  std::vector<double> kv(n_steps + 1);
  for (std::int64_t j = 0; j <= n_steps; ++j) kv[static_cast<std::size_t>(j)] = spec(static_cast<double>(j) * h);
  double worst = 0.0;
  for (const auto& [m, value] : sampled) {
    double sum = 0.0;
    for (std::int64_t i = 0; i < m; ++i) sum += kv[static_cast<std::size_t>(m - i)] * db[static_cast<std::size_t>(i)];
    worst = std::max(worst, std::abs(sum - value));
  }
  return worst;
}

CheckResult kernel_oracle_check(const CheckScale& scale) {
  CheckResult r = make_check("3", "Kernel realization vs direct Ito sum (h = 1e-4, T = 10)", "max abs error <= 3e-2, < 30 s");
  const auto start = Clock::now();
  double worst = 0.0;
  for (int k = 0; k <= 3; ++k) {
    worst = std::max(worst, kernel_oracle_error({1.0, 0.0, k, KernelPhase::cos}));
    worst = std::max(worst, kernel_oracle_error({1.0, 3.0, k, KernelPhase::cos}));
    worst = std::max(worst, kernel_oracle_error({1.0, 3.0, k, KernelPhase::sin}));
  }
  r.observed = fmt("max abs error %.2e over k = 0..3, mu in {0, 3}", worst);
  r.pass = worst <= 3e-2;
  finish(r, seconds_since(start), 30.0, scale);
  return r;
}

struct TimedRun {
  RunResult result;
  double seconds = 0.0;
};

TimedRun timed_run(const ScenarioConfig& c, const std::filesystem::path& dir) {
  const auto start = Clock::now();
  RunResult res = run_scenario(c, dir);
  return {std::move(res), seconds_since(start)};
}

double c_hat_of(const RunResult& r) { return r.summary.at("growth").at("c_hat").get<double>(); }
double c_pred_of(const RunResult& r) { return r.summary.at("model").at("c_pred").get<double>(); }

CheckResult gumbel_suite_check(const CheckScale& scale, const std::filesystem::path& work) {
  CheckResult r = make_check("7", "Max of n normals / sqrt(2 log n), 32 reps",
                "mean at n = 1e6 in [0.88, 1.00]; monotone in n within 2 SE; < 60 s");
  ScenarioConfig c = preset("gumbel");
  const TimedRun run = timed_run(c, work / "gumbel");
  const auto& g = run.result.summary.at("gumbel");
  const auto& batches = g.at("batches");
  const auto& last = batches.back();
  const double mean = last.at("mean").get<double>();
  const bool monotone = g.at("monotone_within_2se").get<bool>();
  r.observed = fmt("n = %lld mean %.4f (se %.4f); means", static_cast<long long>(last.at("n").get<std::int64_t>()), mean,
                   last.at("std_error").get<double>());
  for (const auto& b : batches) r.observed += fmt(" %.4f", b.at("mean").get<double>());
  r.observed += monotone ? ", monotone" : ", NOT monotone";
  r.pass = last.at("n").get<std::int64_t>() == 1000000 && mean >= 0.88 && mean <= 1.00 && monotone;
  finish(r, run.seconds, 60.0, scale);
  return r;
}

CheckResult kernel_suite_check(const CheckScale& scale, const std::filesystem::path& work) {
  CheckResult r = make_check("9", "Kernel boundedness, four kernel classes", ">= 95% of paths pass per class; < 300 s");
  const TimedRun run = timed_run(scaled_preset("kernel-suite", scale), work / "kernel-suite");
  r.pass = true;
  for (const auto& k : run.result.summary.at("kernels")) {
    const auto& spec = k.at("kernel");
    if (!r.observed.empty()) r.observed += ", ";
    r.observed += fmt("(l=%g,m=%g,k=%d,%s) %.0f%%", spec.at("lambda").get<double>(), spec.at("mu").get<double>(),
                      spec.at("k").get<int>(), spec.at("phase").get<std::string>().c_str(),
                      100.0 * k.at("pass_fraction").get<double>());
    r.pass = r.pass && k.at("pass").get<bool>();
  }
  finish(r, run.seconds, 300.0, scale);
  return r;
}

CheckResult projection_check(const CheckScale& scale) {
  CheckResult r = make_check("P", "Projected sequence |Y_n| / sqrt(2 log n), jordan preset, h = 1",
                "ensemble median of tail max in [0.8, 1.1]");
  r.must_pass = false;
  const auto start = Clock::now();
  const ScenarioConfig pc = preset("jordan");
  const auto& s = *pc.system;
  const StationaryModel m = build_stationary_model(SdeSystem(s.A, s.D, s.drift));
  const StepCache cache = make_step_cache(m, 1.0);
  const auto n_max = static_cast<std::int64_t>(scale.t_max);
  std::vector<double> tails(static_cast<std::size_t>(scale.n_paths));
  parallel_for(tails.size(), 0, [&](std::size_t i) {
    RngStream rng(kDefaultSeed, 0x100000 + i);
    const MatrixD states = simulate_integer_states(m, cache, n_max, rng);
    const VectorD y = mixing_projection(m, states);
    tails[i] = projection_tail_ratio(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
  });
  const double med = summarize(tails).median;
  r.observed = fmt("median %.4f at n = %lld", med, static_cast<long long>(n_max));
  r.pass = med >= 0.8 && med <= 1.1;
  r.seconds = seconds_since(start);
  return r;
}

}  // namespace

std::vector<CheckResult> run_all_checks(const CheckScale& scale, const std::filesystem::path& work,
                                        const std::function<void(const CheckResult&)>& on_result) {
  std::vector<CheckResult> out;
  auto record = [&](CheckResult r) {
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  };
  // Each check is isolated so one failure does not abort the rest.
  auto guarded = [&](const char* id, const char* title, auto&& fn) {
    const auto start = Clock::now();
    try {
      fn();
    } catch (const std::exception& e) {
      CheckResult r = make_check(id, title, "no error");
      r.observed = std::string("error: ") + e.what();
      r.seconds = seconds_since(start);
      record(std::move(r));
    }
  };

  guarded("1", "Lyapunov solve", [&] { record(lyapunov_check(scale)); });
  guarded("2", "Closed-form constants", [&] { record(constants_check(scale)); });
  guarded("3", "Kernel realization oracle", [&] { record(kernel_oracle_check(scale)); });

  std::optional<TimedRun> scalar_run;
  guarded("4", "Scalar growth constant", [&] {
    CheckResult r = make_check("4", "Scalar preset: c_hat vs sqrt2", "c_hat in [1.20, 1.63] (+-15% of sqrt2); < 120 s");
    scalar_run = timed_run(scaled_preset("scalar-sqrt2", scale), work / "scalar-sqrt2-a");
    const double c = c_hat_of(scalar_run->result);
    r.observed = fmt("c_hat %.4f (rel err %+.3f)", c, c / std::sqrt(2.0) - 1.0);
    r.pass = std::abs(c / std::sqrt(2.0) - 1.0) <= 0.15;
    finish(r, scalar_run->seconds, 120.0, scale);
    record(std::move(r));
  });

  guarded("5", "Structured systems", [&] {
    CheckResult r = make_check("5", "Diagonal, jordan, rotation: c_hat / c_pred", "each ratio in [0.80, 1.15]; < 600 s total");
    double total = 0.0;
    r.pass = true;
    for (const char* name : {"diagonal", "jordan", "rotation"}) {
      const TimedRun run = timed_run(scaled_preset(name, scale), work / name);
      total += run.seconds;
      const double ratio = c_hat_of(run.result) / c_pred_of(run.result);
      if (!r.observed.empty()) r.observed += ", ";
      r.observed += fmt("%s %.4f", name, ratio);
      r.pass = r.pass && ratio >= 0.80 && ratio <= 1.15;
    }
    finish(r, total, 600.0, scale);
    record(std::move(r));
  });

  std::optional<TimedRun> tanh_run;
  guarded("6", "Perturbation invariance", [&] {
    CheckResult r = make_check("6", "tanh-perturbed vs linear twin, matched seeds", "|c_hat_F - c_hat_0| <= 0.10 c_pred; < 240 s");
    tanh_run = timed_run(scaled_preset("tanh-perturbed", scale), work / "tanh-perturbed");
    const auto& twin = tanh_run->result.summary.at("linear_twin");
    const double diff = twin.at("abs_diff").get<double>();
    const double tol = twin.at("tolerance").get<double>();
    r.observed = fmt("c_hat_F %.4f, c_hat_0 %.4f, |diff| %.4f vs %.4f", c_hat_of(tanh_run->result),
                     twin.at("growth").at("c_hat").get<double>(), diff, tol);
    r.pass = diff <= tol;
    finish(r, tanh_run->seconds, 240.0, scale);
    record(std::move(r));
  });

  guarded("7", "Max-of-normals law", [&] { record(gumbel_suite_check(scale, work)); });

  guarded("8", "Gronwall pathwise bound", [&] {
    CheckResult r = make_check("8", "Gronwall certificate on tanh-perturbed paths",
                  "fitted: 100% pass; halved K: >= 1 path fails; < 240 s");
    const auto start = Clock::now();
    if (!tanh_run) tanh_run = timed_run(scaled_preset("tanh-perturbed", scale), work / "tanh-perturbed");
    const ScenarioConfig pc = preset("tanh-perturbed");
    const auto& s = *pc.system;
    const StationaryModel m = build_stationary_model(SdeSystem(s.A, s.D, s.drift));
    const GronwallParams fitted = fit_gronwall_params(m);
    GronwallParams halved = fitted;
    halved.K *= 0.5;
    std::size_t fitted_pass = 0, halved_fail = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    for (const auto& p : tanh_run->result.paths) {
      const auto cert = gronwall_check(p, fitted);
      fitted_pass += cert.pass ? 1 : 0;
      min_slack = std::min(min_slack, cert.min_slack);
      halved_fail += gronwall_check(p, halved).pass ? 0 : 1;
    }
    const std::size_t n = tanh_run->result.paths.size();
    r.observed = fmt("fitted %zu/%zu pass (min slack %.3f, K %.3f, l0 %.3f, C %.3f, eps %.3f); halved K fails %zu/%zu",
                     fitted_pass, n, min_slack, fitted.K, fitted.lambda0, fitted.C, fitted.eps, halved_fail, n);
    r.pass = fitted_pass == n && halved_fail >= 1;
    finish(r, tanh_run->seconds + seconds_since(start), 240.0, scale);
    record(std::move(r));
  });

  guarded("9", "Kernel boundedness", [&] { record(kernel_suite_check(scale, work)); });

  guarded("10", "Determinism", [&] {
    CheckResult r = make_check("10", "Second scalar-sqrt2 run with the same seed", "byte-identical ratios.csv; < 2x preset runtime");
    if (!scalar_run) scalar_run = timed_run(scaled_preset("scalar-sqrt2", scale), work / "scalar-sqrt2-a");
    const auto start = Clock::now();
    timed_run(scaled_preset("scalar-sqrt2", scale), work / "scalar-sqrt2-b");
    const std::string a = read_file(work / "scalar-sqrt2-a" / "ratios.csv");
    const std::string b = read_file(work / "scalar-sqrt2-b" / "ratios.csv");
    r.observed = fmt("fnv1a %s vs %s (%zu bytes)", fnv1a_hex(a).c_str(), fnv1a_hex(b).c_str(), b.size());
    r.pass = a == b;
    finish(r, seconds_since(start), 2.0 * scalar_run->seconds, scale);
    record(std::move(r));
  });

  guarded("P", "Projected sequence", [&] { record(projection_check(scale)); });
  return out;
}

bool suite_green(const std::vector<CheckResult>& results) {
  for (const auto& r : results)
    if (r.must_pass && !r.pass) return false;
  return true;
}

std::string format_line(const CheckResult& r) {
  const char* verdict = r.pass ? "PASS" : (r.must_pass ? "FAIL" : "WARN");
  return fmt("[%s] %-3s %s | expected: %s | observed: %s | %.1f s", verdict, r.id.c_str(), r.title.c_str(),
             r.expected.c_str(), r.observed.c_str(), r.seconds);
}

std::string format_table(const std::vector<CheckResult>& results) {
  std::ostringstream os;
  os << fmt("%-4s %-8s %-9s %-60s %s\n", "id", "verdict", "seconds", "expected", "observed");
  for (const auto& r : results) {
    const char* verdict = r.pass ? "PASS" : (r.must_pass ? "FAIL" : "WARN");
    os << fmt("%-4s %-8s %-9.1f %-60s %s\n", r.id.c_str(), verdict, r.seconds, r.expected.c_str(), r.observed.c_str());
  }
  os << (suite_green(results) ? "all must-pass checks green\n" : "must-pass checks failed\n");
  return os.str();
}

nlohmann::json to_json(const std::vector<CheckResult>& results) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : results)
    rows.push_back({{"id", r.id},
                    {"title", r.title},
                    {"expected", r.expected},
                    {"observed", r.observed},
                    {"verdict", r.pass ? "pass" : (r.must_pass ? "fail" : "warn")},
                    {"must_pass", r.must_pass},
                    {"seconds", r.seconds}});
  return {{"checks", rows}, {"green", suite_green(results)}};
}

}  // namespace oulab
