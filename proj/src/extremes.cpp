#include "oulab/extremes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace oulab {

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::invalid_argument, "summarize: no values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  SummaryStats s;
  s.median = quantile_sorted(v, 0.5);
  s.q10 = quantile_sorted(v, 0.1);
  s.q90 = quantile_sorted(v, 0.9);
  double acc = 0.0;
  for (double x : v) acc += x;
  s.mean = acc / static_cast<double>(v.size());
  return s;
}

std::size_t window_start(const PathRecord& path, int window_decades) {
  if (window_decades < 1) throw Error(Errc::invalid_argument, "window must cover at least one decade");
  const auto& cps = path.checkpoints;
  if (cps.empty()) throw Error(Errc::invalid_argument, "path has no checkpoints");
  const double cut = cps.back().t / std::pow(10.0, window_decades);
  if (cps.front().t > cut * (1.0 + 1e-9)) {
    std::ostringstream os;
    os << "grid spans fewer than " << window_decades << " decades (" << cps.front().t << " .. " << cps.back().t << ")";
    throw Error(Errc::invalid_argument, os.str());
  }
  std::size_t j = 0;
  while (cps[j].t < cut * (1.0 - 1e-9)) ++j;
  return j;
}

namespace {

void require_shared_grid(std::span<const PathRecord> paths) {
  if (paths.empty()) throw Error(Errc::invalid_argument, "empty ensemble");
  const auto& ref = paths.front().checkpoints;
  for (const auto& p : paths) {
    if (p.checkpoints.size() != ref.size()) throw Error(Errc::invalid_argument, "mismatched grids across paths");
    for (std::size_t j = 0; j < ref.size(); ++j)
      if (p.checkpoints[j].t != ref[j].t) throw Error(Errc::invalid_argument, "mismatched grids across paths");
  }
}

}  // namespace

GrowthReport estimate_limsup(std::span<const PathRecord> paths, double c_pred, int window_decades) {
  require_shared_grid(paths);
  const std::size_t start = window_start(paths.front(), window_decades);
  GrowthReport r;
  r.per_path.reserve(paths.size());
  for (const auto& p : paths) {
    double tail = 0.0;
    for (std::size_t j = start; j < p.checkpoints.size(); ++j) tail = std::max(tail, p.checkpoints[j].ratio);
    r.per_path.push_back(tail);
  }
  r.stats = summarize(r.per_path);
  r.c_hat = r.stats.median;
  r.c_pred = c_pred;
  r.rel_err = c_pred > 0 ? std::abs(r.c_hat - c_pred) / c_pred : std::numeric_limits<double>::quiet_NaN();
  r.n_paths = paths.size();
  r.t_max = paths.front().checkpoints.back().t;
  r.window_decades = window_decades;
  return r;
}

GumbelResult gumbel_check(std::int64_t n, int reps, std::uint64_t seed) {
  if (n < 1000) throw Error(Errc::invalid_argument, "gumbel_check: n must be >= 1000");
  if (reps < 2) throw Error(Errc::invalid_argument, "gumbel_check: need at least two batches");
  GumbelResult g;
  const double scale = std::sqrt(2.0 * std::log(static_cast<double>(n)));
  for (int r = 0; r < reps; ++r) {
    RngStream rng(seed, static_cast<std::uint64_t>(r));
    double m = 0.0;
    for (std::int64_t i = 0; i < n; ++i) m = std::max(m, std::abs(rng.normal()));
    g.ratios.push_back(m / scale);
  }
  double acc = 0.0;
  for (double x : g.ratios) acc += x;
  g.mean = acc / reps;
  double ss = 0.0;
  for (double x : g.ratios) ss += (x - g.mean) * (x - g.mean);
  g.stddev = std::sqrt(ss / (reps - 1));
  g.std_error = g.stddev / std::sqrt(static_cast<double>(reps));
  return g;
}

double gumbel_expected_ratio(double n) {
  const double b = std::sqrt(2.0 * std::log(n));
  const double location = b - (std::log(std::log(n)) + std::log(std::numbers::pi)) / (2.0 * b);
  return (location + std::numbers::egamma / b) / b;
}

QuadraticDiagnostic quadratic_diagnostic(std::span<const PathRecord> paths, const StationaryModel& model,
                                         int window_decades) {
  if (!model.Sigma_inverse) throw Error(Errc::degenerate, "quadratic_diagnostic: Sigma is singular");
  require_shared_grid(paths);
  const std::size_t start = window_start(paths.front(), window_decades);
  QuadraticDiagnostic q;
  for (const auto& p : paths) {
    double tail = 0.0;
    for (std::size_t j = start; j < p.checkpoints.size(); ++j) {
      const auto& c = p.checkpoints[j];
      if (std::isnan(c.quad_max)) throw Error(Errc::invalid_argument, "quadratic_diagnostic: path lacks V records");
      tail = std::max(tail, c.quad_max / std::log(c.t));
    }
    q.per_path.push_back(tail);
  }
  q.median = summarize(q.per_path).median;
  return q;
}

GronwallParams fit_gronwall_params(const StationaryModel& model, std::optional<double> eps) {
  GronwallParams p;
  p.K = model.envelope.K;
  p.lambda0 = model.envelope.lambda0;
  p.eps = eps.value_or(default_gronwall_eps(model.envelope));
  p.C = fit_growth_bound(model.system.drift(), model.dim(), p.eps);
  return p;
}

GronwallCertificate gronwall_check(const PathRecord& path, const GronwallParams& params) {
  GronwallCertificate cert;
  cert.params = params;
  cert.eps0 = params.K * params.eps;
  if (!(cert.eps0 < params.lambda0))
    throw Error(Errc::invalid_argument, "gronwall_check: bound factor undefined (K eps >= lambda0)");
  cert.beta = params.lambda0 / (params.lambda0 - cert.eps0);
  const double base = params.K * path.x0.norm() + params.K * params.C / params.lambda0;
  auto slack = [&](double u, double noise_max) { return cert.beta * (base + noise_max) - u; };
  cert.slack.reserve(path.early.size() + path.checkpoints.size());
  for (const auto& e : path.early) cert.slack.push_back(slack(e.norm_x, e.noise_max));
  for (const auto& c : path.checkpoints) cert.slack.push_back(slack(c.norm_x, c.noise_max));
  cert.min_slack = cert.slack.empty() ? 0.0 : *std::min_element(cert.slack.begin(), cert.slack.end());
  cert.pass = cert.min_slack >= 0.0;
  return cert;
}

KernelVerdict kernel_boundedness_check(std::span<const PathRecord> paths, double required_fraction) {
  require_shared_grid(paths);
  const auto& cps = paths.front().checkpoints;
  if (cps.back().t < cps.front().t * 1e4 * (1.0 - 1e-9))
    throw Error(Errc::invalid_argument, "kernel_boundedness_check: grid must span at least 4 decades");
  const std::size_t late = window_start(paths.front(), 2);
  KernelVerdict v;
  std::size_t passed = 0;
  for (const auto& p : paths) {
    double early_max = 0.0, late_max = 0.0;
    for (std::size_t j = 0; j < p.checkpoints.size(); ++j) {
      double& slot = j < late ? early_max : late_max;
      slot = std::max(slot, p.checkpoints[j].ratio);
    }
    const bool ok = late_max <= 1.5 * early_max;
    v.path_pass.push_back(ok);
    passed += ok ? 1 : 0;
  }
  v.pass_fraction = static_cast<double>(passed) / static_cast<double>(paths.size());
  v.pass = v.pass_fraction >= required_fraction;
  return v;
}

double projection_tail_ratio(std::span<const double> y, int window_decades) {
  const auto n_last = static_cast<double>(y.size()) - 1.0;
  const double cut = n_last / std::pow(10.0, window_decades);
  if (!(cut >= 3.0)) throw Error(Errc::invalid_argument, "projection_tail_ratio: series too short for window");
  double running = 0.0, tail = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    running = std::max(running, std::abs(y[n]));
    if (static_cast<double>(n) >= cut) tail = std::max(tail, running / std::sqrt(2.0 * std::log(static_cast<double>(n))));
  }
  return tail;
}

}  // namespace oulab
