#pragma once

// Ensemble statistics for the growth law limsup |X_t| / sqrt(log t) = sqrt(2 lambda1) and the
// supporting pathwise checks.

#include <cstdint>
#include <span>
#include <vector>

#include "oulab/model.hpp"
#include "oulab/simulate.hpp"

namespace oulab {

struct SummaryStats {
  double median = 0.0;
  double mean = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
};

SummaryStats summarize(std::span<const double> values);

struct GrowthReport {
  double c_hat = 0.0;
  double c_pred = 0.0;
  double rel_err = 0.0;
  SummaryStats stats;
  std::vector<double> per_path;  // max of R(t_j) over the final window, one per path
  std::size_t n_paths = 0;
  double t_max = 0.0;
  int window_decades = 2;
};

/// Checkpoints with t_j >= t_last / 10^w (w decades back from the final checkpoint).
std::size_t window_start(const PathRecord& path, int window_decades);

/// Tail statistic per path, c_hat = median over paths. Throws on mismatched grids.
GrowthReport estimate_limsup(std::span<const PathRecord> paths, double c_pred, int window_decades = 2);

struct GumbelResult {
  double mean = 0.0;
  double stddev = 0.0;
  double std_error = 0.0;
  std::vector<double> ratios;
};

/// Mean of max(|Z_1|..|Z_n|) / sqrt(2 log n) over `reps` batches; batch r uses stream r.
GumbelResult gumbel_check(std::int64_t n, int reps, std::uint64_t seed);

/// Expected max of n absolute standard normals divided by sqrt(2 log n), to first
/// Gumbel order.
double gumbel_expected_ratio(double n);

struct QuadraticDiagnostic {
  std::vector<double> per_path;  // tail max of max_u V(X_u) / log t_j
  double median = 0.0;
};

/// V(x) = x^T Sigma^{-1} x / 2 normalized by log t. Requires invertible Sigma.
QuadraticDiagnostic quadratic_diagnostic(std::span<const PathRecord> paths, const StationaryModel& model,
                                         int window_decades = 2);

struct GronwallParams {
  double K = 1.0;
  double lambda0 = 1.0;
  double C = 0.0;
  double eps = 0.0;
};

struct GronwallCertificate {
  GronwallParams params;
  double eps0 = 0.0;
  double beta = 0.0;
  std::vector<double> slack;  // early samples first, then checkpoints
  double min_slack = 0.0;
  bool pass = false;
};

/// Fitted parameters: (K, lambda0) from the model envelope, eps = lambda0 / (2K) unless given,
/// C from fit_growth_bound.
GronwallParams fit_gronwall_params(const StationaryModel& model, std::optional<double> eps = std::nullopt);

/// Slack beta f(t) - |X_t| with f(t) = K |X_0| + L(t) + K C / lambda0 at t = 0, every step before
/// the first checkpoint, and every checkpoint.
GronwallCertificate gronwall_check(const PathRecord& path, const GronwallParams& params);

struct KernelVerdict {
  std::vector<bool> path_pass;
  double pass_fraction = 0.0;
  bool pass = false;
};

/// Per path: max R over the final two decades <= 1.5 x max R over the earlier decades.
KernelVerdict kernel_boundedness_check(std::span<const PathRecord> paths, double required_fraction = 0.95);

/// Tail max over the final `window_decades` of the running max of |Y_n| / sqrt(2 log n), n >= 3.
double projection_tail_ratio(std::span<const double> y, int window_decades = 2);

}  // namespace oulab
