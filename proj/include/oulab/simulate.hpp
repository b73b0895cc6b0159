#pragma once

// Trajectory generation. Linear dynamics are stepped with exact Gaussian transitions
// X_{t+h} = Phi X_t + xi, xi ~ N(0, Sigma_h); the perturbed scheme is exponential Euler
// with the same exact noise, and the pure noise convolution N_t is carried along on the
// same draws.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "oulab/model.hpp"
#include "oulab/rng.hpp"

namespace oulab {

/// Geometric checkpoints t_j = t0 r^j, each rounded to a multiple of the step h.
struct TimeGrid {
  double t0 = 10.0;
  double ratio = 1.2589254117941673;  // 10^(1/10)
  int n_checkpoints = 51;
  double h = 0.25;

  void validate() const;
  std::vector<std::int64_t> checkpoint_steps() const;
  double t_max() const;

  /// Grid from t0 up to t_max with `per_decade` checkpoints per factor of ten.
  static TimeGrid decades(double t0, double t_max, int per_decade, double h);
};

struct Checkpoint {
  double t = 0.0;
  double norm_x = 0.0;
  double running_max = 0.0;  // M(t): max |X_u| over step points u <= t
  double noise_max = 0.0;    // L(t): max |N_u| over step points u <= t
  double ratio = 0.0;        // M(t) / sqrt(log t)
  double quad_max = std::numeric_limits<double>::quiet_NaN();  // max of x^T Sigma^{-1} x / 2
  VectorD state;
};

struct EarlySample {
  double t = 0.0;
  double norm_x = 0.0;
  double noise_max = 0.0;
};

struct InitialCondition {
  bool stationary = true;
  VectorD value;

  static InitialCondition stationary_draw() { return {}; }
  static InitialCondition at(VectorD x) { return {false, std::move(x)}; }
};

struct PathRecord {
  std::vector<Checkpoint> checkpoints;
  std::vector<EarlySample> early;  // t = 0 and every step strictly before the first checkpoint
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  bool stationary_start = false;
  VectorD x0;  // realized initial state
};

struct StepEvent {
  std::int64_t step;
  double t;
  const VectorD& state;
  const VectorD& noise_state;
  const VectorD& xi;
};

using StepObserver = std::function<void(const StepEvent&)>;

VectorD sample_stationary_x0(const StationaryModel& model, RngStream& rng);

PathRecord simulate_linear(const StationaryModel& model, const StepCache& cache, const TimeGrid& grid,
                           const InitialCondition& x0, RngStream& rng, const StepObserver& observer = {});

/// Exponential Euler for F != 0. Throws Errc::blow_up once |X| exceeds 1e12.
PathRecord simulate_perturbed(const StationaryModel& model, const StepCache& cache, const TimeGrid& grid,
                              const InitialCondition& x0, RngStream& rng, const StepObserver& observer = {});

/// h Lip(F) |Psi| < 0.1, the stability audit for the exponential Euler step.
void audit_perturbed_step(const StationaryModel& model, const StepCache& cache);

enum class KernelPhase { cos, sin };

/// Kernel (t-s)^k / k! e^{-lambda (t-s)} {cos, sin}(mu (t-s)).
struct KernelSpec {
  double lambda = 1.0;
  double mu = 0.0;
  int k = 0;
  KernelPhase phase = KernelPhase::cos;

  void validate() const;
  /// Value of the kernel at lag s >= 0.
  double operator()(double s) const;
};

/// Augmented linear system whose `kernel_coordinate` is int_0^t kernel(t-s) dB_s: block
/// bidiagonal A with diagonal blocks lambda I - mu J, coupling blocks -I, noise on the first
/// coordinate only.
SdeSystem kernel_system(const KernelSpec& spec);
Eigen::Index kernel_coordinate(const KernelSpec& spec);

struct KernelProcess {
  KernelSpec spec;
  StationaryModel model;
  StepCache cache;
  Eigen::Index coordinate;
};

KernelProcess make_kernel_process(const KernelSpec& spec, double h);

/// Scalar record of the kernel integral started from zero: norm_x = |I_t|.
PathRecord simulate_kernel(const KernelProcess& process, const TimeGrid& grid, RngStream& rng,
                           const StepObserver& observer = {});
PathRecord simulate_kernel(const KernelSpec& spec, const TimeGrid& grid, RngStream& rng);

/// Y_n = alpha^T X_n / sqrt(lambda1) for states stored as columns.
VectorD mixing_projection(const StationaryModel& model, const MatrixD& states);

/// Stationary states at integer times 0..n_max (columns). Requires 1/h to be an integer.
MatrixD simulate_integer_states(const StationaryModel& model, const StepCache& cache, std::int64_t n_max,
                                RngStream& rng);

}  // namespace oulab
