#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oulab/extremes.hpp"

using namespace oulab;

namespace {

MatrixD m1(double a) { return MatrixD::Constant(1, 1, a); }

StationaryModel model_of(MatrixD a, MatrixD d, DriftSpec drift = DriftSpec::zero()) {
  return build_stationary_model(SdeSystem(std::move(a), std::move(d), std::move(drift)));
}

std::vector<PathRecord> ensemble(const StationaryModel& m, const TimeGrid& g, int n, std::uint64_t seed,
                                 const InitialCondition& x0 = InitialCondition::stationary_draw()) {
  const StepCache c = make_step_cache(m, g.h);
  std::vector<PathRecord> out;
  for (int i = 0; i < n; ++i) {
    RngStream rng(seed, static_cast<std::uint64_t>(i));
    out.push_back(m.system.drift().is_zero() ? simulate_linear(m, c, g, x0, rng) : simulate_perturbed(m, c, g, x0, rng));
  }
  return out;
}

// Synthetic path whose ratio at checkpoint j is values[j].
PathRecord synthetic(const std::vector<double>& ratios, double t0 = 10.0) {
  PathRecord p;
  double t = t0;
  for (double r : ratios) {
    Checkpoint c;
    c.t = t;
    c.ratio = r;
    c.running_max = r * std::sqrt(std::log(t));
    c.norm_x = c.running_max;
    p.checkpoints.push_back(c);
    t *= std::pow(10.0, 0.5);
  }
  return p;
}

}  // namespace

TEST(Summaries, MedianAndQuantiles) {
  const std::vector<double> v = {5, 1, 4, 2, 3};
  const auto s = summarize(v);
  EXPECT_EQ(s.median, 3.0);
  EXPECT_EQ(s.mean, 3.0);
  EXPECT_LE(s.q10, s.median);
  EXPECT_GE(s.q90, s.median);
}

TEST(Limsup, ZeroNoiseGoesToZero) {
  const auto m = model_of(MatrixD::Identity(2, 2), MatrixD::Zero(2, 2));
  // M(t) stays at |X_0| = sqrt2, so R(t) = sqrt2 / sqrt(log t) decays with the horizon.
  double prev = std::numeric_limits<double>::infinity();
  for (double t_max : {1e3, 1e5, 1e7}) {
    const auto paths = ensemble(m, TimeGrid::decades(10.0, t_max, 10, 0.25), 2, 1, InitialCondition::at(VectorD::Ones(2)));
    const auto r = estimate_limsup(paths, m.c_pred);
    const double t_window = t_max / 100.0;
    EXPECT_NEAR(r.c_hat, std::sqrt(2.0 / std::log(t_window)), 1e-9 * r.c_hat);
    EXPECT_LT(r.c_hat, prev);
    EXPECT_TRUE(std::isnan(r.rel_err));
    prev = r.c_hat;
  }
}

TEST(Limsup, WindowAndMismatch) {
  const auto a = synthetic({1, 1, 1, 2, 3, 1, 1, 1, 1});  // half-decade spacing
  const auto w = window_start(a, 2);
  EXPECT_EQ(w, 4u);
  const std::vector<PathRecord> one = {a};
  EXPECT_EQ(estimate_limsup(one, 1.0).per_path[0], 3.0);
  const std::vector<PathRecord> bad = {a, synthetic({1, 1, 1})};
  EXPECT_THROW(estimate_limsup(bad, 1.0), Error);
  EXPECT_THROW(window_start(synthetic({1, 1}), 2), Error);
}

TEST(Limsup, PermutationInvariance) {
  const auto m = model_of(m1(1.0), m1(std::sqrt(2.0)));
  auto paths = ensemble(m, TimeGrid::decades(10.0, 1e4, 10, 0.25), 9, 2);
  const auto r1 = estimate_limsup(paths, m.c_pred);
  std::reverse(paths.begin(), paths.end());
  std::rotate(paths.begin(), paths.begin() + 4, paths.end());
  const auto r2 = estimate_limsup(paths, m.c_pred);
  EXPECT_EQ(r1.c_hat, r2.c_hat);
  EXPECT_EQ(r1.stats.mean, r2.stats.mean);
  EXPECT_EQ(r1.stats.q90, r2.stats.q90);
}

TEST(Limsup, ScaleEquivariance) {
  const auto g = TimeGrid::decades(10.0, 1e4, 10, 0.25);
  const auto base = model_of(m1(1.0), m1(1.0));
  const auto scaled = model_of(m1(1.0), m1(3.0));
  const auto rb = estimate_limsup(ensemble(base, g, 8, 3), base.c_pred);
  const auto rs = estimate_limsup(ensemble(scaled, g, 8, 3), scaled.c_pred);
  for (std::size_t i = 0; i < rb.per_path.size(); ++i) EXPECT_NEAR(rs.per_path[i], 3.0 * rb.per_path[i], 1e-11 * rs.per_path[i]);
  EXPECT_NEAR(rs.c_hat, 3.0 * rb.c_hat, 1e-11 * rs.c_hat);
}

TEST(Gumbel, ExpectedRatioAndDeterminism) {
  // Location b - (ln ln n + ln pi) / (2b) plus the Gumbel mean gamma / b, over b = sqrt(2 ln n).
  const double b = std::sqrt(2.0 * std::log(1e6));
  const double loc = b - (std::log(std::log(1e6)) + std::log(std::numbers::pi)) / (2.0 * b);
  EXPECT_NEAR(gumbel_expected_ratio(1e6), (loc + 0.5772156649015329 / b) / b, 1e-12);
  EXPECT_LT(gumbel_expected_ratio(1e3), gumbel_expected_ratio(1e6));
  const auto first = gumbel_check(1000, 8, 5);
  const auto second = gumbel_check(1000, 8, 5);
  EXPECT_EQ(first.ratios, second.ratios);
  EXPECT_THROW(gumbel_check(999, 8, 5), Error);
}

TEST(Gumbel, MeanIsNearExpectation) {
  const auto g = gumbel_check(100000, 32, 7);
  EXPECT_NEAR(g.mean, gumbel_expected_ratio(1e5), 4 * g.std_error + 0.01);
}

TEST(QuadraticDiagnostic, ScalarMatchesSquaredRatio) {
  const auto m = model_of(m1(1.0), m1(std::sqrt(2.0)));
  const auto paths = ensemble(m, TimeGrid::decades(10.0, 1e4, 10, 0.25), 6, 4);
  const auto q = quadratic_diagnostic(paths, m);
  const auto r = estimate_limsup(paths, m.c_pred);
  // Scalar Sigma = 1: max V / log t = (max |X|)^2 / (2 log t) = R^2 / 2.
  for (std::size_t i = 0; i < paths.size(); ++i) EXPECT_NEAR(q.per_path[i], 0.5 * r.per_path[i] * r.per_path[i], 1e-12);
}

TEST(QuadraticDiagnostic, SingularSigmaThrows) {
  const auto m = model_of(MatrixD::Identity(2, 2), MatrixD::Zero(2, 2));
  const auto paths = ensemble(m, TimeGrid::decades(10.0, 1e4, 10, 0.25), 1, 4, InitialCondition::at(VectorD::Ones(2)));
  EXPECT_THROW(quadratic_diagnostic(paths, m), Error);
}

TEST(Gronwall, LinearZeroStartPasses) {
  const auto m = model_of(m1(1.0), m1(std::sqrt(2.0)));
  const auto paths = ensemble(m, TimeGrid::decades(10.0, 1e4, 10, 0.25), 4, 5, InitialCondition::at(VectorD::Zero(1)));
  GronwallParams p{m.envelope.K, m.envelope.lambda0, 0.0, 1e-9};
  for (const auto& path : paths) EXPECT_TRUE(gronwall_check(path, p).pass);
}

TEST(Gronwall, FittedPassesAndHalvedFails) {
  const auto m = model_of(m1(1.0), m1(std::sqrt(2.0)), DriftSpec::tanh_bounded(1.0));
  const auto paths = ensemble(m, TimeGrid::decades(10.0, 1e4, 10, 0.25), 8, 6, InitialCondition::at(VectorD::Constant(1, 3.0)));
  const GronwallParams fitted = fit_gronwall_params(m);
  GronwallParams halved = fitted;
  halved.K *= 0.5;
  std::size_t failed = 0;
  for (const auto& path : paths) {
    const auto cert = gronwall_check(path, fitted);
    EXPECT_TRUE(cert.pass);
    EXPECT_NEAR(cert.beta, fitted.lambda0 / (fitted.lambda0 - fitted.K * fitted.eps), 1e-15);
    failed += gronwall_check(path, halved).pass ? 0 : 1;
  }
  EXPECT_GE(failed, 1u);
}

TEST(Gronwall, UndefinedBoundFactorThrows) {
  const auto m = model_of(m1(1.0), m1(std::sqrt(2.0)), DriftSpec::tanh_bounded(1.0));
  const auto paths = ensemble(m, TimeGrid::decades(10.0, 1e2, 10, 0.25), 1, 6);
  GronwallParams p{1.0, 1.0, 1.0, 1.5};
  EXPECT_THROW(gronwall_check(paths[0], p), Error);
}

TEST(KernelCheck, BoundedPathsPassAndGrowthFails) {
  std::vector<PathRecord> flat, growing;
  std::vector<double> f, gr;
  for (int j = 0; j < 9; ++j) {
    f.push_back(1.0);
    gr.push_back(std::pow(2.0, j));
  }
  for (int i = 0; i < 20; ++i) {
    flat.push_back(synthetic(f));
    growing.push_back(synthetic(gr));
  }
  EXPECT_TRUE(kernel_boundedness_check(flat).pass);
  EXPECT_FALSE(kernel_boundedness_check(growing).pass);
  const std::vector<PathRecord> short_paths = {synthetic({1, 1, 1, 1, 1})};
  EXPECT_THROW(kernel_boundedness_check(short_paths), Error);
}

TEST(KernelCheck, SimulatedKernelPasses) {
  const KernelSpec spec{1.0, 3.0, 2, KernelPhase::cos};
  const KernelProcess proc = make_kernel_process(spec, 0.25);
  const TimeGrid g = TimeGrid::decades(10.0, 1e5, 10, 0.25);
  std::vector<PathRecord> paths;
  for (int i = 0; i < 16; ++i) {
    RngStream rng(14, static_cast<std::uint64_t>(i));
    paths.push_back(simulate_kernel(proc, g, rng));
  }
  EXPECT_TRUE(kernel_boundedness_check(paths).pass);
}

TEST(ProjectionTail, Examples) {
  std::vector<double> y(1001, 0.0);
  y[1000] = std::sqrt(2.0 * std::log(1000.0));
  EXPECT_NEAR(projection_tail_ratio(y, 2), 1.0, 1e-12);
}
