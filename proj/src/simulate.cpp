#include "oulab/simulate.hpp"

#include <cmath>
#include <sstream>

namespace oulab {

void TimeGrid::validate() const {
  if (!(t0 >= std::exp(1.0))) throw Error(Errc::invalid_argument, "TimeGrid: t0 must be >= e");
  if (!(ratio > 1.0) || !std::isfinite(ratio)) throw Error(Errc::invalid_argument, "TimeGrid: ratio must be > 1");
  if (n_checkpoints < 1) throw Error(Errc::invalid_argument, "TimeGrid: need at least one checkpoint");
  if (!(h > 0) || !std::isfinite(h)) throw Error(Errc::invalid_argument, "TimeGrid: h must be > 0");
  const auto steps = checkpoint_steps();
  if (steps.front() * h < std::exp(1.0))
    throw Error(Errc::invalid_argument, "TimeGrid: first checkpoint rounds below e");
  for (std::size_t j = 1; j < steps.size(); ++j)
    if (steps[j] <= steps[j - 1])
      throw Error(Errc::invalid_argument, "TimeGrid: checkpoints collide after rounding to multiples of h");
}

std::vector<std::int64_t> TimeGrid::checkpoint_steps() const {
  std::vector<std::int64_t> out(static_cast<std::size_t>(std::max(n_checkpoints, 0)));
  for (int j = 0; j < n_checkpoints; ++j)
    out[static_cast<std::size_t>(j)] = std::llround(t0 * std::pow(ratio, j) / h);
  return out;
}

double TimeGrid::t_max() const { return static_cast<double>(checkpoint_steps().back()) * h; }

TimeGrid TimeGrid::decades(double t0, double t_max, int per_decade, double h) {
  TimeGrid g;
  g.t0 = t0;
  g.ratio = std::pow(10.0, 1.0 / per_decade);
  g.n_checkpoints = static_cast<int>(std::lround(std::log10(t_max / t0) * per_decade)) + 1;
  g.h = h;
  return g;
}

VectorD sample_stationary_x0(const StationaryModel& model, RngStream& rng) {
  const auto& chol = model.chol_Sigma;
  VectorD x = VectorD::Zero(model.dim());
  if (chol.rank == 0) return x;
  VectorD z(chol.rank);
  rng.fill_normal({z.data(), static_cast<std::size_t>(z.size())});
  const VectorD lz = chol.lower.leftCols(chol.rank) * z;
  for (Eigen::Index i = 0; i < model.dim(); ++i) x(chol.perm[static_cast<std::size_t>(i)]) = lz(i);
  return x;
}

namespace {

struct Engine {
  const StationaryModel& model;
  const StepCache& cache;
  const TimeGrid& grid;
  const DriftSpec* drift = nullptr;         // null: linear exact stepping
  std::optional<Eigen::Index> coordinate;   // scalar record of one coordinate
};

PathRecord run_path(const Engine& e, const InitialCondition& init, RngStream& rng, const StepObserver& observer) {
  e.grid.validate();
  if (std::abs(e.cache.h - e.grid.h) > 1e-15 * e.grid.h)
    throw Error(Errc::invalid_argument, "step cache built for a different h than the grid");
  const Eigen::Index d = e.model.dim();

  PathRecord rec;
  rec.seed = rng.seed();
  rec.stream = rng.stream();
  rec.stationary_start = init.stationary;
  if (init.stationary) {
    rec.x0 = sample_stationary_x0(e.model, rng);
  } else {
    if (init.value.size() != d) throw Error(Errc::invalid_argument, "initial condition has wrong dimension");
    if (!init.value.allFinite()) throw Error(Errc::invalid_argument, "initial condition is not finite");
    rec.x0 = init.value;
  }

  const auto steps = e.grid.checkpoint_steps();
  const std::int64_t total = steps.back();
  const double h = e.grid.h;
  const MatrixD& phi = e.cache.Phi;
  const MatrixD& g = e.cache.noise_factor;
  const MatrixD* sigma_inv = (!e.coordinate && e.model.Sigma_inverse) ? &*e.model.Sigma_inverse : nullptr;
  // With X_0 = 0 the linear recursion for N coincides with X.
  const bool shadow = e.drift != nullptr || !rec.x0.isZero(0.0);

  VectorD x = rec.x0, n = VectorD::Zero(d), xi = VectorD::Zero(d), z(g.cols()), tmp(d), fx(d);
  const bool noisy = e.cache.chol_h.rank > 0;

  auto measure = [&](const VectorD& v) { return e.coordinate ? std::abs(v(*e.coordinate)) : v.norm(); };
  auto quad = [&](const VectorD& v) { return 0.5 * v.dot(*sigma_inv * v); };

  double norm_x = measure(x);
  double running_max = norm_x, noise_max = 0.0;
  double quad_max = sigma_inv ? quad(x) : std::numeric_limits<double>::quiet_NaN();
  rec.checkpoints.reserve(steps.size());
  rec.early.push_back({0.0, norm_x, noise_max});
  if (observer) observer(StepEvent{0, 0.0, x, shadow ? n : x, xi});

  std::size_t next = 0;
  for (std::int64_t step = 1; step <= total; ++step) {
    if (noisy) {
      rng.fill_normal({z.data(), static_cast<std::size_t>(z.size())});
      xi.noalias() = g * z;
    }
    if (e.drift) {
      e.drift->evaluate(x, fx);
      tmp.noalias() = phi * x;
      tmp.noalias() += e.cache.Psi * fx;
    } else {
      tmp.noalias() = phi * x;
    }
    x = tmp + xi;
    if (shadow) {
      tmp.noalias() = phi * n;
      n = tmp + xi;
    }

    norm_x = measure(x);
    if (e.drift ? !(norm_x <= 1e12) : !std::isfinite(norm_x)) {
      std::ostringstream os;
      os << (e.drift ? "blow-up" : "non-finite state") << " at t = " << step * h << " (|X| = " << norm_x << ")";
      throw Error(e.drift ? Errc::blow_up : Errc::model_error, os.str());
    }
    running_max = std::max(running_max, norm_x);
    noise_max = std::max(noise_max, shadow ? measure(n) : norm_x);
    if (sigma_inv) quad_max = std::max(quad_max, quad(x));

    const double t = static_cast<double>(step) * h;
    if (observer) observer(StepEvent{step, t, x, shadow ? n : x, xi});
    if (step < steps.front()) rec.early.push_back({t, norm_x, noise_max});
    if (step == steps[next]) {
      Checkpoint c;
      c.t = t;
      c.norm_x = norm_x;
      c.running_max = running_max;
      c.noise_max = noise_max;
      c.ratio = running_max / std::sqrt(std::log(t));
      c.quad_max = quad_max;
      c.state = x;
      rec.checkpoints.push_back(std::move(c));
      ++next;
    }
  }
  return rec;
}

}  // namespace

PathRecord simulate_linear(const StationaryModel& model, const StepCache& cache, const TimeGrid& grid,
                           const InitialCondition& x0, RngStream& rng, const StepObserver& observer) {
  return run_path(Engine{model, cache, grid, nullptr, std::nullopt}, x0, rng, observer);
}

void audit_perturbed_step(const StationaryModel& model, const StepCache& cache) {
  const double lip = model.system.drift().lipschitz();
  const double level = cache.h * lip * spectral_norm(cache.Psi);
  if (!(level < 0.1)) {
    std::ostringstream os;
    os << "exponential Euler step too coarse: h Lip(F) |Psi| = " << level << " >= 0.1";
    throw Error(Errc::invalid_argument, os.str());
  }
}

PathRecord simulate_perturbed(const StationaryModel& model, const StepCache& cache, const TimeGrid& grid,
                              const InitialCondition& x0, RngStream& rng, const StepObserver& observer) {
  const DriftSpec& drift = model.system.drift();
  if (drift.is_zero())
    throw Error(Errc::invalid_argument, "simulate_perturbed: drift is zero, use simulate_linear");
  audit_perturbed_step(model, cache);
  return run_path(Engine{model, cache, grid, &drift, std::nullopt}, x0, rng, observer);
}

void KernelSpec::validate() const {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw Error(Errc::invalid_argument, "KernelSpec: lambda must be > 0");
  if (!std::isfinite(mu)) throw Error(Errc::invalid_argument, "KernelSpec: mu must be finite");
  if (k < 0) throw Error(Errc::invalid_argument, "KernelSpec: k must be >= 0");
  if (mu == 0.0 && phase == KernelPhase::sin)
    throw Error(Errc::invalid_argument, "KernelSpec: sin phase with mu = 0 is the zero kernel");
}

double KernelSpec::operator()(double s) const {
  const double poly = std::pow(s, k) / std::tgamma(k + 1.0);
  const double osc = phase == KernelPhase::cos ? std::cos(mu * s) : std::sin(mu * s);
  return poly * std::exp(-lambda * s) * osc;
}

SdeSystem kernel_system(const KernelSpec& spec) {
  spec.validate();
  const Eigen::Index block = spec.mu == 0.0 ? 1 : 2;
  const Eigen::Index d = block * (spec.k + 1);
  MatrixD a = MatrixD::Zero(d, d);
  MatrixD diag(block, block);
  if (block == 1) {
    diag << spec.lambda;
  } else {
    // lambda I - mu J, J = [[0, -1], [1, 0]]; e^{-t diag} = e^{-lambda t} R_{mu t}.
    diag << spec.lambda, spec.mu, -spec.mu, spec.lambda;
  }
  for (int j = 0; j <= spec.k; ++j) {
    a.block(j * block, j * block, block, block) = diag;
    if (j > 0) a.block(j * block, (j - 1) * block, block, block) = -MatrixD::Identity(block, block);
  }
  MatrixD noise = MatrixD::Zero(d, d);
  noise(0, 0) = 1.0;
  return SdeSystem(std::move(a), std::move(noise));
}

Eigen::Index kernel_coordinate(const KernelSpec& spec) {
  if (spec.mu == 0.0) return spec.k;
  return 2 * spec.k + (spec.phase == KernelPhase::sin ? 1 : 0);
}

KernelProcess make_kernel_process(const KernelSpec& spec, double h) {
  StationaryModel model = build_stationary_model(kernel_system(spec));
  StepCache cache = make_step_cache(model, h);
  return KernelProcess{spec, std::move(model), std::move(cache), kernel_coordinate(spec)};
}

PathRecord simulate_kernel(const KernelProcess& process, const TimeGrid& grid, RngStream& rng,
                           const StepObserver& observer) {
  const InitialCondition zero = InitialCondition::at(VectorD::Zero(process.model.dim()));
  return run_path(Engine{process.model, process.cache, grid, nullptr, process.coordinate}, zero, rng, observer);
}

PathRecord simulate_kernel(const KernelSpec& spec, const TimeGrid& grid, RngStream& rng) {
  return simulate_kernel(make_kernel_process(spec, grid.h), grid, rng);
}

VectorD mixing_projection(const StationaryModel& model, const MatrixD& states) {
  if (!(model.lambda1 > 0)) throw Error(Errc::degenerate, "mixing_projection: degenerate noise (lambda1 = 0)");
  if (states.rows() != model.dim()) throw Error(Errc::invalid_argument, "mixing_projection: state dimension mismatch");
  return (model.alpha.transpose() * states).transpose() / std::sqrt(model.lambda1);
}

MatrixD simulate_integer_states(const StationaryModel& model, const StepCache& cache, std::int64_t n_max,
                                RngStream& rng) {
  const double per_unit = 1.0 / cache.h;
  const auto stride = static_cast<std::int64_t>(std::llround(per_unit));
  if (stride < 1 || std::abs(per_unit - static_cast<double>(stride)) > 1e-9)
    throw Error(Errc::invalid_argument, "simulate_integer_states: 1/h must be an integer");
  MatrixD states(model.dim(), n_max + 1);
  TimeGrid grid;
  grid.h = cache.h;
  grid.t0 = 3.0;
  grid.ratio = std::max(2.0, static_cast<double>(n_max) / 3.0);
  grid.n_checkpoints = n_max > 3 ? 2 : 1;
  simulate_linear(model, cache, grid, InitialCondition::stationary_draw(), rng, [&](const StepEvent& ev) {
    if (ev.step % stride == 0 && ev.step / stride <= n_max) states.col(ev.step / stride) = ev.state;
  });
  return states;
}

}  // namespace oulab
