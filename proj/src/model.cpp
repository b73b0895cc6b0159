#include "oulab/model.hpp"

#include <cmath>
#include <sstream>

#include "oulab/rng.hpp"

namespace oulab {

std::string_view drift_kind_name(DriftKind k) {
  switch (k) {
    case DriftKind::zero: return "zero";
    case DriftKind::tanh_bounded: return "tanh_bounded";
    case DriftKind::saturating_linear: return "saturating_linear";
    case DriftKind::custom_table: return "custom_table";
  }
  return "zero";
}

DriftKind parse_drift_kind(std::string_view name) {
  for (auto k : {DriftKind::zero, DriftKind::tanh_bounded, DriftKind::saturating_linear, DriftKind::custom_table})
    if (drift_kind_name(k) == name) return k;
  throw Error(Errc::config_error, "unknown drift kind '" + std::string(name) + "'");
}

void DriftSpec::validate() const {
  if (!std::isfinite(scale) || scale < 0) throw Error(Errc::invalid_argument, "drift scale must be finite and >= 0");
  if (declared_bound && !(declared_bound->first >= 0 && declared_bound->second > 0))
    throw Error(Errc::invalid_argument, "declared drift bound needs C >= 0 and eps > 0");
  if (kind != DriftKind::custom_table) return;
  if (table.empty() || table.front().first != 0.0 || table.front().second != 0.0)
    throw Error(Errc::invalid_argument, "custom_table must start at node (0, 0)");
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!std::isfinite(table[i].first) || !std::isfinite(table[i].second))
      throw Error(Errc::invalid_argument, "custom_table: non-finite node");
    if (i > 0 && !(table[i].first > table[i - 1].first))
      throw Error(Errc::invalid_argument, "custom_table: radii must be strictly increasing");
  }
}

namespace {

double table_profile(const std::vector<std::pair<double, double>>& table, double r) {
  if (r >= table.back().first) return table.back().second;
  std::size_t i = 1;
  while (table[i].first < r) ++i;
  const auto [r0, g0] = table[i - 1];
  const auto [r1, g1] = table[i];
  return g0 + (g1 - g0) * (r - r0) / (r1 - r0);
}

}  // namespace

void DriftSpec::evaluate(const VectorD& x, VectorD& out) const {
  switch (kind) {
    case DriftKind::zero:
      out.setZero();
      return;
    case DriftKind::tanh_bounded:
      out = scale * x.array().tanh().matrix();
      return;
    case DriftKind::saturating_linear:
      out = (scale / (1.0 + x.norm())) * x;
      return;
    case DriftKind::custom_table: {
      const double r = x.norm();
      if (r == 0.0) {
        out.setZero();
        return;
      }
      out = (table_profile(table, r) / r) * x;
      return;
    }
  }
}

double DriftSpec::lipschitz() const {
  switch (kind) {
    case DriftKind::zero: return 0.0;
    case DriftKind::tanh_bounded:
    case DriftKind::saturating_linear: return scale;
    case DriftKind::custom_table: {
      double lip = 0.0;
      for (std::size_t i = 1; i < table.size(); ++i)
        lip = std::max(lip, std::abs((table[i].second - table[i - 1].second) / (table[i].first - table[i - 1].first)));
      return lip;
    }
  }
  return 0.0;
}

HurwitzCertificate check_hurwitz(const MatrixD& a) {
  HurwitzCertificate cert;
  try {
    detail::require_square(a, "check_hurwitz");
    detail::require_finite(a, "check_hurwitz");
    SymMatrixD p = solve_lyapunov(MatrixD(a.transpose()), SymMatrixD::identity(a.rows()));
    const auto chol = cholesky_psd(p);
    if (chol.rank < a.rows()) {
      cert.reason = "P not PD (rank " + std::to_string(chol.rank) + ")";
      return cert;
    }
    cert.ok = true;
    cert.P = std::move(p);
  } catch (const Error& e) {
    cert.reason = e.code() == Errc::not_psd ? std::string("P not PD: ") + e.what()
                                            : std::string("singular system: ") + e.what();
  }
  return cert;
}

SdeSystem::SdeSystem(MatrixD a, MatrixD d, DriftSpec drift)
    : a_(std::move(a)), d_(std::move(d)), drift_(std::move(drift)) {
  detail::require_square(a_, "SdeSystem A");
  detail::require_finite(a_, "SdeSystem A");
  detail::require_same_dim(a_, d_, "SdeSystem D");
  detail::require_finite(d_, "SdeSystem D");
  drift_.validate();
  cert_ = check_hurwitz(a_);
  if (!cert_.ok) throw Error(Errc::not_hurwitz, "condition C1 violated: " + cert_.reason);
}

namespace {

double envelope_ratio(const MatrixD& minus_a, double t, double lambda0) {
  return spectral_norm(mat_exp(minus_a, t)) * std::exp(lambda0 * t);
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  const double step = std::log(hi / lo) / (n - 1);
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  return g;
}

}  // namespace

DecayEnvelope decay_envelope(const MatrixD& a) {
  const auto cert = check_hurwitz(a);
  if (!cert.ok) throw Error(Errc::not_hurwitz, "decay_envelope: " + cert.reason);
  return decay_envelope(a, cert);
}

DecayEnvelope decay_envelope(const MatrixD& a, const HurwitzCertificate& cert) {
  if (!cert.ok || !cert.P) throw Error(Errc::not_hurwitz, "decay_envelope: no Hurwitz certificate");
  const MatrixD minus_a = -a;
  const double rho = 1.0 / (2.0 * sym_eigs(*cert.P).values(0));
  double t_fit = 50.0 / rho;
  double tail = spectral_norm(mat_exp(minus_a, t_fit));
  while (tail < 1e-280) {
    t_fit *= 0.5;
    tail = spectral_norm(mat_exp(minus_a, t_fit));
  }
  double lambda0 = 0.95 * (-std::log(tail) / t_fit);
  if (!(lambda0 > 0)) throw Error(Errc::model_error, "decay_envelope: no decay observed at T_fit");

  const auto fit_grid = log_grid(1e-3, 2.0 * t_fit, 200);
  auto verify_grid = log_grid(1e-4, 4.0 * t_fit, 1000);
  verify_grid.insert(verify_grid.begin(), 0.0);

  for (int attempt = 0; attempt <= 5; ++attempt) {
    double k = 1.0;
    for (double t : fit_grid) k = std::max(k, envelope_ratio(minus_a, t, lambda0));
    k *= 1.05;
    bool holds = true;
    for (double t : verify_grid) {
      if (envelope_ratio(minus_a, t, lambda0) > k * (1.0 + 1e-12)) {
        holds = false;
        break;
      }
    }
    if (holds) return {k, lambda0};
    lambda0 *= 0.9;
  }
  throw Error(Errc::model_error, "decay_envelope: envelope violated after 5 retries");
}

SymMatrixD sigma_quadrature(const MatrixD& a, const MatrixD& d, double tol) {
  return sigma_quadrature(a, d, tol, decay_envelope(a));
}

double fit_growth_bound(const DriftSpec& drift, Eigen::Index dim, double eps) {
  if (!(eps > 0)) throw Error(Errc::invalid_argument, "fit_growth_bound: eps must be > 0");
  drift.validate();
  switch (drift.kind) {
    case DriftKind::zero: return 0.0;
    case DriftKind::tanh_bounded: return drift.scale * std::sqrt(static_cast<double>(dim));
    case DriftKind::saturating_linear: return drift.scale;
    case DriftKind::custom_table: break;
  }

  // Sampling audit: 100 radii x 100 seeded directions out to |x| = 1e3 / eps.
  constexpr int kRadii = 100, kDirections = 100;
  const double r_max = 1e3 / eps;
  RngStream rng(0x6f75'6c61'6200'0001ULL, 0);
  VectorD dir(dim), fx(dim);
  double best = 0.0, prev_shell = -1.0, last_shell = 0.0;
  int best_shell = -1;
  for (int i = 0; i < kRadii; ++i) {
    const double r = 1e-2 * std::pow(r_max / 1e-2, i / double(kRadii - 1));
    double shell = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < kDirections; ++j) {
      for (Eigen::Index c = 0; c < dim; ++c) dir(c) = rng.normal();
      const VectorD x = (r / dir.norm()) * dir;
      drift.evaluate(x, fx);
      shell = std::max(shell, fx.norm() - eps * r);
    }
    if (shell > best) {
      best = shell;
      best_shell = i;
    }
    prev_shell = last_shell;
    last_shell = shell;
  }

  if (drift.declared_bound && eps >= drift.declared_bound->second) {
    const double declared = drift.declared_bound->first;
    if (best > declared * (1.0 + 1e-12))
      throw Error(Errc::invalid_argument, "custom_table: declared bound violated by sampling audit");
    return declared;
  }
  if (best_shell == kRadii - 1 && last_shell > prev_shell && best > 0)
    throw Error(Errc::invalid_argument,
                "custom_table: growth not dominated by eps|x| on the sampled range and no bound declared");
  return 1.1 * best;
}

StationaryModel build_stationary_model(const SdeSystem& sys, double oracle_tol) {
  const SymMatrixD q = sys.noise_covariance();
  SymMatrixD sigma = solve_lyapunov(sys.A(), q);
  const DecayEnvelope env = decay_envelope(sys.A(), sys.certificate());

  if (q.matrix().norm() > 0) {
    const SymMatrixD oracle = sigma_quadrature(sys.A(), sys.D(), 1e-2 * oracle_tol, env);
    const double gap = rel_frobenius(sigma.matrix(), oracle.matrix());
    if (gap > oracle_tol) {
      std::ostringstream os;
      os << "Lyapunov solve and quadrature disagree (rel " << gap << ")\nlyapunov:\n"
         << sigma.matrix() << "\nquadrature:\n"
         << oracle.matrix();
      throw Error(Errc::model_error, os.str());
    }
  }

  auto chol = cholesky_psd(sigma);
  auto spectrum = sym_eigs(sigma);
  const Eigen::Index d = sys.dim();
  const double lambda1 = std::max(0.0, spectrum.values(0));
  VectorD alpha = spectrum.vectors.col(0).normalized();
  Eigen::Index lead = 0;
  alpha.cwiseAbs().maxCoeff(&lead);
  if (alpha(lead) < 0) alpha = -alpha;

  std::optional<MatrixD> inverse;
  if (chol.rank == d) inverse = sigma.matrix().llt().solve(MatrixD::Identity(d, d));

  return StationaryModel{sys,      std::move(sigma), std::move(chol),     std::move(inverse), std::move(spectrum),
                         lambda1,  std::move(alpha), std::sqrt(2 * lambda1), env};
}

SymMatrixD step_covariance_quadrature(const MatrixD& a, const MatrixD& d, double h, double tol) {
  const MatrixD q = d * d.transpose();
  const MatrixD minus_a = -a;
  auto integrand = [&](double s) {
    const MatrixD e = mat_exp(minus_a, s);
    return MatrixD(e * q * e.transpose());
  };
  return SymMatrixD(integrate_adaptive<double>(integrand, 0.0, h, tol * h * std::max(q.norm(), 1e-300)));
}

StepCache make_step_cache(const StationaryModel& model, double h) {
  if (!(h > 0) || !std::isfinite(h)) throw Error(Errc::invalid_argument, "make_step_cache: h must be > 0");
  const MatrixD& a = model.system.A();
  const Eigen::Index d = model.dim();
  StepCache c;
  c.h = h;
  c.Phi = mat_exp(a, -h);
  c.Sigma_h = SymMatrixD(model.Sigma.matrix() - c.Phi * model.Sigma.matrix() * c.Phi.transpose());
  c.chol_h = cholesky_psd(c.Sigma_h);
  c.noise_factor = c.chol_h.sampling_factor();

  const Eigen::PartialPivLU<MatrixD> lu(a);
  if (lu.rcond() > 1e-8) {
    c.Psi = lu.solve(MatrixD(MatrixD::Identity(d, d) - c.Phi));
  } else {
    const MatrixD minus_a = -a;
    c.Psi = integrate_adaptive<double>([&](double s) { return mat_exp(minus_a, s); }, 0.0, h, 1e-14 * h);
  }
  return c;
}

}  // namespace oulab
