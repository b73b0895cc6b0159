#pragma once

// SDE systems dX = [F(X) - A X] dt + D dW with A Hurwitz-positive and F sublinear,
// plus the stationary quantities derived from them.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "oulab/matops.hpp"

namespace oulab {

enum class DriftKind { zero, tanh_bounded, saturating_linear, custom_table };

std::string_view drift_kind_name(DriftKind k);
DriftKind parse_drift_kind(std::string_view name);

/// Nonlinear drift F. Every kind is locally Lipschitz and o(|x|).
///
///  - tanh_bounded:      F(x)_i = c tanh(x_i)
///  - saturating_linear: F(x)   = c x / (1 + |x|)
///  - custom_table:      F(x)   = g(|x|) x / |x| with g piecewise linear through `table`
///                       (first node (0, 0)), held constant past the last node.
struct DriftSpec {
  DriftKind kind = DriftKind::zero;
  double scale = 0.0;
  std::vector<std::pair<double, double>> table;
  std::optional<std::pair<double, double>> declared_bound;  // (C, eps)

  static DriftSpec zero() { return {}; }
  static DriftSpec tanh_bounded(double c) { return {DriftKind::tanh_bounded, c, {}, {}}; }
  static DriftSpec saturating_linear(double c) { return {DriftKind::saturating_linear, c, {}, {}}; }

  bool is_zero() const noexcept { return kind == DriftKind::zero || (kind != DriftKind::custom_table && scale == 0.0); }

  void validate() const;

  /// Writes F(x) into out (same size as x).
  void evaluate(const VectorD& x, VectorD& out) const;
  VectorD operator()(const VectorD& x) const {
    VectorD out(x.size());
    evaluate(x, out);
    return out;
  }

  /// A global Lipschitz constant.
  double lipschitz() const;
};

struct HurwitzCertificate {
  bool ok = false;
  std::optional<SymMatrixD> P;  // solves A^T P + P A = I
  std::string reason;
};

/// Lyapunov test for condition C1: every eigenvalue of A has positive real part iff
/// A^T P + P A = I has a positive definite solution.
HurwitzCertificate check_hurwitz(const MatrixD& a);

/// Validated problem statement. Construction throws Errc::not_hurwitz when C1 fails.
class SdeSystem {
 public:
  SdeSystem(MatrixD a, MatrixD d, DriftSpec drift = DriftSpec::zero());

  Eigen::Index dim() const noexcept { return a_.rows(); }
  const MatrixD& A() const noexcept { return a_; }
  const MatrixD& D() const noexcept { return d_; }
  const DriftSpec& drift() const noexcept { return drift_; }
  const HurwitzCertificate& certificate() const noexcept { return cert_; }
  SymMatrixD noise_covariance() const { return SymMatrixD(d_ * d_.transpose()); }

 private:
  MatrixD a_;
  MatrixD d_;
  DriftSpec drift_;
  HurwitzCertificate cert_;
};

/// Fits (K, lambda0) with |e^{-tA}| <= K e^{-lambda0 t}, verified on a dense grid.
DecayEnvelope decay_envelope(const MatrixD& a);
DecayEnvelope decay_envelope(const MatrixD& a, const HurwitzCertificate& cert);

/// Quadrature oracle for Sigma using the fitted envelope for truncation.
SymMatrixD sigma_quadrature(const MatrixD& a, const MatrixD& d, double tol);

/// C such that |F(x)| <= C + eps |x|.
double fit_growth_bound(const DriftSpec& drift, Eigen::Index dim, double eps);

/// Default sublinear slope for the Gronwall certificate, strictly inside eps < lambda0 / K.
inline double default_gronwall_eps(const DecayEnvelope& env) { return 0.5 * env.lambda0 / env.K; }

struct StationaryModel {
  SdeSystem system;
  SymMatrixD Sigma;
  CholFactorD chol_Sigma;
  std::optional<MatrixD> Sigma_inverse;  // present when Sigma has full rank
  SymEigen<double> spectrum;
  double lambda1 = 0.0;
  VectorD alpha;
  double c_pred = 0.0;
  DecayEnvelope envelope;

  Eigen::Index dim() const noexcept { return system.dim(); }
};

/// Sigma from the Lyapunov solve, cross-checked against the quadrature oracle.
StationaryModel build_stationary_model(const SdeSystem& sys, double oracle_tol = 1e-6);

/// Per-step transition data for step size h.
struct StepCache {
  double h = 0.0;
  MatrixD Phi;         // e^{-hA}
  SymMatrixD Sigma_h;  // Sigma - Phi Sigma Phi^T
  CholFactorD chol_h;
  MatrixD noise_factor;  // G with G G^T = Sigma_h
  MatrixD Psi;           // int_0^h e^{-sA} ds
};

StepCache make_step_cache(const StationaryModel& model, double h);

/// Direct quadrature of int_0^h e^{-sA} D D^T e^{-sA^T} ds (oracle for StepCache::Sigma_h).
SymMatrixD step_covariance_quadrature(const MatrixD& a, const MatrixD& d, double h, double tol = 1e-12);

}  // namespace oulab
