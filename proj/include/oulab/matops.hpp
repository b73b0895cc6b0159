#pragma once

// Dense real linear algebra used by the OU laboratory. Everything here is a
// pure function templated on the scalar type; storage is row-major Eigen.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "oulab/error.hpp"

namespace oulab {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixD = Matrix<double>;
using VectorD = Vector<double>;

inline constexpr double kTolPsd = 1e-10;

namespace detail {

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() < 1 || m.rows() != m.cols()) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << m.rows() << "x" << m.cols();
    throw Error(Errc::invalid_argument, os.str());
  }
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw Error(Errc::invalid_argument, std::string(what) + ": non-finite entries");
}

template <typename A, typename B>
void require_same_dim(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": dimension mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
       << b.cols();
    throw Error(Errc::invalid_argument, os.str());
  }
}

template <typename Derived>
typename Derived::Scalar norm_1(const Eigen::MatrixBase<Derived>& m) {
  return m.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace detail

/// Symmetric matrix. The input is symmetrized as (M + M^T) / 2 on construction.
template <typename Scalar>
class SymMatrix {
 public:
  SymMatrix() = default;

  template <typename Derived>
  explicit SymMatrix(const Eigen::MatrixBase<Derived>& m) {
    detail::require_square(m, "SymMatrix");
    detail::require_finite(m, "SymMatrix");
    m_ = (m + m.transpose()) * Scalar(0.5);
  }

  static SymMatrix identity(Eigen::Index d) { return SymMatrix(Matrix<Scalar>::Identity(d, d)); }
  static SymMatrix zero(Eigen::Index d) { return SymMatrix(Matrix<Scalar>::Zero(d, d)); }

  const Matrix<Scalar>& matrix() const noexcept { return m_; }
  Eigen::Index dim() const noexcept { return m_.rows(); }
  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  Matrix<Scalar> m_;
};

using SymMatrixD = SymMatrix<double>;

/// Pivoted Cholesky factor: P S P^T = L L^T with (P S P^T)(i,j) = S(perm[i], perm[j]).
template <typename Scalar>
struct CholFactor {
  Matrix<Scalar> lower;
  Eigen::Index rank = 0;
  std::vector<Eigen::Index> perm;

  Eigen::Index dim() const noexcept { return lower.rows(); }

  /// G = P^T L restricted to the first `rank` columns, so that G G^T = S and G z ~ N(0, S).
  Matrix<Scalar> sampling_factor() const {
    const Eigen::Index d = dim();
    Matrix<Scalar> g = Matrix<Scalar>::Zero(d, std::max<Eigen::Index>(rank, 1));
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < rank; ++j) g(perm[i], j) = lower(i, j);
    return g;
  }

  Matrix<Scalar> reconstruct() const {
    const Matrix<Scalar> g = sampling_factor();
    return g * g.transpose();
  }
};

using CholFactorD = CholFactor<double>;

template <typename Scalar>
struct SymEigen {
  Vector<Scalar> values;    // descending
  Matrix<Scalar> vectors;   // column j pairs with values(j)
};

/// e^{tM} by scaling and squaring of a truncated Taylor series.
template <typename Derived>
Matrix<typename Derived::Scalar> mat_exp(const Eigen::MatrixBase<Derived>& m,
                                         typename Derived::Scalar t) {
  using Scalar = typename Derived::Scalar;
  detail::require_square(m, "mat_exp");
  detail::require_finite(m, "mat_exp");
  if (!std::isfinite(t)) throw Error(Errc::invalid_argument, "mat_exp: non-finite t");

  const Eigen::Index d = m.rows();
  Matrix<Scalar> a = m * t;
  const Scalar norm = detail::norm_1(a);
  int squarings = 0;
  if (norm > Scalar(0.5)) squarings = static_cast<int>(std::ceil(std::log2(norm / Scalar(0.5))));
  if (squarings > 0) a /= std::ldexp(Scalar(1), squarings);

  Matrix<Scalar> sum = Matrix<Scalar>::Identity(d, d);
  Matrix<Scalar> term = Matrix<Scalar>::Identity(d, d);
  for (int k = 1; k < 64; ++k) {
    term = (term * a) / Scalar(k);
    sum += term;
    if (term.norm() < Scalar(1e-18) * sum.norm()) break;
  }
  for (int i = 0; i < squarings; ++i) {
    sum = (sum * sum).eval();
    if (!sum.allFinite()) {
      std::ostringstream os;
      os << "mat_exp: overflow after " << i + 1 << " of " << squarings << " squarings (|tM|_1 = " << norm
         << ")";
      throw Error(Errc::overflow, os.str());
    }
  }
  return sum;
}

/// Largest singular value by power iteration on G = M^T M. Each round squares the normalized
/// power of G and reads off its largest column, which always carries weight on the dominant
/// eigenvector, so near-degenerate top singular values still converge within `max_doublings`.
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& m, int max_doublings = 64) {
  using Scalar = typename Derived::Scalar;
  detail::require_finite(m, "spectral_norm");
  if (m.size() == 0) throw Error(Errc::invalid_argument, "spectral_norm: empty matrix");
  const Scalar scale = m.cwiseAbs().maxCoeff();
  if (scale == Scalar(0)) return Scalar(0);

  // Work with M / max|m_ij| so the Gram matrix neither underflows nor overflows.
  const Matrix<Scalar> unit = m / scale;
  const Matrix<Scalar> gram = unit.transpose() * unit;

  Matrix<Scalar> power = gram / gram.cwiseAbs().maxCoeff();
  Scalar sigma2 = gram.diagonal().maxCoeff();
  for (int k = 0; k < max_doublings; ++k) {
    Eigen::Index col = 0;
    power.colwise().norm().maxCoeff(&col);
    const Vector<Scalar> v = power.col(col).normalized();
    const Scalar next = v.dot(gram * v);
    if (k > 0 && std::abs(next - sigma2) <= Scalar(1e-15) * next) return scale * std::sqrt(next);
    sigma2 = next;
    power = (power * power).eval();
    power /= power.cwiseAbs().maxCoeff();
  }
  throw NoConvergence("spectral_norm: power iteration did not converge",
                      static_cast<double>(scale * std::sqrt(sigma2)));
}

/// Diagonally pivoted Cholesky of a PSD matrix; reports the effective rank.
template <typename Scalar>
CholFactor<Scalar> cholesky_psd(const SymMatrix<Scalar>& s, Scalar tol_psd = Scalar(kTolPsd)) {
  const Eigen::Index d = s.dim();
  Matrix<Scalar> w = s.matrix();
  const Scalar tol = tol_psd * w.norm();

  CholFactor<Scalar> out;
  out.lower = Matrix<Scalar>::Zero(d, d);
  out.perm.resize(static_cast<std::size_t>(d));
  std::iota(out.perm.begin(), out.perm.end(), Eigen::Index{0});

  for (Eigen::Index k = 0; k < d; ++k) {
    Eigen::Index piv = k;
    for (Eigen::Index i = k; i < d; ++i) {
      if (w(i, i) < -tol) {
        std::ostringstream os;
        os << "cholesky_psd: not PSD (pivot " << w(i, i) << " < -" << tol << ")";
        throw Error(Errc::not_psd, os.str());
      }
      if (w(i, i) > w(piv, piv)) piv = i;
    }
    if (w(piv, piv) <= tol) {
      // PSD implies |w(i,j)| <= max diagonal on the trailing block.
      const Scalar rest = w.bottomRightCorner(d - k, d - k).cwiseAbs().maxCoeff();
      if (rest > tol) {
        std::ostringstream os;
        os << "cholesky_psd: not PSD (trailing block entry " << rest << " with vanishing diagonal)";
        throw Error(Errc::not_psd, os.str());
      }
      out.rank = k;
      return out;
    }
    if (piv != k) {
      w.row(k).swap(w.row(piv));
      w.col(k).swap(w.col(piv));
      out.lower.row(k).swap(out.lower.row(piv));
      std::swap(out.perm[static_cast<std::size_t>(k)], out.perm[static_cast<std::size_t>(piv)]);
    }
    const Scalar pivot = std::sqrt(w(k, k));
    out.lower(k, k) = pivot;
    for (Eigen::Index i = k + 1; i < d; ++i) out.lower(i, k) = w(i, k) / pivot;
    for (Eigen::Index i = k + 1; i < d; ++i)
      for (Eigen::Index j = k + 1; j <= i; ++j) {
        w(i, j) -= out.lower(i, k) * out.lower(j, k);
        w(j, i) = w(i, j);
      }
  }
  out.rank = d;
  return out;
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
template <typename Scalar>
SymEigen<Scalar> sym_eigs(const SymMatrix<Scalar>& s, Scalar rel_tol = Scalar(1e-12)) {
  const Eigen::Index d = s.dim();
  Matrix<Scalar> a = s.matrix();
  Matrix<Scalar> v = Matrix<Scalar>::Identity(d, d);
  const Scalar target = rel_tol * a.norm();

  auto off_norm = [&] {
    Scalar acc = 0;
    for (Eigen::Index p = 0; p < d; ++p)
      for (Eigen::Index q = 0; q < d; ++q)
        if (p != q) acc += a(p, q) * a(p, q);
    return std::sqrt(acc);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > target; ++sweep) {
    for (Eigen::Index p = 0; p + 1 < d; ++p) {
      for (Eigen::Index q = p + 1; q < d; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                         (std::abs(theta) + std::sqrt(Scalar(1) + theta * theta));
        const Scalar c = Scalar(1) / std::sqrt(Scalar(1) + t * t);
        const Scalar sn = t * c;
        for (Eigen::Index k = 0; k < d; ++k) {
          const Scalar akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < d; ++k) {
          const Scalar apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < d; ++k) {
          const Scalar vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }
  if (off_norm() > target) throw Error(Errc::no_convergence, "sym_eigs: Jacobi sweeps exhausted");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) > a(j, j); });

  SymEigen<Scalar> out;
  out.values.resize(d);
  out.vectors.resize(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

/// Solves A X + X A^T = Q through the d^2 x d^2 Kronecker system.
template <typename DerivedA, typename Scalar = typename DerivedA::Scalar>
SymMatrix<Scalar> solve_lyapunov(const Eigen::MatrixBase<DerivedA>& a, const SymMatrix<Scalar>& q) {
  detail::require_square(a, "solve_lyapunov");
  detail::require_finite(a, "solve_lyapunov");
  detail::require_same_dim(a, q.matrix(), "solve_lyapunov");
  const Eigen::Index d = a.rows();
  const Eigen::Index n = d * d;

  // Row-major vec: vec(A X) = (A (x) I) vec X, vec(X A^T) = (I (x) A) vec X.
  Matrix<Scalar> k = Matrix<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index l = 0; l < d; ++l) {
        k(i * d + j, l * d + j) += a(i, l);
        k(i * d + j, i * d + l) += a(j, l);
      }
  const Vector<Scalar> rhs = Eigen::Map<const Vector<Scalar>>(q.matrix().data(), n);

  const Eigen::PartialPivLU<Matrix<Scalar>> lu(k);
  const Scalar rcond = lu.rcond();
  if (!(rcond > Scalar(64) * std::numeric_limits<Scalar>::epsilon())) {
    std::ostringstream os;
    os << "solve_lyapunov: singular Kronecker system (rcond " << rcond << "), not Hurwitz-positive";
    throw Error(Errc::not_hurwitz, os.str());
  }
  Vector<Scalar> x = lu.solve(rhs);
  x += lu.solve(Vector<Scalar>(rhs - k * x));
  if (!x.allFinite()) throw Error(Errc::not_hurwitz, "solve_lyapunov: non-finite solution");

  const Matrix<Scalar> xm = Eigen::Map<const Matrix<Scalar>>(x.data(), d, d);
  SymMatrix<Scalar> out(xm);
  const Scalar res = (a * out.matrix() + out.matrix() * a.transpose() - q.matrix()).norm();
  if (res > Scalar(1e-10) * q.matrix().norm()) {
    std::ostringstream os;
    os << "solve_lyapunov: residual " << res << " exceeds 1e-10 |Q|_F = " << q.matrix().norm();
    throw Error(Errc::model_error, os.str());
  }
  return out;
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
template <typename Scalar>
std::pair<std::vector<Scalar>, std::vector<Scalar>> gauss_legendre_rule(int n) {
  std::vector<Scalar> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  const Scalar pi = std::acos(Scalar(-1));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    Scalar z = std::cos(pi * (Scalar(i) + Scalar(0.75)) / (Scalar(n) + Scalar(0.5)));
    Scalar dp = 0;
    for (int it = 0; it < 100; ++it) {
      Scalar p0 = 1, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const Scalar p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1;
      dp = n * (z * p1 - p0) / (z * z - 1);
      const Scalar dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < Scalar(1e-16)) break;
    }
    const Scalar wi = Scalar(2) / ((Scalar(1) - z * z) * dp * dp);
    x[static_cast<std::size_t>(i)] = -z;
    x[static_cast<std::size_t>(n - 1 - i)] = z;
    w[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(n - 1 - i)] = wi;
  }
  return {x, w};
}

/// Adaptive bisection with a fixed Gauss-Legendre panel rule for matrix-valued integrands.
template <typename Scalar, typename F>
Matrix<Scalar> integrate_adaptive(const F& f, Scalar a, Scalar b, Scalar abs_tol, int depth = 40) {
  static const auto rule = gauss_legendre_rule<Scalar>(10);
  auto panel = [&](Scalar lo, Scalar hi) {
    const Scalar half = (hi - lo) / 2, mid = (hi + lo) / 2;
    Matrix<Scalar> acc = rule.second[0] * f(mid + half * rule.first[0]);
    for (std::size_t i = 1; i < rule.first.size(); ++i) acc += rule.second[i] * f(mid + half * rule.first[i]);
    return Matrix<Scalar>(acc * half);
  };
  auto recurse = [&](auto&& self, Scalar lo, Scalar hi, const Matrix<Scalar>& whole, Scalar tol,
                     int level) -> Matrix<Scalar> {
    const Scalar mid = (lo + hi) / 2;
    Matrix<Scalar> left = panel(lo, mid), right = panel(mid, hi);
    Matrix<Scalar> both = left + right;
    if ((both - whole).norm() <= tol || level == 0) return both;
    return self(self, lo, mid, left, tol / 2, level - 1) + self(self, mid, hi, right, tol / 2, level - 1);
  };
  return recurse(recurse, a, b, panel(a, b), abs_tol, depth);
}

/// Bound constants of ||e^{-tA}|| <= K e^{-lambda0 t}.
struct DecayEnvelope {
  double K = 1.0;
  double lambda0 = 0.0;
};

/// Sigma = int_0^inf e^{-sA} D D^T e^{-sA^T} ds by composite adaptive quadrature, truncated at
/// the point where the envelope tail falls below tol relative to the result.
template <typename DerivedA, typename DerivedD>
SymMatrix<typename DerivedA::Scalar> sigma_quadrature(const Eigen::MatrixBase<DerivedA>& a,
                                                      const Eigen::MatrixBase<DerivedD>& d_noise,
                                                      typename DerivedA::Scalar tol, const DecayEnvelope& env) {
  using Scalar = typename DerivedA::Scalar;
  detail::require_square(a, "sigma_quadrature");
  detail::require_same_dim(a, d_noise, "sigma_quadrature");
  if (!(env.lambda0 > 0) || !(env.K >= 1)) throw Error(Errc::invalid_argument, "sigma_quadrature: bad envelope");
  const Eigen::Index d = a.rows();
  const Matrix<Scalar> q = d_noise * d_noise.transpose();
  const Scalar qn = q.norm();
  if (qn == Scalar(0)) return SymMatrix<Scalar>::zero(d);

  const Matrix<Scalar> minus_a = -a;
  auto integrand = [&](Scalar s) {
    const Matrix<Scalar> e = mat_exp(minus_a, s);
    return Matrix<Scalar>(e * q * e.transpose());
  };

  const Scalar lam = env.lambda0, k2 = env.K * env.K;
  const Scalar width = Scalar(1) / lam;
  // The integrand is PSD, so any partial integral bounds |Sigma|_F from below.
  Matrix<Scalar> first = integrate_adaptive<Scalar>(integrand, Scalar(0), width, tol * qn * width);
  const Scalar lower = first.norm();
  const Scalar t_env = std::log(k2 * qn / (tol * lower)) / (2 * lam);
  const Scalar t_tail = std::log(k2 * qn / (2 * lam * tol * lower)) / (2 * lam);
  const Scalar t_cut = std::max({t_env, t_tail, width});
  const int panels = static_cast<int>(std::ceil(t_cut / width));
  const Scalar panel_tol = Scalar(0.1) * tol * lower / panels;

  first = integrate_adaptive<Scalar>(integrand, Scalar(0), width, panel_tol);
  Matrix<Scalar> total = first;
  for (int p = 1; p < panels; ++p) total += integrate_adaptive<Scalar>(integrand, p * width, (p + 1) * width, panel_tol);
  return SymMatrix<Scalar>(total);
}

/// Relative Frobenius distance |a - b| / max(|b|, floor).
template <typename DA, typename DB>
double rel_frobenius(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b, double floor = 1e-300) {
  return (a - b).norm() / std::max<double>(b.norm(), floor);
}

}  // namespace oulab
