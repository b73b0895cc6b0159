#include <gtest/gtest.h>

#include <cmath>

#include "oulab/matops.hpp"
#include "oulab/rng.hpp"

using namespace oulab;

namespace {

MatrixD m2(double a, double b, double c, double d) {
  MatrixD m(2, 2);
  m << a, b, c, d;
  return m;
}

MatrixD random_matrix(Eigen::Index d, RngStream& rng) {
  MatrixD m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.normal();
  return m;
}

MatrixD random_orthogonal(Eigen::Index d, RngStream& rng) {
  Eigen::HouseholderQR<MatrixD> qr(random_matrix(d, rng));
  return qr.householderQ();
}

}  // namespace

TEST(MatExp, ZeroTimeIsIdentity) {
  RngStream rng(1, 0);
  const MatrixD m = random_matrix(4, rng);
  EXPECT_TRUE(mat_exp(m, 0.0).isApprox(MatrixD::Identity(4, 4), 1e-15));
}

TEST(MatExp, Diagonal) {
  const MatrixD e = mat_exp(m2(-1, 0, 0, -2), 1.0);
  EXPECT_NEAR(e(0, 0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(e(1, 1), std::exp(-2.0), 1e-15);
  EXPECT_EQ(e(0, 1), 0.0);
}

TEST(MatExp, RotationGenerator) {
  for (double t : {0.1, 1.0, 7.5}) {
    const MatrixD e = mat_exp(m2(0, -3, 3, 0), t);
    EXPECT_TRUE(e.isApprox(m2(std::cos(3 * t), -std::sin(3 * t), std::sin(3 * t), std::cos(3 * t)), 1e-13));
    EXPECT_NEAR(spectral_norm(e), 1.0, 1e-12);  // isometry
  }
}

TEST(MatExp, JordanBlock) {
  for (double s : {0.5, 3.0}) {
    const MatrixD e = mat_exp(MatrixD(-m2(1, 1, 0, 1)), s);
    EXPECT_TRUE(e.isApprox(std::exp(-s) * m2(1, -s, 0, 1), 1e-14));
  }
}

TEST(MatExp, Semigroup) {
  RngStream rng(2, 0);
  const MatrixD m = random_matrix(5, rng);
  const MatrixD lhs = mat_exp(m, 0.7) * mat_exp(m, 1.3);
  EXPECT_TRUE(lhs.isApprox(mat_exp(m, 2.0), 1e-12));
}

TEST(MatExp, OverflowThrows) {
  EXPECT_THROW(mat_exp(m2(1000, 0, 0, 1), 10.0), Error);
}

TEST(SpectralNorm, Examples) {
  EXPECT_NEAR(spectral_norm(MatrixD::Identity(3, 3)), 1.0, 1e-14);
  EXPECT_NEAR(spectral_norm(m2(3, 0, 0, -5)), 5.0, 1e-14);
  EXPECT_NEAR(spectral_norm(m2(1, 1, 0, 1)), std::sqrt((3 + std::sqrt(5.0)) / 2), 1e-13);
}

TEST(SpectralNorm, MatchesSvd) {
  RngStream rng(3, 0);
  for (int d = 1; d <= 8; ++d) {
    const MatrixD m = random_matrix(d, rng);
    const double ref = Eigen::JacobiSVD<MatrixD>(m).singularValues()(0);
    EXPECT_NEAR(spectral_norm(m), ref, 1e-12 * ref);
  }
}

TEST(SpectralNorm, TinyAndNearlyDegenerate) {
  const MatrixD e = mat_exp(MatrixD(-m2(1, 1, 0, 1)), 200.0);
  const double ref = Eigen::JacobiSVD<MatrixD>(e).singularValues()(0);
  EXPECT_NEAR(spectral_norm(e), ref, 1e-12 * ref);
  const MatrixD near_id = mat_exp(MatrixD(-m2(1, 1, 0, 1)), 1e-4);
  EXPECT_NEAR(spectral_norm(near_id), Eigen::JacobiSVD<MatrixD>(near_id).singularValues()(0), 1e-14);
}

TEST(Cholesky, Identity) {
  const auto f = cholesky_psd(SymMatrixD::identity(2));
  EXPECT_EQ(f.rank, 2);
  EXPECT_TRUE(f.lower.isApprox(MatrixD::Identity(2, 2)));
}

TEST(Cholesky, RankDeficient) {
  const auto f = cholesky_psd(SymMatrixD(m2(1, 1, 1, 1)));
  EXPECT_EQ(f.rank, 1);
  EXPECT_TRUE(f.reconstruct().isApprox(m2(1, 1, 1, 1), 1e-14));
}

TEST(Cholesky, IndefiniteThrows) {
  try {
    cholesky_psd(SymMatrixD(m2(0, 0, 0, -1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::not_psd);
  }
}

TEST(Cholesky, RoundTripRandomPsd) {
  RngStream rng(4, 0);
  for (int d = 1; d <= 8; ++d) {
    const MatrixD g = random_matrix(d, rng).leftCols(std::max(1, d / 2));
    const SymMatrixD s(g * g.transpose());
    const auto f = cholesky_psd(s);
    EXPECT_EQ(f.rank, std::max(1, d / 2));
    EXPECT_LE((f.reconstruct() - s.matrix()).norm(), 1e-12 * s.matrix().norm());
  }
}

TEST(SymEigs, Examples) {
  const auto e1 = sym_eigs(SymMatrixD(m2(0.5, 0, 0, 0.5)));
  EXPECT_NEAR(e1.values(0), 0.5, 1e-15);
  EXPECT_NEAR(e1.values(1), 0.5, 1e-15);
  const auto e2 = sym_eigs(SymMatrixD(m2(0.75, -0.25, -0.25, 0.5)));
  EXPECT_NEAR(e2.values(0), (5 + std::sqrt(5.0)) / 8, 1e-14);
  EXPECT_NEAR(e2.values(1), (5 - std::sqrt(5.0)) / 8, 1e-14);
}

TEST(SymEigs, ConstructThenRecover) {
  RngStream rng(5, 0);
  for (int d = 2; d <= 9; ++d) {
    const MatrixD q = random_orthogonal(d, rng);
    VectorD lam(d);
    for (int i = 0; i < d; ++i) lam(i) = static_cast<double>(d - i) + 0.25 * i;
    std::sort(lam.data(), lam.data() + d, std::greater<>());
    const SymMatrixD s(q * lam.asDiagonal() * q.transpose());
    const auto e = sym_eigs(s);
    EXPECT_LE((e.values - lam).cwiseAbs().maxCoeff(), 1e-10);
    const MatrixD rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    EXPECT_LE((rec - s.matrix()).norm(), 1e-10);
  }
}

TEST(Lyapunov, Examples) {
  EXPECT_TRUE(solve_lyapunov(MatrixD::Identity(2, 2), SymMatrixD::identity(2)).matrix().isApprox(0.5 * MatrixD::Identity(2, 2)));
  MatrixD one(1, 1);
  one << 1.0;
  MatrixD two(1, 1);
  two << 2.0;
  EXPECT_NEAR(solve_lyapunov(one, SymMatrixD(two)).matrix()(0, 0), 1.0, 1e-15);
  EXPECT_TRUE(solve_lyapunov(m2(1, 1, 0, 1), SymMatrixD::identity(2)).matrix().isApprox(m2(0.75, -0.25, -0.25, 0.5), 1e-14));
  EXPECT_TRUE(solve_lyapunov(m2(1, -3, 3, 1), SymMatrixD::identity(2)).matrix().isApprox(0.5 * MatrixD::Identity(2, 2), 1e-14));
}

TEST(Lyapunov, ResidualOnRandomSystems) {
  RngStream rng(6, 0);
  for (int d = 1; d <= 10; ++d) {
    const MatrixD s = random_matrix(d, rng);
    const MatrixD a = s + (spectral_norm(s) + 0.1) * MatrixD::Identity(d, d);
    const MatrixD g = random_matrix(d, rng);
    const SymMatrixD q(g * g.transpose());
    const MatrixD sig = solve_lyapunov(a, q).matrix();
    EXPECT_LE((a * sig + sig * a.transpose() - q.matrix()).norm(), 1e-10 * q.matrix().norm());
    EXPECT_LE((sig - sig.transpose()).norm(), 1e-14 * sig.norm());
  }
}

TEST(Lyapunov, SingularSystemThrows) {
  try {
    solve_lyapunov(m2(0, -1, 1, 0), SymMatrixD::identity(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::not_hurwitz);
  }
}

TEST(Quadrature, GaussLegendreIsExactForPolynomials) {
  const auto [x, w] = gauss_legendre_rule<double>(10);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += w[i] * std::pow(x[i], 18);
  EXPECT_NEAR(sum, 2.0 / 19.0, 1e-14);
}

TEST(Quadrature, SigmaMatchesClosedForms) {
  const DecayEnvelope unit{1.05, 0.95};
  EXPECT_LE((sigma_quadrature(MatrixD::Identity(2, 2), MatrixD::Identity(2, 2), 1e-8, unit).matrix() -
             0.5 * MatrixD::Identity(2, 2)).norm(), 1e-8);
  const DecayEnvelope jordan{4.1, 0.9};
  const MatrixD s = sigma_quadrature(m2(1, 1, 0, 1), MatrixD::Identity(2, 2), 1e-8, jordan).matrix();
  EXPECT_LE((s - m2(0.75, -0.25, -0.25, 0.5)).norm(), 1e-8);
}
