#include <gtest/gtest.h>

#include <cmath>

#include "ssht/gradcheck.hpp"
#include "ssht/linalg.hpp"
#include "ssht/propcheck.hpp"

namespace ssht {
namespace {

TEST(Matrix, ConstructionValidatesLengthAndFiniteness) {
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), ValidationError);
  EXPECT_THROW(Matrix(1, 2, std::vector<double>{1, std::nan("")}), ValidationError);
  EXPECT_THROW(Matrix(1, 1, std::vector<double>{INFINITY}), ValidationError);
  const Matrix m(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m(1, 0), 4.0);
  EXPECT_EQ(m.row(1)[2], 6.0);
}

TEST(Matrix, ProductsAgree) {
  Rng rng = make_rng(3, Stream::kEval);
  const Matrix a = detail::random_matrix(4, 3, rng), b = detail::random_matrix(4, 5, rng);
  EXPECT_LT(max_abs_diff(matmul_tn(a, b), matmul(transpose(a), b)), 1e-14);
  const Matrix c = detail::random_matrix(6, 3, rng);
  EXPECT_LT(max_abs_diff(matmul_nt(a, c), matmul(a, transpose(c))), 1e-14);
  EXPECT_THROW(matmul(a, a), ValidationError);
}

TEST(Svd, IdentityAndDiagonal) {
  EXPECT_EQ(svd(Matrix::identity(2)).sigma, (std::vector<double>{1, 1}));
  const auto s = svd(Matrix::from_rows({{3, 0}, {0, -4}}));
  EXPECT_NEAR(s.sigma[0], 4.0, 1e-15);
  EXPECT_NEAR(s.sigma[1], 3.0, 1e-15);
}

TEST(Svd, Random96x126Reconstructs) {
  Rng rng = make_rng(11, Stream::kEval);
  const Matrix a = detail::random_matrix(96, 126, rng);
  const auto s = svd(a);
  EXPECT_EQ(s.u.rows(), 96u);
  EXPECT_EQ(s.v.rows(), 126u);
  EXPECT_EQ(s.sigma.size(), 96u);
  const auto c = check_svd_invariants(a, s);
  EXPECT_LE(c.reconstruction, 1e-8);
  EXPECT_LE(c.orthonormality, 1e-10);
  EXPECT_TRUE(c.ordered);
}

TEST(Svd, RankDeficientKeepsOrthonormalBasis) {
  Rng rng = make_rng(12, Stream::kEval);
  const Matrix a =
      matmul(detail::random_matrix(10, 2, rng), detail::random_matrix(2, 6, rng));
  const auto s = svd(a);
  const auto c = check_svd_invariants(a, s);
  EXPECT_LE(c.orthonormality, 1e-10);
  EXPECT_LE(c.reconstruction, 1e-8);
  for (std::size_t k = 2; k < s.sigma.size(); ++k) EXPECT_LT(s.sigma[k], 1e-12 * s.sigma[0]);
}

TEST(Svd, ZeroMatrix) {
  const auto s = svd(Matrix(3, 2));
  EXPECT_EQ(s.sigma, (std::vector<double>{0, 0}));
  EXPECT_LE(check_svd_invariants(Matrix(3, 2), s).orthonormality, 1e-12);
}

TEST(Svd, RejectsNonFinite) {
  Matrix m(2, 2);
  m(0, 0) = std::nan("");
  EXPECT_THROW(svd(m), ValidationError);
}

TEST(Svd, NonConvergenceNamesShape) {
  Rng rng = make_rng(13, Stream::kEval);
  const Matrix a = detail::random_matrix(8, 6, rng);
  try {
    svd(a, SvdOptions{1, 1e-15});
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("8x6"), std::string::npos);
  }
}

TEST(Svd, Deterministic) {
  Rng rng = make_rng(14, Stream::kEval);
  const Matrix a = detail::random_matrix(7, 5, rng);
  const auto s1 = svd(a), s2 = svd(a);
  EXPECT_EQ(s1.sigma, s2.sigma);
  EXPECT_EQ(s1.u, s2.u);
  EXPECT_EQ(s1.v, s2.v);
}

TEST(NuclearNorm, Examples) {
  EXPECT_NEAR(nuclear_norm(Matrix::identity(5)), 5.0, 1e-14);
  EXPECT_NEAR(nuclear_norm(Matrix::from_rows({{3, 0}, {0, -4}})), 7.0, 1e-14);
  const Matrix onehot = Matrix::from_rows({{1, 0, 0}, {1, 0, 0}, {0, 1, 0}});
  EXPECT_NEAR(nuclear_norm(onehot), 2.4142136, 1e-7);
  const Matrix spread = Matrix::from_rows({{1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  EXPECT_NEAR(nuclear_norm(spread), std::sqrt(2.0) + 2.0, 1e-12);
}

TEST(NuclearNorm, AllCompositionsOfFourIntoFour) {
  const auto comps = compositions(4, 4);
  ASSERT_EQ(comps.size(), 35u);
  for (const auto& counts : comps) {
    double expected = 0.0;
    for (auto n : counts) expected += std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(nuclear_norm(one_hot_rows(counts)), expected, 1e-8);
  }
}

TEST(NuclearNorm, ScaleHomogeneity) {
  Rng rng = make_rng(15, Stream::kEval);
  for (int t = 0; t < 20; ++t) {
    const Matrix a = detail::random_matrix(5, 4, rng);
    const double n = nuclear_norm(a);
    for (double c : {-2.0, 0.5, 10.0})
      EXPECT_NEAR(nuclear_norm(c * a), std::abs(c) * n, 1e-10 * std::abs(c) * n);
  }
}

TEST(NuclearNorm, OrthogonalInvariance) {
  Rng rng = make_rng(16, Stream::kEval);
  for (int t = 0; t < 20; ++t) {
    const Matrix a = detail::random_matrix(6, 4, rng);
    const Matrix q = random_orthogonal(6, rng);
    EXPECT_LE(max_abs_diff(matmul_tn(q, q), Matrix::identity(6)), 1e-12);
    EXPECT_NEAR(nuclear_norm(matmul(q, a)), nuclear_norm(a), 1e-8 * nuclear_norm(a));
  }
}

TEST(NuclearNorm, FrobeniusBoundChain) {
  Rng rng = make_rng(17, Stream::kEval);
  for (int t = 0; t < 200; ++t) {
    const std::size_t m = detail::uniform_size(rng, 1, 9), n = detail::uniform_size(rng, 1, 9);
    const Matrix a = detail::random_matrix(m, n, rng);
    const double f = frobenius_norm(a), nn = nuclear_norm(a);
    EXPECT_LE(f, nn * (1 + 1e-12));
    EXPECT_LE(nn, std::sqrt(static_cast<double>(std::min(m, n))) * f * (1 + 1e-12));
  }
}

TEST(FrobeniusNorm, Examples) {
  EXPECT_EQ(frobenius_norm(Matrix(3, 3)), 0.0);
  EXPECT_EQ(frobenius_norm(Matrix::from_rows({{3, 4}})), 5.0);
  Rng rng = make_rng(18, Stream::kEval);
  const Matrix a = detail::random_matrix(5, 7, rng);
  double ss = 0.0;
  for (double s : svd(a).sigma) ss += s * s;
  EXPECT_NEAR(frobenius_norm(a), std::sqrt(ss), 1e-12);
}

TEST(Subgradient, Examples) {
  EXPECT_LE(max_abs_diff(nuclear_norm_subgradient(Matrix::identity(2)), Matrix::identity(2)),
            1e-15);
  EXPECT_LE(max_abs_diff(nuclear_norm_subgradient(Matrix::from_rows({{3, 0}, {0, -4}})),
                         Matrix::from_rows({{1, 0}, {0, -1}})),
            1e-15);
  EXPECT_EQ(nuclear_norm_subgradient(Matrix(3, 2)), Matrix(3, 2));
  EXPECT_THROW(nuclear_norm_subgradient(Matrix::identity(2), 0.0), ValidationError);
}

TEST(Subgradient, RankDeficientTruncates) {
  // Rank one: subgradient is u1 v1ᵀ.
  const Matrix a = Matrix::from_rows({{1, 2}, {2, 4}, {3, 6}});
  const Matrix g = nuclear_norm_subgradient(a);
  const double na = 1.0 / std::sqrt(14.0), nb = 1.0 / std::sqrt(5.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      EXPECT_NEAR(g(i, j), (i + 1) * na * (j + 1) * nb, 1e-12);
}

TEST(Subgradient, MatchesFiniteDifferencesOn8x5) {
  const auto r = check_nuclear_norm_subgradient();
  EXPECT_TRUE(r.passed) << r.max_error;
  EXPECT_LE(r.max_error, 1e-4);
  EXPECT_EQ(r.instances, 20u);
}

TEST(SvdSuite, PassesUpTo128) {
  const auto r = check_svd_suite();
  EXPECT_TRUE(r.passed) << r.max_error;
}

}  // namespace
}  // namespace ssht
