#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "test_support.hpp"

using rgn::Matrix;
using rgn::Vector;
using namespace testing_support;

namespace {

double reconstruction_error(const Matrix<double>& a, const rgn::SvdFactors<double>& f) {
  Matrix<double> us = f.left;
  for (std::size_t k = 0; k < f.singular_values.size(); ++k)
    for (std::size_t i = 0; i < us.rows(); ++i) us(i, k) *= f.singular_values[k];
  return rgn::frobenius_norm(rgn::subtract(a, rgn::matmul(us, rgn::transpose(f.right))));
}

double orthonormality_defect(const Matrix<double>& q) {
  return rgn::max_abs(rgn::subtract(rgn::matmul(rgn::transpose(q), q), Matrix<double>::identity(q.cols())));
}

}  // namespace

TEST(CompactSvd, IdentityIsItsOwnSvd) {
  const auto f = rgn::compact_svd(Matrix<double>::identity(3));
  for (double s : f.singular_values) EXPECT_DOUBLE_EQ(s, 1.0);
  EXPECT_LE(rgn::max_abs(rgn::subtract(f.left, Matrix<double>::identity(3))), 1e-15);
  EXPECT_LE(rgn::max_abs(rgn::subtract(f.right, Matrix<double>::identity(3))), 1e-15);
}

TEST(CompactSvd, DiagonalValuesSorted) {
  const Vector<double> d{1.0, 3.0, 2.0};
  const auto f = rgn::compact_svd(Matrix<double>::diagonal(d));
  EXPECT_DOUBLE_EQ(f.singular_values[0], 3.0);
  EXPECT_DOUBLE_EQ(f.singular_values[1], 2.0);
  EXPECT_DOUBLE_EQ(f.singular_values[2], 1.0);
}

TEST(CompactSvd, SquaredValuesMatchGramEigenvalues) {
  rgn::Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix<double> a = random_matrix(5, 3, rng);
    const auto f = rgn::compact_svd(a);
    const auto ev = oracle::symmetric_eigenvalues(oracle::gram(to_rows(a)));
    ASSERT_EQ(f.singular_values.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
      const double s2 = f.singular_values[k] * f.singular_values[k];
      EXPECT_NEAR(s2, ev[2 - k], 1e-10 * ev[2]);
    }
  }
}

TEST(CompactSvd, FactorInvariantsOnTallAndWide) {
  rgn::Rng rng(12);
  for (auto [n, p] : {std::pair{7, 4}, std::pair{4, 7}, std::pair{27, 14}, std::pair{1, 5}}) {
    const Matrix<double> a = random_matrix(n, p, rng);
    const auto f = rgn::compact_svd(a);
    const std::size_t k = std::min(n, p);
    ASSERT_EQ(f.singular_values.size(), k);
    EXPECT_EQ(f.left.cols(), k);
    EXPECT_EQ(f.right.cols(), k);
    EXPECT_LE(orthonormality_defect(f.left), 1e-12);
    EXPECT_LE(orthonormality_defect(f.right), 1e-12);
    EXPECT_TRUE(std::is_sorted(f.singular_values.rbegin(), f.singular_values.rend()));
    EXPECT_LE(reconstruction_error(a, f), 1e-12 * std::max(1.0, rgn::frobenius_norm(a)));
  }
}

TEST(CompactSvd, RankDeficientKeepsOrthonormalLeftFactor) {
  Matrix<double> a(4, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    a(i, 0) = double(i + 1);
    a(i, 1) = 2.0 * double(i + 1);
  }
  const auto f = rgn::compact_svd(a);
  EXPECT_LE(orthonormality_defect(f.left), 1e-12);
  EXPECT_LE(f.singular_values[1], 1e-12);
  EXPECT_LE(reconstruction_error(a, f), 1e-12 * rgn::frobenius_norm(a));
}

TEST(CompactSvd, RejectsNonFinite) {
  Matrix<double> a = Matrix<double>::identity(2);
  a(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(rgn::compact_svd(a), rgn::InvalidInput);
  a(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(rgn::compact_svd(a), rgn::InvalidInput);
}

TEST(PinvApply, IdentityAndZero) {
  const Vector<double> b{1, 2, 3};
  const auto x = rgn::pinv_apply(Matrix<double>::identity(3), std::span<const double>(b));
  EXPECT_EQ(x, b);
  const auto z = rgn::pinv_apply(Matrix<double>(3, 2), std::span<const double>(b));
  ASSERT_EQ(z.size(), 2u);
  EXPECT_EQ(z[0], 0.0);
  EXPECT_EQ(z[1], 0.0);
}

TEST(PinvApply, MatchesNormalEquations) {
  rgn::Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix<double> a = random_matrix(6, 4, rng);
    const Vector<double> b = rng.gaussian_vector<double>(6);
    const auto x = rgn::pinv_apply(a, std::span<const double>(b));
    const auto ref = oracle::normal_equations(to_rows(a), b);
    EXPECT_LE(rel_diff(x, ref), 1e-8);
  }
}

TEST(PinvApply, RecoversExactSolutions) {
  rgn::Rng rng(14);
  const Matrix<double> a = random_matrix(9, 5, rng);
  const Vector<double> x = rng.gaussian_vector<double>(5);
  const Vector<double> b = rgn::matvec(a, std::span<const double>(x));
  EXPECT_LE(rel_diff(rgn::pinv_apply(a, std::span<const double>(b)), x), 1e-8);
}

TEST(PinvApply, MinimalNormOnRankDeficient) {
  // Columns 0 and 1 equal: the minimal-norm solution splits weight evenly.
  Matrix<double> a(3, 2);
  a(0, 0) = a(0, 1) = 1.0;
  const Vector<double> b{2, 0, 0};
  const auto x = rgn::pinv_apply(a, std::span<const double>(b));
  EXPECT_NEAR(x[0], 1.0, 1e-14);
  EXPECT_NEAR(x[1], 1.0, 1e-14);
}

TEST(PinvApply, DimensionMismatchThrows) {
  const Vector<double> b{1, 2};
  EXPECT_THROW(rgn::pinv_apply(Matrix<double>::identity(3), std::span<const double>(b)), rgn::InvalidInput);
}

TEST(Pseudoinverse, PenroseConditions) {
  rgn::Rng rng(15);
  const Matrix<double> a = random_matrix(7, 3, rng);
  const Matrix<double> p = rgn::pseudoinverse(a);
  EXPECT_LE(rgn::max_abs(rgn::subtract(rgn::matmul(rgn::matmul(a, p), a), a)), 1e-12);
  EXPECT_LE(rgn::max_abs(rgn::subtract(rgn::matmul(rgn::matmul(p, a), p), p)), 1e-12);
  const Matrix<double> ap = rgn::matmul(a, p);
  EXPECT_LE(rgn::max_abs(rgn::subtract(ap, rgn::transpose(ap))), 1e-12);
}

TEST(SmallestSingularValue, SimpleCases) {
  EXPECT_DOUBLE_EQ(rgn::smallest_singular_value(Matrix<double>::identity(3)), 1.0);
  const Vector<double> d{3, 2, 1};
  EXPECT_DOUBLE_EQ(rgn::smallest_singular_value(Matrix<double>::diagonal(d)), 1.0);
}

TEST(SmallestSingularValue, EqualsLastSvdEntryExactly) {
  rgn::Rng rng(16);
  const Matrix<double> a = random_matrix(8, 5, rng);
  EXPECT_EQ(rgn::smallest_singular_value(a), rgn::compact_svd(a).singular_values.back());
}

TEST(SmallestSingularValue, WideMatrixRejected) {
  EXPECT_THROW(rgn::smallest_singular_value(Matrix<double>(2, 3)), rgn::InvalidInput);
}

TEST(SpectralNorm, MatchesLargestEigenvalueOfGram) {
  rgn::Rng rng(17);
  const Matrix<double> a = random_matrix(6, 6, rng);
  const auto ev = oracle::symmetric_eigenvalues(oracle::gram(to_rows(a)));
  EXPECT_NEAR(rgn::spectral_norm(a), std::sqrt(ev.back()), 1e-12 * std::sqrt(ev.back()));
}

TEST(OrthonormalComplement, FirstBasisVector) {
  const Vector<double> v{1, 0, 0};
  const Matrix<double> q = rgn::orthonormal_complement(std::span<const double>(v));
  ASSERT_EQ(q.rows(), 3u);
  ASSERT_EQ(q.cols(), 2u);
  EXPECT_LE(orthonormality_defect(q), 1e-15);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(q(0, j), 0.0);
}

TEST(OrthonormalComplement, DiagonalInTwoDimensions) {
  const double h = 1.0 / std::sqrt(2.0);
  const Vector<double> v{h, h};
  const Matrix<double> q = rgn::orthonormal_complement(std::span<const double>(v));
  ASSERT_EQ(q.cols(), 1u);
  EXPECT_NEAR(std::abs(q(0, 0)), h, 1e-15);
  EXPECT_NEAR(q(0, 0), -q(1, 0), 1e-15);
}

TEST(OrthonormalComplement, CompletesToOrthogonalMatrix) {
  rgn::Rng rng(18);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector<double> v = rng.gaussian_vector<double>(5);
    const double nv = rgn::norm2(v);
    const Matrix<double> q = rgn::orthonormal_complement(std::span<const double>(v));
    EXPECT_LE(orthonormality_defect(q), 1e-12);
    const auto qtv = rgn::matTvec(q, std::span<const double>(v));
    EXPECT_LE(rgn::norm2(qtv), 1e-12 * nv);
    oracle::Mat full(5, oracle::Vec(5));
    for (std::size_t i = 0; i < 5; ++i) {
      full[i][0] = v[i] / nv;
      for (std::size_t j = 0; j < 4; ++j) full[i][j + 1] = q(i, j);
    }
    EXPECT_NEAR(std::abs(oracle::cofactor_determinant(full)), 1.0, 1e-12);
  }
}

TEST(OrthonormalComplement, Deterministic) {
  const Vector<double> v{0.3, -1.2, 0.5, 2.0};
  const auto a = rgn::orthonormal_complement(std::span<const double>(v));
  const auto b = rgn::orthonormal_complement(std::span<const double>(v));
  EXPECT_EQ(a.data(), b.data());
}

TEST(OrthonormalComplement, ZeroVectorThrows) {
  const Vector<double> v{0, 0, 0};
  EXPECT_THROW(rgn::orthonormal_complement(std::span<const double>(v)), rgn::InvalidInput);
}

#if defined(RGN_HAVE_FLOAT128)
TEST(CompactSvd, QuadPrecisionReconstruction) {
  rgn::Rng rng(19);
  Matrix<rgn::float128> a(27, 14);
  for (auto& x : a.data()) x = rng.gaussian();
  const auto f = rgn::compact_svd(a);
  Matrix<rgn::float128> us = f.left;
  for (std::size_t k = 0; k < 14; ++k)
    for (std::size_t i = 0; i < 27; ++i) us(i, k) *= f.singular_values[k];
  const auto err = rgn::frobenius_norm(rgn::subtract(a, rgn::matmul(us, rgn::transpose(f.right))));
  EXPECT_LE(rgn::num::to_double(err), 1e-28);
}
#endif
