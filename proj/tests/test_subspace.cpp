#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "clra/subspace.hpp"
#include "oracles.hpp"

using namespace clra;

namespace {

FactorBasis span_of(std::initializer_list<std::initializer_list<double>> rows, Index k) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return FactorBasis(m, k);
}

Matrix diag(std::initializer_list<double> values) {
  Vector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v(i++) = x;
  return v.asDiagonal();
}

double same_subspace(const FactorBasis& a, const Matrix& expected_rows) {
  return oracle::projector_distance(a.vectors(), expected_rows);
}

}  // namespace

// --- recluster --------------------------------------------------------------

TEST(Recluster, DistinctSingularValuesForceSpan) {
  const auto v = recluster(diag({3, 2, 1}), 2);
  EXPECT_EQ(v.size(), 2);
  EXPECT_LT(same_subspace(v, Matrix::Identity(3, 3).topRows(2)), 1e-12);
}

TEST(Recluster, ReturnsMinOfRankAndK) {
  Matrix a(3, 2);
  const double s = 1.0 / std::sqrt(2.0);
  a << s, s, 2 * s, 2 * s, -s, -s;
  const auto v = recluster(a, 2);
  EXPECT_EQ(v.size(), 1);
}

TEST(Recluster, HandOracleTallMatrix) {
  Matrix a(3, 2);
  a << 2, 0, 0, 1, 0, 1;  // A^T A = diag(4, 2)
  const auto v = recluster(a, 1);
  ASSERT_EQ(v.size(), 1);
  EXPECT_NEAR(std::abs(v.vectors()(0, 0)), 1.0, 1e-12);
}

TEST(Recluster, OutputIsOrthonormal) {
  std::mt19937_64 rng(7);
  const Matrix a = oracle::random_integer_matrix(30, 8, 5, rng);
  const auto v = recluster(a, 4);
  const Matrix g = v.vectors() * v.vectors().transpose();
  EXPECT_LT((g - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Recluster, Errors) {
  EXPECT_THROW(recluster(diag({1, 2}), 0), ParameterError);
  Matrix bad = diag({1, 2});
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(recluster(bad, 1), InputError);
}

// --- lra_cost / opt_cost ----------------------------------------------------

TEST(LraCost, Examples) {
  Matrix a(1, 2);
  a << 1, 1;
  EXPECT_NEAR(lra_cost(a, span_of({{1, 0}}, 1)), 1.0, 1e-12);
  EXPECT_NEAR(lra_cost(diag({3, 2}), span_of({{1, 0}, {0, 1}}, 2)), 0.0, 1e-12);
  EXPECT_NEAR(lra_cost(diag({3, 2}), span_of({{0, 1}}, 1)), 9.0, 1e-12);
}

TEST(LraCost, NonOrthonormalSpanningSetIsOrthonormalized) {
  // span{(1,1,0), (1,0,0)} = span{e1, e2}
  const auto v = span_of({{1, 1, 0}, {1, 0, 0}}, 2);
  EXPECT_NEAR(lra_cost(diag({3, 2, 1}), v), 1.0, 1e-12);
}

TEST(LraCost, DimensionMismatch) {
  EXPECT_THROW(lra_cost(diag({1, 2, 3}), span_of({{1, 0}}, 1)), ParameterError);
}

TEST(OptCost, Examples) {
  EXPECT_NEAR(opt_cost(diag({3, 2, 1}), 1), 5.0, 1e-12);
  EXPECT_EQ(opt_cost(diag({3, 2, 1}), 3), 0.0);
  Matrix lowrank(3, 2);
  lowrank << 1, 2, 2, 4, -1, -2;
  EXPECT_EQ(opt_cost(lowrank, 1), 0.0);
  Matrix h(2, 2);
  h << 1, 1, 1, -1;  // A^T A = 2I
  EXPECT_NEAR(opt_cost(h, 1), 2.0, 1e-12);
  EXPECT_THROW(opt_cost(h, 0), ParameterError);
}

TEST(OptCost, AgreesWithEigenOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = oracle::random_integer_matrix(12, 6, 9, rng);
    for (Index k = 1; k <= 5; ++k)
      EXPECT_NEAR(opt_cost(a, k), oracle::opt(a, k), 1e-9 * a.squaredNorm());
  }
}

// --- recourse ---------------------------------------------------------------

TEST(Recourse, Examples) {
  const auto e1 = span_of({{1, 0}}, 1);
  const auto e2 = span_of({{0, 1}}, 1);
  EXPECT_NEAR(recourse(e1, e1), 0.0, 1e-12);
  EXPECT_NEAR(recourse(e1, e2), 2.0, 1e-12);
  const auto a = span_of({{1, 0, 0}, {0, 1, 0}}, 2);
  const auto b = span_of({{0, 1, 0}, {0, 0, 1}}, 2);
  // P_a - P_b = diag(1, 0, -1)
  EXPECT_NEAR(recourse(a, b), 2.0, 1e-12);
}

TEST(Recourse, DimensionMismatch) {
  EXPECT_THROW(recourse(span_of({{1, 0}}, 1), span_of({{1, 0, 0}}, 1)), ParameterError);
}

TEST(Recourse, TraceFormulaMatchesExplicitProjectors) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<Index> dim(2, 50);
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = dim(rng);
    const Index k = std::uniform_int_distribution<Index>(1, std::min<Index>(8, d))(rng);
    const FactorBasis a(oracle::random_orthonormal_rows(k, d, rng), k);
    const FactorBasis b(oracle::random_orthonormal_rows(k, d, rng), k);
    EXPECT_NEAR(recourse(a, b), recourse_dense(a, b), 1e-9);
    EXPECT_NEAR(recourse(a, b), oracle::projector_distance(a.vectors(), b.vectors()), 1e-9);
  }
}

TEST(Recourse, SymmetricDifferenceIdentityAndBounds) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Index d = std::uniform_int_distribution<Index>(2, 50)(rng);
    const Index k = std::uniform_int_distribution<Index>(1, std::min<Index>(8, d))(rng);
    const Matrix r = oracle::random_orthonormal_rows(k, d, rng);
    const Matrix t = oracle::random_orthonormal_rows(k, d, rng);
    const Matrix p = r.transpose() * r;
    const Matrix q = t.transpose() * t;
    const double sym = (p - p * q).squaredNorm() + (q - q * p).squaredNorm();
    const FactorBasis a(r, k), b(t, k);
    const double value = recourse(a, b);
    EXPECT_NEAR(value, sym, 1e-9);
    EXPECT_GE(value, 0.0);
    EXPECT_LE(value, 2.0 * static_cast<double>(k) + 1e-12);
    EXPECT_NEAR(value, recourse(b, a), 1e-12);
  }
}

TEST(Recourse, BasisInvariant) {
  std::mt19937_64 rng(9);
  const Matrix r = oracle::random_orthonormal_rows(3, 7, rng);
  const Matrix mix = oracle::random_gaussian(3, 3, rng);
  EXPECT_NEAR(recourse(FactorBasis(r, 3), FactorBasis(mix * r, 3)), 0.0, 1e-9);
}

// --- tail band --------------------------------------------------------------

TEST(TailBandMass, Examples) {
  const std::vector<double> one{2.0};
  EXPECT_DOUBLE_EQ(tail_band_mass(one, 1), 4.0);
  const std::vector<double> s{4, 3, 2, 1, 0};
  EXPECT_DOUBLE_EQ(tail_band_mass(s, 4), 14.0);  // lo = max(1, 4 - 2) = 2
  const std::vector<double> zeros(5, 0.0);
  EXPECT_DOUBLE_EQ(tail_band_mass(zeros, 3), 0.0);
  EXPECT_THROW(tail_band_mass(s, 0), ParameterError);
}

TEST(TailBandMass, SpectrumViewOverload) {
  const auto view = spectrum(diag({4, 3, 2, 1}));
  EXPECT_NEAR(tail_band_mass(view, 4), 14.0, 1e-12);
  EXPECT_NEAR(view.singular_values.squaredNorm(), 30.0, 1e-8 * 30.0);
}

TEST(CeilSqrt, SmallValues) {
  EXPECT_EQ(ceil_sqrt(1), 1);
  EXPECT_EQ(ceil_sqrt(2), 2);
  EXPECT_EQ(ceil_sqrt(4), 2);
  EXPECT_EQ(ceil_sqrt(5), 3);
  EXPECT_EQ(ceil_sqrt(25), 5);
  EXPECT_EQ(ceil_sqrt(26), 6);
}

// --- rank-one updates -------------------------------------------------------

TEST(RankOneUpdate, AppendToEmpty) {
  RowVector a(3);
  a << 3, 0, 4;
  const auto s = rank_one_update(SvdState::empty(3), a);
  ASSERT_EQ(s.rank(), 1);
  EXPECT_NEAR(s.sigma(0), 5.0, 1e-12);
  EXPECT_NEAR(std::abs(s.V.row(0).dot(a / 5.0)), 1.0, 1e-12);
}

TEST(RankOneUpdate, IdentityFromTwoRows) {
  RowVector a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  auto s = rank_one_update(SvdState::empty(2), a);
  s = rank_one_update(s, b);
  ASSERT_EQ(s.rank(), 2);
  EXPECT_NEAR(s.sigma(0), 1.0, 1e-12);
  EXPECT_NEAR(s.sigma(1), 1.0, 1e-12);
}

TEST(RankOneUpdate, MatchesOneShotSpectrum) {
  std::mt19937_64 rng(21);
  const Matrix a = oracle::random_gaussian(20, 10, rng);
  const auto s = SvdState::from_matrix(a);
  const Vector ev = oracle::gram_eigenvalues(a);
  ASSERT_EQ(s.rank(), 10);
  for (Index i = 0; i < 10; ++i) EXPECT_NEAR(s.sigma(i), std::sqrt(ev(i)), 1e-8);
  EXPECT_LE((s.reconstruct() - a).norm(), 1e-7 * a.norm());
}

TEST(RankOneUpdate, ReconstructionSurvivesReorthonormalization) {
  std::mt19937_64 rng(22);
  const Matrix a = oracle::random_integer_matrix(300, 12, 10, rng);  // > 4 reorth cycles
  const auto s = SvdState::from_matrix(a);
  EXPECT_LE((s.reconstruct() - a).norm(), 1e-7 * a.norm());
  const Matrix g = s.V * s.V.transpose();
  EXPECT_LT((g - Matrix::Identity(s.rank(), s.rank())).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(RankOneUpdate, RankDeficientAndZeroRows) {
  Matrix a(5, 4);
  a << 1, 2, 0, 0, 2, 4, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 3, 6, 1, 1;
  const auto s = SvdState::from_matrix(a);
  EXPECT_EQ(s.rank(), 2);
  EXPECT_EQ(s.rows, 5);
  EXPECT_LE((s.reconstruct() - a).norm(), 1e-10 * a.norm());
  const auto empty_zero = rank_one_update(SvdState::empty(3), RowVector::Zero(3));
  EXPECT_EQ(empty_zero.rank(), 0);
  EXPECT_EQ(empty_zero.rows, 1);
}

TEST(RankOneUpdate, Errors) {
  EXPECT_THROW(rank_one_update(SvdState::empty(3), RowVector::Zero(2)), ParameterError);
  RowVector bad = RowVector::Zero(3);
  bad(1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(rank_one_update(SvdState::empty(3), bad), InputError);
}

// --- properties -------------------------------------------------------------

TEST(Properties, EckartYoungBeatsRandomSubspaces) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = oracle::random_gaussian(8, 6, rng);
    for (Index k = 1; k <= 3; ++k) {
      const double best = lra_cost(a, recluster(a, k));
      EXPECT_NEAR(best, opt_cost(a, k), 1e-9 * a.squaredNorm());
      for (int w = 0; w < 100; ++w) {
        const FactorBasis rnd(oracle::random_orthonormal_rows(k, 6, rng), k);
        EXPECT_LE(best, lra_cost(a, rnd) + 1e-9);
      }
    }
  }
}

TEST(Properties, InterlacingAndOptMonotonicity) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = oracle::random_integer_matrix(10, 6, 7, rng);
    const Matrix row = oracle::random_integer_matrix(1, 6, 7, rng);
    Matrix b(11, 6);
    b << a, row;
    const auto before = SvdState::from_matrix(a, false);
    const auto after = rank_one_update(before, row.row(0));
    for (Index i = 0; i < before.rank(); ++i) EXPECT_GE(after.sigma(i), before.sigma(i) - 1e-9);
    for (Index k = 1; k <= 5; ++k) EXPECT_GE(opt_cost(b, k), opt_cost(a, k) - 1e-9);
  }
}

TEST(Properties, IntegerCostLowerBoundByRank) {
  std::mt19937_64 rng(51);
  int checked = 0;
  while (checked < 50) {
    const Index d = 6, k = std::uniform_int_distribution<Index>(1, 3)(rng);
    const Index r = std::uniform_int_distribution<Index>(k + 1, d)(rng);
    const long m = 3;
    const Matrix base = oracle::random_integer_matrix(r, d, 1, rng);
    if (oracle::gram_schmidt(base).rows() != r) continue;
    // Integer combinations of the independent rows, clipped back to |.| <= M.
    Matrix a(r + 4, d);
    a.topRows(r) = base;
    for (Index i = r; i < a.rows(); ++i) {
      const Matrix c = oracle::random_integer_matrix(1, r, 1, rng);
      a.row(i) = (c * base).cwiseMax(-m).cwiseMin(m);
    }
    const Index rank = oracle::gram_schmidt(a).rows();
    const double n = static_cast<double>(a.rows());
    const double bound = std::pow(n * d * m * m, -static_cast<double>(k) / static_cast<double>(rank - k));
    EXPECT_GE(opt_cost(a, k), bound);
    ++checked;
  }
}

TEST(RecourseLedger, Accumulates) {
  RecourseLedger ledger;
  ledger.record(1, 0.0, true);
  ledger.record(2, 2.0, false);
  ledger.record(3, 0.5, true);
  EXPECT_DOUBLE_EQ(ledger.cumulative(), 2.5);
  EXPECT_EQ(ledger.recluster_events(), 2);
  EXPECT_THROW(ledger.record(4, -1.0, false), InternalError);
}
