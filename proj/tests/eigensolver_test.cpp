#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gperiodic/eigensolver.hpp"
#include "oracles.hpp"

using namespace gperiodic;

namespace {

SparseOperator path_neumann(int cells, double length) {
  const double h = length / cells;
  std::vector<Triplet> k, m;
  for (int e = 0; e < cells; ++e) {
    k.push_back({e, e, 1 / h});
    k.push_back({e + 1, e + 1, 1 / h});
    k.push_back({e, e + 1, -1 / h});
    k.push_back({e + 1, e, -1 / h});
    m.push_back({e, e, h / 2});
    m.push_back({e + 1, e + 1, h / 2});
  }
  return {CsrMatrix::from_triplets(cells + 1, k), CsrMatrix::from_triplets(cells + 1, m)};
}

}  // namespace

TEST(Eigensolver, DiagonalExample) {
  SparseOperator op{CsrMatrix::diagonal(std::vector<double>{1, 2, 3}), CsrMatrix::identity(3)};
  auto r = smallest_eigenpairs(op, {.count = 2});
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.pairs[0].value, 1.0, 1e-14);
  EXPECT_NEAR(r.pairs[1].value, 2.0, 1e-14);
  EXPECT_NEAR(std::abs(r.pairs[0].vector[0]), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(r.pairs[1].vector[1]), 1.0, 1e-12);
}

TEST(Eigensolver, LanczosPathOnLargeDiagonal) {
  std::vector<double> d(500);
  for (int i = 0; i < 500; ++i) d[i] = 1.0 + ((i * 37) % 500);
  SparseOperator op{CsrMatrix::diagonal(d), CsrMatrix::identity(500)};
  auto r = smallest_eigenpairs(op, {.count = 3});
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.pairs[0].value, 1.0, 1e-10);
  EXPECT_NEAR(r.pairs[1].value, 2.0, 1e-10);
  EXPECT_NEAR(r.pairs[2].value, 3.0, 1e-10);
}

TEST(Eigensolver, IntervalNeumannApproachesPiSquared) {
  auto op = path_neumann(1000, 1.0);
  auto r = smallest_eigenpairs(op, {.count = 2});
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.pairs[0].value, 0.0, 1e-9);
  EXPECT_NEAR(r.pairs[1].value, M_PI * M_PI, 1e-4);
}

TEST(Eigensolver, MatchesDenseOracleOnRandomPairs) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(65, 200);
  for (int trial = 0; trial < 10; ++trial) {
    auto op = oracle::random_definite_pair(dim(rng), rng, trial % 2 == 0);
    auto ref = oracle::generalized_eigenvalues(op.stiffness, op.mass);
    auto r = smallest_eigenpairs(op, {.count = 2, .seed = static_cast<std::uint64_t>(trial)});
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.pairs[0].value, ref[0], 1e-8);
    EXPECT_NEAR(r.pairs[1].value, ref[1], 1e-8);
  }
}

TEST(Eigensolver, FindsBothCopiesOfDoubleEigenvalue) {
  std::vector<double> d(300, 10.0);
  d[100] = 1.0;
  d[200] = 1.0;
  d[50] = 2.0;
  SparseOperator op{CsrMatrix::diagonal(d), CsrMatrix::identity(300)};
  auto r = smallest_eigenpairs(op, {.count = 3});
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.pairs[0].value, 1.0, 1e-12);
  EXPECT_NEAR(r.pairs[1].value, 1.0, 1e-12);
  EXPECT_NEAR(r.pairs[2].value, 2.0, 1e-12);
}

TEST(Eigensolver, VectorsAreMassOrthonormal) {
  std::mt19937_64 rng(9);
  auto op = oracle::random_definite_pair(150, rng, false);
  auto r = smallest_eigenpairs(op, {.count = 4});
  ASSERT_TRUE(r.converged);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      EXPECT_NEAR(op.mass.bilinear_form(r.pairs[i].vector, r.pairs[j].vector), i == j ? 1.0 : 0.0, 1e-10);
}

TEST(Eigensolver, DeterministicForFixedSeed) {
  std::mt19937_64 rng(1);
  auto op = oracle::random_definite_pair(120, rng, true);
  auto a = smallest_eigenpairs(op, {.count = 2, .seed = 5});
  auto b = smallest_eigenpairs(op, {.count = 2, .seed = 5});
  EXPECT_EQ(a.pairs[0].value, b.pairs[0].value);
  EXPECT_EQ(a.pairs[1].vector, b.pairs[1].vector);
}

TEST(Eigensolver, UnconvergedIsFlaggedNotSilent) {
  auto op = path_neumann(400, 1.0);
  auto r = smallest_eigenpairs(op, {.count = 6, .tol = 1e-300, .max_restarts = 1});
  EXPECT_FALSE(r.converged);
  EXPECT_GT(r.max_residual, 0.0);
  EXPECT_THROW(smallest_eigenpairs_or_throw(op, {.count = 6, .tol = 1e-300, .max_restarts = 1}), SolverError);
}

TEST(Eigensolver, CountBelowUsesInertia) {
  SparseOperator op{CsrMatrix::diagonal(std::vector<double>{1, 2, 3, 4}), CsrMatrix::identity(4)};
  EXPECT_EQ(count_eigenvalues_below(op, 2.5), 2);
  EXPECT_EQ(count_eigenvalues_below(op, 0.5), 0);
}

TEST(Eigensolver, RejectsBadRequests) {
  SparseOperator op{CsrMatrix::identity(3), CsrMatrix::identity(3)};
  EXPECT_THROW(smallest_eigenpairs(op, {.count = 0}), ValidationError);
  EXPECT_THROW(smallest_eigenpairs(op, {.count = 4}), ValidationError);
}
