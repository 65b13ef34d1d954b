#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "gperiodic/sparse.hpp"
#include "oracles.hpp"

using namespace gperiodic;

TEST(CsrMatrix, DuplicatesAreSummed) {
  std::vector<Triplet> t{{0, 0, 1.0}, {0, 0, 2.0}, {1, 0, -1.0}, {0, 1, -1.0}, {1, 1, 4.0}};
  auto a = CsrMatrix::from_triplets(2, t);
  EXPECT_EQ(a.nonzeros(), 4u);
  EXPECT_DOUBLE_EQ(a.at(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(a.at(1, 0), -1.0);
  EXPECT_TRUE(a.is_symmetric());
  std::vector<double> x{1.0, 2.0};
  auto y = a * x;
  EXPECT_DOUBLE_EQ(y[0], 1.0);
  EXPECT_DOUBLE_EQ(y[1], 7.0);
  EXPECT_DOUBLE_EQ(a.quadratic_form(x), 1.0 * 1.0 + 2.0 * 7.0);
}

TEST(CsrMatrix, RejectsOutOfRange) {
  std::vector<Triplet> t{{0, 2, 1.0}};
  EXPECT_THROW(CsrMatrix::from_triplets(2, t), ValidationError);
}

TEST(CsrMatrix, AsymmetryDetected) {
  std::vector<Triplet> t{{0, 1, 1.0}, {1, 0, 2.0}};
  EXPECT_FALSE(CsrMatrix::from_triplets(2, t).is_symmetric());
}

TEST(SparseOperator, ValidateCatchesBadMass) {
  auto k = CsrMatrix::identity(3);
  auto m = CsrMatrix::diagonal(std::vector<double>{1.0, 0.0, 1.0});
  EXPECT_THROW((SparseOperator{k, m}.validate()), ValidationError);
  auto neg = CsrMatrix::diagonal(std::vector<double>{-1.0, -1.0, -1.0});
  EXPECT_THROW((SparseOperator{neg, CsrMatrix::identity(3)}.validate()), ValidationError);
  EXPECT_NO_THROW((SparseOperator{k, CsrMatrix::identity(3)}.validate()));
}

TEST(SparseLdlt, SolvesRandomDefiniteSystems) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto op = oracle::random_definite_pair(80, rng, trial % 2 == 0);
    SparseLdlt f(op.stiffness);
    EXPECT_TRUE(f.positive_definite());
    std::normal_distribution<double> nd;
    std::vector<double> b(80);
    for (auto& x : b) x = nd(rng);
    auto x = f.solve(b);
    auto ax = op.stiffness * x;
    double err = 0.0;
    for (int i = 0; i < 80; ++i) err = std::max(err, std::abs(ax[i] - b[i]));
    EXPECT_LT(err, 1e-9);
  }
}

TEST(SparseLdlt, InertiaMatchesDenseSpectrum) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    auto op = oracle::random_definite_pair(60, rng, trial % 2 == 1);
    auto ev = oracle::generalized_eigenvalues(op.stiffness, op.mass);
    for (int probe : {0, 3, 17, 59}) {
      // midpoint between consecutive eigenvalues avoids ties
      double x = probe + 1 < 60 ? 0.5 * (ev[probe] + ev[probe + 1]) : ev[probe] + 1.0;
      SparseLdlt f(op.stiffness, &op.mass, x);
      EXPECT_EQ(f.negative_pivots(), probe + 1);
    }
  }
}

TEST(MatrixMarket, RoundTrip) {
  std::mt19937_64 rng(5);
  auto op = oracle::random_definite_pair(30, rng, false);
  std::stringstream ss;
  write_matrix_market(ss, op.mass, "mass");
  auto back = read_matrix_market(ss);
  ASSERT_EQ(back.dimension(), 30);
  for (const auto& t : op.mass.triplets()) EXPECT_DOUBLE_EQ(back.at(t.row, t.col), t.value);
  EXPECT_EQ(back.nonzeros(), op.mass.nonzeros());
}

TEST(MatrixMarket, MalformedInputNamesLine) {
  std::stringstream bad("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n3 1 2.0\n");
  try {
    read_matrix_market(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4);
  }
  std::stringstream banner("%%NotMM\n");
  EXPECT_THROW(read_matrix_market(banner), ParseError);
}
