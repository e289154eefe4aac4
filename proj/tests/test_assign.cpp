#include <gtest/gtest.h>

#include "otrank/assign.hpp"
#include "otrank/rng.hpp"

using namespace otrank;

namespace {

CostMatrix random_cost(Rng& rng, std::size_t n, bool integer_valued) {
  std::vector<double> e(n * n);
  for (double& v : e) v = integer_valued ? static_cast<double>(rng.below(5)) : rng.uniform(0.0, 10.0);
  return CostMatrix(n, std::move(e));
}

}  // namespace

TEST(BuildCost, Examples) {
  const CostMatrix c1 = build_cost(PointCloud({{0.0}}), validate_custom(PointCloud({{1.0}})));
  EXPECT_EQ(c1(0, 0), 1.0);

  const CostMatrix c2 =
      build_cost(PointCloud({{0, 0}, {1, 1}}), validate_custom(PointCloud({{0, 0}, {1, 1}})));
  EXPECT_EQ(c2.entries(), (std::vector<double>{0, 2, 2, 0}));

  const CostMatrix c3 = build_cost(PointCloud({{0.3}}), validate_custom(PointCloud({{0.5}})));
  EXPECT_NEAR(c3(0, 0), 0.04, 1e-16);
}

TEST(BuildCost, Errors) {
  EXPECT_THROW(build_cost(PointCloud({{0.0}, {1.0}}), lattice1d(3)), ShapeError);
  EXPECT_THROW(build_cost(PointCloud({{0.0, 1.0}}), lattice1d(1)), ShapeError);
  EXPECT_THROW(build_cost(PointCloud({{NAN}}), lattice1d(1)), DataError);
}

TEST(CostMatrix, Validation) {
  EXPECT_THROW(CostMatrix(2, {1, 2, 3}), ShapeError);
  EXPECT_THROW(CostMatrix({{1, -1}, {0, 0}}), DataError);
  EXPECT_THROW(CostMatrix({{1, INFINITY}, {0, 0}}), DataError);
  EXPECT_THROW(CostMatrix({{1, 2}, {0}}), ShapeError);
}

TEST(Solve, Examples) {
  const Assignment a = solve(CostMatrix({{0, 9}, {9, 0}}));
  EXPECT_EQ(a.perm, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(a.total_cost, 0.0);

  const Assignment b = solve(CostMatrix({{5}}));
  EXPECT_EQ(b.perm, (std::vector<std::size_t>{0}));
  EXPECT_EQ(b.total_cost, 5.0);

  const Assignment c = solve(CostMatrix({{9, 0}, {0, 9}}));
  EXPECT_EQ(c.perm, (std::vector<std::size_t>{1, 0}));
}

TEST(BruteForce, Examples) {
  EXPECT_EQ(brute_force(CostMatrix({{0, 9}, {9, 0}})).total_cost, 0.0);
  const Assignment a = brute_force(CostMatrix({{1, 2}, {2, 1}}));
  EXPECT_EQ(a.perm, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(a.total_cost, 2.0);
  EXPECT_EQ(brute_force(CostMatrix({{4, 1, 3}, {2, 0, 5}, {3, 2, 2}})).total_cost, 5.0);
  EXPECT_EQ(solve(CostMatrix({{4, 1, 3}, {2, 0, 5}, {3, 2, 2}})).total_cost, 5.0);
}

TEST(BruteForce, SizeGuard) {
  EXPECT_THROW(brute_force(CostMatrix(11, std::vector<double>(121, 1.0))), CapacityError);
}

TEST(BruteForce, TiesGoToLexicographicallyFirst) {
  const Assignment a = brute_force(CostMatrix(3, std::vector<double>(9, 1.0)));
  EXPECT_EQ(a.perm, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Solve, MatchesBruteForceOnRandomMatrices) {
  Rng rng(11);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t n = 1 + rng.below(8);
    const CostMatrix c = random_cost(rng, n, t % 2 == 0);
    const Assignment s = solve(c);
    const Assignment b = brute_force(c);
    ASSERT_TRUE(is_permutation_of_range(s.perm));
    ASSERT_NEAR(s.total_cost, b.total_cost, 1e-12) << "trial " << t << " n " << n;
  }
}

TEST(Solve, DualCertificate) {
  Rng rng(12);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng.below(40);
    const CostMatrix c = random_cost(rng, n, t % 3 == 0);
    const Assignment s = solve(c);
    ASSERT_EQ(s.row_potential.size(), n);
    ASSERT_EQ(s.col_potential.size(), n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        ASSERT_LE(s.row_potential[i] + s.col_potential[j], c(i, j) + 1e-9);
      }
      ASSERT_NEAR(s.row_potential[i] + s.col_potential[s.perm[i]], c(i, s.perm[i]), 1e-9);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += c(i, s.perm[i]);
    EXPECT_NEAR(s.total_cost, sum, 1e-9 * std::max(1.0, sum));
  }
}

TEST(Solve, DeterministicOnTies) {
  const CostMatrix flat(4, std::vector<double>(16, 3.0));
  const Assignment a = solve(flat);
  EXPECT_EQ(a.perm, solve(flat).perm);
  EXPECT_TRUE(is_permutation_of_range(a.perm));
  EXPECT_EQ(a.total_cost, 12.0);
}

TEST(Solve, EmptyMatrix) {
  const Assignment a = solve(CostMatrix(0, {}));
  EXPECT_TRUE(a.perm.empty());
  EXPECT_EQ(a.total_cost, 0.0);
}

TEST(Solve, AffineTransformOfDataKeepsPermutation) {
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(30);
    const std::size_t d = 1 + rng.below(3);
    PointCloud x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) x(i, k) = rng.normal();
    }
    PointCloud z = x;
    const double b = 0.1 + 5.0 * rng.uniform();
    std::vector<double> a(d);
    for (double& v : a) v = rng.normal(0.0, 10.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) z(i, k) = a[k] + b * x(i, k);
    }
    const RankGrid g = d == 1 ? lattice1d(n) : halton_grid(n, d);
    EXPECT_EQ(solve(build_cost(x, g)).perm, solve(build_cost(z, g)).perm) << "trial " << t;
  }
}
