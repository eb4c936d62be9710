#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cmdtriage/kernels.hpp"

namespace cmdtriage::kernels {
namespace {

struct Random {
  std::vector<double> data;
  std::vector<std::uint8_t> degenerate;
  PointSet points;
};

Random make(std::size_t n, std::size_t dim, std::uint64_t seed, double degenerate_share = 0.0) {
  Random r;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::bernoulli_distribution coin(degenerate_share);
  r.data.resize(n * dim);
  for (auto& x : r.data) x = g(rng);
  r.degenerate.resize(n);
  for (auto& d : r.degenerate) d = coin(rng) ? 1 : 0;
  r.points = {n, dim, r.data, r.degenerate, 7.5};
  return r;
}

// Ordered-pair enumeration, halved.
double brute_distance(const PointSet& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.count; ++i)
    for (std::size_t j = 0; j < p.count; ++j) {
      if (i == j) continue;
      if (p.is_degenerate(i) || p.is_degenerate(j)) {
        s += p.sentinel;
        continue;
      }
      double sq = 0.0;
      for (std::size_t d = 0; d < p.dim; ++d) sq += std::pow(p.data[i * p.dim + d] - p.data[j * p.dim + d], 2);
      s += std::sqrt(sq);
    }
  return s / 2.0;
}

TEST(Kernels, PairCount) {
  EXPECT_DOUBLE_EQ(pair_count(2), 1.0);
  EXPECT_DOUBLE_EQ(pair_count(5), 10.0);
}

TEST(Kernels, SerialMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto r = make(2 + seed % 9, 1 + seed % 16, seed, 0.2);
    EXPECT_NEAR(pair_distance_sum_serial(r.points), brute_distance(r.points), 1e-9);
  }
}

TEST(Kernels, ParallelMatchesSerialDistance) {
  for (std::size_t n : {2u, 7u, 63u, 64u, 200u}) {
    const auto r = make(n, 12, n, 0.1);
    const double s = pair_distance_sum_serial(r.points);
    EXPECT_NEAR(pair_distance_sum_parallel(r.points), s, 1e-9 * std::max(1.0, s));
    EXPECT_NEAR(pair_distance_sum(r.points), s, 1e-9 * std::max(1.0, s));
  }
}

TEST(Kernels, ParallelMatchesSerialCosine) {
  for (std::size_t n : {2u, 9u, 64u, 150u}) {
    const auto r = make(n, 5, 100 + n, 0.1);
    const double s = pair_cosine_sum_serial(r.points);
    EXPECT_NEAR(pair_cosine_sum_parallel(r.points), s, 1e-9 * std::max(1.0, std::abs(s)));
    EXPECT_NEAR(pair_cosine_sum(r.points), s, 1e-9 * std::max(1.0, std::abs(s)));
  }
}

TEST(Kernels, DegenerateRowsUseSentinelAndZeroCosine) {
  std::vector<double> data{1, 0, 1, 0, 0, 1};
  std::vector<std::uint8_t> deg{0, 0, 1};
  const PointSet p{3, 2, data, deg, 4.0};
  EXPECT_DOUBLE_EQ(pair_distance_sum_serial(p), 0.0 + 4.0 + 4.0);
  EXPECT_DOUBLE_EQ(pair_cosine_sum_serial(p), 1.0);
}

TEST(Kernels, EmptyFlagsMeansNoneDegenerate) {
  std::vector<double> data{0, 0, 3, 4};
  const PointSet p{2, 2, data, {}, 100.0};
  EXPECT_DOUBLE_EQ(pair_distance_sum(p), 5.0);
}

TEST(Kernels, MaxThreadsPositive) { EXPECT_GE(max_threads(), 1); }

}  // namespace
}  // namespace cmdtriage::kernels
