#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "methcp/resampling.hpp"

using namespace methcp;

namespace {

double keep_mass(const std::vector<double>& w, double c) {
  double s = 0.0;
  for (double v : w) s += std::min(1.0, c * v);
  return s;
}

}  // namespace

TEST(Threshold, HandSolvedExample) {
  const std::vector<double> w{0.5, 0.3, 0.1, 0.1};
  EXPECT_NEAR(resample_threshold(w, 2), 2.0, 1e-12);
}

TEST(Threshold, EqualWeightsGiveTarget) {
  const std::vector<double> w(10, 0.1);
  EXPECT_NEAR(resample_threshold(w, 4), 4.0, 1e-12);
}

TEST(Threshold, InfiniteWhenNothingToPrune) {
  EXPECT_EQ(resample_threshold(std::vector<double>{0.5, 0.5, 0.0}, 2), kInf);
}

TEST(Threshold, SolvesKeepEquation) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    const std::size_t N = std::uniform_int_distribution<std::size_t>(3, 60)(rng);
    std::vector<double> w(N);
    std::exponential_distribution<double> e(1.0);
    for (auto& v : w) v = std::pow(e(rng), 3.0);
    double s = 0.0;
    for (double v : w) s += v;
    for (auto& v : w) v /= s;
    const std::size_t M = std::uniform_int_distribution<std::size_t>(1, N - 1)(rng);
    const double c = resample_threshold(w, M);
    EXPECT_NEAR(keep_mass(w, c), static_cast<double>(M), 1e-9);
  }
}

TEST(OptimalResample, DeterministicKeepsAndLength) {
  std::mt19937_64 gen(2);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const std::size_t N = std::uniform_int_distribution<std::size_t>(3, 40)(gen);
    std::vector<double> w(N);
    for (auto& v : w) v = std::pow(std::uniform_real_distribution<double>(0.0, 1.0)(gen), 4.0);
    double s = 0.0;
    for (double v : w) s += v;
    for (auto& v : w) v /= s;
    const std::size_t M = std::uniform_int_distribution<std::size_t>(1, N - 1)(gen);
    const auto res = optimal_resample(w, M, rng);
    ASSERT_EQ(res.ancestors.size(), M);
    std::vector<int> hits(N, 0);
    for (auto a : res.ancestors) ++hits[a];
    for (std::size_t n = 0; n < N; ++n) {
      EXPECT_LE(hits[n], 1);
      if (res.threshold * w[n] >= 1.0) { EXPECT_EQ(hits[n], 1); }
    }
  }
}

TEST(OptimalResample, HandExampleDrawFrequencies) {
  const std::vector<double> w{0.5, 0.3, 0.1, 0.1};
  Rng rng(17);
  const int runs = 20000;
  std::vector<double> hits(4, 0.0);
  for (int i = 0; i < runs; ++i) {
    const auto res = optimal_resample(w, 2, rng);
    ASSERT_EQ(res.ancestors.size(), 2u);
    EXPECT_EQ(res.kept, 1u);
    EXPECT_EQ(res.ancestors[0], 0u);
    ++hits[res.ancestors[1]];
  }
  const std::vector<double> expected{0.0, 0.6, 0.2, 0.2};
  for (std::size_t n = 1; n < 4; ++n) {
    const double se = std::sqrt(expected[n] * (1 - expected[n]) / runs);
    EXPECT_NEAR(hits[n] / runs, expected[n], 5 * se);
  }
}

TEST(OptimalResample, EqualWeightsArePureSystematic) {
  const std::vector<double> w(8, 0.125);
  Rng rng(5);
  const auto res = optimal_resample(w, 3, rng);
  EXPECT_NEAR(res.threshold, 3.0, 1e-12);
  EXPECT_EQ(res.kept, 0u);
  EXPECT_EQ(res.ancestors.size(), 3u);
}

TEST(OptimalResample, LargeEntryAlwaysKept) {
  const std::vector<double> w{0.05, 0.4, 0.05, 0.2, 0.1, 0.1, 0.1};
  Rng rng(6);
  for (int i = 0; i < 500; ++i) {
    const auto res = optimal_resample(w, 3, rng);
    EXPECT_NE(std::find(res.ancestors.begin(), res.ancestors.end(), 1u), res.ancestors.end());
  }
}

TEST(OptimalResample, MultiplicityMatchesKeepProbability) {
  const std::vector<double> w{0.02, 0.3, 0.08, 0.15, 0.05, 0.2, 0.1, 0.1};
  const std::size_t M = 4;
  const double c = resample_threshold(w, M);
  Rng rng(99);
  const int runs = 40000;
  std::vector<double> hits(w.size(), 0.0);
  for (int i = 0; i < runs; ++i) {
    for (auto a : optimal_resample(w, M, rng).ancestors) ++hits[a];
  }
  for (std::size_t n = 0; n < w.size(); ++n) {
    const double p = std::min(1.0, c * w[n]);
    const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / runs);
    EXPECT_NEAR(hits[n] / runs, p, 5 * se + 1e-12);
  }
}

TEST(Systematic, CountsAreFloorOrCeil) {
  const std::vector<double> w{0.1, 0.45, 0.05, 0.4};
  for (double u : {0.0, 0.3, 0.99}) {
    const auto idx = systematic_resample(w, 10, u);
    ASSERT_EQ(idx.size(), 10u);
    std::vector<int> hits(4, 0);
    for (auto i : idx) ++hits[i];
    for (std::size_t n = 0; n < 4; ++n) {
      EXPECT_GE(hits[n], static_cast<int>(std::floor(10 * w[n] - 1e-9)));
      EXPECT_LE(hits[n], static_cast<int>(std::ceil(10 * w[n] + 1e-9)));
    }
  }
}
