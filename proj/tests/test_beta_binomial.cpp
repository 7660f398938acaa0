#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "methcp/beta_binomial.hpp"
#include "support/oracles.hpp"

using namespace methcp;

TEST(BetaBinomial, EmptyBinomial) {
  EXPECT_EQ(beta_binomial_log_pmf(0, 0, 2.0, 3.0), 0.0);
}

TEST(BetaBinomial, UniformPriorIsUniformOverCounts) {
  EXPECT_NEAR(beta_binomial_log_pmf(1, 2, 1.0, 1.0), std::log(1.0 / 3.0), 1e-14);
}

TEST(BetaBinomial, MatchesQuadrature) {
  EXPECT_NEAR(std::exp(beta_binomial_log_pmf(3, 10, 17.1, 0.9)), oracle::bb_pmf_quadrature(3, 10, 17.1, 0.9), 1e-8);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const auto n = std::uniform_int_distribution<std::uint64_t>(0, 30)(rng);
    const auto y = std::uniform_int_distribution<std::uint64_t>(0, n)(rng);
    const double a = std::uniform_real_distribution<double>(1.0, 20.0)(rng);
    const double b = std::uniform_real_distribution<double>(1.0, 20.0)(rng);
    EXPECT_NEAR(std::exp(beta_binomial_log_pmf(y, n, a, b)), oracle::bb_pmf_quadrature(y, n, a, b), 1e-8);
    EXPECT_NEAR(beta_binomial_log_pmf(y, n, a, b), oracle::bb_log_pmf(y, n, a, b), 1e-9);
  }
}

TEST(BetaBinomial, SumsToOne) {
  double total = 0.0;
  for (std::uint64_t y = 0; y <= 25; ++y) total += std::exp(beta_binomial_log_pmf(y, 25, 0.9, 17.1));
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(SitePotential, MissingSiteIsNeutral) {
  const auto pal = default_palette();
  GroupCounts c(1, 3);
  for (std::size_t r = 0; r < pal.size(); ++r) EXPECT_EQ(site_log_potential(c.site(0), r, pal), 0.0);
}

TEST(SitePotential, UniformRegimeSingleSample) {
  const auto pal = default_palette();
  GroupCounts c(1, 1);
  c.set(0, 0, 1, 2);
  EXPECT_NEAR(site_log_potential(c.site(0), 5, pal), std::log(1.0 / 3.0), 1e-12);
}

TEST(SitePotential, SamplesMultiply) {
  const auto pal = default_palette();
  GroupCounts both(1, 2), first(1, 1), second(1, 1);
  both.set(0, 0, 3, 7);
  both.set(0, 1, 5, 6);
  first.set(0, 0, 3, 7);
  second.set(0, 0, 5, 6);
  for (std::size_t r = 0; r < pal.size(); ++r) {
    EXPECT_NEAR(site_log_potential(both.site(0), r, pal),
                site_log_potential(first.site(0), r, pal) + site_log_potential(second.site(0), r, pal), 1e-12);
  }
}

TEST(SitePotential, EvaluatorAgreesWithDirectSum) {
  const auto pal = default_palette();
  std::mt19937_64 rng(3);
  GroupCounts c(20, 3);
  for (std::size_t t = 0; t < 20; ++t) {
    for (std::size_t s = 0; s < 3; ++s) {
      const auto n = std::uniform_int_distribution<std::uint32_t>(0, 15)(rng);
      c.set(t, s, std::uniform_int_distribution<std::uint32_t>(0, n)(rng), n);
    }
  }
  PotentialEvaluator eval(pal);
  std::vector<double> out(pal.size());
  for (std::size_t t = 0; t < 20; ++t) {
    eval.evaluate(c.site(t), out);
    for (std::size_t r = 0; r < pal.size(); ++r) EXPECT_NEAR(out[r], site_log_potential(c.site(t), r, pal), 1e-10);
  }
}

TEST(GroupCounts, RejectsMethylatedAboveTotal) {
  GroupCounts c(1, 1);
  EXPECT_THROW(c.set(0, 0, 3, 2), std::domain_error);
}
