#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "methcp/multiple_testing.hpp"
#include "methcp/paired_filter.hpp"
#include "methcp/site_test.hpp"
#include "support/instances.hpp"
#include "support/oracles.hpp"

using namespace methcp;
namespace ts = testing_support;

namespace {

std::vector<double> random_lfdr(std::mt19937_64& gen, std::size_t n) {
  std::vector<double> p(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : p) v = std::pow(u(gen), 3.0);
  return p;
}

// Largest k whose mean of the k smallest values is <= alpha, by direct search.
std::vector<std::uint8_t> brute_stepup(const std::vector<double>& p, double alpha) {
  auto sorted = p;
  std::sort(sorted.begin(), sorted.end());
  std::size_t best = 0;
  for (std::size_t k = 1; k <= p.size(); ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += sorted[j];
    if (s / static_cast<double>(k) <= alpha) best = k;
  }
  std::vector<std::uint8_t> out(p.size(), 0);
  if (best == 0) return out;
  const double cut = sorted[best - 1];
  for (std::size_t t = 0; t < p.size(); ++t) out[t] = p[t] <= cut ? 1 : 0;
  return out;
}

std::vector<std::uint8_t> brute_bh(const std::vector<double>& p, double alpha, double scale) {
  auto sorted = p;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(p.size());
  double cut = -1.0;
  for (std::size_t k = 1; k <= p.size(); ++k) {
    if (sorted[k - 1] <= static_cast<double>(k) * alpha / (scale * n)) cut = sorted[k - 1];
  }
  std::vector<std::uint8_t> out(p.size(), 0);
  for (std::size_t t = 0; t < p.size(); ++t) out[t] = p[t] <= cut ? 1 : 0;
  return out;
}

bool subset(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && !b[i]) return false;
  }
  return true;
}

}  // namespace

TEST(Stepup, HandExample) {
  const auto d = stepup(std::vector<double>{0.005, 0.02, 0.5}, 0.05);
  EXPECT_EQ(d.rejections, 2u);
  EXPECT_EQ(d.reject, (std::vector<std::uint8_t>{1, 1, 0}));
  EXPECT_NEAR(d.estimated_fdr, 0.0125, 1e-15);
}

TEST(Stepup, Extremes) {
  EXPECT_EQ(stepup(std::vector<double>(5, 0.0), 0.05).rejections, 5u);
  EXPECT_EQ(stepup(std::vector<double>{0.2, 0.3}, 0.1).rejections, 0u);
  EXPECT_EQ(stepup(std::vector<double>{0.2, 0.3}, 0.1).estimated_fdr, 0.0);
  EXPECT_THROW((void)stepup(std::vector<double>{0.1}, 0.0), std::invalid_argument);
}

TEST(Stepup, MatchesBruteForce) {
  std::mt19937_64 gen(1);
  for (int i = 0; i < 300; ++i) {
    const auto p = random_lfdr(gen, 1 + i % 40);
    const double alpha = std::uniform_real_distribution<double>(0.01, 0.3)(gen);
    const auto d = stepup(p, alpha);
    EXPECT_EQ(d.reject, brute_stepup(p, alpha));
    if (d.rejections > 0) { EXPECT_LE(d.estimated_fdr, alpha); }
  }
}

TEST(Stepup, MonotoneInAlphaAndPermutationInvariant) {
  std::mt19937_64 gen(2);
  for (int i = 0; i < 100; ++i) {
    auto p = random_lfdr(gen, 50);
    const auto lo = stepup(p, 0.05);
    const auto hi = stepup(p, 0.1);
    EXPECT_TRUE(subset(lo.reject, hi.reject));
    std::vector<std::size_t> perm(p.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<double> q(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) q[j] = p[perm[j]];
    const auto dq = stepup(q, 0.05);
    for (std::size_t j = 0; j < p.size(); ++j) EXPECT_EQ(dq.reject[j], lo.reject[perm[j]]);
  }
}

TEST(Stepup, TiesBrokenBySiteOrder) {
  const auto d = stepup(std::vector<double>{0.0, 0.1, 0.1, 0.1}, 0.05);
  EXPECT_EQ(d.reject, (std::vector<std::uint8_t>{1, 1, 0, 0}));
}

TEST(StepupWeighted, UnitWeightsReduceToStepup) {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_lfdr(gen, 1 + i % 60);
    const std::vector<double> one(p.size(), 1.0);
    const double alpha = std::uniform_real_distribution<double>(0.01, 0.3)(gen);
    EXPECT_EQ(stepup_weighted(p, one, one, alpha).reject, stepup(p, alpha).reject);
  }
}

TEST(StepupWeighted, ScaleInvariant) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_lfdr(gen, 30);
    std::vector<double> a(30), b(30), a2(30), b2(30);
    for (std::size_t t = 0; t < 30; ++t) {
      a[t] = u(gen);
      b[t] = u(gen);
      a2[t] = 2 * a[t];
      b2[t] = 2 * b[t];
    }
    EXPECT_EQ(stepup_weighted(p, a, b, 0.1).reject, stepup_weighted(p, a2, b2, 0.1).reject);
  }
}

TEST(StepupWeighted, SingleHypothesis) {
  const std::vector<double> one{1.0};
  EXPECT_EQ(stepup_weighted(std::vector<double>{0.01}, one, one, 0.05).rejections, 1u);
  EXPECT_EQ(stepup_weighted(std::vector<double>{0.2}, one, one, 0.05).rejections, 0u);
}

TEST(StepupWeighted, PrefixExcessIsNonPositive) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_lfdr(gen, 25);
    std::vector<double> a(25), b(25);
    for (std::size_t t = 0; t < 25; ++t) {
      a[t] = u(gen);
      b[t] = u(gen);
    }
    const auto d = stepup_weighted(p, a, b, 0.1);
    double excess = 0.0;
    for (std::size_t t = 0; t < 25; ++t) {
      if (d.reject[t]) excess += a[t] * (p[t] - 0.1);
    }
    EXPECT_LE(excess, 1e-12);
  }
}

TEST(BuildRegions, Examples) {
  const auto r = build_regions(std::vector<double>{0.1, 0.995, 0.999, 0.2}, 0.99);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0], (Region{1, 3, 2.0}));
  EXPECT_TRUE(build_regions(std::vector<double>(10, 0.5), 0.99).empty());
  const auto two = build_regions(std::vector<double>{0.995, 0.2, 0.995, 0.996}, 0.99);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[1], (Region{2, 4, 2.0}));
}

TEST(RegionLfdr, Examples) {
  TrajectorySet trajs;
  trajs.sites = 4;
  trajs.count = 2;
  trajs.labels = {{0, 0, 1}, {0, 0, 1}, {0, 0, 1}, {1, 0, 0}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
  const auto pal = default_palette();
  const Region whole{0, 4, 4.0};
  EXPECT_DOUBLE_EQ(region_signal_fraction(trajs.path(0), whole, SignalKind::Split, pal), 0.75);
  const std::vector<Region> regions{whole};
  EXPECT_DOUBLE_EQ(region_lfdr(trajs, regions, 0.0, SignalKind::Split, pal)[0], 0.5);
  EXPECT_DOUBLE_EQ(region_lfdr(trajs, regions, 0.75, SignalKind::Split, pal)[0], 1.0);
  EXPECT_DOUBLE_EQ(region_lfdr(trajs, regions, 0.5, SignalKind::Split, pal)[0], 0.5);
  const std::vector<Region> empty{{2, 2, 1.0}};
  EXPECT_THROW((void)region_lfdr(trajs, empty, 0.0, SignalKind::Split, pal), std::invalid_argument);
}

TEST(RegionLfdr, MatchesExactPosteriorOnToyModel) {
  std::mt19937_64 gen(6);
  const std::size_t R = 3, T = 4;
  auto palette = ts::random_palette(gen, R);
  auto constants = ts::random_constants(gen);
  constants.q_split = 0.3;
  const CaseControlParams params(ts::random_params(gen, palette), constants);
  const auto control = ts::oracle_potentials(ts::random_counts(gen, T, 2, 4), palette);
  const auto case_pot = ts::oracle_potentials(ts::random_counts(gen, T, 2, 4), palette);
  const auto exact = oracle::enumerate_paired_paths(ts::joint_potentials(control, case_pot), oracle::paired_model_from(params));
  const std::vector<Region> regions{{0, 4, 4.0}, {1, 3, 2.0}, {3, 4, 1.0}};
  const double gamma = 0.3;
  std::vector<double> truth(regions.size(), 0.0);
  for (const auto& [path, p] : exact) {
    for (std::size_t j = 0; j < regions.size(); ++j) {
      std::size_t hits = 0;
      for (std::size_t t = regions[j].start; t < regions[j].end; ++t) hits += path[t].merged ? 0 : 1;
      if (static_cast<double>(hits) / static_cast<double>(regions[j].size()) <= gamma) truth[j] += p;
    }
  }
  PairedRunConfig cfg;
  cfg.max_lineages = 1000000;
  cfg.trajectories = 2000;
  cfg.runs = 10;
  const auto run = run_case_control(ts::flatten(control), ts::flatten(case_pot), T, params, cfg);
  const auto est = region_lfdr(run.trajectories, regions, gamma, SignalKind::Split, palette);
  const double K = static_cast<double>(run.trajectories.count);
  for (std::size_t j = 0; j < regions.size(); ++j) {
    EXPECT_NEAR(est[j], truth[j], 5 * std::sqrt(truth[j] * (1 - truth[j]) / K) + 1e-12);
  }
}

TEST(RegionStepup, Examples) {
  const auto d = region_stepup(std::vector<double>{0.001, 0.03}, std::vector<double>{1, 9}, 0.01);
  EXPECT_EQ(d.reject, (std::vector<std::uint8_t>{1, 0}));
  EXPECT_EQ(region_stepup(std::vector<double>{0.2, 0.3}, std::vector<double>{1, 1}, 0.1).rejections, 0u);
  EXPECT_THROW((void)region_stepup(std::vector<double>{0.2}, std::vector<double>{0.0}, 0.1), std::invalid_argument);
}

TEST(RegionStepup, EqualWeightsReduceToStepup) {
  std::mt19937_64 gen(7);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_lfdr(gen, 1 + i % 30);
    const std::vector<double> w(p.size(), 3.5);
    EXPECT_EQ(region_stepup(p, w, 0.07).reject, stepup(p, 0.07).reject);
    const auto lo = region_stepup(p, w, 0.03);
    EXPECT_TRUE(subset(lo.reject, region_stepup(p, w, 0.07).reject));
  }
}

TEST(PValueAdjust, BhHandExample) {
  const auto d = pvalue_adjust(std::vector<double>{0.001, 0.02, 0.9}, PValueMethod::BH, 0.05);
  EXPECT_EQ(d.reject, (std::vector<std::uint8_t>{1, 1, 0}));
}

TEST(PValueAdjust, MatchesBruteForce) {
  std::mt19937_64 gen(8);
  for (int i = 0; i < 300; ++i) {
    const auto p = random_lfdr(gen, 1 + i % 50);
    const double alpha = 0.05;
    double harmonic = 0.0;
    for (std::size_t k = 1; k <= p.size(); ++k) harmonic += 1.0 / static_cast<double>(k);
    EXPECT_EQ(pvalue_adjust(p, PValueMethod::BH, alpha).reject, brute_bh(p, alpha, 1.0));
    EXPECT_EQ(pvalue_adjust(p, PValueMethod::BY, alpha).reject, brute_bh(p, alpha, harmonic));
    EXPECT_EQ(pvalue_adjust(p, PValueMethod::AdaptiveBH, alpha).reject, brute_bh(p, alpha, null_proportion(p)));
    const auto bonf = pvalue_adjust(p, PValueMethod::Bonferroni, alpha);
    for (std::size_t t = 0; t < p.size(); ++t) {
      EXPECT_EQ(bonf.reject[t], p[t] <= alpha / static_cast<double>(p.size()) ? 1 : 0);
    }
  }
}

TEST(PValueAdjust, Orderings) {
  std::mt19937_64 gen(9);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_lfdr(gen, 40);
    const auto bh = pvalue_adjust(p, PValueMethod::BH, 0.05).reject;
    EXPECT_TRUE(subset(pvalue_adjust(p, PValueMethod::BY, 0.05).reject, bh));
    EXPECT_TRUE(subset(pvalue_adjust(p, PValueMethod::Bonferroni, 0.05).reject, bh));
    EXPECT_TRUE(subset(bh, pvalue_adjust(p, PValueMethod::AdaptiveBH, 0.05).reject));
    for (auto m : {PValueMethod::Bonferroni, PValueMethod::BH, PValueMethod::BY, PValueMethod::AdaptiveBH}) {
      EXPECT_TRUE(subset(pvalue_adjust(p, m, 0.02).reject, pvalue_adjust(p, m, 0.05).reject));
    }
  }
}

TEST(PValueAdjust, SingleHypothesis) {
  for (auto m : {PValueMethod::Bonferroni, PValueMethod::BH, PValueMethod::BY, PValueMethod::AdaptiveBH}) {
    EXPECT_EQ(pvalue_adjust(std::vector<double>{0.04}, m, 0.05).rejections, 1u);
    EXPECT_EQ(pvalue_adjust(std::vector<double>{0.06}, m, 0.05).rejections, 0u);
  }
  EXPECT_EQ(parse_pvalue_method("abh"), PValueMethod::AdaptiveBH);
  EXPECT_THROW((void)parse_pvalue_method("holm"), std::invalid_argument);
}

TEST(ScoreDecisions, Examples) {
  const std::vector<std::uint8_t> truth{1, 0, 1, 0};
  const auto perfect = score_decisions(truth, truth);
  EXPECT_EQ(perfect.fdp, 0.0);
  EXPECT_EQ(perfect.fnp, 0.0);
  const auto none = score_decisions(std::vector<std::uint8_t>(4, 0), truth);
  EXPECT_EQ(none.fdp, 0.0);
  EXPECT_EQ(none.fnp, 1.0);
}

TEST(ScoreDecisions, MatchesDirectCount) {
  std::mt19937_64 gen(10);
  std::bernoulli_distribution coin(0.4);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + static_cast<std::size_t>(i % 50);
    std::vector<std::uint8_t> d(n), h(n);
    std::vector<double> a(n), b(n);
    for (std::size_t t = 0; t < n; ++t) {
      d[t] = coin(gen);
      h[t] = coin(gen);
      a[t] = u(gen);
      b[t] = u(gen);
    }
    double V = 0, Rw = 0, U = 0, H1 = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (d[t] && !h[t]) V += a[t];
      if (d[t]) Rw += a[t];
      if (!d[t] && h[t]) U += b[t];
      if (h[t]) H1 += b[t];
    }
    const auto s = score_decisions(d, h, a, b);
    EXPECT_NEAR(s.fdp, V / std::max(Rw, 1.0), 1e-12);
    EXPECT_NEAR(s.fnp, H1 > 0 ? U / H1 : 0.0, 1e-12);
    EXPECT_LE(s.false_positive, s.rejected + 1e-12);
    EXPECT_NEAR(s.true_positive + s.false_positive, s.rejected, 1e-12);
  }
}

TEST(Signals, ChaoticRegimeSeparatesMeanAndRegimeDifferences) {
  const auto pal = default_palette();
  const SiteLabel x{0, 4, 5};
  EXPECT_TRUE(signal_value(SignalKind::Split, x, pal));
  EXPECT_TRUE(signal_value(SignalKind::RegimeDiff, x, pal));
  EXPECT_FALSE(signal_value(SignalKind::MeanDiff, x, pal));
  EXPECT_TRUE(signal_value(SignalKind::VarUp, x, pal));
  const SiteLabel hypo{0, 0, 1};
  EXPECT_TRUE(signal_value(SignalKind::Hypo, hypo, pal));
  EXPECT_FALSE(signal_value(SignalKind::Hyper, hypo, pal));
  for (auto kind : kAllSignals) EXPECT_EQ(parse_signal(signal_name(kind)), kind);
}

TEST(SiteLfdr, FractionOfTrajectoriesWithoutSignal) {
  TrajectorySet trajs;
  trajs.sites = 2;
  trajs.count = 2;
  trajs.labels = {{1, 0, 0}, {0, 0, 1}, {1, 2, 2}, {1, 3, 3}};
  const auto p = site_lfdr(trajs, SignalKind::Split, default_palette());
  EXPECT_DOUBLE_EQ(p[0], 1.0);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(SiteWald, MissingSitesGetUnitPValue) {
  GroupCounts a(2, 2), b(2, 2);
  a.set(0, 0, 3, 10);
  b.set(0, 0, 9, 10);
  b.set(1, 1, 2, 8);
  const auto p = site_wald_pvalues(a, b);
  EXPECT_LT(p[0], 0.05);
  EXPECT_EQ(p[1], 1.0);
}

TEST(SiteWald, RoughlyUniformUnderNull) {
  std::mt19937_64 gen(11);
  const std::size_t T = 5000, S = 4;
  GroupCounts a(T, S), b(T, S);
  std::poisson_distribution<std::uint32_t> depth(20.0);
  std::gamma_distribution<double> ga(6.0, 1.0), gb(4.0, 1.0);
  for (auto* g : {&a, &b}) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t s = 0; s < S; ++s) {
        const double x = ga(gen), y = gb(gen);
        const auto n = depth(gen);
        std::binomial_distribution<std::uint32_t> bin(n, x / (x + y));
        g->set(t, s, bin(gen), n);
      }
    }
  }
  const auto p = site_wald_pvalues(a, b);
  const double rate = static_cast<double>(std::count_if(p.begin(), p.end(), [](double v) { return v < 0.05; })) / T;
  EXPECT_GT(rate, 0.02);
  EXPECT_LT(rate, 0.1);
}
