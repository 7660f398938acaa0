#ifndef METHCP_TESTS_INSTANCES_HPP
#define METHCP_TESTS_INSTANCES_HPP

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "methcp/beta_binomial.hpp"
#include "methcp/paired_model.hpp"
#include "methcp/regimes.hpp"
#include "methcp/single_model.hpp"
#include "support/oracles.hpp"

namespace testing_support {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline methcp::RegimePalette random_palette(std::mt19937_64& rng, std::size_t R) {
  std::vector<std::pair<double, double>> ms;
  for (std::size_t r = 0; r < R; ++r) {
    const double lo = 0.15 + 0.7 * static_cast<double>(r) / static_cast<double>(R);
    ms.emplace_back(uniform(rng, lo, lo + 0.7 / static_cast<double>(R)), uniform(rng, 0.05, 0.2));
  }
  return methcp::RegimePalette::from_moments(ms);
}

inline methcp::SingleGroupParams random_params(std::mt19937_64& rng, const methcp::RegimePalette& palette,
                                               std::int64_t max_shift = 3) {
  const std::size_t R = palette.size();
  std::vector<double> theta(methcp::theta_size(R));
  for (auto& v : theta) v = uniform(rng, -1.5, 1.5);
  std::vector<std::int64_t> shifts(R);
  std::vector<double> sizes(R);
  for (std::size_t r = 0; r < R; ++r) {
    shifts[r] = std::uniform_int_distribution<std::int64_t>(1, max_shift)(rng);
    sizes[r] = uniform(rng, 0.5, 3.0);
  }
  return {palette, std::move(theta), std::move(shifts), std::move(sizes)};
}

inline methcp::GroupCounts random_counts(std::mt19937_64& rng, std::size_t T, std::size_t S, std::uint32_t max_depth = 8) {
  methcp::GroupCounts c(T, S);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      const auto n = std::uniform_int_distribution<std::uint32_t>(0, max_depth)(rng);
      const auto y = std::uniform_int_distribution<std::uint32_t>(0, n)(rng);
      c.set(t, s, y, n);
    }
  }
  return c;
}

// log g_t(r) from the oracle beta-binomial, T x R.
inline std::vector<std::vector<double>> oracle_potentials(const methcp::GroupCounts& c, const methcp::RegimePalette& palette) {
  std::vector<std::vector<double>> out(c.sites(), std::vector<double>(palette.size(), 0.0));
  for (std::size_t t = 0; t < c.sites(); ++t) {
    for (std::size_t r = 0; r < palette.size(); ++r) {
      for (std::size_t s = 0; s < c.samples(); ++s) {
        out[t][r] += oracle::bb_log_pmf(c.methylated(t, s), c.total(t, s), palette[r].shape_a, palette[r].shape_b);
      }
    }
  }
  return out;
}

inline std::vector<double> flatten(const std::vector<std::vector<double>>& rows) {
  std::vector<double> out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

inline methcp::CaseControlConstants random_constants(std::mt19937_64& rng) {
  methcp::CaseControlConstants k;
  k.q_split = uniform(rng, 0.05, 0.4);
  k.q_merge = uniform(rng, 0.05, 0.5);
  k.case_success = uniform(rng, 0.3, 0.9);
  k.case_size = uniform(rng, 1.0, 3.0);
  k.case_shift = std::uniform_int_distribution<std::int64_t>(0, 2)(rng);
  k.min_z_gap = std::uniform_int_distribution<std::int64_t>(0, 2)(rng);
  return k;
}

// log g_t(r-, r~) = control_lp[t][r-] + case_lp[t][r~], stored R x R per site.
inline std::vector<std::vector<double>> joint_potentials(const std::vector<std::vector<double>>& control,
                                                         const std::vector<std::vector<double>>& case_lp) {
  std::vector<std::vector<double>> out(control.size());
  const std::size_t R = control.empty() ? 0 : control[0].size();
  for (std::size_t t = 0; t < control.size(); ++t) {
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t s = 0; s < R; ++s) out[t].push_back(control[t][r] + case_lp[t][s]);
    }
  }
  return out;
}

}  // namespace testing_support

#endif  // METHCP_TESTS_INSTANCES_HPP
