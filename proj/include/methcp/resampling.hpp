#ifndef METHCP_RESAMPLING_HPP
#define METHCP_RESAMPLING_HPP

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "methcp/numeric.hpp"

namespace methcp {

using Rng = std::mt19937_64;

[[nodiscard]] inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Systematic resampling of `count` indices from (not necessarily normalized)
/// weights using the single offset `offset` in [0, 1).
[[nodiscard]] inline std::vector<std::size_t> systematic_resample(std::span<const double> weights, std::size_t count,
                                                                  double offset) {
  std::vector<std::size_t> out;
  out.reserve(count);
  double total = 0.0;
  for (double w : weights) total += w;
  if (count == 0) return out;
  if (!(total > 0.0)) throw std::invalid_argument("systematic resampling needs positive total weight");
  const double step = total / static_cast<double>(count);
  double position = offset * step;
  double cumulative = 0.0;
  std::size_t i = 0;
  for (std::size_t j = 0; j < count; ++j) {
    while (i + 1 < weights.size() && cumulative + weights[i] <= position) {
      cumulative += weights[i];
      ++i;
    }
    // Skip trailing zero-weight entries that rounding could otherwise select.
    while (weights[i] == 0.0 && i + 1 < weights.size()) {
      cumulative += weights[i];
      ++i;
    }
    out.push_back(i);
    position += step;
  }
  return out;
}

struct ResampleResult {
  std::vector<std::size_t> ancestors;  // deterministic keeps first, then systematic draws
  double threshold = kInf;             // C; infinity when nothing was pruned
  std::size_t kept = 0;                // number of deterministic keeps
};

/// Solves sum_n min(1, C W^n) = M by scanning the weights in decreasing order.
/// Returns infinity when at most M weights are nonzero.
[[nodiscard]] inline double resample_threshold(std::span<const double> weights, std::size_t target) {
  const auto nonzero = static_cast<std::size_t>(std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; }));
  if (nonzero <= target) return kInf;
  if (target == 0) throw std::invalid_argument("resampling target must be positive");
  // Only the `target` largest weights can be kept deterministically.
  std::vector<double> sorted(weights.begin(), weights.end());
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(target), sorted.end(), std::greater<>());
  double suffix = 0.0;
  for (std::size_t k = target; k < sorted.size(); ++k) suffix += sorted[k];
  // suffix_head[k] = sum of sorted[k..]
  std::vector<double> suffix_head(target + 1, suffix);
  for (std::size_t k = target; k-- > 0;) suffix_head[k] = suffix_head[k + 1] + sorted[k];
  for (std::size_t k = 0; k < target; ++k) {
    const double c = static_cast<double>(target - k) / suffix_head[k];
    if (c * sorted[k] < 1.0) return c;
  }
  // Unreachable for exact arithmetic; rounding can only leave the last candidate.
  return 1.0 / sorted[target - 1];
}

/// Optimal finite-state resampling: every index with C W^n >= 1 is kept once,
/// and the remaining M - K slots are filled by systematic resampling with
/// weights proportional to W^n over the indices with C W^n < 1.
[[nodiscard]] inline ResampleResult optimal_resample(std::span<const double> weights, std::size_t target, Rng& rng) {
  ResampleResult res;
  const double c = resample_threshold(weights, target);
  res.threshold = c;
  if (c == kInf) {
    for (std::size_t n = 0; n < weights.size(); ++n) {
      if (weights[n] > 0.0) res.ancestors.push_back(n);
    }
    res.kept = res.ancestors.size();
    return res;
  }
  std::vector<std::size_t> rest;
  std::vector<double> rest_w;
  for (std::size_t n = 0; n < weights.size(); ++n) {
    if (c * weights[n] >= 1.0) {
      res.ancestors.push_back(n);
    } else {
      rest.push_back(n);
      rest_w.push_back(weights[n]);
    }
  }
  res.kept = res.ancestors.size();
  const std::size_t slots = target - std::min(target, res.kept);
  if (slots > 0) {
    const auto draws = systematic_resample(rest_w, slots, uniform01(rng));
    for (auto i : draws) res.ancestors.push_back(rest[i]);
  }
  return res;
}

}  // namespace methcp

#endif  // METHCP_RESAMPLING_HPP
