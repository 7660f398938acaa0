#ifndef METHCP_SIMULATOR_HPP
#define METHCP_SIMULATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "methcp/beta_binomial.hpp"
#include "methcp/multiple_testing.hpp"
#include "methcp/paired_model.hpp"
#include "methcp/regimes.hpp"
#include "methcp/resampling.hpp"

namespace methcp {

struct SimConfig {
  std::size_t sites = 50000;
  std::size_t samples = 4;  // per group
  double depth = 10.0;      // mean reads per sample and site
  std::size_t palette_row = 0;
  std::uint64_t seed = 1;
  std::size_t dataset_index = 0;  // odd indices swap the roles of the groups
  std::int64_t case_shift = 3;
  std::int64_t min_z_gap = 0;
  double missing_fraction = 0.0;  // fraction of sites with no reads in any sample
};

struct SimParams {
  CaseControlParams model;
  TransitionMatrix transition;
  double size = 2.0;  // kappa shared by all control regimes
};

/// Draws the generating parameters for a palette of `regimes` regimes.
[[nodiscard]] inline SimParams sample_hyperparams(const RegimePalette& palette, Rng& rng, std::int64_t case_shift = 3,
                                                  std::int64_t min_z_gap = 0) {
  const std::size_t R = palette.size();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unif(rng); };

  std::vector<std::int64_t> shifts(R);
  for (auto& u : shifts) u = std::llround(uniform(3.0, 6.0));
  CaseControlConstants constants;
  constants.q_merge = std::exp(uniform(std::log(0.01), std::log(0.5)));
  constants.q_split = std::exp(uniform(std::log(0.001), std::log(0.05)));
  const double kappa = uniform(1.0, 3.0);
  constants.case_success = uniform(0.6, 0.99);
  constants.case_size = 2.0;
  constants.case_shift = case_shift;
  constants.min_z_gap = min_z_gap;

  std::gamma_distribution<double> gamma(2.0 / 3.0, 1.0);
  TransitionMatrix P(R);
  std::vector<double> theta(theta_size(R), 0.0);
  for (std::size_t r = 0; r < R; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < R; ++c) {
      if (c == r) continue;
      P(r, c) = gamma(rng);
      total += P(r, c);
    }
    for (std::size_t c = 0; c < R; ++c) {
      if (c == r) continue;
      P(r, c) = total > 0.0 ? P(r, c) / total : 1.0 / static_cast<double>(R - 1);
      theta[transition_logit_index(r, c, R)] = std::log(std::max(P(r, c), 1e-300));
    }
    theta[success_logit_index(r, R)] = logit(0.8);
  }
  SingleGroupParams control(palette, std::move(theta), std::move(shifts), std::vector<double>(R, kappa));
  return {CaseControlParams(std::move(control), constants), std::move(P), kappa};
}

namespace detail {

inline std::size_t draw_categorical(std::span<const double> probs, Rng& rng) {
  double total = 0.0;
  for (double p : probs) total += p;
  double u = uniform01(rng) * total;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last = i;
    if (u < probs[i]) return i;
    u -= probs[i];
  }
  return last;
}

}  // namespace detail

/// Forward simulation of the paired prior chain over `sites` sites.
[[nodiscard]] inline std::vector<PairedState> sample_paths(const CaseControlParams& params, std::size_t sites, Rng& rng) {
  const std::size_t R = params.regimes();
  PairedKernel kernel(params);
  std::vector<PairedState> path;
  path.reserve(sites);
  if (sites == 0) return path;
  const auto initial = enumerate_initial(R);
  std::vector<double> probs(initial.size());
  for (std::size_t i = 0; i < initial.size(); ++i) probs[i] = kernel.initial_prob(initial[i]);
  path.push_back(initial[detail::draw_categorical(probs, rng)]);
  probs.resize(successor_count(R));
  for (std::size_t t = 1; t < sites; ++t) {
    kernel.successor_probs(path.back(), probs);
    path.push_back(successor(path.back(), detail::draw_categorical(probs, rng), R));
  }
  return path;
}

// Swaps the roles of the two groups in a path.
[[nodiscard]] inline PairedState swap_roles(const PairedState& x) { return {x.case_state, x.control, x.merged}; }

struct PairedCounts {
  GroupCounts control;
  GroupCounts case_group;
};

/// Poisson read depths, beta-distributed methylation levels and binomial
/// methylated counts for both groups along `path`.
[[nodiscard]] inline PairedCounts sample_counts(std::span<const PairedState> path, const RegimePalette& palette,
                                                std::size_t samples, double depth, Rng& rng,
                                                double missing_fraction = 0.0) {
  if (samples == 0) throw std::invalid_argument("need at least one sample per group");
  if (depth < 0.0) throw std::invalid_argument("depth must be nonnegative");
  PairedCounts out{GroupCounts(path.size(), samples), GroupCounts(path.size(), samples)};
  std::poisson_distribution<std::uint32_t> reads(depth > 0.0 ? depth : 1.0);
  auto draw_beta = [&](double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x + y > 0.0 ? x / (x + y) : 0.5;
  };
  for (std::size_t t = 0; t < path.size(); ++t) {
    const bool missing = missing_fraction > 0.0 && uniform01(rng) < missing_fraction;
    for (int group = 0; group < 2; ++group) {
      const auto& x = group == 0 ? path[t].control : path[t].case_state;
      auto& counts = group == 0 ? out.control : out.case_group;
      const auto& spec = palette[static_cast<std::size_t>(x.regime)];
      for (std::size_t s = 0; s < samples; ++s) {
        const std::uint32_t n = (missing || depth == 0.0) ? 0 : reads(rng);
        const double pi = draw_beta(spec.shape_a, spec.shape_b);
        std::binomial_distribution<std::uint32_t> bin(n, std::clamp(pi, 0.0, 1.0));
        counts.set(t, s, n > 0 ? bin(rng) : 0, n);
      }
    }
  }
  return out;
}

struct SimDataset {
  SimConfig config;
  RegimePalette palette;           // generating palette
  SimParams params;                // generating parameters, in generation roles
  std::vector<PairedState> path;   // emitted roles (swapped for odd dataset indices)
  bool roles_swapped = false;
  std::vector<std::int64_t> positions;
  PairedCounts counts;             // emitted roles

  /// Per-site truth of a signal under the generating palette.
  [[nodiscard]] std::vector<std::uint8_t> truth(SignalKind kind) const {
    std::vector<std::uint8_t> out(path.size());
    for (std::size_t t = 0; t < path.size(); ++t) out[t] = signal_value(kind, label_of(path[t]), palette) ? 1 : 0;
    return out;
  }
};

/// Deterministic for a fixed (seed, dataset_index).
[[nodiscard]] inline SimDataset simulate_dataset(const SimConfig& cfg) {
  if (cfg.sites == 0) throw std::invalid_argument("need at least one site");
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(cfg.dataset_index), 0x51u};
  Rng rng(seq);
  SimDataset ds{cfg, simulation_palette(cfg.palette_row), {}, {}, cfg.dataset_index % 2 == 1, {}, {}};
  ds.params = sample_hyperparams(ds.palette, rng, cfg.case_shift, cfg.min_z_gap);
  ds.path = sample_paths(ds.params.model, cfg.sites, rng);
  if (ds.roles_swapped) {
    for (auto& x : ds.path) x = swap_roles(x);
  }
  ds.counts = sample_counts(ds.path, ds.palette, cfg.samples, cfg.depth, rng, cfg.missing_fraction);
  ds.positions.resize(cfg.sites);
  std::geometric_distribution<std::int64_t> gap(0.02);
  std::int64_t pos = 10000;
  for (auto& p : ds.positions) {
    pos += 2 + gap(rng);
    p = pos;
  }
  return ds;
}

}  // namespace methcp

#endif  // METHCP_SIMULATOR_HPP
