#ifndef METHCP_PAIRED_FILTER_HPP
#define METHCP_PAIRED_FILTER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "methcp/beta_binomial.hpp"
#include "methcp/numeric.hpp"
#include "methcp/paired_model.hpp"
#include "methcp/resampling.hpp"
#include "methcp/single_filter.hpp"

namespace methcp {

// Particle approximation of the case-control filtering law at one site.
// Zero-weight candidates are never stored.
struct PairedCloud {
  std::vector<PairedState> states;
  std::vector<double> weights;  // normalized
  double threshold = kInf;      // C_{t-1}; infinity when the previous cloud was not pruned
  double log_increment = 0.0;

  [[nodiscard]] std::size_t size() const noexcept { return states.size(); }
};

// exp(g) for every (control regime, case regime) pair, scaled by exp(-shift).
struct PairedPotentials {
  std::size_t regimes = 0;
  std::vector<double> table;
  double shift = 0.0;

  PairedPotentials(std::span<const double> control_lp, std::span<const double> case_lp) : regimes(control_lp.size()) {
    const double mc = *std::max_element(control_lp.begin(), control_lp.end());
    const double mk = *std::max_element(case_lp.begin(), case_lp.end());
    shift = mc + mk;
    table.resize(regimes * regimes);
    for (std::size_t r = 0; r < regimes; ++r) {
      for (std::size_t s = 0; s < regimes; ++s) table[r * regimes + s] = std::exp(control_lp[r] - mc + case_lp[s] - mk);
    }
  }

  [[nodiscard]] double operator()(const PairedState& x) const {
    return table[static_cast<std::size_t>(x.control.regime) * regimes + static_cast<std::size_t>(x.case_state.regime)];
  }
};

// Everything the backward pass needs to rebuild the cloud of any site: the
// resampled lineages (states of the previous cloud) and their weight factors
// W or W / (1 ^ C W). Site 0 has no lineages.
class PairedHistory {
 public:
  PairedHistory() { offsets_.push_back(0); }

  void clear() {
    offsets_.assign(1, 0);
    states_.clear();
    factors_.clear();
  }

  [[nodiscard]] std::size_t sites() const noexcept { return offsets_.size() - 1; }

  void push_initial() { offsets_.push_back(states_.size()); }

  void push_site(std::span<const PairedState> lineages, std::span<const double> factors) {
    states_.insert(states_.end(), lineages.begin(), lineages.end());
    factors_.insert(factors_.end(), factors.begin(), factors.end());
    offsets_.push_back(states_.size());
  }

  [[nodiscard]] std::span<const PairedState> lineages(std::size_t site) const {
    return std::span<const PairedState>(states_).subspan(offsets_[site], offsets_[site + 1] - offsets_[site]);
  }
  [[nodiscard]] std::span<const double> factors(std::size_t site) const {
    return std::span<const double>(factors_).subspan(offsets_[site], offsets_[site + 1] - offsets_[site]);
  }

  [[nodiscard]] std::size_t stored_lineages() const noexcept { return states_.size(); }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<PairedState> states_;
  std::vector<double> factors_;
};

namespace detail {

// Children of every lineage with positive weight factor * f * g.
inline void expand_lineages(std::span<const PairedState> lineages, std::span<const double> factors,
                            const PairedPotentials& g, PairedKernel& kernel, std::vector<PairedState>& states,
                            std::vector<double>& weights) {
  const std::size_t R = kernel.regimes();
  const std::size_t I = successor_count(R);
  std::vector<double> probs(I);
  states.clear();
  weights.clear();
  for (std::size_t p = 0; p < lineages.size(); ++p) {
    kernel.successor_probs(lineages[p], probs);
    for (std::size_t i = 0; i < I; ++i) {
      if (probs[i] == 0.0) continue;
      const PairedState child = successor(lineages[p], i, R);
      const double w = factors[p] * probs[i] * g(child);
      if (w > 0.0) {
        states.push_back(child);
        weights.push_back(w);
      }
    }
  }
}

inline void initial_cloud(const PairedPotentials& g, PairedKernel& kernel, std::vector<PairedState>& states,
                          std::vector<double>& weights) {
  states.clear();
  weights.clear();
  for (const auto& x : enumerate_initial(kernel.regimes())) {
    const double w = kernel.initial_prob(x) * g(x);
    if (w > 0.0) {
      states.push_back(x);
      weights.push_back(w);
    }
  }
}

inline double finish_cloud(PairedCloud& cloud, double shift, std::size_t site) {
  const double total = normalize_in_place(cloud.weights);
  if (!(total > 0.0) || !std::isfinite(total)) throw DegenerateLikelihood(site, "all paired particle weights vanished");
  cloud.log_increment = std::log(total) + shift;
  return total;
}

}  // namespace detail

/// First site: the R^2 initial states weighted by f_1 g_1.
[[nodiscard]] inline PairedCloud dpf_init(std::span<const double> control_lp, std::span<const double> case_lp,
                                          PairedKernel& kernel, PairedHistory* history = nullptr) {
  const PairedPotentials g(control_lp, case_lp);
  PairedCloud cloud;
  detail::initial_cloud(g, kernel, cloud.states, cloud.weights);
  detail::finish_cloud(cloud, g.shift, 0);
  if (history) {
    history->clear();
    history->push_initial();
  }
  return cloud;
}

/// One discrete-particle-filter step: the positive-weight particles of `prev`
/// (or an optimal finite-state resample of `max_lineages` of them) are each
/// expanded into all of their successors.
[[nodiscard]] inline PairedCloud dpf_step(const PairedCloud& prev, std::span<const double> control_lp,
                                          std::span<const double> case_lp, PairedKernel& kernel, std::size_t max_lineages,
                                          Rng& rng, PairedHistory* history = nullptr, std::size_t site = 0) {
  const PairedPotentials g(control_lp, case_lp);
  std::vector<PairedState> lineages;
  std::vector<double> factors;
  std::vector<double> alive;
  std::vector<std::size_t> alive_index;
  for (std::size_t n = 0; n < prev.size(); ++n) {
    if (prev.weights[n] > 0.0) {
      alive.push_back(prev.weights[n]);
      alive_index.push_back(n);
    }
  }
  PairedCloud next;
  if (alive.size() <= max_lineages) {
    for (std::size_t j = 0; j < alive.size(); ++j) {
      lineages.push_back(prev.states[alive_index[j]]);
      factors.push_back(alive[j]);
    }
  } else {
    const auto res = optimal_resample(alive, max_lineages, rng);
    next.threshold = res.threshold;
    for (auto j : res.ancestors) {
      lineages.push_back(prev.states[alive_index[j]]);
      factors.push_back(alive[j] / std::min(1.0, res.threshold * alive[j]));
    }
  }
  detail::expand_lineages(lineages, factors, g, kernel, next.states, next.weights);
  detail::finish_cloud(next, g.shift, site);
  if (history) history->push_site(lineages, factors);
  return next;
}

// Compact per-site summary of one sampled trajectory.
struct SiteLabel {
  std::uint8_t merged = 1;
  std::uint8_t control = 0;
  std::uint8_t case_regime = 0;

  bool operator==(const SiteLabel&) const = default;
};

[[nodiscard]] inline SiteLabel label_of(const PairedState& x) {
  return {x.merged, static_cast<std::uint8_t>(x.control.regime), static_cast<std::uint8_t>(x.case_state.regime)};
}

// Sampled latent paths, trajectory-major. Full states are kept only on request.
struct TrajectorySet {
  std::size_t sites = 0;
  std::size_t count = 0;
  std::vector<SiteLabel> labels;     // count x sites
  std::vector<PairedState> states;   // count x sites, or empty
  std::vector<std::uint64_t> seeds;  // one per contributing run

  [[nodiscard]] std::span<const SiteLabel> path(std::size_t k) const {
    return std::span<const SiteLabel>(labels).subspan(k * sites, sites);
  }
  [[nodiscard]] std::span<const PairedState> state_path(std::size_t k) const {
    return std::span<const PairedState>(states).subspan(k * sites, sites);
  }
  [[nodiscard]] const SiteLabel& at(std::size_t k, std::size_t t) const { return labels[k * sites + t]; }

  void append(const TrajectorySet& other) {
    if (count == 0) sites = other.sites;
    if (other.sites != sites) throw std::invalid_argument("trajectory sets cover different numbers of sites");
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    states.insert(states.end(), other.states.begin(), other.states.end());
    seeds.insert(seeds.end(), other.seeds.begin(), other.seeds.end());
    count += other.count;
  }
};

namespace detail {

inline bool state_less(const PairedState& a, const PairedState& b) {
  return std::tie(a.merged, a.control.sojourn, a.control.regime, a.case_state.sojourn, a.case_state.regime) <
         std::tie(b.merged, b.control.sojourn, b.control.regime, b.case_state.sojourn, b.case_state.regime);
}

// A state with control sojourn d >= 2 can only follow a state whose control
// part is (d - 1, same regime); likewise for the case part when split.
inline bool may_precede(const PairedState& cur, const PairedState& next) {
  if (next.control.sojourn >= 2 &&
      (cur.control.sojourn != next.control.sojourn - 1 || cur.control.regime != next.control.regime)) {
    return false;
  }
  if (!next.merged && next.case_state.sojourn >= 2 &&
      (cur.case_state.sojourn != next.case_state.sojourn - 1 || cur.case_state.regime != next.case_state.regime)) {
    return false;
  }
  return true;
}

inline std::size_t draw_index(std::span<const double> cumulative, Rng& rng) {
  const double u = uniform01(rng) * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  // Skip zero-width cells that rounding could land on.
  auto idx = static_cast<std::size_t>(it - cumulative.begin());
  while (idx > 0 && cumulative[idx] == cumulative[idx - 1]) --idx;
  return idx;
}

}  // namespace detail

/// Backward simulation of `count` trajectories from a stored filtering
/// history. `control_lp` / `case_lp` hold the per-site log-potentials
/// (sites x R). Trajectories sharing a state at site t + 1 share one set of
/// backward weights at site t.
[[nodiscard]] inline TrajectorySet backward_sample(const PairedHistory& history, std::span<const double> control_lp,
                                                   std::span<const double> case_lp, PairedKernel& kernel,
                                                   std::size_t count, Rng& rng, bool keep_states = false) {
  const std::size_t T = history.sites();
  const std::size_t R = kernel.regimes();
  TrajectorySet out;
  out.sites = T;
  out.count = count;
  out.labels.resize(count * T);
  if (keep_states) out.states.resize(count * T);
  if (T == 0 || count == 0) return out;

  std::vector<PairedState> states;
  std::vector<double> weights;
  auto rebuild = [&](std::size_t t) {
    const PairedPotentials g(control_lp.subspan(t * R, R), case_lp.subspan(t * R, R));
    if (t == 0) {
      detail::initial_cloud(g, kernel, states, weights);
    } else {
      detail::expand_lineages(history.lineages(t), history.factors(t), g, kernel, states, weights);
    }
  };
  auto store = [&](std::size_t k, std::size_t t, const PairedState& x) {
    out.labels[k * T + t] = label_of(x);
    if (keep_states) out.states[k * T + t] = x;
  };

  std::vector<PairedState> current(count);
  rebuild(T - 1);
  {
    std::vector<double> cumulative(weights.size());
    std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
    for (std::size_t k = 0; k < count; ++k) {
      current[k] = states[detail::draw_index(cumulative, rng)];
      store(k, T - 1, current[k]);
    }
  }

  std::vector<std::size_t> order(count);
  std::vector<double> cumulative;
  for (std::size_t t = T - 1; t-- > 0;) {
    rebuild(t);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return detail::state_less(current[a], current[b]); });
    std::size_t g0 = 0;
    while (g0 < count) {
      std::size_t g1 = g0 + 1;
      while (g1 < count && current[order[g1]] == current[order[g0]]) ++g1;
      const PairedState next = current[order[g0]];
      cumulative.assign(states.size(), 0.0);
      double acc = 0.0;
      for (std::size_t l = 0; l < states.size(); ++l) {
        if (detail::may_precede(states[l], next)) acc += weights[l] * kernel.prob(next, states[l]);
        cumulative[l] = acc;
      }
      if (!(acc > 0.0)) throw std::logic_error("backward sampling found no admissible predecessor");
      for (std::size_t j = g0; j < g1; ++j) {
        const std::size_t k = order[j];
        current[k] = states[detail::draw_index(cumulative, rng)];
        store(k, t, current[k]);
      }
      g0 = g1;
    }
  }
  return out;
}

/// (1/K) sum_k psi(labels of trajectory k on sites s..t), s <= t, 0-based inclusive.
[[nodiscard]] inline double smoothed_expectation(const TrajectorySet& trajs, std::size_t s, std::size_t t,
                                                 const std::function<double(std::span<const SiteLabel>)>& psi) {
  if (s > t || t >= trajs.sites) throw std::out_of_range("site range outside the trajectories");
  if (trajs.count == 0) throw std::invalid_argument("empty trajectory set");
  double acc = 0.0;
  for (std::size_t k = 0; k < trajs.count; ++k) acc += psi(trajs.path(k).subspan(s, t - s + 1));
  return acc / static_cast<double>(trajs.count);
}

/// p(z_s = ... = z_t = 1 | y).
[[nodiscard]] inline double prob_merged_run(const TrajectorySet& trajs, std::size_t s, std::size_t t) {
  return smoothed_expectation(trajs, s, t, [](std::span<const SiteLabel> xs) {
    return std::all_of(xs.begin(), xs.end(), [](const SiteLabel& x) { return x.merged == 1; }) ? 1.0 : 0.0;
  });
}

/// p(z_t = 0 | y) for every site.
[[nodiscard]] inline std::vector<double> prob_split(const TrajectorySet& trajs) {
  std::vector<double> out(trajs.sites, 0.0);
  for (std::size_t k = 0; k < trajs.count; ++k) {
    const auto p = trajs.path(k);
    for (std::size_t t = 0; t < trajs.sites; ++t) out[t] += p[t].merged ? 0.0 : 1.0;
  }
  for (double& v : out) v /= static_cast<double>(std::max<std::size_t>(trajs.count, 1));
  return out;
}

/// p(control regime at t = q | y), sites x R.
[[nodiscard]] inline std::vector<double> control_regime_posterior(const TrajectorySet& trajs, std::size_t regimes) {
  std::vector<double> out(trajs.sites * regimes, 0.0);
  for (std::size_t k = 0; k < trajs.count; ++k) {
    const auto p = trajs.path(k);
    for (std::size_t t = 0; t < trajs.sites; ++t) out[t * regimes + p[t].control] += 1.0;
  }
  for (double& v : out) v /= static_cast<double>(std::max<std::size_t>(trajs.count, 1));
  return out;
}

struct PairedRunConfig {
  std::size_t max_lineages = 50;  // M
  std::size_t trajectories = 25;  // K per run
  std::size_t runs = 10;
  std::uint64_t seed = 1;
  bool keep_states = false;
};

struct PairedRunResult {
  TrajectorySet trajectories;
  std::vector<double> log_likelihood;  // per run
};

/// Independent filter + backward-sampling runs pooled into one trajectory set.
[[nodiscard]] inline PairedRunResult run_case_control(std::span<const double> control_lp, std::span<const double> case_lp,
                                                      std::size_t sites, const CaseControlParams& params,
                                                      const PairedRunConfig& cfg) {
  const std::size_t R = params.regimes();
  if (control_lp.size() != sites * R || case_lp.size() != sites * R) throw std::invalid_argument("potential table shape");
  PairedRunResult result;
  result.trajectories.sites = sites;
  if (sites == 0) return result;
  PairedKernel kernel(params);
  PairedHistory history;
  for (std::size_t run = 0; run < cfg.runs; ++run) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(run)};
    Rng rng(seq);
    PairedCloud cloud = dpf_init(control_lp.subspan(0, R), case_lp.subspan(0, R), kernel, &history);
    double loglik = cloud.log_increment;
    for (std::size_t t = 1; t < sites; ++t) {
      cloud = dpf_step(cloud, control_lp.subspan(t * R, R), case_lp.subspan(t * R, R), kernel, cfg.max_lineages, rng,
                       &history, t);
      loglik += cloud.log_increment;
    }
    auto trajs = backward_sample(history, control_lp, case_lp, kernel, cfg.trajectories, rng, cfg.keep_states);
    trajs.seeds.assign(1, cfg.seed + run);
    result.trajectories.append(trajs);
    result.log_likelihood.push_back(loglik);
  }
  return result;
}

}  // namespace methcp

#endif  // METHCP_PAIRED_FILTER_HPP
