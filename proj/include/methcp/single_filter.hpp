#ifndef METHCP_SINGLE_FILTER_HPP
#define METHCP_SINGLE_FILTER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "methcp/beta_binomial.hpp"
#include "methcp/numeric.hpp"
#include "methcp/resampling.hpp"
#include "methcp/single_model.hpp"

namespace methcp {

// Weighted particle approximation of the single-group filtering law at one site.
struct ParticleCloud {
  std::vector<SingleGroupState> states;
  std::vector<double> weights;         // normalized
  std::vector<std::size_t> ancestors;  // for the first `continued` particles: index into the previous cloud
  std::size_t continued = 0;           // N'_{t-1}; particles from here on are fresh change points
  double threshold = kInf;             // resampling constant C_{t-1}
  double log_increment = 0.0;          // log of the incremental likelihood estimate p(y_t | y_{1:t-1})

  [[nodiscard]] std::size_t size() const noexcept { return states.size(); }
};

// Backward weights of the fresh change-point particles: particle (1, r') at
// time t descends from previous particle m with probability
// change[m] P(r' | r_m) / mass[r'], where change[m] = W^m rho(x^m).
struct FreshMixture {
  std::vector<double> change;
  std::vector<std::int32_t> regime;  // r_m of the previous cloud
  std::vector<double> mass;          // per fresh regime; zero when undefined

  [[nodiscard]] bool defined(std::size_t r) const { return mass[r] > 0.0; }

  [[nodiscard]] double weight(std::size_t r, std::size_t m, const TransitionMatrix& P) const {
    return mass[r] > 0.0 ? change[m] * P(static_cast<std::size_t>(regime[m]), r) / mass[r] : 0.0;
  }

  // out[r'] = sum_m weight(r', m) values[m] for every fresh regime r'.
  void mix(std::span<const double> values, const TransitionMatrix& P, std::span<double> out) const {
    const std::size_t R = mass.size();
    std::vector<double> by_regime(R, 0.0);
    for (std::size_t m = 0; m < change.size(); ++m) by_regime[static_cast<std::size_t>(regime[m])] += change[m] * values[m];
    for (std::size_t to = 0; to < R; ++to) {
      if (!(mass[to] > 0.0)) {
        out[to] = 0.0;
        continue;
      }
      double acc = 0.0;
      for (std::size_t from = 0; from < R; ++from) acc += P(from, to) * by_regime[from];
      out[to] = acc / mass[to];
    }
  }
};

namespace detail {

// exp(log_pot - max) and the max, so that potentials lie in [0, 1].
inline double scaled_potentials(std::span<const double> log_pot, std::vector<double>& out) {
  double mx = kNegInf;
  for (double v : log_pot) mx = std::max(mx, v);
  out.resize(log_pot.size());
  for (std::size_t r = 0; r < log_pot.size(); ++r) out[r] = std::exp(log_pot[r] - mx);
  return mx;
}

}  // namespace detail

/// First filtering step: one particle (1, r) per regime, weighted by f_1 g_1.
[[nodiscard]] inline ParticleCloud filter_init(std::span<const double> log_potentials, const SingleGroupParams& params,
                                               std::size_t site = 0) {
  const std::size_t R = params.regimes();
  ParticleCloud cloud;
  std::vector<double> g;
  const double shift = detail::scaled_potentials(log_potentials, g);
  cloud.states.resize(R);
  cloud.weights.resize(R);
  for (std::size_t r = 0; r < R; ++r) {
    cloud.states[r] = {1, static_cast<std::int32_t>(r)};
    cloud.weights[r] = params.initial()[r] * g[r];
  }
  const double total = normalize_in_place(cloud.weights);
  if (!(total > 0.0) || !std::isfinite(total)) throw DegenerateLikelihood(site, "all initial particle weights vanished");
  cloud.log_increment = std::log(total) + shift;
  return cloud;
}

[[nodiscard]] inline ParticleCloud filter_init(const SiteCounts& counts, const SingleGroupParams& params) {
  std::vector<double> lp(params.regimes());
  PotentialEvaluator(params.palette()).evaluate(counts, lp);
  return filter_init(lp, params);
}

/// One step of the change-point particle filter. Survivors of the previous
/// cloud (all of them when it holds at most `max_particles`, otherwise an
/// optimal finite-state resample of that size) continue their regime; R fresh
/// change-point particles collect the mass of every previous particle.
[[nodiscard]] inline ParticleCloud filter_step(const ParticleCloud& prev, std::span<const double> log_potentials,
                                               SingleGroupKernel& kernel, std::size_t max_particles, Rng& rng,
                                               FreshMixture* mixture = nullptr, std::size_t site = 0) {
  const std::size_t R = kernel.regimes();
  const std::size_t N = prev.size();
  const auto& P = kernel.params().transition();
  ParticleCloud next;
  std::vector<double> g;
  const double shift = detail::scaled_potentials(log_potentials, g);

  if (N > max_particles) {
    auto res = optimal_resample(prev.weights, max_particles, rng);
    next.ancestors = std::move(res.ancestors);
    next.threshold = res.threshold;
  } else {
    next.ancestors.resize(N);
    for (std::size_t n = 0; n < N; ++n) next.ancestors[n] = n;
  }
  const std::size_t survivors = next.ancestors.size();
  next.continued = survivors;
  next.states.resize(survivors + R);
  next.weights.resize(survivors + R);

  for (std::size_t n = 0; n < survivors; ++n) {
    const std::size_t a = next.ancestors[n];
    const auto& x = prev.states[a];
    const double W = prev.weights[a];
    const double factor = next.threshold == kInf ? W : W / std::min(1.0, next.threshold * W);
    next.states[n] = {x.sojourn + 1, x.regime};
    next.weights[n] = factor * kernel.cont(x) * g[static_cast<std::size_t>(x.regime)];
  }

  // Fresh particles: sum over the whole previous cloud.
  FreshMixture local;
  FreshMixture& mix = mixture ? *mixture : local;
  mix.change.resize(N);
  mix.regime.resize(N);
  mix.mass.assign(R, 0.0);
  std::vector<double> by_regime(R, 0.0);
  for (std::size_t m = 0; m < N; ++m) {
    mix.change[m] = prev.weights[m] * kernel.hazard(prev.states[m]);
    mix.regime[m] = prev.states[m].regime;
    by_regime[static_cast<std::size_t>(prev.states[m].regime)] += mix.change[m];
  }
  for (std::size_t r = 0; r < R; ++r) {
    double mass = 0.0;
    for (std::size_t from = 0; from < R; ++from) mass += by_regime[from] * P(from, r);
    mix.mass[r] = mass;
    next.states[survivors + r] = {1, static_cast<std::int32_t>(r)};
    next.weights[survivors + r] = mass * g[r];
  }

  const double total = normalize_in_place(next.weights);
  if (!(total > 0.0) || !std::isfinite(total)) throw DegenerateLikelihood(site, "all particle weights vanished");
  next.log_increment = std::log(total) + shift;
  return next;
}

// Adaptive-lag smoother for site functionals psi_q(x) = 1{regime == q}. The Q
// functionals of one site are retired together, once every weighted variance
// has dropped below epsilon, so each emitted row is a probability vector.
class AdaptiveLagSmoother {
 public:
  struct Retired {
    std::size_t site;
    std::vector<double> estimate;  // one entry per functional
  };

  AdaptiveLagSmoother(std::size_t functionals, double epsilon) : q_(functionals), epsilon_(epsilon) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("smoothing threshold must be nonnegative");
  }

  [[nodiscard]] std::size_t active_sites() const noexcept { return tasks_.size(); }

  // Registers the tasks of site `site` on the first cloud.
  void start(const ParticleCloud& cloud, std::size_t site, std::vector<Retired>& out) {
    tasks_.clear();
    add_site(cloud, site);
    retire(cloud, out, false);
  }

  // Propagates every active task to `cloud`, adds the tasks of `site` and
  // appends retired estimates to `out`.
  void update(const ParticleCloud& cloud, const FreshMixture& mixture, const TransitionMatrix& P, std::size_t site,
              std::vector<Retired>& out) {
    const std::size_t N = cloud.size();
    const std::size_t R = mixture.mass.size();
    std::vector<double> fresh(R);
    for (auto& task : tasks_) {
      std::vector<double> next(q_ * N);
      for (std::size_t q = 0; q < q_; ++q) {
        const auto old = std::span<const double>(task.psi).subspan(q * task.width, task.width);
        double* dst = next.data() + q * N;
        for (std::size_t n = 0; n < cloud.continued; ++n) dst[n] = old[cloud.ancestors[n]];
        mixture.mix(old, P, fresh);
        for (std::size_t n = cloud.continued; n < N; ++n) dst[n] = fresh[static_cast<std::size_t>(cloud.states[n].regime)];
      }
      task.psi = std::move(next);
      task.width = N;
    }
    add_site(cloud, site);
    retire(cloud, out, false);
  }

  // Emits every remaining task with its current estimate (end of data).
  void finish(const ParticleCloud& cloud, std::vector<Retired>& out) { retire(cloud, out, true); }

 private:
  struct Task {
    std::size_t site;
    std::size_t width;
    std::vector<double> psi;  // functionals x width
  };

  void add_site(const ParticleCloud& cloud, std::size_t site) {
    const std::size_t N = cloud.size();
    Task task{site, N, std::vector<double>(q_ * N, 0.0)};
    for (std::size_t n = 0; n < N; ++n) {
      const auto r = static_cast<std::size_t>(cloud.states[n].regime);
      if (r < q_) task.psi[r * N + n] = 1.0;
    }
    tasks_.push_back(std::move(task));
  }

  void retire(const ParticleCloud& cloud, std::vector<Retired>& out, bool force) {
    const auto& W = cloud.weights;
    std::vector<Task> keep;
    keep.reserve(tasks_.size());
    for (auto& task : tasks_) {
      std::vector<double> est(q_);
      bool done = true;
      for (std::size_t q = 0; q < q_; ++q) {
        const double* psi = task.psi.data() + q * task.width;
        double mean = 0.0;
        for (std::size_t n = 0; n < task.width; ++n) mean += W[n] * psi[n];
        double var = 0.0;
        for (std::size_t n = 0; n < task.width; ++n) var += W[n] * (psi[n] - mean) * (psi[n] - mean);
        est[q] = mean;
        if (!(var < epsilon_)) done = false;
      }
      if (done || force) {
        out.push_back({task.site, std::move(est)});
      } else {
        keep.push_back(std::move(task));
      }
    }
    tasks_ = std::move(keep);
  }

  std::size_t q_;
  double epsilon_;
  std::vector<Task> tasks_;
};

// Particle approximation of the score grad log p(y_{1:t} | theta).
class ScoreTracker {
 public:
  explicit ScoreTracker(std::size_t dim) : dim_(dim) {}

  [[nodiscard]] const std::vector<double>& score() const noexcept { return score_; }

  // At the first site the initial law does not depend on theta.
  void start(const ParticleCloud& cloud) {
    phi_.assign(cloud.size() * dim_, 0.0);
    score_.assign(dim_, 0.0);
  }

  void update(const ParticleCloud& prev, const ParticleCloud& cloud, const FreshMixture& mixture,
              SingleGroupKernel& kernel) {
    const std::size_t N = cloud.size();
    const std::size_t R = kernel.regimes();
    const auto& P = kernel.params().transition();
    std::vector<double> next(N * dim_, 0.0);
    for (std::size_t n = 0; n < cloud.continued; ++n) {
      const std::size_t a = cloud.ancestors[n];
      std::copy_n(phi_.begin() + static_cast<std::ptrdiff_t>(a * dim_), dim_,
                  next.begin() + static_cast<std::ptrdiff_t>(n * dim_));
      kernel.add_continue_gradient(prev.states[a], std::span<double>(next).subspan(n * dim_, dim_));
    }
    // Fresh particles: group the previous cloud by regime, since the backward
    // weight of m factorizes as change[m] P(r' | r_m).
    std::vector<double> carried(R * dim_, 0.0);  // sum_{m: r_m = r} change[m] Phi^m
    std::vector<double> hazard_score(R, 0.0);    // sum_{m: r_m = r} change[m] dlog rho(x^m)
    std::vector<double> change_mass(R, 0.0);     // sum_{m: r_m = r} change[m]
    for (std::size_t m = 0; m < prev.size(); ++m) {
      const double c = mixture.change[m];
      if (c == 0.0) continue;
      const auto r = static_cast<std::size_t>(prev.states[m].regime);
      const double* src = phi_.data() + m * dim_;
      double* dst = carried.data() + r * dim_;
      for (std::size_t k = 0; k < dim_; ++k) dst[k] += c * src[k];
      hazard_score[r] += c * kernel.hazard_gradient(prev.states[m]).log_hazard;
      change_mass[r] += c;
    }
    for (std::size_t n = cloud.continued; n < N; ++n) {
      const auto to = static_cast<std::size_t>(cloud.states[n].regime);
      if (!mixture.defined(to)) continue;
      double* dst = next.data() + n * dim_;
      for (std::size_t from = 0; from < R; ++from) {
        const double scale = P(from, to) / mixture.mass[to];
        if (scale == 0.0 || change_mass[from] == 0.0) continue;
        const double* src = carried.data() + from * dim_;
        for (std::size_t k = 0; k < dim_; ++k) dst[k] += scale * src[k];
        dst[success_logit_index(from, R)] += scale * hazard_score[from];
        const auto row = P.row(from);
        for (std::size_t c = 0; c < R; ++c) {
          if (c == from) continue;
          dst[transition_logit_index(from, c, R)] += scale * change_mass[from] * ((c == to ? 1.0 : 0.0) - row[c]);
        }
      }
    }
    phi_ = std::move(next);
    score_.assign(dim_, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      const double w = cloud.weights[n];
      const double* src = phi_.data() + n * dim_;
      for (std::size_t k = 0; k < dim_; ++k) score_[k] += w * src[k];
    }
  }

 private:
  std::size_t dim_;
  std::vector<double> phi_;
  std::vector<double> score_;
};

enum class Optimizer { Adam, Sgd };

struct SingleFitConfig {
  std::size_t max_particles = 100;  // M
  double epsilon = 1e-4;            // smoothing-task retirement threshold
  double step_size = 0.01;
  double decay_rate = 0.1;          // step multiplier per full pass over the data
  std::size_t update_interval = 200;  // l
  std::size_t passes = 2;
  Optimizer optimizer = Optimizer::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 1;
};

// Adam / plain gradient ascent with an exponentially decaying step size.
class AscentState {
 public:
  AscentState(std::size_t dim, const SingleFitConfig& cfg, std::size_t updates_per_pass)
      : cfg_(cfg), m_(dim, 0.0), v_(dim, 0.0), per_pass_(std::max<std::size_t>(updates_per_pass, 1)) {}

  [[nodiscard]] double current_step() const {
    return cfg_.step_size * std::pow(cfg_.decay_rate, static_cast<double>(count_) / static_cast<double>(per_pass_));
  }

  void apply(std::span<const double> gradient, std::vector<double>& theta) {
    const double eta = current_step();
    ++count_;
    if (cfg_.optimizer == Optimizer::Sgd) {
      for (std::size_t k = 0; k < theta.size(); ++k) theta[k] += eta * gradient[k];
      return;
    }
    const double b1 = cfg_.adam_beta1;
    const double b2 = cfg_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(count_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(count_));
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m_[k] = b1 * m_[k] + (1.0 - b1) * gradient[k];
      v_[k] = b2 * v_[k] + (1.0 - b2) * gradient[k] * gradient[k];
      theta[k] += eta * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + cfg_.adam_epsilon);
    }
  }

 private:
  SingleFitConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t per_pass_;
  std::size_t count_ = 0;
};

struct SingleFitResult {
  std::vector<double> theta;
  std::vector<double> pass_log_likelihood;  // particle estimate of log p(y_{1:T}) per estimation pass
  double final_log_likelihood = 0.0;
  std::vector<double> posteriors;           // sites x R, p(regime_t = q | y_{1:T})
  std::size_t regimes = 0;

  [[nodiscard]] std::span<const double> posterior(std::size_t site) const {
    return std::span<const double>(posteriors).subspan(site * regimes, regimes);
  }
};

/// Per-site log-potentials for every regime (sites x R, row-major).
[[nodiscard]] inline std::vector<double> site_potential_table(const GroupCounts& counts, const RegimePalette& palette) {
  const std::size_t R = palette.size();
  PotentialEvaluator eval(palette);
  std::vector<double> out(counts.sites() * R);
  for (std::size_t t = 0; t < counts.sites(); ++t) {
    eval.evaluate(counts.site(t), std::span<double>(out).subspan(t * R, R));
  }
  return out;
}

/// Runs the filter + smoother at fixed parameters; returns log p(y) estimate
/// and fills `posteriors` (sites x R).
inline double smooth_single_group(std::span<const double> potentials, std::size_t sites, const SingleGroupParams& params,
                                  std::size_t max_particles, double epsilon, Rng& rng, std::vector<double>& posteriors) {
  const std::size_t R = params.regimes();
  posteriors.assign(sites * R, 0.0);
  if (sites == 0) return 0.0;
  SingleGroupKernel kernel(params, false);
  AdaptiveLagSmoother smoother(R, epsilon);
  std::vector<AdaptiveLagSmoother::Retired> retired;
  auto emit = [&] {
    for (auto& r : retired) std::copy(r.estimate.begin(), r.estimate.end(), posteriors.begin() + static_cast<std::ptrdiff_t>(r.site * R));
    retired.clear();
  };
  ParticleCloud cloud = filter_init(potentials.subspan(0, R), params, 0);
  double loglik = cloud.log_increment;
  smoother.start(cloud, 0, retired);
  emit();
  FreshMixture mix;
  for (std::size_t t = 1; t < sites; ++t) {
    cloud = filter_step(cloud, potentials.subspan(t * R, R), kernel, max_particles, rng, &mix, t);
    loglik += cloud.log_increment;
    smoother.update(cloud, mix, params.transition(), t, retired);
    emit();
  }
  smoother.finish(cloud, retired);
  emit();
  return loglik;
}

/// Online gradient-ascent estimation of theta over `passes` sweeps, followed
/// by a smoothing sweep at the final estimate.
[[nodiscard]] inline SingleFitResult fit_single_group(const GroupCounts& counts, SingleGroupParams params,
                                                      const SingleFitConfig& cfg) {
  const std::size_t R = params.regimes();
  const std::size_t T = counts.sites();
  const std::size_t dim = theta_size(R);
  if (cfg.update_interval == 0) throw std::invalid_argument("update interval must be positive");
  const auto potentials = site_potential_table(counts, params.palette());
  Rng rng(cfg.seed);
  SingleFitResult result;
  result.regimes = R;
  AscentState ascent(dim, cfg, T / cfg.update_interval);

  for (std::size_t pass = 0; pass < cfg.passes && T > 0; ++pass) {
    SingleGroupKernel kernel(params, true);
    ScoreTracker score(dim);
    ParticleCloud cloud = filter_init(std::span<const double>(potentials).subspan(0, R), params, 0);
    double loglik = cloud.log_increment;
    score.start(cloud);
    std::vector<double> last_score = score.score();
    FreshMixture mix;
    for (std::size_t t = 1; t < T; ++t) {
      ParticleCloud next =
          filter_step(cloud, std::span<const double>(potentials).subspan(t * R, R), kernel, cfg.max_particles, rng, &mix, t);
      loglik += next.log_increment;
      score.update(cloud, next, mix, kernel);
      cloud = std::move(next);
      if ((t + 1) % cfg.update_interval == 0) {
        std::vector<double> delta(dim);
        for (std::size_t k = 0; k < dim; ++k) delta[k] = score.score()[k] - last_score[k];
        last_score = score.score();
        auto theta = params.theta();
        ascent.apply(delta, theta);
        params.set_theta(std::move(theta));
        kernel.reset(params, true);
      }
    }
    result.pass_log_likelihood.push_back(loglik);
  }
  result.theta = params.theta();
  result.final_log_likelihood =
      smooth_single_group(potentials, T, params, cfg.max_particles, cfg.epsilon, rng, result.posteriors);
  return result;
}

}  // namespace methcp

#endif  // METHCP_SINGLE_FILTER_HPP
