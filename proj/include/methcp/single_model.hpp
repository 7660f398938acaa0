#ifndef METHCP_SINGLE_MODEL_HPP
#define METHCP_SINGLE_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "methcp/numeric.hpp"
#include "methcp/regimes.hpp"
#include "methcp/sojourn.hpp"

namespace methcp {

// Latent state of the single-group chain: sites spent in the current regime
// (>= 1) and the 0-based regime index.
struct SingleGroupState {
  std::int32_t sojourn = 1;
  std::int32_t regime = 0;

  bool operator==(const SingleGroupState&) const = default;
};

// Row-major R x R matrix of regime transition probabilities.
class TransitionMatrix {
 public:
  TransitionMatrix() = default;
  explicit TransitionMatrix(std::size_t regimes) : n_(regimes), p_(regimes * regimes, 0.0) {}

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] double operator()(std::size_t from, std::size_t to) const { return p_[from * n_ + to]; }
  double& operator()(std::size_t from, std::size_t to) { return p_[from * n_ + to]; }
  [[nodiscard]] std::span<const double> row(std::size_t from) const {
    return std::span<const double>(p_).subspan(from * n_, n_);
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> p_;
};

struct UnpackedParams {
  TransitionMatrix transition;
  std::vector<double> success;  // omega_r
};

[[nodiscard]] inline std::size_t theta_size(std::size_t regimes) { return regimes * regimes; }

// Index of the transition logit that drives P(to | from), to != from.
[[nodiscard]] inline std::size_t transition_logit_index(std::size_t from, std::size_t to, std::size_t regimes) {
  return (regimes - 1) * from + (to < from ? to : to - 1);
}

[[nodiscard]] inline std::size_t success_logit_index(std::size_t regime, std::size_t regimes) {
  return regimes * (regimes - 1) + regime;
}

/// Maps the unconstrained vector (R(R-1) transition logits followed by R
/// sojourn logits) to a zero-diagonal row-stochastic matrix and success
/// probabilities.
[[nodiscard]] inline UnpackedParams unpack_params(std::span<const double> theta, std::size_t regimes) {
  if (regimes < 2) throw std::invalid_argument("need at least two regimes");
  if (theta.size() != theta_size(regimes)) throw std::invalid_argument("theta must have R^2 entries");
  UnpackedParams out{TransitionMatrix(regimes), std::vector<double>(regimes)};
  for (std::size_t r = 0; r < regimes; ++r) {
    const auto logits = theta.subspan((regimes - 1) * r, regimes - 1);
    double mx = kNegInf;
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    for (std::size_t c = 0; c < regimes; ++c) {
      if (c == r) continue;
      out.transition(r, c) = std::exp(logits[c < r ? c : c - 1] - mx) / z;
    }
    out.success[r] = logistic(theta[success_logit_index(r, regimes)]);
  }
  return out;
}

// Parameters of the single-group change-point model. Shifts and sizes are
// fixed; only theta is estimated.
class SingleGroupParams {
 public:
  SingleGroupParams() = default;

  SingleGroupParams(RegimePalette palette, std::vector<double> theta, std::vector<std::int64_t> shifts,
                    std::vector<double> sizes, std::vector<double> initial = {})
      : palette_(std::move(palette)), shifts_(std::move(shifts)), sizes_(std::move(sizes)), initial_(std::move(initial)) {
    const std::size_t R = palette_.size();
    if (shifts_.size() != R || sizes_.size() != R) throw std::invalid_argument("shifts/sizes must have R entries");
    for (auto u : shifts_) {
      if (u < 1) throw std::invalid_argument("sojourn shifts must be >= 1");
    }
    for (double k : sizes_) {
      if (!(k > 0.0)) throw std::invalid_argument("sojourn sizes must be positive");
    }
    if (initial_.empty()) initial_.assign(R, 1.0 / static_cast<double>(R));
    if (initial_.size() != R) throw std::invalid_argument("initial regime distribution must have R entries");
    set_theta(std::move(theta));
  }

  /// Defaults: shift 3 and size 2 for every regime, uniform initial regime law.
  static SingleGroupParams with_defaults(RegimePalette palette, std::vector<double> theta = {}) {
    const std::size_t R = palette.size();
    if (theta.empty()) theta.assign(theta_size(R), 0.0);
    return SingleGroupParams(std::move(palette), std::move(theta), std::vector<std::int64_t>(R, 3),
                             std::vector<double>(R, 2.0));
  }

  void set_theta(std::vector<double> theta) {
    unpacked_ = unpack_params(theta, palette_.size());
    theta_ = std::move(theta);
  }

  [[nodiscard]] std::size_t regimes() const noexcept { return palette_.size(); }
  [[nodiscard]] const RegimePalette& palette() const noexcept { return palette_; }
  [[nodiscard]] const std::vector<double>& theta() const noexcept { return theta_; }
  [[nodiscard]] const std::vector<std::int64_t>& shifts() const noexcept { return shifts_; }
  [[nodiscard]] const std::vector<double>& sizes() const noexcept { return sizes_; }
  [[nodiscard]] const std::vector<double>& initial() const noexcept { return initial_; }
  [[nodiscard]] const TransitionMatrix& transition() const noexcept { return unpacked_.transition; }
  [[nodiscard]] double success(std::size_t r) const { return unpacked_.success[r]; }
  [[nodiscard]] SojournPrior sojourn_prior(std::size_t r) const { return {shifts_[r], sizes_[r], success(r)}; }

 private:
  RegimePalette palette_;
  std::vector<double> theta_;
  std::vector<std::int64_t> shifts_;
  std::vector<double> sizes_;
  std::vector<double> initial_;
  UnpackedParams unpacked_;
};

/// log f(next | cur); with no current state, the initial law delta_1(d) nu(r).
[[nodiscard]] inline double transition_log_prob(const SingleGroupState& next, std::optional<SingleGroupState> cur,
                                                const SingleGroupParams& params) {
  const auto R = static_cast<std::int32_t>(params.regimes());
  if (next.regime < 0 || next.regime >= R || next.sojourn < 1) return kNegInf;
  if (!cur) {
    return next.sojourn == 1 ? safe_log(params.initial()[static_cast<std::size_t>(next.regime)]) : kNegInf;
  }
  const auto prior = params.sojourn_prior(static_cast<std::size_t>(cur->regime));
  if (next.sojourn == cur->sojourn + 1 && next.regime == cur->regime) {
    return safe_log(sojourn_continue(cur->sojourn, prior));
  }
  if (next.sojourn == 1 && next.regime != cur->regime) {
    return safe_log(sojourn_hazard(cur->sojourn, prior)) +
           safe_log(params.transition()(static_cast<std::size_t>(cur->regime), static_cast<std::size_t>(next.regime)));
  }
  return kNegInf;
}

/// Gradient of log f(next | cur) with respect to theta. Requires a reachable
/// transition; the initial law does not depend on theta.
[[nodiscard]] inline std::vector<double> grad_log_transition(const SingleGroupState& next, const SingleGroupState& cur,
                                                             const SingleGroupParams& params) {
  const std::size_t R = params.regimes();
  std::vector<double> g(theta_size(R), 0.0);
  const auto r = static_cast<std::size_t>(cur.regime);
  const auto grad = sojourn_hazard_gradient(cur.sojourn, params.sojourn_prior(r));
  if (next.sojourn == cur.sojourn + 1 && next.regime == cur.regime) {
    g[success_logit_index(r, R)] = grad.log_continue;
    return g;
  }
  if (next.sojourn != 1 || next.regime == cur.regime) throw std::domain_error("unreachable transition has no gradient");
  g[success_logit_index(r, R)] = grad.log_hazard;
  const auto to = static_cast<std::size_t>(next.regime);
  for (std::size_t c = 0; c < R; ++c) {
    if (c == r) continue;
    g[transition_logit_index(r, c, R)] = (c == to ? 1.0 : 0.0) - params.transition()(r, c);
  }
  return g;
}

// Transition kernel with cached hazards and hazard scores, for use inside the
// filters. Not thread-safe: the caches grow on demand.
class SingleGroupKernel {
 public:
  SingleGroupKernel() = default;
  explicit SingleGroupKernel(const SingleGroupParams& params, bool with_gradient = false) { reset(params, with_gradient); }

  void reset(const SingleGroupParams& params, bool with_gradient) {
    params_ = &params;
    with_gradient_ = with_gradient;
    tables_.clear();
    for (std::size_t r = 0; r < params.regimes(); ++r) tables_.emplace_back(params.sojourn_prior(r), with_gradient);
  }

  [[nodiscard]] const SingleGroupParams& params() const { return *params_; }
  [[nodiscard]] std::size_t regimes() const { return params_->regimes(); }

  [[nodiscard]] double hazard(const SingleGroupState& x) { return tables_[static_cast<std::size_t>(x.regime)].hazard(x.sojourn); }
  [[nodiscard]] double cont(const SingleGroupState& x) { return tables_[static_cast<std::size_t>(x.regime)].cont(x.sojourn); }
  [[nodiscard]] const HazardGradient& hazard_gradient(const SingleGroupState& x) {
    return tables_[static_cast<std::size_t>(x.regime)].gradient(x.sojourn);
  }
  [[nodiscard]] SojournTable& table(std::size_t r) { return tables_[r]; }

  // f(next | cur) in linear scale.
  [[nodiscard]] double prob(const SingleGroupState& next, const SingleGroupState& cur) {
    if (next.sojourn == cur.sojourn + 1 && next.regime == cur.regime) return cont(cur);
    if (next.sojourn == 1 && next.regime != cur.regime) {
      return hazard(cur) * params_->transition()(static_cast<std::size_t>(cur.regime), static_cast<std::size_t>(next.regime));
    }
    return 0.0;
  }

  // out += grad log f(cur -> (cur.sojourn + 1, cur.regime)).
  void add_continue_gradient(const SingleGroupState& cur, std::span<double> out) {
    const std::size_t R = regimes();
    out[success_logit_index(static_cast<std::size_t>(cur.regime), R)] += hazard_gradient(cur).log_continue;
  }

  // out += scale * grad log f(cur -> (1, to)), to != cur.regime.
  void add_change_gradient(const SingleGroupState& cur, std::size_t to, double scale, std::span<double> out) {
    const std::size_t R = regimes();
    const auto r = static_cast<std::size_t>(cur.regime);
    out[success_logit_index(r, R)] += scale * hazard_gradient(cur).log_hazard;
    const auto row = params_->transition().row(r);
    for (std::size_t c = 0; c < R; ++c) {
      if (c == r) continue;
      out[transition_logit_index(r, c, R)] += scale * ((c == to ? 1.0 : 0.0) - row[c]);
    }
  }

 private:
  const SingleGroupParams* params_ = nullptr;
  bool with_gradient_ = false;
  std::vector<SojournTable> tables_;
};

}  // namespace methcp

#endif  // METHCP_SINGLE_MODEL_HPP
