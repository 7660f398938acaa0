#ifndef METHCP_SOJOURN_HPP
#define METHCP_SOJOURN_HPP

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "methcp/numeric.hpp"

namespace methcp {

// Shifted negative-binomial sojourn law: h(d) = NB(d - shift; size, success)
// for d >= shift, where NB(z; k, w) = Gamma(z+k)/(Gamma(k) z!) w^z (1-w)^k.
struct SojournPrior {
  std::int64_t shift = 1;
  double size = 2.0;
  double success = 0.5;
};

// Survival mass below which the hazard is clamped to one.
inline constexpr double kSurvivalFloor = 1e-300;

namespace detail {

// P(Z >= k) for Z ~ NB(size, success).
[[nodiscard]] inline double nb_tail(std::int64_t k, double size, double success) {
  if (k <= 0) return 1.0;
  if (success <= 0.0) return 0.0;
  return boost::math::ibeta(static_cast<double>(k), size, success);
}

[[nodiscard]] inline double nb_log_pmf(std::int64_t z, double size, double success) {
  if (z < 0) return kNegInf;
  const double zd = static_cast<double>(z);
  const double lz = z == 0 ? 0.0 : zd * std::log(success);
  return std::lgamma(zd + size) - std::lgamma(size) - std::lgamma(zd + 1.0) + lz + size * std::log1p(-success);
}

// 1 - H(j) with H(j) = sum_{k=1}^{j} h(k). A zero shift leaves the mass at
// d = 0 outside H, which keeps the survival function strictly positive.
[[nodiscard]] inline double survival(std::int64_t j, const SojournPrior& p) {
  double s = nb_tail(j + 1 - p.shift, p.size, p.success);
  if (p.shift <= 0) s += std::exp(nb_log_pmf(-p.shift, p.size, p.success));
  return s;
}

// sum_{k >= k0} NB(k) * dlog NB(k)/dlogit(success), in closed form.
[[nodiscard]] inline double tail_score(std::int64_t k0, const SojournPrior& p) {
  if (k0 <= 0) return 0.0;
  const double w = p.success;
  return p.size * w * (nb_tail(k0 - 1, p.size + 1.0, w) - nb_tail(k0, p.size, w));
}

}  // namespace detail

[[nodiscard]] inline double sojourn_log_pmf(std::int64_t d, const SojournPrior& prior) {
  return detail::nb_log_pmf(d - prior.shift, prior.size, prior.success);
}

/// Change-point probability after `d` sites in the current regime:
/// h(d) / (1 - H(d-1)). Exactly zero below the shift; clamped to one once the
/// survival mass underflows.
[[nodiscard]] inline double sojourn_hazard(std::int64_t d, const SojournPrior& prior) {
  if (d < prior.shift) return 0.0;
  const double surv = detail::survival(d - 1, prior);
  if (surv < kSurvivalFloor) return 1.0;
  const double rho = std::exp(sojourn_log_pmf(d, prior)) / surv;
  return std::min(1.0, std::max(0.0, rho));
}

/// 1 - hazard, computed as a survival ratio to keep precision when the hazard
/// is small.
[[nodiscard]] inline double sojourn_continue(std::int64_t d, const SojournPrior& prior) {
  if (d < prior.shift) return 1.0;
  const double prev = detail::survival(d - 1, prior);
  if (prev < kSurvivalFloor) return 0.0;
  return std::min(1.0, detail::survival(d, prior) / prev);
}

/// Derivative of log h(i) with respect to logit(success): (i-u) - w (i-u+k).
[[nodiscard]] inline double sojourn_log_pmf_score(std::int64_t i, const SojournPrior& prior) {
  if (i < prior.shift) return 0.0;
  const double z = static_cast<double>(i - prior.shift);
  return z - prior.success * (z + prior.size);
}

struct HazardGradient {
  double log_hazard = 0.0;    // d log rho / d logit(success)
  double log_continue = 0.0;  // d log (1 - rho) / d logit(success)
};

/// Sojourn-part score for a shift of at least one.
[[nodiscard]] inline HazardGradient sojourn_hazard_gradient(std::int64_t d, const SojournPrior& prior) {
  HazardGradient g;
  if (d < prior.shift) return g;
  const std::int64_t z = d - prior.shift;
  const double tail_now = detail::nb_tail(z, prior.size, prior.success);
  if (tail_now < kSurvivalFloor) return g;
  g.log_hazard = sojourn_log_pmf_score(d, prior) - detail::tail_score(z, prior) / tail_now;
  const double tail_next = detail::nb_tail(z + 1, prior.size, prior.success);
  if (tail_next >= kSurvivalFloor) {
    g.log_continue = detail::tail_score(z + 1, prior) / tail_next - detail::tail_score(z, prior) / tail_now;
  }
  return g;
}

// Lazily grown per-sojourn cache of hazards (and optionally their scores).
class SojournTable {
 public:
  SojournTable() = default;
  SojournTable(const SojournPrior& prior, bool with_gradient) : prior_(prior), with_gradient_(with_gradient) {}

  [[nodiscard]] const SojournPrior& prior() const noexcept { return prior_; }

  void reset(const SojournPrior& prior) {
    prior_ = prior;
    hazard_.clear();
    cont_.clear();
    grad_.clear();
  }

  [[nodiscard]] double hazard(std::int64_t d) {
    ensure(d);
    return hazard_[static_cast<std::size_t>(d)];
  }
  [[nodiscard]] double cont(std::int64_t d) {
    ensure(d);
    return cont_[static_cast<std::size_t>(d)];
  }
  [[nodiscard]] const HazardGradient& gradient(std::int64_t d) {
    ensure(d);
    return grad_[static_cast<std::size_t>(d)];
  }

  void ensure(std::int64_t d) {
    if (d < 1) throw std::out_of_range("sojourn must be >= 1");
    if (static_cast<std::size_t>(d) < hazard_.size()) return;
    std::size_t target = std::max<std::size_t>(static_cast<std::size_t>(d) + 1, 2 * hazard_.size());
    target = std::max<std::size_t>(target, 64);
    const std::size_t from = hazard_.empty() ? 1 : hazard_.size();
    hazard_.resize(target, 0.0);
    cont_.resize(target, 1.0);
    if (with_gradient_) grad_.resize(target);
    for (std::size_t k = from; k < target; ++k) {
      const auto dk = static_cast<std::int64_t>(k);
      hazard_[k] = sojourn_hazard(dk, prior_);
      cont_[k] = sojourn_continue(dk, prior_);
      if (with_gradient_) grad_[k] = sojourn_hazard_gradient(dk, prior_);
    }
  }

 private:
  SojournPrior prior_;
  bool with_gradient_ = false;
  std::vector<double> hazard_;
  std::vector<double> cont_;
  std::vector<HazardGradient> grad_;
};

}  // namespace methcp

#endif  // METHCP_SOJOURN_HPP
