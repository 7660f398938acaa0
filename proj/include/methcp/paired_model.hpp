#ifndef METHCP_PAIRED_MODEL_HPP
#define METHCP_PAIRED_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "methcp/beta_binomial.hpp"
#include "methcp/numeric.hpp"
#include "methcp/single_model.hpp"
#include "methcp/sojourn.hpp"

namespace methcp {

// Latent state of the case-control chain. merged == 1 means both groups share
// one regime and sojourn; otherwise the case regime differs from the control one.
struct PairedState {
  SingleGroupState control;
  SingleGroupState case_state;
  std::uint8_t merged = 1;

  bool operator==(const PairedState&) const = default;
};

// Placeholder returned in successor slot 2 when the current state is merged.
inline constexpr PairedState kSentinelState{{0, 0}, {0, 0}, 0};

[[nodiscard]] inline bool is_sentinel(const PairedState& x) noexcept { return x.control.sojourn == 0; }

// Case-group and merge/split constants; none of them are estimated.
struct CaseControlConstants {
  double q_split = 0.01;      // P(z' = 0 | z = 1)
  double q_merge = 0.1;       // P(z' = 1 | z = 0)
  double case_success = 0.8;  // omega~
  double case_size = 2.0;     // kappa~
  std::int64_t case_shift = 3;  // u~ (may be 0)
  std::int64_t min_z_gap = 0;   // z may only jump when min(d~, d-) >= this
};

class CaseControlParams {
 public:
  CaseControlParams() = default;
  CaseControlParams(SingleGroupParams control, CaseControlConstants constants)
      : control_(std::move(control)), c_(constants) {
    auto open01 = [](double v) { return v > 0.0 && v < 1.0; };
    if (!open01(c_.q_split) || !open01(c_.q_merge)) throw std::invalid_argument("q_split and q_merge must lie in (0,1)");
    if (!open01(c_.case_success)) throw std::invalid_argument("case sojourn success must lie in (0,1)");
    if (!(c_.case_size > 0.0)) throw std::invalid_argument("case sojourn size must be positive");
    if (c_.case_shift < 0 || c_.min_z_gap < 0) throw std::invalid_argument("shifts must be nonnegative");
  }

  [[nodiscard]] const SingleGroupParams& control() const noexcept { return control_; }
  [[nodiscard]] const CaseControlConstants& constants() const noexcept { return c_; }
  [[nodiscard]] std::size_t regimes() const noexcept { return control_.regimes(); }
  [[nodiscard]] SojournPrior case_prior() const { return {c_.case_shift, c_.case_size, c_.case_success}; }

  // q_{z, z'} of the 2 x 2 merge/split matrix.
  [[nodiscard]] double z_transition(int from, int to) const {
    if (from == 0) return to == 1 ? c_.q_merge : 1.0 - c_.q_merge;
    return to == 0 ? c_.q_split : 1.0 - c_.q_split;
  }

  // Stationary law of the merge/split chain, used for z_1.
  [[nodiscard]] double initial_merged() const { return c_.q_merge / (c_.q_merge + c_.q_split); }

 private:
  SingleGroupParams control_;
  CaseControlConstants c_;
};

[[nodiscard]] inline std::size_t successor_count(std::size_t regimes) { return 2 * regimes + regimes * regimes; }

/// The R^2 possible initial states; entry r R + s is (1{r=s}, 1, r, 1, s).
[[nodiscard]] inline std::vector<PairedState> enumerate_initial(std::size_t regimes) {
  if (regimes < 2) throw std::invalid_argument("need at least two regimes");
  std::vector<PairedState> out;
  out.reserve(regimes * regimes);
  for (std::size_t r = 0; r < regimes; ++r) {
    for (std::size_t s = 0; s < regimes; ++s) {
      out.push_back({{1, static_cast<std::int32_t>(r)}, {1, static_cast<std::int32_t>(s)}, static_cast<std::uint8_t>(r == s)});
    }
  }
  return out;
}

namespace detail {

inline PairedState joint_restart(std::size_t r, std::size_t s) {
  return {{1, static_cast<std::int32_t>(r)}, {1, static_cast<std::int32_t>(s)}, static_cast<std::uint8_t>(r == s)};
}

// i-th regime of [R] \ {skip}, in increasing order.
inline std::int32_t regime_skipping(std::size_t i, std::int32_t skip) {
  const auto v = static_cast<std::int32_t>(i);
  return v < skip ? v : v + 1;
}

}  // namespace detail

/// Writes successor slot `i` (0-based) of x. Slots: 0 both continue; 1 merge
/// (sentinel when x is merged); 2..R control change avoiding the case regime;
/// R+1..2R-1 case change avoiding the control regime; 2R.. joint restarts.
[[nodiscard]] inline PairedState successor(const PairedState& x, std::size_t i, std::size_t regimes) {
  const std::size_t R = regimes;
  if (i == 0) return {{x.control.sojourn + 1, x.control.regime}, {x.case_state.sojourn + 1, x.case_state.regime}, x.merged};
  if (i == 1) {
    if (x.merged) return kSentinelState;
    const SingleGroupState c{x.control.sojourn + 1, x.control.regime};
    return {c, c, 1};
  }
  if (i <= R) {
    return {{1, detail::regime_skipping(i - 2, x.case_state.regime)}, {x.case_state.sojourn + 1, x.case_state.regime}, 0};
  }
  if (i < 2 * R) {
    return {{x.control.sojourn + 1, x.control.regime}, {1, detail::regime_skipping(i - R - 1, x.control.regime)}, 0};
  }
  const std::size_t j = i - 2 * R;
  return detail::joint_restart(j / R, j % R);
}

/// All I = 2R + R^2 successor candidates of x, including the sentinel slot.
[[nodiscard]] inline std::vector<PairedState> enumerate_successors(const PairedState& x, std::size_t regimes) {
  std::vector<PairedState> out(successor_count(regimes));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = successor(x, i, regimes);
  return out;
}

[[nodiscard]] inline bool is_valid_state(const PairedState& x, std::size_t regimes) {
  const auto R = static_cast<std::int32_t>(regimes);
  if (x.control.sojourn < 1 || x.case_state.sojourn < 1) return false;
  if (x.control.regime < 0 || x.control.regime >= R || x.case_state.regime < 0 || x.case_state.regime >= R) return false;
  if (x.merged > 1) return false;
  if (x.merged) return x.control == x.case_state;
  return x.control.regime != x.case_state.regime;
}

// Transition kernel of the paired chain with cached hazards.
class PairedKernel {
 public:
  explicit PairedKernel(const CaseControlParams& params)
      : params_(&params), control_(params.control(), false), case_table_(params.case_prior(), false) {}

  [[nodiscard]] const CaseControlParams& params() const { return *params_; }
  [[nodiscard]] std::size_t regimes() const { return params_->regimes(); }
  [[nodiscard]] SingleGroupKernel& control_kernel() { return control_; }

  // Case change-point probability while split with a fixed control regime
  // next; zero when no regime is available to jump to.
  [[nodiscard]] double case_hazard(std::int32_t sojourn) {
    if (regimes() < 3) return 0.0;
    return case_table_.hazard(sojourn);
  }
  [[nodiscard]] double case_continue(std::int32_t sojourn) {
    if (regimes() < 3) return 1.0;
    return case_table_.cont(sojourn);
  }

  /// f_1(x).
  [[nodiscard]] double initial_prob(const PairedState& x) const {
    const std::size_t R = regimes();
    if (!is_valid_state(x, R) || x.control.sojourn != 1 || x.case_state.sojourn != 1) return 0.0;
    const double pz = params_->initial_merged();
    const double nu = params_->control().initial()[static_cast<std::size_t>(x.control.regime)];
    if (x.merged) return pz * nu;
    return (1.0 - pz) * nu / static_cast<double>(R - 1);
  }

  /// f(next | cur), composed as Q(z' | cur) f-(control' | control) times the
  /// case-group branch selected by (z, z') and the next control state.
  [[nodiscard]] double prob(const PairedState& next, const PairedState& cur) {
    const std::size_t R = regimes();
    if (!is_valid_state(next, R)) return 0.0;
    const auto& k = params_->constants();
    const bool free = std::min(cur.case_state.sojourn, cur.control.sojourn) >= k.min_z_gap;
    const double qz = free ? params_->z_transition(cur.merged, next.merged) : (next.merged == cur.merged ? 1.0 : 0.0);
    if (qz == 0.0) return 0.0;
    const double fbar = control_.prob(next.control, cur.control);
    if (fbar == 0.0) return 0.0;
    double branch = 0.0;
    if (next.merged) {
      branch = 1.0;  // validity already forces case == control
    } else if (!cur.merged) {
      if (next.control.regime != cur.case_state.regime) {
        branch = case_kernel(next.case_state, cur.case_state, next.control.regime);
      } else {
        // The control jumped onto the case regime: the case must move.
        branch = next.case_state.sojourn == 1 ? avoid_two(next.case_state.regime, cur.case_state.regime, next.control.regime)
                                              : 0.0;
      }
    } else if (next.control.sojourn != 1) {
      branch = next.case_state.sojourn == 1 ? 1.0 / static_cast<double>(R - 1) : 0.0;
    } else {
      branch = case_kernel(next.case_state, cur.case_state, next.control.regime);
    }
    return qz * fbar * branch;
  }

  /// Probabilities of the I successor slots of `cur` (0 for the sentinel).
  void successor_probs(const PairedState& cur, std::span<double> out) {
    const std::size_t R = regimes();
    const auto& k = params_->constants();
    const auto rb = static_cast<std::size_t>(cur.control.regime);
    const auto rt = static_cast<std::size_t>(cur.case_state.regime);
    const auto& P = params_->control().transition();
    const double rho = control_.hazard(cur.control);
    const double stay = control_.cont(cur.control);
    const double rho_c = case_hazard(cur.case_state.sojourn);
    const double stay_c = case_continue(cur.case_state.sojourn);
    const double per_case_jump = R > 2 ? rho_c / static_cast<double>(R - 2) : 0.0;
    const bool free = std::min(cur.case_state.sojourn, cur.control.sojourn) >= k.min_z_gap;
    std::fill(out.begin(), out.end(), 0.0);
    if (!cur.merged) {
      const double q_keep = free ? 1.0 - k.q_merge : 1.0;
      const double q_move = free ? k.q_merge : 0.0;
      out[0] = q_keep * stay * stay_c;
      out[1] = q_move * stay;
      for (std::size_t i = 0; i + 1 < R; ++i) {
        const auto c = static_cast<std::size_t>(detail::regime_skipping(i, cur.case_state.regime));
        out[2 + i] = q_keep * rho * P(rb, c) * stay_c;
      }
      for (std::size_t i = 0; i + 1 < R; ++i) {
        const auto s = static_cast<std::size_t>(detail::regime_skipping(i, cur.control.regime));
        out[R + 1 + i] = s == rt ? 0.0 : q_keep * stay * per_case_jump;
      }
      for (std::size_t r = 0; r < R; ++r) {
        const double jump = rho * P(rb, r);
        for (std::size_t s = 0; s < R; ++s) {
          double v = 0.0;
          if (r == s) {
            v = q_move * jump;
          } else if (r == rt) {
            v = q_keep * jump / static_cast<double>(R - 1);
          } else if (s != rt) {
            v = q_keep * jump * per_case_jump;
          }
          out[2 * R + r * R + s] = v;
        }
      }
    } else {
      const double q_keep = free ? 1.0 - k.q_split : 1.0;
      const double q_move = free ? k.q_split : 0.0;
      out[0] = q_keep * stay;
      for (std::size_t i = 0; i + 1 < R; ++i) {
        const auto c = static_cast<std::size_t>(detail::regime_skipping(i, cur.case_state.regime));
        out[2 + i] = q_move * rho * P(rb, c) * stay_c;
      }
      for (std::size_t i = 0; i + 1 < R; ++i) out[R + 1 + i] = q_move * stay / static_cast<double>(R - 1);
      for (std::size_t r = 0; r < R; ++r) {
        const double jump = rho * P(rb, r);
        for (std::size_t s = 0; s < R; ++s) {
          double v = 0.0;
          if (r == s) {
            v = q_keep * jump;
          } else if (s != rb) {
            v = q_move * jump * per_case_jump;
          }
          out[2 * R + r * R + s] = v;
        }
      }
    }
  }

 private:
  // 1 / |[R] \ {a, b}| on that set.
  [[nodiscard]] double avoid_two(std::int32_t target, std::int32_t a, std::int32_t b) const {
    if (target == a || target == b) return 0.0;
    const std::size_t support = regimes() - (a == b ? 1 : 2);
    return support > 0 ? 1.0 / static_cast<double>(support) : 0.0;
  }

  // Case change-point kernel avoiding the next control regime.
  [[nodiscard]] double case_kernel(const SingleGroupState& next, const SingleGroupState& cur, std::int32_t control_next) {
    if (next.sojourn == cur.sojourn + 1 && next.regime == cur.regime) return case_continue(cur.sojourn);
    if (next.sojourn == 1) return case_hazard(cur.sojourn) * avoid_two(next.regime, cur.regime, control_next);
    return 0.0;
  }

  const CaseControlParams* params_;
  SingleGroupKernel control_;
  SojournTable case_table_;
};

/// log f(next | cur); with no current state, log f_1(next).
[[nodiscard]] inline double paired_transition_log_prob(const PairedState& next, std::optional<PairedState> cur,
                                                       const CaseControlParams& params) {
  PairedKernel kernel(params);
  return safe_log(cur ? kernel.prob(next, *cur) : kernel.initial_prob(next));
}

/// Control-group potential under the control regime plus case-group
/// potential under the case regime.
[[nodiscard]] inline double paired_log_potential(const SiteCounts& control, const SiteCounts& case_counts,
                                                 const PairedState& x, const RegimePalette& palette) {
  return site_log_potential(control, static_cast<std::size_t>(x.control.regime), palette) +
         site_log_potential(case_counts, static_cast<std::size_t>(x.case_state.regime), palette);
}

}  // namespace methcp

#endif  // METHCP_PAIRED_MODEL_HPP
