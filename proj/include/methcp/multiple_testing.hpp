#ifndef METHCP_MULTIPLE_TESTING_HPP
#define METHCP_MULTIPLE_TESTING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "methcp/paired_filter.hpp"
#include "methcp/regimes.hpp"

namespace methcp {

enum class SignalKind { Split, MeanDiff, RegimeDiff, Hypo, Hyper, VarUp, VarDown };

inline constexpr SignalKind kAllSignals[] = {SignalKind::Split, SignalKind::MeanDiff, SignalKind::RegimeDiff,
                                             SignalKind::Hypo,  SignalKind::Hyper,    SignalKind::VarUp,
                                             SignalKind::VarDown};

[[nodiscard]] inline std::string_view signal_name(SignalKind kind) {
  switch (kind) {
    case SignalKind::Split: return "split";
    case SignalKind::MeanDiff: return "mean-diff";
    case SignalKind::RegimeDiff: return "regime-diff";
    case SignalKind::Hypo: return "hypo";
    case SignalKind::Hyper: return "hyper";
    case SignalKind::VarUp: return "var-up";
    case SignalKind::VarDown: return "var-down";
  }
  return "?";
}

[[nodiscard]] inline SignalKind parse_signal(std::string_view name) {
  for (auto kind : kAllSignals) {
    if (signal_name(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown signal '" + std::string(name) + "'");
}

/// Signal indicator of one site. Hypo/hyper and var-up/var-down compare the
/// case regime against the control regime.
[[nodiscard]] inline bool signal_value(SignalKind kind, const SiteLabel& x, const RegimePalette& palette) {
  const auto& c = palette[x.control];
  const auto& k = palette[x.case_regime];
  switch (kind) {
    case SignalKind::Split: return x.merged == 0;
    case SignalKind::MeanDiff: return c.mean != k.mean;
    case SignalKind::RegimeDiff: return x.control != x.case_regime;
    case SignalKind::Hypo: return k.mean < c.mean;
    case SignalKind::Hyper: return k.mean > c.mean;
    case SignalKind::VarUp: return k.sd > c.sd;
    case SignalKind::VarDown: return k.sd < c.sd;
  }
  return false;
}

/// p_t = fraction of trajectories in which the signal is absent at site t.
[[nodiscard]] inline std::vector<double> site_lfdr(const TrajectorySet& trajs, SignalKind kind, const RegimePalette& palette) {
  if (trajs.count == 0) throw std::invalid_argument("empty trajectory set");
  std::vector<double> out(trajs.sites, 0.0);
  for (std::size_t k = 0; k < trajs.count; ++k) {
    const auto p = trajs.path(k);
    for (std::size_t t = 0; t < trajs.sites; ++t) out[t] += signal_value(kind, p[t], palette) ? 0.0 : 1.0;
  }
  for (double& v : out) v /= static_cast<double>(trajs.count);
  return out;
}

struct DecisionSet {
  std::vector<std::uint8_t> reject;
  std::size_t rejections = 0;
  double estimated_fdr = 0.0;  // criterion value at the cut (0 when nothing is rejected)
};

namespace detail {

// Indices sorted by key, ties by original index.
inline std::vector<std::size_t> ranking(std::span<const double> key) {
  std::vector<std::size_t> idx(key.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  return idx;
}

inline DecisionSet reject_prefix(std::span<const std::size_t> order, std::size_t k, std::size_t n, double criterion) {
  DecisionSet d;
  d.reject.assign(n, 0);
  for (std::size_t j = 0; j < k; ++j) d.reject[order[j]] = 1;
  d.rejections = k;
  d.estimated_fdr = k > 0 ? criterion : 0.0;
  return d;
}

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
}

}  // namespace detail

/// Rejects the k smallest local fdrs, k the largest prefix whose running mean is <= alpha.
[[nodiscard]] inline DecisionSet stepup(std::span<const double> lfdr, double alpha) {
  detail::check_alpha(alpha);
  const auto order = detail::ranking(lfdr);
  double sum = 0.0;
  std::size_t k = 0;
  double at_k = 0.0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    sum += lfdr[order[j]];
    const double q = sum / static_cast<double>(j + 1);
    if (q <= alpha) {
      k = j + 1;
      at_k = q;
    }
  }
  return detail::reject_prefix(order, k, lfdr.size(), at_k);
}

/// Weighted step-up: rank by J_t = a (p - alpha) / (b (1 - p) + a |p - alpha|)
/// and reject the largest prefix with sum of a (p - alpha) <= 0.
[[nodiscard]] inline DecisionSet stepup_weighted(std::span<const double> lfdr, std::span<const double> a,
                                                 std::span<const double> b, double alpha) {
  detail::check_alpha(alpha);
  const std::size_t n = lfdr.size();
  if (a.size() != n || b.size() != n) throw std::invalid_argument("weight vectors must match the lfdr vector");
  std::vector<double> J(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (a[t] < 0.0 || b[t] < 0.0) throw std::invalid_argument("weights must be nonnegative");
    const double num = a[t] * (lfdr[t] - alpha);
    const double den = b[t] * (1.0 - lfdr[t]) + a[t] * std::abs(lfdr[t] - alpha);
    J[t] = den > 0.0 ? num / den : 0.0;
  }
  const auto order = detail::ranking(J);
  double excess = 0.0;
  double num = 0.0;
  double den = 0.0;
  std::size_t k = 0;
  double at_k = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t t = order[j];
    excess += a[t] * (lfdr[t] - alpha);
    num += a[t] * lfdr[t];
    den += a[t];
    if (excess <= 0.0) {
      k = j + 1;
      at_k = den > 0.0 ? num / den : 0.0;
    }
  }
  return detail::reject_prefix(order, k, n, at_k);
}

// Contiguous block of sites [start, end), 0-based half-open.
struct Region {
  std::size_t start = 0;
  std::size_t end = 0;
  double weight = 1.0;

  [[nodiscard]] std::size_t size() const noexcept { return end - start; }
  bool operator==(const Region&) const = default;
};

/// Maximal runs of sites whose posterior is >= threshold; weight = site count.
[[nodiscard]] inline std::vector<Region> build_regions(std::span<const double> posterior, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must lie in (0,1)");
  std::vector<Region> out;
  std::size_t t = 0;
  while (t < posterior.size()) {
    if (posterior[t] >= threshold) {
      std::size_t e = t;
      while (e < posterior.size() && posterior[e] >= threshold) ++e;
      out.push_back({t, e, static_cast<double>(e - t)});
      t = e;
    } else {
      ++t;
    }
  }
  return out;
}

/// Proportion of signal sites of `path` inside the region.
[[nodiscard]] inline double region_signal_fraction(std::span<const SiteLabel> path, const Region& region, SignalKind kind,
                                                   const RegimePalette& palette) {
  if (region.size() == 0) throw std::invalid_argument("empty region");
  std::size_t hits = 0;
  for (std::size_t t = region.start; t < region.end; ++t) hits += signal_value(kind, path[t], palette) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(region.size());
}

/// p_k = fraction of trajectories whose signal proportion in region k is <= gamma.
[[nodiscard]] inline std::vector<double> region_lfdr(const TrajectorySet& trajs, std::span<const Region> regions,
                                                     double gamma, SignalKind kind, const RegimePalette& palette) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0,1)");
  if (trajs.count == 0) throw std::invalid_argument("empty trajectory set");
  std::vector<double> out(regions.size(), 0.0);
  for (std::size_t j = 0; j < regions.size(); ++j) {
    if (regions[j].size() == 0 || regions[j].end > trajs.sites) throw std::invalid_argument("invalid region");
    for (std::size_t k = 0; k < trajs.count; ++k) {
      if (region_signal_fraction(trajs.path(k), regions[j], kind, palette) <= gamma) out[j] += 1.0;
    }
    out[j] /= static_cast<double>(trajs.count);
  }
  return out;
}

/// Largest prefix (ascending p) whose w-weighted mean of p is <= alpha.
[[nodiscard]] inline DecisionSet region_stepup(std::span<const double> lfdr, std::span<const double> w, double alpha) {
  detail::check_alpha(alpha);
  if (w.size() != lfdr.size()) throw std::invalid_argument("weights must match the lfdr vector");
  for (double v : w) {
    if (!(v > 0.0)) throw std::invalid_argument("region weights must be positive");
  }
  const auto order = detail::ranking(lfdr);
  double num = 0.0;
  double den = 0.0;
  std::size_t k = 0;
  double at_k = 0.0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    num += w[order[j]] * lfdr[order[j]];
    den += w[order[j]];
    if (num / den <= alpha) {
      k = j + 1;
      at_k = num / den;
    }
  }
  return detail::reject_prefix(order, k, lfdr.size(), at_k);
}

enum class PValueMethod { Bonferroni, BH, BY, AdaptiveBH };

[[nodiscard]] inline PValueMethod parse_pvalue_method(std::string_view name) {
  if (name == "bonf") return PValueMethod::Bonferroni;
  if (name == "bh") return PValueMethod::BH;
  if (name == "by") return PValueMethod::BY;
  if (name == "abh") return PValueMethod::AdaptiveBH;
  throw std::invalid_argument("unknown p-value method '" + std::string(name) + "'");
}

/// Storey's null-proportion estimate (1 + #{p > lambda}) / (T (1 - lambda)), clipped at 1.
[[nodiscard]] inline double null_proportion(std::span<const double> p, double lambda = 0.5) {
  if (p.empty()) return 1.0;
  const auto above = std::count_if(p.begin(), p.end(), [&](double v) { return v > lambda; });
  const double est = (1.0 + static_cast<double>(above)) / (static_cast<double>(p.size()) * (1.0 - lambda));
  return std::min(1.0, est);
}

/// Rejects every p <= tau, tau the largest order statistic under its threshold.
[[nodiscard]] inline DecisionSet pvalue_adjust(std::span<const double> p, PValueMethod method, double alpha) {
  detail::check_alpha(alpha);
  const std::size_t T = p.size();
  const auto order = detail::ranking(p);
  const double n = static_cast<double>(T);
  double scale = 1.0;  // threshold for rank k is k alpha / (scale T)
  if (method == PValueMethod::BY) {
    scale = 0.0;
    for (std::size_t i = 1; i <= T; ++i) scale += 1.0 / static_cast<double>(i);
  } else if (method == PValueMethod::AdaptiveBH) {
    scale = null_proportion(p);
  }
  std::size_t k = 0;
  for (std::size_t j = 0; j < T; ++j) {
    const double threshold =
        method == PValueMethod::Bonferroni ? alpha / n : static_cast<double>(j + 1) * alpha / (scale * n);
    if (p[order[j]] <= threshold) k = j + 1;
  }
  return detail::reject_prefix(order, k, T, k > 0 ? p[order[k - 1]] : 0.0);
}

struct DecisionScore {
  double rejected = 0.0;        // R (weighted by a)
  double false_positive = 0.0;  // V
  double false_negative = 0.0;  // U (weighted by b)
  double signal_weight = 0.0;   // |H1|_b
  double true_positive = 0.0;   // weighted by a
  double fdp = 0.0;
  double fnp = 0.0;
};

/// Realized error statistics; empty weight spans mean unit weights.
[[nodiscard]] inline DecisionScore score_decisions(std::span<const std::uint8_t> reject, std::span<const std::uint8_t> truth,
                                                   std::span<const double> a = {}, std::span<const double> b = {}) {
  const std::size_t n = reject.size();
  if (truth.size() != n || (!a.empty() && a.size() != n) || (!b.empty() && b.size() != n)) {
    throw std::invalid_argument("decision, truth and weight vectors must have equal length");
  }
  DecisionScore s;
  for (std::size_t t = 0; t < n; ++t) {
    const double at = a.empty() ? 1.0 : a[t];
    const double bt = b.empty() ? 1.0 : b[t];
    if (reject[t]) {
      s.rejected += at;
      if (truth[t]) {
        s.true_positive += at;
      } else {
        s.false_positive += at;
      }
    } else if (truth[t]) {
      s.false_negative += bt;
    }
    if (truth[t]) s.signal_weight += bt;
  }
  s.fdp = s.false_positive / std::max(s.rejected, 1.0);
  s.fnp = s.signal_weight > 0.0 ? s.false_negative / s.signal_weight : 0.0;
  return s;
}

}  // namespace methcp

#endif  // METHCP_MULTIPLE_TESTING_HPP
