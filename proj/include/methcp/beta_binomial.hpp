#ifndef METHCP_BETA_BINOMIAL_HPP
#define METHCP_BETA_BINOMIAL_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "methcp/regimes.hpp"

namespace methcp {

/// log BetaBin(y; n, a, b), evaluated through log-gamma only.
[[nodiscard]] inline double beta_binomial_log_pmf(std::uint64_t y, std::uint64_t n, double a, double b) {
  if (y > n) throw std::domain_error("beta-binomial: methylated count exceeds total");
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("beta-binomial: shapes must be positive");
  if (n == 0) return 0.0;
  const double yd = static_cast<double>(y);
  const double nd = static_cast<double>(n);
  const double log_choose = std::lgamma(nd + 1.0) - std::lgamma(yd + 1.0) - std::lgamma(nd - yd + 1.0);
  return log_choose + std::lgamma(yd + a) + std::lgamma(nd - yd + b) - std::lgamma(nd + a + b) +
         std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
}

// Read counts of one group at one site; total[s] == 0 marks a missing sample.
struct SiteCounts {
  std::span<const std::uint32_t> methylated;
  std::span<const std::uint32_t> total;

  [[nodiscard]] std::size_t samples() const noexcept { return total.size(); }
};

// Dense sites x samples read counts for one group of one chromosome.
class GroupCounts {
 public:
  GroupCounts() = default;
  GroupCounts(std::size_t sites, std::size_t samples)
      : sites_(sites), samples_(samples), methylated_(sites * samples, 0), total_(sites * samples, 0) {}

  [[nodiscard]] std::size_t sites() const noexcept { return sites_; }
  [[nodiscard]] std::size_t samples() const noexcept { return samples_; }

  void set(std::size_t site, std::size_t sample, std::uint32_t methylated, std::uint32_t total) {
    if (methylated > total) throw std::domain_error("methylated count exceeds total");
    methylated_[site * samples_ + sample] = methylated;
    total_[site * samples_ + sample] = total;
  }

  [[nodiscard]] std::uint32_t methylated(std::size_t site, std::size_t sample) const {
    return methylated_[site * samples_ + sample];
  }
  [[nodiscard]] std::uint32_t total(std::size_t site, std::size_t sample) const {
    return total_[site * samples_ + sample];
  }

  [[nodiscard]] SiteCounts site(std::size_t t) const {
    return {std::span<const std::uint32_t>(methylated_).subspan(t * samples_, samples_),
            std::span<const std::uint32_t>(total_).subspan(t * samples_, samples_)};
  }

  // Appends one site; used by parsers that do not know T in advance.
  void push_site(std::span<const std::uint32_t> methylated, std::span<const std::uint32_t> total) {
    if (methylated.size() != samples_ || total.size() != samples_) throw std::invalid_argument("sample arity mismatch");
    for (std::size_t s = 0; s < samples_; ++s) {
      if (methylated[s] > total[s]) throw std::domain_error("methylated count exceeds total");
    }
    methylated_.insert(methylated_.end(), methylated.begin(), methylated.end());
    total_.insert(total_.end(), total.begin(), total.end());
    ++sites_;
  }

  static GroupCounts with_samples(std::size_t samples) {
    GroupCounts g;
    g.samples_ = samples;
    return g;
  }

  bool operator==(const GroupCounts&) const = default;

 private:
  std::size_t sites_ = 0;
  std::size_t samples_ = 0;
  std::vector<std::uint32_t> methylated_;
  std::vector<std::uint32_t> total_;
};

/// Sum over samples of the beta-binomial log-pmf under `regime`; 0 when every
/// sample is missing.
[[nodiscard]] inline double site_log_potential(const SiteCounts& counts, std::size_t regime,
                                               const RegimePalette& palette) {
  const auto& spec = palette[regime];
  double acc = 0.0;
  for (std::size_t s = 0; s < counts.samples(); ++s) {
    acc += beta_binomial_log_pmf(counts.methylated[s], counts.total[s], spec.shape_a, spec.shape_b);
  }
  return acc;
}

// Per-regime log-potentials with the regime-only log-gamma terms hoisted.
class PotentialEvaluator {
 public:
  explicit PotentialEvaluator(const RegimePalette& palette) : palette_(palette) {
    for (const auto& spec : palette.regimes()) {
      log_beta_.push_back(std::lgamma(spec.shape_a) + std::lgamma(spec.shape_b) -
                          std::lgamma(spec.shape_a + spec.shape_b));
    }
  }

  [[nodiscard]] std::size_t regimes() const noexcept { return log_beta_.size(); }

  // Fills out[r] = site_log_potential(counts, r) for every regime.
  void evaluate(const SiteCounts& counts, std::span<double> out) const {
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = 0.0;
    for (std::size_t s = 0; s < counts.samples(); ++s) {
      const std::uint32_t n = counts.total[s];
      if (n == 0) continue;
      const double y = counts.methylated[s];
      const double nd = n;
      const double log_choose = std::lgamma(nd + 1.0) - std::lgamma(y + 1.0) - std::lgamma(nd - y + 1.0);
      for (std::size_t r = 0; r < out.size(); ++r) {
        const auto& spec = palette_[r];
        out[r] += log_choose + std::lgamma(y + spec.shape_a) + std::lgamma(nd - y + spec.shape_b) -
                  std::lgamma(nd + spec.shape_a + spec.shape_b) - log_beta_[r];
      }
    }
  }

 private:
  RegimePalette palette_;
  std::vector<double> log_beta_;
};

}  // namespace methcp

#endif  // METHCP_BETA_BINOMIAL_HPP
