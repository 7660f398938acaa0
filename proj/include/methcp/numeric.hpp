#ifndef METHCP_NUMERIC_HPP
#define METHCP_NUMERIC_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace methcp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Thrown when every particle weight of a cloud is zero (the data at `site`
// is numerically impossible under all retained states).
class DegenerateLikelihood : public std::runtime_error {
 public:
  DegenerateLikelihood(std::size_t site, const std::string& what)
      : std::runtime_error(what + " (site index " + std::to_string(site) + ")"), site_(site) {}

  [[nodiscard]] std::size_t site() const noexcept { return site_; }

 private:
  std::size_t site_;
};

[[nodiscard]] inline double log_sum_exp(std::span<const double> xs) {
  double mx = kNegInf;
  for (double x : xs) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

[[nodiscard]] inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

[[nodiscard]] inline double logit(double p) { return std::log(p) - std::log1p(-p); }

[[nodiscard]] inline double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// Normalizes in place with a fixed left-to-right summation order and returns
// the sum before normalization. A zero or non-finite sum is left to the caller.
inline double normalize_in_place(std::span<double> w) {
  double total = 0.0;
  for (double v : w) total += v;
  if (total > 0.0 && std::isfinite(total)) {
    const double inv = 1.0 / total;
    for (double& v : w) v *= inv;
  }
  return total;
}

}  // namespace methcp

#endif  // METHCP_NUMERIC_HPP
