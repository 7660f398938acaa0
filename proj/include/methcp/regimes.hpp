#ifndef METHCP_REGIMES_HPP
#define METHCP_REGIMES_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace methcp {

struct BetaShape {
  double a;
  double b;
};

/// Converts a (mean, sd) description of a beta law into its shape parameters.
/// Requires 0 < mean < 1 and 0 < sd < sqrt(mean (1 - mean)); otherwise the
/// implied precision is not positive and std::domain_error is thrown.
[[nodiscard]] inline BetaShape regime_shape(double mean, double sd) {
  if (!(mean > 0.0 && mean < 1.0)) throw std::domain_error("regime mean must lie in (0,1)");
  const double var_cap = mean * (1.0 - mean);
  if (!(sd > 0.0) || !(sd * sd < var_cap)) {
    throw std::domain_error("regime sd must satisfy 0 < sd < sqrt(mean(1-mean))");
  }
  const double precision = var_cap / (sd * sd) - 1.0;
  if (!(precision > 0.0)) throw std::domain_error("regime precision is not positive");
  return {mean * precision, (1.0 - mean) * precision};
}

struct RegimeSpec {
  double mean = 0.5;
  double sd = 0.1;
  double shape_a = 0.0;
  double shape_b = 0.0;

  RegimeSpec() = default;
  RegimeSpec(double m, double s) : mean(m), sd(s) {
    const auto shape = regime_shape(m, s);
    shape_a = shape.a;
    shape_b = shape.b;
  }
};

// Ordered list of regimes; regime r of the model is regimes()[r] (0-based).
class RegimePalette {
 public:
  RegimePalette() = default;
  explicit RegimePalette(std::vector<RegimeSpec> regimes) : regimes_(std::move(regimes)) {
    if (regimes_.size() < 2) throw std::invalid_argument("a regime palette needs at least two regimes");
  }

  static RegimePalette from_moments(const std::vector<std::pair<double, double>>& mean_sd) {
    std::vector<RegimeSpec> specs;
    specs.reserve(mean_sd.size());
    for (const auto& [m, s] : mean_sd) specs.emplace_back(m, s);
    return RegimePalette(std::move(specs));
  }

  [[nodiscard]] std::size_t size() const noexcept { return regimes_.size(); }
  [[nodiscard]] const RegimeSpec& operator[](std::size_t r) const { return regimes_[r]; }
  [[nodiscard]] const std::vector<RegimeSpec>& regimes() const noexcept { return regimes_; }

 private:
  std::vector<RegimeSpec> regimes_;
};

/// The six-regime palette used by default for inference.
[[nodiscard]] inline RegimePalette default_palette() {
  return RegimePalette::from_moments({{0.95, 0.05},
                                      {0.05, 0.05},
                                      {0.8, 0.1},
                                      {0.2, 0.1},
                                      {0.5, 0.1},
                                      {0.5, 1.0 / std::sqrt(12.0)}});
}

inline constexpr std::size_t kSimulationPaletteRows = 10;

/// Regime palettes used to generate synthetic data (row in [0, 10)). The last
/// row defines only five regimes.
[[nodiscard]] inline RegimePalette simulation_palette(std::size_t row) {
  const double u12 = 1.0 / std::sqrt(12.0);
  const double u9 = 1.0 / 3.0;
  switch (row) {
    case 0: return RegimePalette::from_moments({{0.95, 0.08}, {0.15, 0.08}, {0.05, 0.08}, {0.85, 0.08}, {0.5, 0.08}, {0.5, u12}});
    case 1: return RegimePalette::from_moments({{0.95, 0.1}, {0.15, 0.04}, {0.05, 0.1}, {0.85, 0.04}, {0.5, 0.1}, {0.5, u12}});
    case 2: return RegimePalette::from_moments({{0.95, 0.1}, {0.2, 0.08}, {0.05, 0.1}, {0.8, 0.08}, {0.5, 0.08}, {0.5, u12}});
    case 3: return RegimePalette::from_moments({{0.95, 0.05}, {0.15, 0.05}, {0.05, 0.05}, {0.85, 0.05}, {0.5, 0.08}, {0.5, u9}});
    case 4: return RegimePalette::from_moments({{0.95, 0.05}, {0.2, 0.1}, {0.05, 0.05}, {0.8, 0.1}, {0.5, 0.08}, {0.5, u9}});
    case 5: return RegimePalette::from_moments({{0.95, 0.05}, {0.2, 0.05}, {0.05, 0.05}, {0.8, 0.05}, {0.5, 0.1}, {0.5, u9}});
    case 6: return RegimePalette::from_moments({{0.95, 0.05}, {0.2, 0.05}, {0.05, 0.05}, {0.8, 0.05}, {0.5, 0.05}, {0.5, u12}});
    case 7: return RegimePalette::from_moments({{0.95, 0.05}, {0.2, 0.1}, {0.05, 0.05}, {0.8, 0.1}, {0.5, 0.1}, {0.5, u12}});
    case 8: return RegimePalette::from_moments({{0.95, 0.1}, {0.25, 0.1}, {0.05, 0.1}, {0.75, 0.1}, {0.5, 0.05}, {0.5, u12}});
    case 9: return RegimePalette::from_moments({{0.95, 0.05}, {0.2, 0.1}, {0.05, 0.05}, {0.8, 0.1}, {0.5, 0.1}});
    default: throw std::out_of_range("simulation palette row must be in [0, 10)");
  }
}

}  // namespace methcp

#endif  // METHCP_REGIMES_HPP
