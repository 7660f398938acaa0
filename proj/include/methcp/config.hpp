#ifndef METHCP_CONFIG_HPP
#define METHCP_CONFIG_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "methcp/multiple_testing.hpp"
#include "methcp/paired_filter.hpp"
#include "methcp/paired_model.hpp"
#include "methcp/regimes.hpp"
#include "methcp/single_filter.hpp"

namespace methcp {

// Every tunable of the analysis pipeline. Defaults follow the simulation
// settings used for the benchmark study.
struct RunConfig {
  std::string palette = "0.95:0.05,0.05:0.05,0.8:0.1,0.2:0.1,0.5:0.1,0.5:0.288675134594813";

  // single-group estimation
  std::size_t fit_particles = 100;
  double epsilon = 1e-4;
  double step_size = 0.01;
  double decay_rate = 0.1;
  std::size_t update_interval = 200;
  std::size_t passes = 2;
  std::string optimizer = "adam";
  std::int64_t shift = 3;
  double size = 2.0;

  // case-control filtering and backward sampling
  std::size_t paired_particles = 50;
  std::size_t trajectories = 25;
  std::size_t runs = 10;
  double q_split = 0.01;
  double q_merge = 0.1;
  double case_success = 0.8;
  std::int64_t case_shift = 3;
  std::int64_t min_z_gap = 0;

  // testing
  double alpha = 0.05;
  double gamma = 0.5;
  double threshold = 0.99;
  std::string signals = "split,mean-diff,regime-diff";

  std::uint64_t seed = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
    (void)parsed_palette();
    if (fit_particles == 0 || paired_particles == 0) fail("particle counts must be positive");
    if (trajectories == 0 || runs == 0) fail("trajectories and runs must be positive");
    if (!(epsilon >= 0.0)) fail("epsilon must be nonnegative");
    if (!(step_size >= 0.0)) fail("step_size must be nonnegative");
    if (!(decay_rate > 0.0 && decay_rate <= 1.0)) fail("decay_rate must lie in (0,1]");
    if (update_interval == 0) fail("update_interval must be positive");
    if (optimizer != "adam" && optimizer != "sgd") fail("optimizer must be adam or sgd");
    if (shift < 1) fail("shift must be >= 1");
    if (!(size > 0.0)) fail("size must be positive");
    auto open01 = [](double v) { return v > 0.0 && v < 1.0; };
    if (!open01(q_split) || !open01(q_merge) || !open01(case_success)) fail("q_split, q_merge, case_success must lie in (0,1)");
    if (case_shift < 0 || min_z_gap < 0) fail("case_shift and min_z_gap must be >= 0");
    if (!open01(alpha)) fail("alpha must lie in (0,1)");
    if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must lie in [0,1)");
    if (!open01(threshold)) fail("threshold must lie in (0,1)");
    (void)parsed_signals();
  }

  /// "mean:sd,mean:sd,..." -> palette.
  [[nodiscard]] RegimePalette parsed_palette() const {
    std::vector<std::pair<double, double>> ms;
    std::stringstream ss(palette);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw std::invalid_argument("config: palette entries must be mean:sd");
      ms.emplace_back(std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
    }
    return RegimePalette::from_moments(ms);
  }

  [[nodiscard]] std::vector<SignalKind> parsed_signals() const {
    std::vector<SignalKind> out;
    std::stringstream ss(signals);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(parse_signal(item));
    }
    if (out.empty()) throw std::invalid_argument("config: no signals requested");
    return out;
  }

  [[nodiscard]] SingleFitConfig fit_config() const {
    SingleFitConfig c;
    c.max_particles = fit_particles;
    c.epsilon = epsilon;
    c.step_size = step_size;
    c.decay_rate = decay_rate;
    c.update_interval = update_interval;
    c.passes = passes;
    c.optimizer = optimizer == "sgd" ? Optimizer::Sgd : Optimizer::Adam;
    c.seed = seed;
    return c;
  }

  [[nodiscard]] SingleGroupParams initial_params() const {
    const auto pal = parsed_palette();
    const std::size_t R = pal.size();
    return SingleGroupParams(pal, std::vector<double>(theta_size(R), 0.0), std::vector<std::int64_t>(R, shift),
                             std::vector<double>(R, size));
  }

  [[nodiscard]] CaseControlConstants constants() const {
    CaseControlConstants c;
    c.q_split = q_split;
    c.q_merge = q_merge;
    c.case_success = case_success;
    c.case_size = 2.0;
    c.case_shift = case_shift;
    c.min_z_gap = min_z_gap;
    return c;
  }

  [[nodiscard]] PairedRunConfig paired_config() const {
    PairedRunConfig c;
    c.max_lineages = paired_particles;
    c.trajectories = trajectories;
    c.runs = runs;
    c.seed = seed;
    return c;
  }

  /// Canonical key = value rendering, used for provenance hashing.
  [[nodiscard]] std::string canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "palette=" << palette << "\nfit_particles=" << fit_particles << "\nepsilon=" << epsilon
       << "\nstep_size=" << step_size << "\ndecay_rate=" << decay_rate << "\nupdate_interval=" << update_interval
       << "\npasses=" << passes << "\noptimizer=" << optimizer << "\nshift=" << shift << "\nsize=" << size
       << "\npaired_particles=" << paired_particles << "\ntrajectories=" << trajectories << "\nruns=" << runs
       << "\nq_split=" << q_split << "\nq_merge=" << q_merge << "\ncase_success=" << case_success
       << "\ncase_shift=" << case_shift << "\nmin_z_gap=" << min_z_gap << "\nalpha=" << alpha << "\ngamma=" << gamma
       << "\nthreshold=" << threshold << "\nsignals=" << signals << "\nseed=" << seed << "\n";
    return os.str();
  }
};

/// FNV-1a 64-bit hash in hex.
[[nodiscard]] inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace methcp

#endif  // METHCP_CONFIG_HPP
