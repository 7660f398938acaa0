#ifndef METHCP_PIPELINE_HPP
#define METHCP_PIPELINE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "methcp/config.hpp"
#include "methcp/io.hpp"
#include "methcp/multiple_testing.hpp"
#include "methcp/paired_filter.hpp"
#include "methcp/single_filter.hpp"

namespace methcp {

struct ChromosomeResult {
  std::string name;
  std::vector<std::int64_t> positions;
  SingleGroupParams params;  // fitted control-group parameters
  SingleFitResult fit;
  bool paired = false;
  PairedRunResult paired_result;
  std::vector<double> p_split;
};

// Sites of all chromosomes, concatenated in chromosome order.
struct PositionDecision {
  SignalKind signal;
  std::vector<double> lfdr;
  DecisionSet decision;
};

struct RegionRecord {
  std::size_t chromosome;
  Region region;
  double lfdr;
  bool reject;
};

struct ResultBundle {
  RunConfig config;
  std::string config_hash;
  RegimePalette palette;
  std::vector<ChromosomeResult> chromosomes;
  std::vector<PositionDecision> positions;
  std::vector<RegionRecord> regions;
  DecisionSet region_decision;
};

/// Seed of one chromosome: depends on its name only, so results do not
/// depend on the order in which chromosomes are processed.
[[nodiscard]] inline std::uint64_t chromosome_seed(std::uint64_t seed, const std::string& name) {
  return seed ^ std::stoull(fnv1a_hex(name), nullptr, 16);
}

// Trajectories of one chromosome, borrowed.
struct ChromosomeTrajectories {
  std::string name;
  const std::vector<std::int64_t>* positions;
  const TrajectorySet* trajectories;
};

/// Per-site lfdr of every signal, pooled over chromosomes and tested with one
/// step-up procedure per signal.
[[nodiscard]] inline std::vector<PositionDecision> test_positions(std::span<const ChromosomeTrajectories> chroms,
                                                                  std::span<const SignalKind> signals,
                                                                  const RegimePalette& palette, double alpha) {
  std::vector<PositionDecision> out;
  for (auto kind : signals) {
    PositionDecision d{kind, {}, {}};
    for (const auto& c : chroms) {
      const auto lfdr = site_lfdr(*c.trajectories, kind, palette);
      d.lfdr.insert(d.lfdr.end(), lfdr.begin(), lfdr.end());
    }
    d.decision = stepup(d.lfdr, alpha);
    out.push_back(std::move(d));
  }
  return out;
}

/// Regions of consecutive sites with P(split) >= threshold, tested for a
/// split fraction above gamma with one pooled weighted step-up.
[[nodiscard]] inline std::vector<RegionRecord> test_regions(std::span<const ChromosomeTrajectories> chroms,
                                                            const RegimePalette& palette, double threshold, double gamma,
                                                            double alpha, DecisionSet* decision = nullptr) {
  std::vector<RegionRecord> out;
  std::vector<double> p;
  std::vector<double> w;
  for (std::size_t c = 0; c < chroms.size(); ++c) {
    const auto& trajs = *chroms[c].trajectories;
    const auto regions = build_regions(prob_split(trajs), threshold);
    const auto lfdr = region_lfdr(trajs, regions, gamma, SignalKind::Split, palette);
    for (std::size_t k = 0; k < regions.size(); ++k) {
      out.push_back({c, regions[k], lfdr[k], false});
      p.push_back(lfdr[k]);
      w.push_back(regions[k].weight);
    }
  }
  auto d = region_stepup(p, w, alpha);
  for (std::size_t k = 0; k < out.size(); ++k) out[k].reject = d.reject[k] != 0;
  if (decision) *decision = std::move(d);
  return out;
}

[[nodiscard]] inline std::vector<ChromosomeTrajectories> trajectory_views(const ResultBundle& bundle);

/// Fits the control group per chromosome; with case data, runs the paired
/// filter and backward sampling, computes every requested lfdr from one set of
/// trajectories, pools them across chromosomes for step-up testing, and tests
/// threshold-built regions.
[[nodiscard]] inline ResultBundle run_pipeline(const RunConfig& cfg, const CountFile& control, const CountFile* case_file,
                                               const std::map<std::string, std::vector<double>>* fixed_theta = nullptr) {
  cfg.validate();
  if (control.samples.empty()) throw std::invalid_argument("need at least one control sample");
  ResultBundle out;
  out.config = cfg;
  out.config_hash = fnv1a_hex(cfg.canonical());
  out.palette = cfg.parsed_palette();
  const auto signals = cfg.parsed_signals();
  const std::size_t R = out.palette.size();

  for (const auto& chrom : control.chromosomes) {
    ChromosomeResult res;
    res.name = chrom.chromosome;
    res.positions = chrom.positions;
    const std::uint64_t seed = chromosome_seed(cfg.seed, chrom.chromosome);
    res.params = cfg.initial_params();
    try {
      if (fixed_theta && fixed_theta->count(chrom.chromosome)) {
        res.params.set_theta(fixed_theta->at(chrom.chromosome));
        const auto pot = site_potential_table(chrom.counts, out.palette);
        Rng rng(seed);
        res.fit.theta = res.params.theta();
        res.fit.regimes = R;
        res.fit.final_log_likelihood = smooth_single_group(pot, chrom.counts.sites(), res.params, cfg.fit_particles,
                                                           cfg.epsilon, rng, res.fit.posteriors);
      } else {
        auto fit_cfg = cfg.fit_config();
        fit_cfg.seed = seed;
        res.fit = fit_single_group(chrom.counts, res.params, fit_cfg);
        res.params.set_theta(res.fit.theta);
      }
      if (case_file) {
        const auto* other = case_file->find(chrom.chromosome);
        if (!other) throw std::invalid_argument("case data lacks chromosome " + chrom.chromosome);
        if (other->positions != chrom.positions) throw std::invalid_argument("case and control positions differ");
        const auto control_lp = site_potential_table(chrom.counts, out.palette);
        const auto case_lp = site_potential_table(other->counts, out.palette);
        const CaseControlParams params(res.params, cfg.constants());
        auto pcfg = cfg.paired_config();
        pcfg.seed = seed;
        res.paired = true;
        res.paired_result = run_case_control(control_lp, case_lp, chrom.counts.sites(), params, pcfg);
        res.p_split = prob_split(res.paired_result.trajectories);
      }
    } catch (const DegenerateLikelihood& e) {
      throw std::runtime_error("chromosome " + chrom.chromosome + ": " + e.what());
    }
    out.chromosomes.push_back(std::move(res));
  }

  if (!case_file) return out;
  const auto views = trajectory_views(out);
  out.positions = test_positions(views, signals, out.palette, cfg.alpha);
  out.regions = test_regions(views, out.palette, cfg.threshold, cfg.gamma, cfg.alpha, &out.region_decision);
  return out;
}

namespace detail {

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace detail

/// One table per signal: chrom, pos, lfdr, reject.
inline void write_position_decisions(const std::string& dir, std::span<const ChromosomeTrajectories> chroms,
                                     std::span<const PositionDecision> decisions) {
  for (const auto& d : decisions) {
    auto os = detail::open_out(detail::join_path(dir, "decisions_" + std::string(signal_name(d.signal)) + ".tsv"));
    os.precision(10);
    os << "chrom\tpos\tlfdr\treject\n";
    std::size_t k = 0;
    for (const auto& c : chroms) {
      for (auto pos : *c.positions) {
        os << c.name << '\t' << pos << '\t' << d.lfdr[k] << '\t' << int(d.decision.reject[k]) << '\n';
        ++k;
      }
    }
  }
}

/// Region rows use zero-based half-open genomic coordinates: start is the
/// first position minus one, end the last position.
inline void write_regions(const std::string& path, std::span<const ChromosomeTrajectories> chroms,
                          std::span<const RegionRecord> regions) {
  auto os = detail::open_out(path);
  os.precision(10);
  os << "chrom\tstart\tend\tfirst_site\tn_sites\tweight\tlfdr\treject\n";
  for (const auto& r : regions) {
    const auto& c = chroms[r.chromosome];
    const auto& pos = *c.positions;
    os << c.name << '\t' << pos[r.region.start] - 1 << '\t' << pos[r.region.end - 1] << '\t' << r.region.start << '\t'
       << r.region.size() << '\t' << r.region.weight << '\t' << r.lfdr << '\t' << int(r.reject) << '\n';
  }
}

[[nodiscard]] inline nlohmann::json decision_summary(std::span<const PositionDecision> positions,
                                                     std::span<const RegionRecord> regions,
                                                     const DecisionSet* region_decision) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& d : positions) {
    j["positions"][std::string(signal_name(d.signal))] = {{"rejections", d.decision.rejections},
                                                          {"estimated_fdr", d.decision.estimated_fdr}};
  }
  if (region_decision) {
    j["regions"] = {{"count", regions.size()},
                    {"rejections", region_decision->rejections},
                    {"estimated_fdr", region_decision->estimated_fdr}};
  }
  return j;
}

/// Tidy long-format table: chrom, pos, quantity, value.
inline void write_plot_data(const std::string& path, std::span<const ChromosomeTrajectories> chroms,
                            std::span<const PositionDecision> positions) {
  auto os = detail::open_out(path);
  os.precision(10);
  os << "chrom\tpos\tquantity\tvalue\n";
  std::size_t offset = 0;
  for (const auto& c : chroms) {
    const auto split = prob_split(*c.trajectories);
    const auto& pos = *c.positions;
    for (std::size_t t = 0; t < pos.size(); ++t) {
      os << c.name << '\t' << pos[t] << "\tp_split\t" << split[t] << '\n';
      for (const auto& d : positions) {
        os << c.name << '\t' << pos[t] << "\tlfdr_" << signal_name(d.signal) << '\t' << d.lfdr[offset + t] << '\n';
      }
    }
    offset += pos.size();
  }
}

/// Tidy long-format posterior table: chrom, pos, regime, probability.
inline void write_posterior_plot_data(const std::string& path, const ResultBundle& bundle) {
  auto os = detail::open_out(path);
  os.precision(10);
  os << "chrom\tpos\tregime\tprobability\n";
  for (const auto& c : bundle.chromosomes) {
    for (std::size_t t = 0; t < c.positions.size(); ++t) {
      const auto row = c.fit.posterior(t);
      for (std::size_t r = 0; r < row.size(); ++r) {
        os << c.name << '\t' << c.positions[t] << '\t' << r + 1 << '\t' << row[r] << '\n';
      }
    }
  }
}

[[nodiscard]] inline nlohmann::json theta_document(const ResultBundle& bundle) {
  nlohmann::json thetas = nlohmann::json::array();
  for (const auto& c : bundle.chromosomes) {
    auto rec = theta_record(c.params, c.name, c.fit.pass_log_likelihood, bundle.config_hash, bundle.config.seed);
    rec["final_log_likelihood"] = c.fit.final_log_likelihood;
    thetas.push_back(std::move(rec));
  }
  return {{"version", kVersion},
          {"config_hash", bundle.config_hash},
          {"seed", bundle.config.seed},
          {"config", bundle.config.canonical()},
          {"chromosomes", thetas}};
}

/// Per-chromosome theta vectors from a document written by theta_document.
[[nodiscard]] inline std::map<std::string, std::vector<double>> read_theta_document(const std::string& path) {
  auto in = detail::open_in(path);
  nlohmann::json j;
  try {
    in >> j;
    std::map<std::string, std::vector<double>> out;
    for (const auto& rec : j.at("chromosomes")) {
      out[rec.at("chromosome").get<std::string>()] = rec.at("theta").get<std::vector<double>>();
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("'" + path + "': " + e.what());
  }
}

inline void write_posteriors(const std::string& path, const ResultBundle& bundle) {
  auto os = detail::open_out(path);
  os.precision(10);
  os << "chrom\tpos";
  for (std::size_t r = 0; r < bundle.palette.size(); ++r) os << "\tp_regime_" << r + 1;
  const bool paired = !bundle.chromosomes.empty() && bundle.chromosomes.front().paired;
  if (paired) os << "\tp_split";
  os << '\n';
  for (const auto& c : bundle.chromosomes) {
    for (std::size_t t = 0; t < c.positions.size(); ++t) {
      os << c.name << '\t' << c.positions[t];
      for (double v : c.fit.posterior(t)) os << '\t' << v;
      if (paired) os << '\t' << c.p_split[t];
      os << '\n';
    }
  }
}

[[nodiscard]] inline std::vector<ChromosomeTrajectories> trajectory_views(const ResultBundle& bundle) {
  std::vector<ChromosomeTrajectories> views;
  for (const auto& c : bundle.chromosomes) views.push_back({c.name, &c.positions, &c.paired_result.trajectories});
  return views;
}

[[nodiscard]] inline std::vector<ChromosomeTrajectories> trajectory_views(const TrajectoryFile& file) {
  std::vector<ChromosomeTrajectories> views;
  for (std::size_t c = 0; c < file.chromosomes.size(); ++c) {
    views.push_back({file.chromosomes[c], &file.positions[c], &file.trajectories[c]});
  }
  return views;
}

/// Writes theta.json and posteriors.tsv; with case data also the trajectory
/// file, per-signal decisions, regions.tsv and summary.json.
inline void write_results(const std::string& dir, const ResultBundle& bundle, bool emit_plot_data = false) {
  std::filesystem::create_directories(dir);
  detail::open_out(detail::join_path(dir, "theta.json")) << theta_document(bundle).dump(2) << '\n';
  write_posteriors(detail::join_path(dir, "posteriors.tsv"), bundle);
  if (emit_plot_data) write_posterior_plot_data(detail::join_path(dir, "plot_posteriors.tsv"), bundle);
  if (bundle.chromosomes.empty() || !bundle.chromosomes.front().paired) return;

  const auto views = trajectory_views(bundle);
  TrajectoryFile tf{bundle.palette, {}, {}, {}};
  for (const auto& c : bundle.chromosomes) {
    tf.chromosomes.push_back(c.name);
    tf.positions.push_back(c.positions);
    tf.trajectories.push_back(c.paired_result.trajectories);
  }
  write_trajectories(detail::join_path(dir, "trajectories.bin"), tf);
  write_position_decisions(dir, views, bundle.positions);
  write_regions(detail::join_path(dir, "regions.tsv"), views, bundle.regions);
  detail::open_out(detail::join_path(dir, "summary.json"))
      << decision_summary(bundle.positions, bundle.regions, &bundle.region_decision).dump(2) << '\n';
  if (emit_plot_data) write_plot_data(detail::join_path(dir, "plot_signals.tsv"), views, bundle.positions);
}

}  // namespace methcp

#endif  // METHCP_PIPELINE_HPP
