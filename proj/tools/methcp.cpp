#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "methcp/methcp.hpp"

namespace {

using namespace methcp;

void add_run_options(CLI::App& app, RunConfig& c) {
  app.add_option("--palette", c.palette, "Regimes as mean:sd,mean:sd,...")->capture_default_str();
  app.add_option("--fit_particles", c.fit_particles, "Particles of the single-group filter")->capture_default_str();
  app.add_option("--epsilon", c.epsilon, "Adaptive-lag variance tolerance")->capture_default_str();
  app.add_option("--step_size", c.step_size, "Initial gradient step size")->capture_default_str();
  app.add_option("--decay_rate", c.decay_rate, "Step size factor per pass")->capture_default_str();
  app.add_option("--update_interval", c.update_interval, "Sites between parameter updates")->capture_default_str();
  app.add_option("--passes", c.passes, "Passes over each chromosome")->capture_default_str();
  app.add_option("--optimizer", c.optimizer, "adam or sgd")->capture_default_str();
  app.add_option("--shift", c.shift, "Sojourn shift of the control regimes")->capture_default_str();
  app.add_option("--size", c.size, "Sojourn size of the control regimes")->capture_default_str();
  app.add_option("--paired_particles", c.paired_particles, "Lineages of the case-control filter")->capture_default_str();
  app.add_option("--trajectories", c.trajectories, "Backward trajectories per run")->capture_default_str();
  app.add_option("--runs", c.runs, "Independent filter runs")->capture_default_str();
  app.add_option("--q_split", c.q_split, "Merged to split switch probability")->capture_default_str();
  app.add_option("--q_merge", c.q_merge, "Split to merged switch probability")->capture_default_str();
  app.add_option("--case_success", c.case_success, "Success probability of the case sojourn")->capture_default_str();
  app.add_option("--case_shift", c.case_shift, "Shift of the case sojourn")->capture_default_str();
  app.add_option("--min_z_gap", c.min_z_gap, "Minimum sojourn before z may switch")->capture_default_str();
  app.add_option("--alpha", c.alpha, "Target false discovery rate")->capture_default_str();
  app.add_option("--gamma", c.gamma, "Region signal fraction tolerance")->capture_default_str();
  app.add_option("--threshold", c.threshold, "Posterior split threshold for region building")->capture_default_str();
  app.add_option("--signals", c.signals, "Comma-separated signals to test")->capture_default_str();
  app.add_option("--seed", c.seed, "Random seed")->capture_default_str();
}

void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    detail::open_out(path) << j.dump(2) << '\n';
  }
}

nlohmann::json score_json(const DecisionScore& s) {
  return {{"rejected", s.rejected},         {"false_positive", s.false_positive}, {"false_negative", s.false_negative},
          {"signal_weight", s.signal_weight}, {"true_positive", s.true_positive}, {"fdp", s.fdp},
          {"fnp", s.fnp}};
}

std::map<std::pair<std::string, std::int64_t>, std::size_t> index_sites(const TsvTable& table) {
  const auto chrom = table.column("chrom");
  const auto pos = table.column("pos");
  std::map<std::pair<std::string, std::int64_t>, std::size_t> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) out[{table.rows[i][chrom], std::stoll(table.rows[i][pos])}] = i;
  return out;
}

struct SimulateArgs {
  SimConfig sim;
  std::string out = "sim";
  std::string chrom = "chr1";
  std::size_t datasets = 1;
};

void run_simulate(const SimulateArgs& a, const RunConfig& rc) {
  for (std::size_t i = 0; i < a.datasets; ++i) {
    SimConfig cfg = a.sim;
    cfg.seed = rc.seed;
    cfg.dataset_index = a.sim.dataset_index + i;
    const auto ds = simulate_dataset(cfg);
    const auto dir =
        a.datasets == 1 ? a.out : (std::filesystem::path(a.out) / ("dataset_" + std::to_string(cfg.dataset_index))).string();
    std::filesystem::create_directories(dir);
    for (int g = 0; g < 2; ++g) {
      CountFile f;
      for (std::size_t s = 0; s < cfg.samples; ++s) f.samples.push_back((g == 0 ? "control" : "case") + std::to_string(s + 1));
      f.chromosomes.push_back({a.chrom, ds.positions, g == 0 ? ds.counts.control : ds.counts.case_group});
      auto os = detail::open_out(detail::join_path(dir, g == 0 ? "control.tsv" : "case.tsv"));
      write_counts(os, f);
    }
    auto truth = detail::open_out(detail::join_path(dir, "truth.tsv"));
    write_truth(truth, a.chrom, ds.positions, ds.path, ds.palette);
    const auto& m = ds.params.model;
    nlohmann::json params = {{"seed", cfg.seed},
                             {"dataset_index", cfg.dataset_index},
                             {"palette_row", cfg.palette_row},
                             {"roles_swapped", ds.roles_swapped},
                             {"control", theta_record(m.control(), a.chrom, {}, "", cfg.seed)},
                             {"q_split", m.constants().q_split},
                             {"q_merge", m.constants().q_merge},
                             {"case_success", m.constants().case_success},
                             {"case_shift", m.constants().case_shift}};
    write_json(detail::join_path(dir, "params.json"), params);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Change-point detection of differential methylation from bisulfite sequencing counts"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI-style key = value file with run options");
  app.set_version_flag("--version", std::string(kVersion));
  RunConfig rc;
  add_run_options(app, rc);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a simulated case-control dataset with truth labels");
  simulate->add_option("--out", sim.out, "Output directory")->capture_default_str();
  simulate->add_option("--sites", sim.sim.sites, "Sites per dataset")->capture_default_str();
  simulate->add_option("--samples", sim.sim.samples, "Samples per group")->capture_default_str();
  simulate->add_option("--depth", sim.sim.depth, "Mean reads per sample and site")->capture_default_str();
  simulate->add_option("--palette_row", sim.sim.palette_row, "Generating palette row (0-9)")->capture_default_str();
  simulate->add_option("--dataset_index", sim.sim.dataset_index, "Index of the first dataset")->capture_default_str();
  simulate->add_option("--datasets", sim.datasets, "Number of datasets")->capture_default_str();
  simulate->add_option("--missing_fraction", sim.sim.missing_fraction, "Fraction of sites without reads")
      ->capture_default_str();
  simulate->add_option("--chrom", sim.chrom, "Chromosome label")->capture_default_str();

  std::string control_path;
  std::string case_path;
  std::string out_dir = "results";
  std::string theta_path;
  bool plot_data = false;
  bool baseline = false;

  auto* fit = app.add_subcommand("fit", "Fit the single-group model to control data and emit regime posteriors");
  fit->add_option("--control", control_path, "Control counts")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", out_dir, "Output directory")->capture_default_str();
  fit->add_flag("--emit-plot-data", plot_data, "Write tidy long-format tables");

  auto* infer = app.add_subcommand("infer", "Fit, filter, sample trajectories and test positions and regions");
  infer->add_option("--control", control_path, "Control counts")->required()->check(CLI::ExistingFile);
  infer->add_option("--case", case_path, "Case counts")->required()->check(CLI::ExistingFile);
  infer->add_option("--out", out_dir, "Output directory")->capture_default_str();
  infer->add_option("--theta", theta_path, "Reuse fitted parameters from a theta.json")->check(CLI::ExistingFile);
  infer->add_flag("--baseline", baseline, "Also write per-site Wald p-values");
  infer->add_flag("--emit-plot-data", plot_data, "Write tidy long-format tables");

  std::string traj_path;
  std::string pvalue_path;
  std::string pvalue_column = "p";
  std::string method = "bh";
  auto* tpos = app.add_subcommand("test-positions", "Step-up tests of single positions");
  auto* traj_opt = tpos->add_option("--trajectory_file", traj_path, "Trajectory file written by infer")
                       ->check(CLI::ExistingFile);
  auto* pv_opt = tpos->add_option("--pvalues", pvalue_path, "Table with chrom, pos and a p-value column")
                     ->check(CLI::ExistingFile);
  traj_opt->excludes(pv_opt);
  tpos->add_option("--column", pvalue_column, "p-value column")->capture_default_str();
  tpos->add_option("--method", method, "bonf, bh, by or abh")->capture_default_str();
  tpos->add_option("--out", out_dir, "Output directory")->capture_default_str();
  tpos->add_flag("--emit-plot-data", plot_data, "Write tidy long-format tables");

  auto* treg = app.add_subcommand("test-regions", "Partial conjunction tests of threshold-built regions");
  treg->add_option("--trajectory_file", traj_path, "Trajectory file written by infer")->required()->check(CLI::ExistingFile);
  treg->add_option("--out", out_dir, "Output directory")->capture_default_str();

  std::string decisions_path;
  std::string regions_path;
  std::string truth_path;
  std::string signal = "regime-diff";
  std::string score_out = "-";
  auto* score = app.add_subcommand("score", "Realized FDP, FNP and true positives against a truth table");
  auto* dec_opt = score->add_option("--decisions", decisions_path, "Per-site table with a reject column")
                      ->check(CLI::ExistingFile);
  auto* reg_opt = score->add_option("--regions", regions_path, "regions.tsv written by infer or test-regions")
                      ->check(CLI::ExistingFile);
  dec_opt->excludes(reg_opt);
  score->add_option("--truth", truth_path, "Truth table written by simulate")->required()->check(CLI::ExistingFile);
  score->add_option("--signal", signal, "Truth column to score against")->capture_default_str();
  score->add_option("--out", score_out, "Output JSON file, - for stdout")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    rc.validate();
    if (simulate->parsed()) {
      run_simulate(sim, rc);
    } else if (fit->parsed()) {
      const auto control = parse_counts_file(control_path);
      const auto bundle = run_pipeline(rc, control, nullptr);
      write_results(out_dir, bundle, plot_data);
    } else if (infer->parsed()) {
      const auto control = parse_counts_file(control_path);
      const auto case_file = parse_counts_file(case_path);
      std::map<std::string, std::vector<double>> thetas;
      if (!theta_path.empty()) thetas = read_theta_document(theta_path);
      const auto bundle = run_pipeline(rc, control, &case_file, theta_path.empty() ? nullptr : &thetas);
      write_results(out_dir, bundle, plot_data);
      if (baseline) {
        auto os = detail::open_out(detail::join_path(out_dir, "pvalues_baseline.tsv"));
        os.precision(10);
        os << "chrom\tpos\tp\n";
        for (const auto& c : control.chromosomes) {
          const auto p = site_wald_pvalues(c.counts, case_file.find(c.chromosome)->counts);
          for (std::size_t t = 0; t < p.size(); ++t) os << c.chromosome << '\t' << c.positions[t] << '\t' << p[t] << '\n';
        }
      }
    } else if (tpos->parsed()) {
      std::filesystem::create_directories(out_dir);
      if (!traj_path.empty()) {
        const auto file = read_trajectories(traj_path);
        const auto views = trajectory_views(file);
        const auto signals = rc.parsed_signals();
        const auto decisions = test_positions(views, signals, file.palette, rc.alpha);
        write_position_decisions(out_dir, views, decisions);
        write_json(detail::join_path(out_dir, "summary_positions.json"), decision_summary(decisions, {}, nullptr));
        if (plot_data) write_plot_data(detail::join_path(out_dir, "plot_signals.tsv"), views, decisions);
      } else if (!pvalue_path.empty()) {
        const auto table = read_tsv(pvalue_path);
        const auto col = table.column(pvalue_column);
        std::vector<double> p;
        for (const auto& row : table.rows) p.push_back(std::stod(row[col]));
        const auto d = pvalue_adjust(p, parse_pvalue_method(method), rc.alpha);
        auto os = detail::open_out(detail::join_path(out_dir, "decisions_pvalues.tsv"));
        os.precision(10);
        const auto chrom = table.column("chrom");
        const auto pos = table.column("pos");
        os << "chrom\tpos\tp\treject\n";
        for (std::size_t i = 0; i < p.size(); ++i) {
          os << table.rows[i][chrom] << '\t' << table.rows[i][pos] << '\t' << p[i] << '\t' << int(d.reject[i]) << '\n';
        }
      } else {
        throw std::invalid_argument("test-positions needs --trajectory_file or --pvalues");
      }
    } else if (treg->parsed()) {
      std::filesystem::create_directories(out_dir);
      const auto file = read_trajectories(traj_path);
      const auto views = trajectory_views(file);
      DecisionSet d;
      const auto regions = test_regions(views, file.palette, rc.threshold, rc.gamma, rc.alpha, &d);
      write_regions(detail::join_path(out_dir, "regions.tsv"), views, regions);
      write_json(detail::join_path(out_dir, "summary_regions.json"), decision_summary({}, regions, &d));
    } else if (score->parsed()) {
      const auto truth = read_tsv(truth_path);
      const auto index = index_sites(truth);
      const auto truth_col = truth.column(signal);
      auto site_truth = [&](std::size_t row) -> std::uint8_t { return truth.rows[row][truth_col] == "1" ? 1 : 0; };
      std::vector<std::uint8_t> reject;
      std::vector<std::uint8_t> truth_v;
      std::vector<double> weight;
      if (!decisions_path.empty()) {
        const auto dec = read_tsv(decisions_path);
        const auto rc_col = dec.column("reject");
        const auto dchrom = dec.column("chrom");
        const auto dpos = dec.column("pos");
        for (const auto& row : dec.rows) {
          const auto it = index.find({row[dchrom], std::stoll(row[dpos])});
          if (it == index.end()) throw std::invalid_argument("decision site " + row[dchrom] + ":" + row[dpos] + " not in truth");
          reject.push_back(row[rc_col] == "1" ? 1 : 0);
          truth_v.push_back(site_truth(it->second));
        }
        write_json(score_out, score_json(score_decisions(reject, truth_v)));
      } else if (!regions_path.empty()) {
        // A region is a true signal when its signal fraction exceeds gamma.
        const auto reg = read_tsv(regions_path);
        const auto c_col = reg.column("chrom");
        const auto s_col = reg.column("start");
        const auto e_col = reg.column("end");
        const auto r_col = reg.column("reject");
        const auto w_col = reg.column("weight");
        for (const auto& row : reg.rows) {
          const auto first = index.lower_bound({row[c_col], std::stoll(row[s_col]) + 1});
          std::size_t hits = 0;
          std::size_t n = 0;
          for (auto it = first; it != index.end() && it->first.first == row[c_col] && it->first.second <= std::stoll(row[e_col]);
               ++it) {
            hits += site_truth(it->second);
            ++n;
          }
          if (n == 0) throw std::invalid_argument("region " + row[c_col] + ":" + row[s_col] + " has no truth sites");
          reject.push_back(row[r_col] == "1" ? 1 : 0);
          truth_v.push_back(static_cast<double>(hits) / static_cast<double>(n) > rc.gamma ? 1 : 0);
          weight.push_back(std::stod(row[w_col]));
        }
        write_json(score_out, score_json(score_decisions(reject, truth_v, weight, weight)));
      } else {
        throw std::invalid_argument("score needs --decisions or --regions");
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "methcp: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
