#ifndef METHCP_IO_HPP
#define METHCP_IO_HPP

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "methcp/beta_binomial.hpp"
#include "methcp/multiple_testing.hpp"
#include "methcp/paired_filter.hpp"
#include "methcp/regimes.hpp"

namespace methcp {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Read counts of one group on one chromosome.
struct CountTable {
  std::string chromosome;
  std::vector<std::int64_t> positions;
  GroupCounts counts;

  bool operator==(const CountTable&) const = default;
};

// One group: sample names and one table per chromosome, in file order.
struct CountFile {
  std::vector<std::string> samples;
  std::vector<CountTable> chromosomes;

  bool operator==(const CountFile&) const = default;

  [[nodiscard]] const CountTable* find(std::string_view chrom) const {
    for (const auto& c : chromosomes) {
      if (c.chromosome == chrom) return &c;
    }
    return nullptr;
  }
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream os(path, mode);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  return os;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream is(path, mode);
  if (!is) throw std::runtime_error("cannot open '" + path + "' for reading");
  return is;
}

}  // namespace detail

/// Tab-separated counts: a header "chrom pos <s>.meth <s>.total ..." and one
/// row per site with (methylated, total) pairs per sample; 0 0 marks a
/// missing read. Positions must increase within a chromosome and each
/// chromosome must form one contiguous block.
[[nodiscard]] inline CountFile parse_counts(std::istream& in, const std::string& source = "<input>") {
  CountFile file;
  std::string line;
  std::size_t lineno = 0;
  std::size_t S = 0;
  bool header = false;
  std::vector<std::uint32_t> meth;
  std::vector<std::uint32_t> total;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = detail::strip_cr(line);
    if (view.empty() || view.front() == '#') continue;
    const auto cols = detail::split_tabs(view);
    if (!header) {
      if (cols.size() < 4 || cols.size() % 2 != 0) throw ParseError(source, lineno, "header needs chrom, pos and column pairs");
      S = (cols.size() - 2) / 2;
      for (std::size_t s = 0; s < S; ++s) {
        auto name = std::string(cols[2 + 2 * s]);
        if (name.size() > 5 && name.ends_with(".meth")) name.resize(name.size() - 5);
        file.samples.push_back(name);
      }
      header = true;
      continue;
    }
    if (cols.size() != 2 + 2 * S) {
      throw ParseError(source, lineno, "expected " + std::to_string(2 + 2 * S) + " columns, found " + std::to_string(cols.size()));
    }
    std::int64_t pos = 0;
    if (!detail::parse_number(cols[1], pos)) throw ParseError(source, lineno, "bad position");
    meth.assign(S, 0);
    total.assign(S, 0);
    for (std::size_t s = 0; s < S; ++s) {
      if (!detail::parse_number(cols[2 + 2 * s], meth[s]) || !detail::parse_number(cols[3 + 2 * s], total[s])) {
        throw ParseError(source, lineno, "bad count");
      }
      if (meth[s] > total[s]) throw ParseError(source, lineno, "methylated count exceeds total");
    }
    if (file.chromosomes.empty() || file.chromosomes.back().chromosome != cols[0]) {
      if (file.find(cols[0])) throw ParseError(source, lineno, "chromosome '" + std::string(cols[0]) + "' is not contiguous");
      file.chromosomes.push_back({std::string(cols[0]), {}, GroupCounts::with_samples(S)});
    }
    auto& chrom = file.chromosomes.back();
    if (!chrom.positions.empty() && pos <= chrom.positions.back()) {
      throw ParseError(source, lineno, "positions must be strictly increasing within a chromosome");
    }
    chrom.positions.push_back(pos);
    chrom.counts.push_site(meth, total);
  }
  if (!header) throw ParseError(source, lineno, "missing header");
  return file;
}

[[nodiscard]] inline CountFile parse_counts_file(const std::string& path) {
  auto in = detail::open_in(path);
  return parse_counts(in, path);
}

inline void write_counts(std::ostream& os, const CountFile& file) {
  os << "chrom\tpos";
  for (const auto& s : file.samples) os << '\t' << s << ".meth\t" << s << ".total";
  os << '\n';
  for (const auto& chrom : file.chromosomes) {
    for (std::size_t t = 0; t < chrom.positions.size(); ++t) {
      os << chrom.chromosome << '\t' << chrom.positions[t];
      for (std::size_t s = 0; s < chrom.counts.samples(); ++s) {
        os << '\t' << chrom.counts.methylated(t, s) << '\t' << chrom.counts.total(t, s);
      }
      os << '\n';
    }
  }
}

// Generic header + rows tab-separated table.
struct TsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw std::invalid_argument("missing column '" + std::string(name) + "'");
  }
};

[[nodiscard]] inline TsvTable read_tsv(const std::string& path) {
  auto in = detail::open_in(path);
  TsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = detail::strip_cr(line);
    if (view.empty() || view.front() == '#') continue;
    std::vector<std::string> cols;
    for (auto c : detail::split_tabs(view)) cols.emplace_back(c);
    if (table.header.empty()) {
      table.header = std::move(cols);
    } else {
      if (cols.size() != table.header.size()) throw ParseError(path, lineno, "column count differs from header");
      table.rows.push_back(std::move(cols));
    }
  }
  if (table.header.empty()) throw ParseError(path, lineno, "missing header");
  return table;
}

/// Truth sidecar: chrom, pos, z, 1-based regimes, and one 0/1 column per signal.
inline void write_truth(std::ostream& os, const std::string& chrom, std::span<const std::int64_t> positions,
                        std::span<const PairedState> path, const RegimePalette& palette) {
  os << "chrom\tpos\tz\tcontrol_regime\tcase_regime";
  for (auto kind : kAllSignals) os << '\t' << signal_name(kind);
  os << '\n';
  for (std::size_t t = 0; t < path.size(); ++t) {
    const auto label = label_of(path[t]);
    os << chrom << '\t' << positions[t] << '\t' << int(label.merged) << '\t' << path[t].control.regime + 1 << '\t'
       << path[t].case_state.regime + 1;
    for (auto kind : kAllSignals) os << '\t' << (signal_value(kind, label, palette) ? 1 : 0);
    os << '\n';
  }
}

// Trajectories of every chromosome plus what is needed to evaluate signals.
struct TrajectoryFile {
  RegimePalette palette;
  std::vector<std::string> chromosomes;
  std::vector<std::vector<std::int64_t>> positions;
  std::vector<TrajectorySet> trajectories;
};

namespace detail {

inline constexpr char kTrajectoryMagic[8] = {'M', 'C', 'P', 'T', 'R', 'J', '0', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("truncated trajectory file");
  return v;
}

}  // namespace detail

/// Little-endian binary layout: magic, palette, then per chromosome the name,
/// positions, and the trajectory labels (3 bytes per site and trajectory).
inline void write_trajectories(const std::string& path, const TrajectoryFile& file) {
  auto os = detail::open_out(path, std::ios::binary);
  os.write(detail::kTrajectoryMagic, sizeof(detail::kTrajectoryMagic));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(file.palette.size()));
  for (const auto& r : file.palette.regimes()) {
    detail::put(os, r.mean);
    detail::put(os, r.sd);
  }
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(file.chromosomes.size()));
  for (std::size_t c = 0; c < file.chromosomes.size(); ++c) {
    const auto& name = file.chromosomes[c];
    const auto& trajs = file.trajectories[c];
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put<std::uint64_t>(os, trajs.sites);
    detail::put<std::uint64_t>(os, trajs.count);
    for (auto p : file.positions[c]) detail::put(os, p);
    for (const auto& l : trajs.labels) {
      detail::put(os, l.merged);
      detail::put(os, l.control);
      detail::put(os, l.case_regime);
    }
  }
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

[[nodiscard]] inline TrajectoryFile read_trajectories(const std::string& path) {
  auto is = detail::open_in(path, std::ios::binary);
  char magic[sizeof(detail::kTrajectoryMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, detail::kTrajectoryMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("'" + path + "' is not a trajectory file");
  }
  TrajectoryFile file;
  const auto R = detail::get<std::uint32_t>(is);
  std::vector<std::pair<double, double>> ms;
  for (std::uint32_t r = 0; r < R; ++r) {
    const double m = detail::get<double>(is);
    const double s = detail::get<double>(is);
    ms.emplace_back(m, s);
  }
  file.palette = RegimePalette::from_moments(ms);
  const auto chroms = detail::get<std::uint32_t>(is);
  for (std::uint32_t c = 0; c < chroms; ++c) {
    const auto len = detail::get<std::uint32_t>(is);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw std::runtime_error("truncated trajectory file");
    TrajectorySet trajs;
    trajs.sites = detail::get<std::uint64_t>(is);
    trajs.count = detail::get<std::uint64_t>(is);
    std::vector<std::int64_t> pos(trajs.sites);
    for (auto& p : pos) p = detail::get<std::int64_t>(is);
    trajs.labels.resize(trajs.sites * trajs.count);
    for (auto& l : trajs.labels) {
      l.merged = detail::get<std::uint8_t>(is);
      l.control = detail::get<std::uint8_t>(is);
      l.case_regime = detail::get<std::uint8_t>(is);
      if (l.control >= R || l.case_regime >= R) throw std::runtime_error("corrupt trajectory file");
    }
    file.chromosomes.push_back(std::move(name));
    file.positions.push_back(std::move(pos));
    file.trajectories.push_back(std::move(trajs));
  }
  return file;
}

inline constexpr const char* kVersion = "1.0.0";

/// Fitted single-group parameters with provenance.
[[nodiscard]] inline nlohmann::json theta_record(const SingleGroupParams& params, const std::string& chromosome,
                                                 const std::vector<double>& pass_loglik, const std::string& config_hash,
                                                 std::uint64_t seed) {
  const std::size_t R = params.regimes();
  nlohmann::json j;
  j["chromosome"] = chromosome;
  j["theta"] = params.theta();
  std::vector<std::vector<double>> P(R, std::vector<double>(R));
  std::vector<double> omega(R);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < R; ++c) P[r][c] = params.transition()(r, c);
    omega[r] = params.success(r);
  }
  j["transition"] = P;
  j["success"] = omega;
  j["shifts"] = params.shifts();
  j["sizes"] = params.sizes();
  j["pass_log_likelihood"] = pass_loglik;
  j["provenance"] = {{"version", kVersion}, {"config_hash", config_hash}, {"seed", seed}};
  return j;
}

}  // namespace methcp

#endif  // METHCP_IO_HPP
