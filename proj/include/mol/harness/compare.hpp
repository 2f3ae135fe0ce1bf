#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mol/harness/config.hpp"
#include "mol/harness/experiment.hpp"

namespace mol::harness {

struct SummaryCurve {
  std::vector<std::uint64_t> frames;
  std::vector<double> mean;
};

/// Reads summary.csv (a run directory is accepted too).
inline SummaryCurve read_summary(std::filesystem::path path) {
  if (std::filesystem::is_directory(path)) path /= "summary.csv";
  std::ifstream f(path);
  if (!f) throw RunError("cannot read summary " + path.string());
  std::string line;
  if (!std::getline(f, line)) throw RunError(path.string() + " is empty");
  const auto header = detail::split(line, ',');
  std::size_t frames_col = header.size(), mean_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "frames") frames_col = i;
    if (header[i] == "mean_score") mean_col = i;
  }
  if (frames_col == header.size() || mean_col == header.size())
    throw RunError(path.string() + " lacks frames/mean_score columns");
  SummaryCurve c;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != header.size())
      throw RunError(path.string() + ":" + std::to_string(lineno) + ": wrong number of columns");
    try {
      c.frames.push_back(detail::parse_uint("frames", cells[frames_col]));
      c.mean.push_back(detail::parse_real("mean_score", cells[mean_col]));
    } catch (const ConfigError& e) {
      throw RunError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (c.frames.empty()) throw RunError(path.string() + " has no checkpoints");
  return c;
}

/// Percent improvement of b over a: (b / a - 1) * 100.
inline double ratio_percent(double a, double b) {
  if (a == 0.0) throw ContractViolation("ratio against a zero baseline is undefined");
  return (b / a - 1.0) * 100.0;
}

struct ComparisonRow {
  std::size_t checkpoint = 0;
  std::uint64_t frames = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  std::optional<double> ratio;  ///< empty when mean_a == 0
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  /// Number of trailing checkpoints in the final window (ceil of 10%).
  std::size_t window = 0;
  double final_a = 0.0;
  double final_b = 0.0;
  std::optional<double> final_ratio;
};

inline Comparison compare(const SummaryCurve& a, const SummaryCurve& b) {
  if (a.frames != b.frames) throw RunError("summaries have misaligned checkpoints");
  Comparison c;
  const std::size_t n = a.frames.size();
  for (std::size_t k = 0; k < n; ++k) {
    ComparisonRow r{k + 1, a.frames[k], a.mean[k], b.mean[k], std::nullopt};
    if (r.mean_a != 0.0) r.ratio = ratio_percent(r.mean_a, r.mean_b);
    c.rows.push_back(r);
  }
  c.window = std::max<std::size_t>(1, (n + 9) / 10);
  for (std::size_t k = n - c.window; k < n; ++k) {
    c.final_a += a.mean[k];
    c.final_b += b.mean[k];
  }
  c.final_a /= static_cast<double>(c.window);
  c.final_b /= static_cast<double>(c.window);
  if (c.final_a != 0.0) c.final_ratio = ratio_percent(c.final_a, c.final_b);
  return c;
}

inline std::string format_comparison(const Comparison& c) {
  auto ratio = [](const std::optional<double>& r) { return r ? fmt_num(*r) : std::string("n/a"); };
  std::ostringstream o;
  o << "checkpoint,frames,mean_a,mean_b,ratio_pct\n";
  for (const auto& r : c.rows)
    o << r.checkpoint << "," << r.frames << "," << fmt_num(r.mean_a) << "," << fmt_num(r.mean_b) << ","
      << ratio(r.ratio) << "\n";
  o << "# final window: last " << c.window << " checkpoints, mean_a=" << fmt_num(c.final_a)
    << " mean_b=" << fmt_num(c.final_b) << " ratio_pct=" << ratio(c.final_ratio) << "\n";
  return o.str();
}

}  // namespace mol::harness
