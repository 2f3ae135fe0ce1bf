// Command-line front end: run experiments, compare summaries, rank sampled
// states of a trained run by importance.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mol/harness/compare.hpp"
#include "mol/harness/config.hpp"
#include "mol/harness/experiment.hpp"
#include "mol/harness/report.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

mol::harness::BandThresholds parse_thresholds(const std::string& s) {
  const auto parts = mol::harness::detail::split(s, ',');
  if (parts.size() != 2) throw mol::harness::ConfigError("thresholds", "expected 'a,b'");
  mol::harness::BandThresholds t{mol::harness::detail::parse_real("thresholds", parts[0]),
                                 mol::harness::detail::parse_real("thresholds", parts[1])};
  t.validate();
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"micro-objective learning experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::size_t jobs = 1;
  auto* run = app.add_subcommand("run", "train every seed of a config and write CSVs");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--out", out_dir, "output directory (overrides 'out' in the config)");
  run->add_option("--jobs", jobs, "seeds trained in parallel")->check(CLI::PositiveNumber);

  std::string summary_a, summary_b;
  auto* cmp = app.add_subcommand("compare", "compare two summary.csv files (or run directories)");
  cmp->add_option("summary_a", summary_a)->required();
  cmp->add_option("summary_b", summary_b)->required();

  std::string run_dir, thresholds = "0.2,0.4";
  std::size_t top_k = 10, attempts = 20;
  std::optional<std::uint64_t> seed;
  auto* rep = app.add_subcommand("report-importance", "rank the sampled states of a successful rollout");
  rep->add_option("run_dir", run_dir)->required();
  rep->add_option("--top", top_k, "rows shown per band")->check(CLI::PositiveNumber);
  rep->add_option("--thresholds", thresholds, "band thresholds a,b on R_obj");
  rep->add_option("--seed", seed, "which seed's model to load (default: first)");
  rep->add_option("--attempts", attempts, "rollouts tried")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) {
      auto cfg = mol::harness::load_config(config_path);
      if (!out_dir.empty()) cfg.out = out_dir;
      if (cfg.out.empty()) throw mol::harness::ConfigError("out", "no output directory (use --out or out=)");
      const auto result = mol::harness::run_experiment(cfg, cfg.out, jobs);
      const auto& last = result.summary.back();
      std::printf("wrote %zu seed files and summary.csv to %s\n", result.runs.size(), cfg.out.c_str());
      std::printf("final checkpoint: frames=%llu mean_score=%s\n", static_cast<unsigned long long>(last.frames),
                  mol::harness::fmt_num(last.mean).c_str());
    } else if (*cmp) {
      const auto c =
          mol::harness::compare(mol::harness::read_summary(summary_a), mol::harness::read_summary(summary_b));
      std::cout << mol::harness::format_comparison(c);
    } else if (*rep) {
      const auto t = parse_thresholds(thresholds);
      const auto r = mol::harness::report_importance(run_dir, t, seed, attempts);
      std::cout << mol::harness::format_report(r, top_k);
    }
  } catch (const mol::harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
