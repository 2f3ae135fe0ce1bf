#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mol/agent.hpp"
#include "mol/envs.hpp"
#include "mol/harness/config.hpp"
#include "mol/harness/experiment.hpp"
#include "mol/sampling.hpp"
#include "mol/shaping.hpp"

namespace mol::harness {

struct BandThresholds {
  double medium = 0.2;  ///< R_obj at or above this is at least "medium"
  double top = 0.4;     ///< R_obj at or above this is "top"

  void validate() const {
    if (!(medium >= 0.0 && medium < top)) throw ConfigError("thresholds", "need 0 <= a < b");
  }
};

inline std::string band_of(double r, const BandThresholds& t) {
  if (r >= t.top) return "top";
  if (r >= t.medium) return "medium";
  return "small";
}

struct ImportanceRow {
  Observation state;
  std::string label;
  std::string description;
  double pseudo_count = 0.0;
  double r_obj = 0.0;
  std::string band;
};

struct ImportanceReport {
  std::uint64_t seed = 0;
  /// Rollouts tried and the index of the one reported.
  std::size_t attempts = 0;
  std::size_t chosen = 0;
  double score = 0.0;
  std::size_t segments = 0;
  /// Sorted by R_obj, then pseudo-count, both descending.
  std::vector<ImportanceRow> rows;
};

/// Rolls out the final policy (epsilon_end-greedy on q_a + q_b) and keeps the
/// rollout with the most successful segments. Each segment is
/// dissimilar-sampled; every sampled state is scored with the persisted
/// importance model and a copy of the persisted R_cmax.
inline ImportanceReport importance_report(const ExperimentConfig& cfg, Learner& learner, std::uint64_t seed,
                                          const BandThresholds& thresholds, std::size_t attempts = 20) {
  thresholds.validate();
  auto env = make_environment(cfg.env);
  std::mt19937_64 rng(splitmix64(seed ^ 0xa11ceULL));
  const double eps = cfg.agent.epsilon_end;

  std::vector<SuccessfulTrajectory> best;
  double best_score = 0.0;
  std::size_t chosen = 0;
  for (std::size_t k = 0; k < attempts; ++k) {
    Observation obs = env->reset(episode_seed(seed ^ 0x7e57ULL, k));
    std::vector<Transition> episode;
    while (!env->is_terminal()) {
      const ActionId a = epsilon_greedy(learner.q_a(), learner.q_b(), obs, eps, rng);
      episode.push_back(env->step(a));
      obs = episode.back().next_state;
    }
    std::vector<SuccessfulTrajectory> segs;
    double score = 0.0;
    if (!episode.empty()) {
      const Trajectory t(std::move(episode));
      for (const auto& tr : t.transitions()) score += tr.reward;
      segs = split_successful(t);
    }
    if (segs.size() > best.size()) {
      best = std::move(segs);
      best_score = score;
      chosen = k;
    }
  }
  if (best.empty())
    throw RunError("no successful trajectory in " + std::to_string(attempts) + " rollouts of the final policy");

  ImportanceReport rep;
  rep.seed = seed;
  rep.attempts = attempts;
  rep.chosen = chosen;
  rep.score = best_score;
  rep.segments = best.size();
  for (const auto& seg : best) {
    const auto states = seg.states();
    for (const auto& s : dissimilar_sample(states, cfg.sampling)) {
      ImportanceRow row{s, s.label(), s.is_discrete() ? env->describe(s.id()) : "-", 0.0, 0.0, ""};
      row.pseudo_count = learner.importance_model().count(s, Degeneracy::Clamp);
      CMaxTracker tracker = learner.tracker();
      row.r_obj = r_obj(r_exp(row.pseudo_count), tracker, cfg.shaping);
      row.band = band_of(row.r_obj, thresholds);
      rep.rows.push_back(std::move(row));
    }
  }
  std::stable_sort(rep.rows.begin(), rep.rows.end(), [](const ImportanceRow& a, const ImportanceRow& b) {
    if (a.r_obj != b.r_obj) return a.r_obj > b.r_obj;
    return a.pseudo_count > b.pseudo_count;
  });
  return rep;
}

/// Loads config.txt and model_seed_<seed>.json (the first configured seed
/// when `seed` is empty) from a run directory.
inline ImportanceReport report_importance(const std::filesystem::path& run_dir, const BandThresholds& thresholds,
                                          std::optional<std::uint64_t> seed = std::nullopt,
                                          std::size_t attempts = 20) {
  const ExperimentConfig cfg = load_config((run_dir / "config.txt").string());
  const std::uint64_t s = seed.value_or(cfg.seeds.front());
  const auto model_path = run_dir / ("model_seed_" + std::to_string(s) + ".json");
  std::ifstream f(model_path);
  if (!f) throw RunError("cannot read " + model_path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw RunError("malformed model file " + model_path.string() + ": " + e.what());
  }
  auto learner = learner_from_json(cfg, j);
  return importance_report(cfg, *learner, s, thresholds, attempts);
}

/// Rows grouped by band (top, medium, small), at most top_k per band.
inline std::string format_report(const ImportanceReport& r, std::size_t top_k) {
  std::ostringstream o;
  o << "# seed=" << r.seed << " rollout=" << r.chosen << "/" << r.attempts << " score=" << fmt_num(r.score)
    << " segments=" << r.segments << " sampled_states=" << r.rows.size() << "\n";
  o << "band,rank,state,description,pseudo_count,r_obj\n";
  for (const char* band : {"top", "medium", "small"}) {
    std::size_t shown = 0;
    for (std::size_t i = 0; i < r.rows.size() && shown < top_k; ++i) {
      const auto& row = r.rows[i];
      if (row.band != band) continue;
      o << band << "," << i + 1 << "," << row.label << "," << row.description << "," << fmt_num(row.pseudo_count)
        << "," << fmt_num(row.r_obj) << "\n";
      ++shown;
    }
  }
  return o.str();
}

}  // namespace mol::harness
