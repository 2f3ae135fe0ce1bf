#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mol/agent.hpp"
#include "mol/density.hpp"
#include "mol/envs.hpp"
#include "mol/harness/config.hpp"

namespace mol::harness {

/// Failure while running or reading a run (as opposed to a bad config).
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::unique_ptr<GridWorld> make_environment(const EnvConfig& e) {
  auto env = e.kind == EnvKind::KeyDoor ? std::make_unique<GridWorld>(e.keydoor)
                                        : std::make_unique<GridWorld>(e.keydoor.grid);
  if (e.pixels) env->set_pixel_mode(e.render);
  return env;
}

inline std::unique_ptr<DensityModel> make_density_model(const ExperimentConfig& c) {
  if (c.env.pixels) return std::make_unique<FactoredPixelModel>(c.smoothing);
  return std::make_unique<TabularCountModel>();
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Environment seed of episode `episode` in the run seeded with `seed`.
inline std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode) {
  return splitmix64(splitmix64(seed) ^ (episode + 1));
}

inline std::unique_ptr<Learner> make_learner(const ExperimentConfig& c, std::uint64_t seed,
                                             std::size_t action_count = kGridActionCount) {
  return std::make_unique<Learner>(action_count, c.agent, c.shaping, c.sampling, splitmix64(seed ^ 0x5eedULL),
                                   make_density_model(c), make_density_model(c));
}

struct EpisodeRecord {
  std::uint64_t seed = 0;
  std::uint64_t episode = 0;
  /// Cumulative frames at the end of the episode.
  std::uint64_t frames = 0;
  double score = 0.0;
  double shaped_return = 0.0;
  double epsilon = 0.0;
  std::int64_t wall_ms = 0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> episodes;
  std::unique_ptr<Learner> learner;
};

/// Episode callback for callers that want the full per-step trace.
using EpisodeObserver = std::function<void(const EpisodeResult&)>;

/// Trains one seed for cfg.max_frames frames. An episode still running when
/// the budget runs out is dropped from the records.
inline SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const EpisodeObserver& observe = {}) {
  SeedRun run;
  run.seed = seed;
  auto env = make_environment(cfg.env);
  run.learner = make_learner(cfg, seed, env->action_count());
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t ep = 0; run.learner->frames() < cfg.max_frames; ++ep) {
    const EpisodeResult r = run.learner->run_episode(*env, episode_seed(seed, ep), cfg.max_frames);
    if (observe) observe(r);
    if (r.cut_short) break;
    EpisodeRecord rec;
    rec.seed = seed;
    rec.episode = ep;
    rec.frames = run.learner->frames();
    rec.score = r.score;
    rec.shaped_return = r.shaped_return;
    rec.epsilon = r.epsilon;
    if (cfg.record_wall_time)
      rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    run.episodes.push_back(rec);
  }
  return run;
}

/// Per-checkpoint score of one seed: the mean score of the episodes that
/// ended inside the checkpoint's frame window, carried forward through
/// windows without a finished episode (0 before the first one).
inline std::vector<double> checkpoint_scores(const std::vector<EpisodeRecord>& episodes, std::uint64_t max_frames,
                                             std::uint64_t eval_every) {
  if (eval_every == 0) throw ContractViolation("eval_every must be positive");
  const std::size_t n = max_frames / eval_every;
  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (const auto& e : episodes) {
    if (e.frames == 0) continue;
    const std::size_t k = (e.frames - 1) / eval_every;
    if (k < n) {
      sum[k] += e.score;
      ++count[k];
    }
  }
  std::vector<double> out(n, 0.0);
  double last = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (count[k]) last = sum[k] / static_cast<double>(count[k]);
    out[k] = last;
  }
  return out;
}

struct SummaryRow {
  std::size_t checkpoint = 0;  ///< 1-based
  std::uint64_t frames = 0;
  double mean = 0.0;
  double stdev = 0.0;  ///< sample standard deviation, 0 for one seed
  double moving_avg = 0.0;  ///< trailing mean of `mean` over up to 10 checkpoints
};

inline constexpr std::size_t kMovingAverageWindow = 10;

inline std::vector<SummaryRow> summarize(const std::vector<std::vector<double>>& per_seed, std::uint64_t eval_every) {
  if (per_seed.empty()) throw ContractViolation("summarize needs at least one seed");
  const std::size_t n = per_seed.front().size();
  for (const auto& s : per_seed)
    if (s.size() != n) throw ContractViolation("seeds have different checkpoint counts");
  std::vector<SummaryRow> rows(n);
  const double m = static_cast<double>(per_seed.size());
  for (std::size_t k = 0; k < n; ++k) {
    auto& r = rows[k];
    r.checkpoint = k + 1;
    r.frames = (k + 1) * eval_every;
    double sum = 0.0;
    for (const auto& s : per_seed) sum += s[k];
    r.mean = sum / m;
    if (per_seed.size() > 1) {
      double sq = 0.0;
      for (const auto& s : per_seed) sq += (s[k] - r.mean) * (s[k] - r.mean);
      r.stdev = std::sqrt(sq / (m - 1.0));
    }
    const std::size_t lo = k + 1 > kMovingAverageWindow ? k + 1 - kMovingAverageWindow : 0;
    double w = 0.0;
    for (std::size_t j = lo; j <= k; ++j) w += rows[j].mean;
    r.moving_avg = w / static_cast<double>(k + 1 - lo);
  }
  return rows;
}

/// Frames at which `streak` consecutive episodes first all scored at least
/// success_score, or nullopt.
inline std::optional<std::uint64_t> frames_to_sustained_success(const std::vector<EpisodeRecord>& episodes,
                                                                double success_score, std::size_t streak = 5) {
  std::size_t run = 0;
  for (const auto& e : episodes) {
    run = e.score >= success_score ? run + 1 : 0;
    if (run >= streak) return e.frames;
  }
  return std::nullopt;
}

// CSV ---------------------------------------------------------------------------------

inline std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline const char* kEpisodeCsvHeader = "seed,episode,frames,score,shaped_return,epsilon,wall_ms";
inline const char* kSummaryCsvHeader = "checkpoint,frames,mean_score,stdev_score,moving_avg_10";

inline std::string episodes_csv(const std::vector<EpisodeRecord>& episodes) {
  std::string s = std::string(kEpisodeCsvHeader) + "\n";
  for (const auto& e : episodes)
    s += std::to_string(e.seed) + "," + std::to_string(e.episode) + "," + std::to_string(e.frames) + "," +
         fmt_num(e.score) + "," + fmt_num(e.shaped_return) + "," + fmt_num(e.epsilon) + "," +
         std::to_string(e.wall_ms) + "\n";
  return s;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string s = std::string(kSummaryCsvHeader) + "\n";
  for (const auto& r : rows)
    s += std::to_string(r.checkpoint) + "," + std::to_string(r.frames) + "," + fmt_num(r.mean) + "," +
         fmt_num(r.stdev) + "," + fmt_num(r.moving_avg) + "\n";
  return s;
}

// Model persistence -------------------------------------------------------------------

namespace detail {

inline nlohmann::json obs_to_json(const Observation& o) {
  if (o.is_discrete()) return o.id();
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(o.values().size() * 2);
  for (std::uint8_t b : o.values()) {
    hex += kHex[b >> 4];
    hex += kHex[b & 15];
  }
  return {{"w", o.width()}, {"h", o.height()}, {"px", hex}};
}

inline Observation obs_from_json(const nlohmann::json& j) {
  if (j.is_number_unsigned()) return Observation::discrete(j.get<std::uint64_t>());
  const std::string hex = j.at("px").get<std::string>();
  auto nibble = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    throw RunError("bad pixel encoding in model file");
  };
  if (hex.size() % 2) throw RunError("bad pixel encoding in model file");
  std::vector<std::uint8_t> px(hex.size() / 2);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  return Observation::pixels(j.at("w").get<int>(), j.at("h").get<int>(), std::move(px));
}

inline nlohmann::json qtable_to_json(const QTable& q) {
  std::vector<std::pair<std::string, nlohmann::json>> rows;
  for (const auto& [s, v] : q.entries()) rows.emplace_back(s.label(), nlohmann::json{{"s", obs_to_json(s)}, {"q", v}});
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  nlohmann::json out = nlohmann::json::array();
  for (auto& [_, j] : rows) out.push_back(std::move(j));
  return out;
}

inline void qtable_from_json(const nlohmann::json& j, QTable& q) {
  for (const auto& row : j) {
    const Observation s = obs_from_json(row.at("s"));
    const auto v = row.at("q").get<std::vector<double>>();
    if (v.size() != q.action_count()) throw RunError("Q-table row has the wrong number of actions");
    for (std::size_t a = 0; a < v.size(); ++a) q.at(s, static_cast<ActionId>(a)) = v[a];
  }
}

}  // namespace detail

inline nlohmann::json model_to_json(const SeedRun& run) {
  const Learner& l = *run.learner;
  nlohmann::json j;
  j["seed"] = run.seed;
  j["frames"] = l.frames();
  j["cmax"] = l.tracker().current_max();
  if (const auto* tab = dynamic_cast<const TabularCountModel*>(&l.importance_model())) {
    std::vector<std::pair<std::string, nlohmann::json>> rows;
    for (const auto& [s, c] : tab->counts()) rows.emplace_back(s.label(), nlohmann::json{detail::obs_to_json(s), c});
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    nlohmann::json counts = nlohmann::json::array();
    for (auto& [_, r] : rows) counts.push_back(std::move(r));
    j["importance"] = {{"kind", "tabular"}, {"counts", counts}};
  } else if (const auto* pix = dynamic_cast<const FactoredPixelModel*>(&l.importance_model())) {
    nlohmann::json counts = nlohmann::json::array();
    const auto& raw = pix->raw_counts();
    for (std::size_t i = 0; i < raw.size(); ++i)
      if (raw[i]) counts.push_back({i, raw[i]});
    j["importance"] = {{"kind", "pixels"}, {"width", pix->width()}, {"height", pix->height()},
                       {"total", pix->total()}, {"smoothing", pix->smoothing()}, {"counts", counts}};
  } else {
    throw RunError("importance model cannot be persisted");
  }
  j["q_a"] = detail::qtable_to_json(l.q_a());
  j["q_b"] = detail::qtable_to_json(l.q_b());
  return j;
}

/// Rebuilds a learner (tables, importance model, tracker) from a persisted
/// model. Replay memory and the exploration model start empty.
inline std::unique_ptr<Learner> learner_from_json(const ExperimentConfig& cfg, const nlohmann::json& j) {
  try {
    const std::uint64_t seed = j.at("seed").get<std::uint64_t>();
    auto learner = make_learner(cfg, seed);
    learner->restore_tracker(CMaxTracker(j.at("cmax").get<double>()));
    const auto& imp = j.at("importance");
    const std::string kind = imp.at("kind").get<std::string>();
    if (kind == "tabular") {
      auto* tab = dynamic_cast<TabularCountModel*>(&learner->importance_model());
      if (!tab) throw RunError("model file holds tabular counts but the config uses pixels");
      for (const auto& row : imp.at("counts"))
        tab->set_count(detail::obs_from_json(row.at(0)), row.at(1).get<std::uint64_t>());
    } else if (kind == "pixels") {
      auto* pix = dynamic_cast<FactoredPixelModel*>(&learner->importance_model());
      if (!pix) throw RunError("model file holds pixel counts but the config is discrete");
      const int w = imp.at("width").get<int>();
      const int h = imp.at("height").get<int>();
      if (w > 0 && h > 0) {
        std::vector<std::uint32_t> counts(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
                                          FactoredPixelModel::kAlphabet);
        for (const auto& row : imp.at("counts")) {
          const auto i = row.at(0).get<std::size_t>();
          if (i >= counts.size()) throw RunError("pixel count index out of range");
          counts[i] = row.at(1).get<std::uint32_t>();
        }
        pix->restore(w, h, imp.at("total").get<std::uint64_t>(), std::move(counts));
      }
    } else {
      throw RunError("unknown importance model kind '" + kind + "'");
    }
    detail::qtable_from_json(j.at("q_a"), learner->q_a());
    detail::qtable_from_json(j.at("q_b"), learner->q_b());
    return learner;
  } catch (const nlohmann::json::exception& e) {
    throw RunError(std::string("malformed model file: ") + e.what());
  }
}

// Runner ------------------------------------------------------------------------------

struct RunOutput {
  std::filesystem::path dir;
  std::vector<SeedRun> runs;
  std::vector<SummaryRow> summary;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw RunError("cannot write " + p.string());
  f << content;
  if (!f) throw RunError("failed writing " + p.string());
}

/// Runs every seed (up to `jobs` at a time) and writes seed_<s>.csv,
/// model_seed_<s>.json, summary.csv and config.txt into a fresh directory.
inline RunOutput run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                std::size_t jobs = 1) {
  cfg.validate();
  namespace fs = std::filesystem;
  if (out_dir.empty()) throw ConfigError("out", "no output directory given");
  if (fs::exists(out_dir) && !(fs::is_directory(out_dir) && fs::is_empty(out_dir)))
    throw RunError("output directory " + out_dir.string() + " already exists and is not empty");
  fs::create_directories(out_dir);

  RunOutput out;
  out.dir = out_dir;
  out.runs.resize(cfg.seeds.size());
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      try {
        out.runs[i] = run_seed(cfg, cfg.seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, cfg.seeds.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<std::vector<double>> per_seed;
  for (const auto& r : out.runs) {
    write_file(out_dir / ("seed_" + std::to_string(r.seed) + ".csv"), episodes_csv(r.episodes));
    write_file(out_dir / ("model_seed_" + std::to_string(r.seed) + ".json"), model_to_json(r).dump() + "\n");
    per_seed.push_back(checkpoint_scores(r.episodes, cfg.max_frames, cfg.eval_every));
  }
  out.summary = summarize(per_seed, cfg.eval_every);
  write_file(out_dir / "summary.csv", summary_csv(out.summary));
  write_file(out_dir / "config.txt", to_text(cfg));
  return out;
}

}  // namespace mol::harness
