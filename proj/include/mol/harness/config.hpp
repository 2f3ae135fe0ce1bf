#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mol/agent.hpp"
#include "mol/envs.hpp"
#include "mol/sampling.hpp"
#include "mol/shaping.hpp"

namespace mol::harness {

/// Bad or inconsistent configuration; field() names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class EnvKind { Fig1, GridWorld, KeyDoor };

struct EnvConfig {
  EnvKind kind = EnvKind::KeyDoor;
  /// The grid part is used for every kind; key, door and hazards only for
  /// key-door worlds.
  KeyDoorSpec keydoor = default_keydoor_spec();
  bool pixels = false;
  PixelRenderSpec render;
};

struct ExperimentConfig {
  EnvConfig env;
  AgentConfig agent;
  ShapingConfig shaping;
  DissimilarConfig sampling;
  double smoothing = 0.1;  ///< pixel density model
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::uint64_t max_frames = 50'000;
  std::uint64_t eval_every = 1'000;
  std::string out;
  bool record_wall_time = false;

  void validate() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(key, "expected a real number, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError(key, "expected a nonnegative integer, got '" + v + "'");
  return out;
}

inline int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

inline Cell parse_cell(const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  if (parts.size() != 2) throw ConfigError(key, "expected a cell 'x,y', got '" + v + "'");
  return {parse_int(key, parts[0]), parse_int(key, parts[1])};
}

inline std::vector<Cell> parse_cells(const std::string& key, const std::string& v) {
  std::vector<Cell> out;
  if (v.empty()) return out;
  for (const auto& c : split(v, ';'))
    if (!c.empty()) out.push_back(parse_cell(key, c));
  return out;
}

inline std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_cell(Cell c) { return std::to_string(c.x) + "," + std::to_string(c.y); }

inline std::string fmt_cells(const std::vector<Cell>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? ";" : "") + fmt_cell(cells[i]);
  return s;
}

inline AgentMode parse_mode(const std::string& v) {
  if (v == "baseline") return AgentMode::Baseline;
  if (v == "psc") return AgentMode::Psc;
  if (v == "mol") return AgentMode::Mol;
  if (v == "psc+mol") return AgentMode::PscMol;
  throw ConfigError("mode", "expected baseline, psc, mol or psc+mol, got '" + v + "'");
}

inline std::string env_name(EnvKind k) {
  switch (k) {
    case EnvKind::Fig1: return "fig1";
    case EnvKind::GridWorld: return "gridworld";
    case EnvKind::KeyDoor: return "keydoor";
  }
  return "?";
}

}  // namespace detail

/// Smallest pixel difference that still tells two agent positions apart:
/// one agent cell painted over floor.
inline double default_min_pixel_diff(const PixelRenderSpec& r) {
  return static_cast<double>(r.cell_size) * r.cell_size * std::abs(int{r.agent} - int{r.floor});
}

inline void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (seeds[i] == seeds[j]) throw ConfigError("seeds", "seed " + std::to_string(seeds[i]) + " listed twice");
  if (max_frames == 0) throw ConfigError("max_frames", "must be positive");
  if (eval_every == 0) throw ConfigError("eval_every", "must be positive");
  if (max_frames < eval_every) throw ConfigError("eval_every", "must not exceed max_frames");
  if (!(smoothing > 0.0)) throw ConfigError("smoothing", "must be positive");
  auto wrap = [](const char* field, auto&& f) {
    try {
      f();
    } catch (const ContractViolation& e) {
      throw ConfigError(field, e.what());
    }
  };
  wrap("agent", [&] { agent.validate(); });
  wrap("shaping", [&] { shaping.validate(); });
  wrap("sampling", [&] { sampling.validate(); });
  wrap("env", [&] {
    if (env.pixels) env.render.validate();
    if (env.kind == EnvKind::KeyDoor)
      GridWorld{env.keydoor};
    else
      GridWorld{env.keydoor.grid};
  });
}

/// Parses the line-oriented key=value format. '#' starts a comment; blank
/// lines are ignored; every key may appear once.
inline ExperimentConfig parse_config(const std::string& text) {
  using namespace detail;
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second) throw ConfigError(key, "given more than once");
  }

  ExperimentConfig cfg;
  // The environment kind picks the defaults the other keys then override.
  if (auto it = kv.find("env"); it != kv.end()) {
    if (it->second == "keydoor") {
      cfg.env.kind = EnvKind::KeyDoor;
    } else if (it->second == "fig1" || it->second == "gridworld") {
      cfg.env.kind = it->second == "fig1" ? EnvKind::Fig1 : EnvKind::GridWorld;
      cfg.env.keydoor = KeyDoorSpec{};
      cfg.env.keydoor.grid = make_fig1_gridworld().spec();
    } else {
      throw ConfigError("env", "expected fig1, gridworld or keydoor, got '" + it->second + "'");
    }
    kv.erase(it);
  }
  bool min_diff_given = false;
  auto& g = cfg.env.keydoor.grid;
  auto& kd = cfg.env.keydoor;
  auto& a = cfg.agent;
  auto& sh = cfg.shaping;
  auto& sm = cfg.sampling;

  for (const auto& [key, v] : kv) {
    if (key == "width") g.width = parse_int(key, v);
    else if (key == "height") g.height = parse_int(key, v);
    else if (key == "walls") g.walls = parse_cells(key, v);
    else if (key == "start") g.start = parse_cell(key, v);
    else if (key == "goal") g.goal = parse_cell(key, v);
    else if (key == "key") kd.key_cell = parse_cell(key, v);
    else if (key == "door") kd.door_cell = parse_cell(key, v);
    else if (key == "hazards") kd.hazards = parse_cells(key, v);
    else if (key == "step_reward") g.step_reward = parse_real(key, v);
    else if (key == "goal_reward") g.goal_reward = parse_real(key, v);
    else if (key == "key_reward") kd.key_reward = parse_real(key, v);
    else if (key == "door_reward") kd.door_reward = parse_real(key, v);
    else if (key == "slip_prob") g.slip_prob = parse_real(key, v);
    else if (key == "max_steps") g.max_steps = parse_int(key, v);
    else if (key == "observation") {
      if (v != "discrete" && v != "pixels") throw ConfigError(key, "expected discrete or pixels, got '" + v + "'");
      cfg.env.pixels = v == "pixels";
    } else if (key == "cell_size") cfg.env.render.cell_size = parse_int(key, v);
    else if (key == "mode") a.mode = parse_mode(v);
    else if (key == "eta") a.eta = parse_real(key, v);
    else if (key == "epsilon_start") a.epsilon_start = parse_real(key, v);
    else if (key == "epsilon_end") a.epsilon_end = parse_real(key, v);
    else if (key == "epsilon_decay") a.epsilon_decay = parse_uint(key, v);
    else if (key == "learning_rate") a.learning_rate = parse_real(key, v);
    else if (key == "gamma") a.gamma = parse_real(key, v);
    else if (key == "replay_capacity") a.replay_capacity = parse_uint(key, v);
    else if (key == "batch_size") a.batch_size = parse_uint(key, v);
    else if (key == "updates_per_step") a.updates_per_step = parse_uint(key, v);
    else if (key == "alpha") sh.alpha = parse_real(key, v);
    else if (key == "r_max") sh.r_max = parse_real(key, v);
    else if (key == "beta") sh.beta = parse_real(key, v);
    else if (key == "epsilon_cmax") sh.epsilon_cmax = parse_real(key, v);
    else if (key == "history") sm.history = parse_uint(key, v);
    else if (key == "min_pixel_diff") {
      sm.min_pixel_diff = parse_real(key, v);
      min_diff_given = true;
    } else if (key == "metric") {
      if (v != "l1" && v != "l2") throw ConfigError(key, "expected l1 or l2, got '" + v + "'");
      sm.metric = v == "l1" ? Metric::L1 : Metric::L2;
    } else if (key == "smoothing") cfg.smoothing = parse_real(key, v);
    else if (key == "seeds") {
      cfg.seeds.clear();
      for (const auto& s : split(v, ','))
        if (!s.empty()) cfg.seeds.push_back(parse_uint(key, s));
    } else if (key == "max_frames") cfg.max_frames = parse_uint(key, v);
    else if (key == "eval_every") cfg.eval_every = parse_uint(key, v);
    else if (key == "out") cfg.out = v;
    else if (key == "record_wall_time") cfg.record_wall_time = parse_bool(key, v);
    else throw ConfigError(key, "unknown key");
  }
  if (cfg.env.kind == EnvKind::KeyDoor) {
    if (kv.count("goal")) throw ConfigError("goal", "key-door worlds end at 'door'");
    g.goal = kd.door_cell;
  }
  if (cfg.env.pixels && !min_diff_given) sm.min_pixel_diff = default_min_pixel_diff(cfg.env.render);
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("", "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

/// Every key, in a fixed order; parse_config(to_text(c)) reproduces c.
inline std::string to_text(const ExperimentConfig& c) {
  using namespace detail;
  const auto& g = c.env.keydoor.grid;
  const auto& kd = c.env.keydoor;
  std::ostringstream o;
  o << "env=" << env_name(c.env.kind) << "\n";
  o << "width=" << g.width << "\nheight=" << g.height << "\n";
  o << "walls=" << fmt_cells(g.walls) << "\n";
  o << "start=" << fmt_cell(g.start) << "\n";
  if (c.env.kind == EnvKind::KeyDoor) {
    o << "key=" << fmt_cell(kd.key_cell) << "\ndoor=" << fmt_cell(kd.door_cell) << "\n";
    o << "hazards=" << fmt_cells(kd.hazards) << "\n";
    o << "key_reward=" << fmt_real(kd.key_reward) << "\ndoor_reward=" << fmt_real(kd.door_reward) << "\n";
  } else {
    o << "goal=" << fmt_cell(g.goal) << "\ngoal_reward=" << fmt_real(g.goal_reward) << "\n";
  }
  o << "step_reward=" << fmt_real(g.step_reward) << "\n";
  o << "slip_prob=" << fmt_real(g.slip_prob) << "\nmax_steps=" << g.max_steps << "\n";
  o << "observation=" << (c.env.pixels ? "pixels" : "discrete") << "\ncell_size=" << c.env.render.cell_size << "\n";
  o << "mode=" << to_string(c.agent.mode) << "\neta=" << fmt_real(c.agent.eta) << "\n";
  o << "epsilon_start=" << fmt_real(c.agent.epsilon_start) << "\nepsilon_end=" << fmt_real(c.agent.epsilon_end)
    << "\nepsilon_decay=" << c.agent.epsilon_decay << "\n";
  o << "learning_rate=" << fmt_real(c.agent.learning_rate) << "\ngamma=" << fmt_real(c.agent.gamma) << "\n";
  o << "replay_capacity=" << c.agent.replay_capacity << "\nbatch_size=" << c.agent.batch_size
    << "\nupdates_per_step=" << c.agent.updates_per_step << "\n";
  o << "alpha=" << fmt_real(c.shaping.alpha) << "\nr_max=" << fmt_real(c.shaping.r_max)
    << "\nbeta=" << fmt_real(c.shaping.beta) << "\nepsilon_cmax=" << fmt_real(c.shaping.epsilon_cmax) << "\n";
  o << "history=" << c.sampling.history << "\nmin_pixel_diff=" << fmt_real(c.sampling.min_pixel_diff)
    << "\nmetric=" << (c.sampling.metric == Metric::L1 ? "l1" : "l2") << "\n";
  o << "smoothing=" << fmt_real(c.smoothing) << "\n";
  o << "seeds=";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) o << (i ? "," : "") << c.seeds[i];
  o << "\nmax_frames=" << c.max_frames << "\neval_every=" << c.eval_every << "\n";
  if (!c.out.empty()) o << "out=" << c.out << "\n";
  o << "record_wall_time=" << (c.record_wall_time ? "true" : "false") << "\n";
  return o.str();
}

}  // namespace mol::harness
