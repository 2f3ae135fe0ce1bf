#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mol/core.hpp"

namespace mol {

struct Cell {
  int x = 0;
  int y = 0;
  auto operator<=>(const Cell&) const = default;
};

/// Grid actions. Up decreases y (row-major layout, row 0 on top).
enum GridAction : ActionId { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr std::size_t kGridActionCount = 4;

struct GridWorldSpec {
  int width = 3;
  int height = 3;
  std::vector<Cell> walls;
  Cell start{0, 0};
  Cell goal{2, 2};
  double step_reward = 0.0;
  double goal_reward = 1.0;
  /// Probability that a uniformly random action replaces the chosen one.
  double slip_prob = 0.0;
  int max_steps = 100;
};

/// Grid world where the door (the goal cell) pays only after the key was
/// picked up. Hazards end the episode with nothing.
struct KeyDoorSpec {
  GridWorldSpec grid;
  Cell key_cell{0, 0};
  Cell door_cell{0, 0};
  double key_reward = 1.0;
  double door_reward = 1.0;
  std::vector<Cell> hazards;
};

struct PixelRenderSpec {
  int cell_size = 4;
  std::uint8_t floor = 0;
  std::uint8_t wall = 64;
  std::uint8_t agent = 255;
  std::uint8_t key = 200;
  std::uint8_t door = 150;
  std::uint8_t goal = 100;
  std::uint8_t hazard = 30;

  void validate() const {
    if (cell_size <= 0) throw ContractViolation("cell_size must be positive");
    const std::array<std::uint8_t, 7> all{floor, wall, agent, key, door, goal, hazard};
    std::set<std::uint8_t> distinct(all.begin(), all.end());
    if (distinct.size() != all.size())
      throw ContractViolation("entity intensities must be pairwise distinct");
  }
};

/// Grid world with optional key/door mechanics, slip noise, an episode cap
/// and an optional pixel observation mode.
class GridWorld final : public Environment {
 public:
  explicit GridWorld(GridWorldSpec spec) : spec_(std::move(spec)) {
    validate_grid();
    if (!reachable(spec_.start, spec_.goal, {}))
      throw ContractViolation("goal is unreachable from start");
    reset(0);
  }

  explicit GridWorld(KeyDoorSpec spec) : spec_(spec.grid), keydoor_(std::move(spec)) {
    validate_grid();
    const auto& kd = *keydoor_;
    if (!(spec_.goal == kd.door_cell)) throw ContractViolation("key-door grid goal must be the door cell");
    if (!in_bounds(kd.key_cell) || is_wall(kd.key_cell)) throw ContractViolation("key cell invalid");
    if (kd.key_cell == kd.door_cell || kd.key_cell == spec_.start)
      throw ContractViolation("key must differ from start and door");
    for (const auto& h : kd.hazards) {
      if (!in_bounds(h) || is_wall(h)) throw ContractViolation("hazard cell invalid");
      if (h == spec_.start || h == kd.key_cell || h == kd.door_cell)
        throw ContractViolation("hazard overlaps start, key or door");
    }
    if (!reachable(spec_.start, kd.key_cell, kd.hazards) || !reachable(kd.key_cell, kd.door_cell, kd.hazards))
      throw ContractViolation("no hazard-free path start -> key -> door");
    reset(0);
  }

  // Environment --------------------------------------------------------------

  Observation reset(std::uint64_t seed) override {
    rng_.seed(seed);
    pos_ = spec_.start;
    has_key_ = false;
    steps_ = 0;
    terminal_ = false;
    return current_observation();
  }

  Transition step(ActionId action) override {
    if (terminal_) throw ContractViolation("step() on a terminal environment");
    if (action >= kGridActionCount) throw ContractViolation("action out of range");
    Transition t;
    t.state = current_observation();
    t.action = action;

    ActionId effective = action;
    if (spec_.slip_prob > 0.0) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const double draw = u(rng_);
      std::uniform_int_distribution<ActionId> pick(0, kGridActionCount - 1);
      const ActionId random_action = pick(rng_);
      if (draw < spec_.slip_prob) effective = random_action;
    }
    static constexpr int dx[] = {0, 0, -1, 1};
    static constexpr int dy[] = {-1, 1, 0, 0};
    const Cell target{pos_.x + dx[effective], pos_.y + dy[effective]};
    if (in_bounds(target) && !is_wall(target)) pos_ = target;

    double reward = spec_.step_reward;
    if (keydoor_) {
      const auto& kd = *keydoor_;
      if (pos_ == kd.key_cell && !has_key_) {
        has_key_ = true;
        reward += kd.key_reward;
      }
      if (pos_ == kd.door_cell && has_key_) {
        reward += kd.door_reward;
        terminal_ = true;
      }
      if (std::find(kd.hazards.begin(), kd.hazards.end(), pos_) != kd.hazards.end()) terminal_ = true;
    } else if (pos_ == spec_.goal) {
      reward += spec_.goal_reward;
      terminal_ = true;
    }
    ++steps_;
    if (steps_ >= spec_.max_steps) terminal_ = true;

    t.next_state = current_observation();
    t.reward = reward;
    t.terminal = terminal_;
    return t;
  }

  Observation current_observation() const override {
    if (pixel_mode_) return render(*pixel_mode_);
    return Observation::discrete(state_id());
  }

  std::size_t action_count() const override { return kGridActionCount; }
  bool is_terminal() const override { return terminal_; }

  // Grid specifics -------------------------------------------------------------

  /// Switches observations to rendered pixel grids (nullopt: discrete ids).
  void set_pixel_mode(std::optional<PixelRenderSpec> spec) {
    if (spec) spec->validate();
    pixel_mode_ = std::move(spec);
  }

  const GridWorldSpec& spec() const { return spec_; }
  const std::optional<KeyDoorSpec>& keydoor() const { return keydoor_; }
  Cell position() const { return pos_; }
  bool has_key() const { return has_key_; }
  int steps() const { return steps_; }

  std::size_t cell_count() const { return static_cast<std::size_t>(spec_.width * spec_.height); }
  std::size_t num_states() const { return cell_count() * (keydoor_ ? 2 : 1); }

  std::uint64_t state_id() const { return state_id_of(pos_, has_key_); }
  std::uint64_t state_id_of(Cell c, bool key) const {
    return static_cast<std::uint64_t>(c.y * spec_.width + c.x) + (key ? cell_count() : 0);
  }

  /// "(x,y)" or "(x,y) key" for a discrete state id of this world.
  std::string describe(std::uint64_t id) const {
    const bool key = keydoor_ && id >= cell_count();
    const auto cell = static_cast<int>(id % cell_count());
    std::string s = "(" + std::to_string(cell % spec_.width) + "," + std::to_string(cell / spec_.width) + ")";
    if (key) s += " key";
    return s;
  }

  Observation render(const PixelRenderSpec& r) const {
    r.validate();
    const int w = spec_.width * r.cell_size;
    const int h = spec_.height * r.cell_size;
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), r.floor);
    auto paint = [&](Cell c, std::uint8_t v) {
      for (int yy = 0; yy < r.cell_size; ++yy)
        for (int xx = 0; xx < r.cell_size; ++xx)
          px[static_cast<std::size_t>((c.y * r.cell_size + yy) * w + c.x * r.cell_size + xx)] = v;
    };
    for (const auto& c : spec_.walls) paint(c, r.wall);
    if (keydoor_) {
      for (const auto& c : keydoor_->hazards) paint(c, r.hazard);
      paint(keydoor_->door_cell, r.door);
      if (!has_key_) paint(keydoor_->key_cell, r.key);
    } else {
      paint(spec_.goal, r.goal);
    }
    paint(pos_, r.agent);
    return Observation::pixels(w, h, std::move(px));
  }

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < spec_.width && c.y < spec_.height; }
  bool is_wall(Cell c) const { return std::find(spec_.walls.begin(), spec_.walls.end(), c) != spec_.walls.end(); }

 private:
  void validate_grid() const {
    if (spec_.width <= 0 || spec_.height <= 0) throw ContractViolation("grid dimensions must be positive");
    if (spec_.max_steps <= 0) throw ContractViolation("max_steps must be positive");
    if (!(spec_.slip_prob >= 0.0 && spec_.slip_prob < 1.0)) throw ContractViolation("slip_prob must be in [0,1)");
    for (const auto& c : spec_.walls)
      if (!in_bounds(c)) throw ContractViolation("wall outside the grid");
    if (!in_bounds(spec_.start) || !in_bounds(spec_.goal)) throw ContractViolation("start/goal outside the grid");
    if (spec_.start == spec_.goal) throw ContractViolation("start must differ from goal");
    if (is_wall(spec_.start) || is_wall(spec_.goal)) throw ContractViolation("start/goal on a wall");
  }

  bool reachable(Cell from, Cell to, const std::vector<Cell>& blocked) const {
    std::vector<char> seen(cell_count(), 0);
    std::queue<Cell> q;
    q.push(from);
    seen[static_cast<std::size_t>(from.y * spec_.width + from.x)] = 1;
    while (!q.empty()) {
      const Cell c = q.front();
      q.pop();
      if (c == to) return true;
      for (const Cell n : {Cell{c.x + 1, c.y}, Cell{c.x - 1, c.y}, Cell{c.x, c.y + 1}, Cell{c.x, c.y - 1}}) {
        if (!in_bounds(n) || is_wall(n)) continue;
        if (std::find(blocked.begin(), blocked.end(), n) != blocked.end()) continue;
        auto& s = seen[static_cast<std::size_t>(n.y * spec_.width + n.x)];
        if (s) continue;
        s = 1;
        q.push(n);
      }
    }
    return false;
  }

  GridWorldSpec spec_;
  std::optional<KeyDoorSpec> keydoor_;
  std::optional<PixelRenderSpec> pixel_mode_;
  std::mt19937_64 rng_;
  Cell pos_{};
  bool has_key_ = false;
  int steps_ = 0;
  bool terminal_ = false;
};

/// 3x3 deterministic world, s_0 top-left start, s_8 bottom-right goal.
inline GridWorld make_fig1_gridworld() {
  GridWorldSpec s;
  s.width = 3;
  s.height = 3;
  s.start = {0, 0};
  s.goal = {2, 2};
  s.goal_reward = 1.0;
  s.max_steps = 100;
  return GridWorld(s);
}

inline GridWorld make_keydoor(const KeyDoorSpec& spec) { return GridWorld(spec); }

/// Default 10x10 key-door layout. The key sits in the bottom-right corner
/// behind a few wall runs; the door is back at the bottom-left.
///
///   S . . . # . . . . .
///   . . . . # . . . . .
///   . . . . # . . # . .
///   . . . . # . . # . .
///   . . . . . . . # . .
///   # # # # . # # # . .
///   . . . . . . . # . .
///   . # # # # # # # . .
///   . . . . . . . . . K
///   D . . . . . . . . .
inline KeyDoorSpec default_keydoor_spec() {
  static constexpr const char* kRows[] = {
      "S...#.....", "....#.....", "....#..#..", "....#..#..", ".......#..",
      "####.###..", ".......#..", ".#######..", ".........K", "D.........",
  };
  KeyDoorSpec kd;
  kd.grid.width = 10;
  kd.grid.height = 10;
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) switch (kRows[y][x]) {
        case '#': kd.grid.walls.push_back({x, y}); break;
        case 'S': kd.grid.start = {x, y}; break;
        case 'K': kd.key_cell = {x, y}; break;
        case 'D': kd.door_cell = {x, y}; break;
        default: break;
      }
  kd.grid.goal = kd.door_cell;
  kd.key_reward = 1.0;
  kd.door_reward = 3.0;
  kd.grid.slip_prob = 0.1;
  kd.grid.max_steps = 200;
  return kd;
}

inline Observation render_pixels(const GridWorld& env, const PixelRenderSpec& spec) { return env.render(spec); }

/// Edges of the fixed nine-state branching MDP: s0->s1, s1->{s2,s3,s4},
/// s2->s5, s3->s5, s4->s6, s5->s7, s6->s7, s7->s8.
inline std::vector<std::pair<std::size_t, std::size_t>> fig2_edges() {
  return {{0, 1}, {1, 2}, {1, 3}, {1, 4}, {2, 5}, {3, 5}, {4, 6}, {5, 7}, {6, 7}, {7, 8}};
}

/// Nine-state MDP over fig2_edges(). Three deterministic actions: action k
/// follows the k-th outgoing edge, and an action without an edge leaves the
/// state unchanged. s8 is the absorbing goal; entering it pays 1.
inline Mdp make_fig2_mdp() {
  constexpr std::size_t n = 9, na = 3;
  Mdp m;
  m.num_states = n;
  m.num_actions = na;
  m.transition_prob.assign(n, std::vector<std::vector<double>>(na, std::vector<double>(n, 0.0)));
  m.reward.assign(n, std::vector<std::vector<double>>(na, std::vector<double>(n, 0.0)));
  std::vector<std::vector<std::size_t>> succ(n);
  for (auto [a, b] : fig2_edges()) succ[a].push_back(b);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t next = a < succ[s].size() ? succ[s][a] : s;
      m.transition_prob[s][a][next] = 1.0;
      if (next == 8 && s != 8) m.reward[s][a][next] = 1.0;
    }
  m.initial_dist.assign(n, 0.0);
  m.initial_dist[0] = 1.0;
  m.discount = 0.99;
  m.terminal.assign(n, false);
  m.terminal[8] = true;
  m.validate();
  return m;
}

}  // namespace mol
