#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mol {

// Errors ------------------------------------------------------------------

/// A caller broke an operation's precondition (stepping a finished episode,
/// comparing observations of different shapes, ...).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

/// A density model produced rho' <= rho where the pseudo-count is singular.
struct DegenerateModelError : std::domain_error {
  using std::domain_error::domain_error;
};

/// An enumeration or buffer exceeded its configured budget.
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using ActionId = std::uint32_t;

// Observation -------------------------------------------------------------

/// Environment state rendering: a discrete state id or a small grid of
/// 8-bit intensities. Immutable after construction; copies share the pixel
/// buffer. Equality is structural.
class Observation {
 public:
  enum class Kind : std::uint8_t { Discrete, Pixels };

  Observation() : Observation(discrete(0)) {}

  static Observation discrete(std::uint64_t id) {
    Observation o(Kind::Discrete);
    o.id_ = id;
    o.hash_ = mix(id ^ 0x9e3779b97f4a7c15ULL);
    return o;
  }

  static Observation pixels(int width, int height, std::vector<std::uint8_t> values) {
    if (width <= 0 || height <= 0)
      throw ContractViolation("pixel observation needs positive dimensions");
    if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
      throw ContractViolation("pixel grid length must equal width * height");
    Observation o(Kind::Pixels);
    o.width_ = width;
    o.height_ = height;
    // FNV-1a over the buffer, then dimensions.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto v : values) {
      h ^= v;
      h *= 0x100000001b3ULL;
    }
    h ^= mix((static_cast<std::uint64_t>(width) << 32) | static_cast<std::uint32_t>(height));
    o.hash_ = mix(h);
    o.values_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(values));
    return o;
  }

  Kind kind() const { return kind_; }
  bool is_discrete() const { return kind_ == Kind::Discrete; }
  bool is_pixels() const { return kind_ == Kind::Pixels; }

  std::uint64_t id() const {
    if (!is_discrete()) throw ContractViolation("id() on a pixel observation");
    return id_;
  }
  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const std::uint8_t> values() const {
    if (!values_) return {};
    return {values_->data(), values_->size()};
  }

  /// Stable across runs and platforms (used for report labels).
  std::uint64_t hash() const { return hash_; }

  /// Same variant and, for pixels, same dimensions.
  bool same_shape(const Observation& other) const {
    return kind_ == other.kind_ && width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Observation& a, const Observation& b) {
    if (a.kind_ != b.kind_ || a.hash_ != b.hash_) return false;
    if (a.is_discrete()) return a.id_ == b.id_;
    if (a.width_ != b.width_ || a.height_ != b.height_) return false;
    return a.values_ == b.values_ || *a.values_ == *b.values_;
  }

  std::string label() const {
    if (is_discrete()) return "s" + std::to_string(id_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame:%016llx", static_cast<unsigned long long>(hash_));
    return buf;
  }

 private:
  explicit Observation(Kind k) : kind_(k) {}

  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  Kind kind_;
  std::uint64_t id_ = 0;
  int width_ = 0;
  int height_ = 0;
  std::shared_ptr<const std::vector<std::uint8_t>> values_;
  std::uint64_t hash_ = 0;
};

struct ObservationHash {
  std::size_t operator()(const Observation& o) const noexcept {
    return static_cast<std::size_t>(o.hash());
  }
};

// Transitions and trajectories ---------------------------------------------

struct Transition {
  Observation state;
  ActionId action = 0;
  Observation next_state;
  double reward = 0.0;
  bool terminal = false;
};

/// Ordered transitions where each next_state is the following state.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<Transition> transitions) : transitions_(std::move(transitions)) {
    for (std::size_t i = 0; i < transitions_.size(); ++i) {
      if (!std::isfinite(transitions_[i].reward))
        throw ContractViolation("transition reward must be finite");
      if (i + 1 < transitions_.size() && !(transitions_[i].next_state == transitions_[i + 1].state))
        throw ContractViolation("trajectory is not contiguous at transition " + std::to_string(i));
    }
  }

  const std::vector<Transition>& transitions() const { return transitions_; }
  std::size_t size() const { return transitions_.size(); }
  bool empty() const { return transitions_.empty(); }
  const Transition& operator[](std::size_t i) const { return transitions_[i]; }

  /// s_0, s_1, ..., s_n (size() + 1 states; empty for an empty trajectory).
  std::vector<Observation> states() const {
    std::vector<Observation> out;
    if (transitions_.empty()) return out;
    out.reserve(transitions_.size() + 1);
    out.push_back(transitions_.front().state);
    for (const auto& t : transitions_) out.push_back(t.next_state);
    return out;
  }

 private:
  std::vector<Transition> transitions_;
};

/// A trajectory whose last transition is its only positive-reward one.
class SuccessfulTrajectory {
 public:
  explicit SuccessfulTrajectory(Trajectory t) : trajectory_(std::move(t)) {
    const auto& ts = trajectory_.transitions();
    if (ts.empty()) throw ContractViolation("successful trajectory cannot be empty");
    for (std::size_t i = 0; i + 1 < ts.size(); ++i)
      if (ts[i].reward > 0.0)
        throw ContractViolation("successful trajectory has a positive reward before its end");
    if (!(ts.back().reward > 0.0))
      throw ContractViolation("successful trajectory must end with a positive reward");
  }

  const Trajectory& trajectory() const { return trajectory_; }
  std::size_t size() const { return trajectory_.size(); }
  std::vector<Observation> states() const { return trajectory_.states(); }
  const Observation& start() const { return trajectory_.transitions().front().state; }
  const Observation& goal() const { return trajectory_.transitions().back().next_state; }

 private:
  Trajectory trajectory_;
};

/// Splits an episode after every positive-reward transition. The trailing
/// segment without a positive reward is dropped.
inline std::vector<SuccessfulTrajectory> split_successful(const Trajectory& episode) {
  std::vector<SuccessfulTrajectory> out;
  std::vector<Transition> segment;
  for (const auto& t : episode.transitions()) {
    segment.push_back(t);
    if (t.reward > 0.0) {
      out.emplace_back(Trajectory(std::move(segment)));
      segment.clear();
    }
  }
  return out;
}

// Finite MDP ----------------------------------------------------------------

/// Enumerable MDP used by the importance oracles. States and actions are
/// dense indices; tables are indexed [s][a][s'].
struct Mdp {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<std::vector<std::vector<double>>> transition_prob;
  std::vector<std::vector<std::vector<double>>> reward;
  std::vector<double> initial_dist;
  double discount = 0.99;
  /// States where an episode ends regardless of reward. May be empty.
  std::vector<bool> terminal;

  bool is_terminal(std::size_t s) const { return !terminal.empty() && terminal[s]; }

  void validate() const {
    constexpr double tol = 1e-9;
    if (num_states == 0 || num_actions == 0) throw ContractViolation("mdp needs states and actions");
    if (transition_prob.size() != num_states || reward.size() != num_states ||
        initial_dist.size() != num_states)
      throw ContractViolation("mdp table sizes disagree with num_states");
    if (!terminal.empty() && terminal.size() != num_states)
      throw ContractViolation("mdp terminal flags size mismatch");
    if (!(discount >= 0.0 && discount < 1.0)) throw ContractViolation("mdp discount must be in [0,1)");
    for (std::size_t s = 0; s < num_states; ++s) {
      if (transition_prob[s].size() != num_actions || reward[s].size() != num_actions)
        throw ContractViolation("mdp action tables size mismatch");
      for (std::size_t a = 0; a < num_actions; ++a) {
        const auto& row = transition_prob[s][a];
        if (row.size() != num_states || reward[s][a].size() != num_states)
          throw ContractViolation("mdp row size mismatch");
        double sum = 0.0;
        for (double p : row) {
          if (p < 0.0) throw ContractViolation("negative transition probability");
          sum += p;
        }
        if (std::abs(sum - 1.0) > tol)
          throw ContractViolation("transition row (" + std::to_string(s) + "," + std::to_string(a) +
                                  ") does not sum to 1");
      }
    }
    double mass = 0.0;
    for (double p : initial_dist) mass += p;
    if (std::abs(mass - 1.0) > tol) throw ContractViolation("initial distribution does not sum to 1");
  }
};

// Environment contract --------------------------------------------------------

class Environment {
 public:
  virtual ~Environment() = default;

  /// Starts a new episode; all randomness inside the episode derives from seed.
  virtual Observation reset(std::uint64_t seed) = 0;
  /// Throws ContractViolation when the episode is over or action is out of range.
  virtual Transition step(ActionId action) = 0;
  virtual Observation current_observation() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual bool is_terminal() const = 0;
};

}  // namespace mol
