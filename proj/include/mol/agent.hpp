#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mol/core.hpp"
#include "mol/density.hpp"
#include "mol/sampling.hpp"
#include "mol/shaping.hpp"

namespace mol {

enum class AgentMode { Baseline, Psc, Mol, PscMol };

inline bool uses_psc(AgentMode m) { return m == AgentMode::Psc || m == AgentMode::PscMol; }
inline bool uses_mol(AgentMode m) { return m == AgentMode::Mol || m == AgentMode::PscMol; }

inline std::string to_string(AgentMode m) {
  switch (m) {
    case AgentMode::Baseline: return "baseline";
    case AgentMode::Psc: return "psc";
    case AgentMode::Mol: return "mol";
    case AgentMode::PscMol: return "psc+mol";
  }
  return "?";
}

struct AgentConfig {
  AgentMode mode = AgentMode::Baseline;
  /// Weight of the Monte-Carlo error in the mixed update.
  double eta = 0.1;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  /// Frames over which epsilon decays linearly.
  std::uint64_t epsilon_decay = 50'000;
  double learning_rate = 0.1;
  double gamma = 0.99;
  std::size_t replay_capacity = 50'000;
  std::size_t batch_size = 8;
  std::size_t updates_per_step = 1;

  double epsilon_at(std::uint64_t frames) const {
    if (epsilon_decay == 0 || frames >= epsilon_decay) return epsilon_end;
    const double frac = static_cast<double>(frames) / static_cast<double>(epsilon_decay);
    return epsilon_start + (epsilon_end - epsilon_start) * frac;
  }

  void validate() const {
    if (!(eta >= 0.0 && eta <= 1.0)) throw ContractViolation("eta must be in [0,1]");
    for (double e : {epsilon_start, epsilon_end})
      if (!(e >= 0.0 && e <= 1.0)) throw ContractViolation("epsilon must be in [0,1]");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ContractViolation("learning_rate must be in (0,1]");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractViolation("gamma must be in [0,1)");
    if (replay_capacity == 0) throw ContractViolation("replay_capacity must be positive");
    if (batch_size == 0) throw ContractViolation("batch_size must be positive");
  }
};

// Q-table ---------------------------------------------------------------------------

/// Tabular action values, default 0.
class QTable {
 public:
  QTable(std::size_t action_count, double learning_rate, double discount)
      : actions_(action_count), lr_(learning_rate), gamma_(discount), zeros_(action_count, 0.0) {
    if (action_count == 0) throw ContractViolation("QTable needs at least one action");
  }

  std::span<const double> values(const Observation& s) const {
    auto it = table_.find(s);
    return it == table_.end() ? std::span<const double>(zeros_) : std::span<const double>(it->second);
  }
  double value(const Observation& s, ActionId a) const { return values(s)[check(a)]; }

  double& at(const Observation& s, ActionId a) {
    auto [it, _] = table_.try_emplace(s, actions_, 0.0);
    return it->second[check(a)];
  }

  /// Lowest id among the maximal values.
  ActionId argmax(const Observation& s) const { return argmax_of(values(s)); }

  static ActionId argmax_of(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < v.size(); ++a)
      if (v[a] > v[best]) best = a;
    return static_cast<ActionId>(best);
  }

  std::size_t action_count() const { return actions_; }
  double learning_rate() const { return lr_; }
  double discount() const { return gamma_; }
  const std::unordered_map<Observation, std::vector<double>, ObservationHash>& entries() const { return table_; }

 private:
  std::size_t check(ActionId a) const {
    if (a >= actions_) throw ContractViolation("action out of range for Q-table");
    return a;
  }

  std::size_t actions_;
  double lr_;
  double gamma_;
  std::vector<double> zeros_;
  std::unordered_map<Observation, std::vector<double>, ObservationHash> table_;
};

/// r + gamma * q_b(s', argmax_a' q_a(s', a')); no bootstrap on terminal.
inline double double_q_target(const QTable& q_a, const QTable& q_b, const Transition& t) {
  if (t.terminal) return t.reward;
  return t.reward + q_a.discount() * q_b.value(t.next_state, q_a.argmax(t.next_state));
}

inline double discounted_return(std::span<const Transition> tail, double gamma) {
  double g = 0.0;
  for (std::size_t k = tail.size(); k-- > 0;) g = tail[k].reward + gamma * g;
  return g;
}

/// (1 - eta) * (double-Q target - Q) + eta * (mc_return - Q), Q = q_a(s, a).
inline double mixed_mc_error(const QTable& q_a, const QTable& q_b, const Transition& t, double mc_return,
                             double eta) {
  const double q = q_a.value(t.state, t.action);
  return (1.0 - eta) * (double_q_target(q_a, q_b, t) - q) + eta * (mc_return - q);
}

/// Applies the mixed update for the first transition of `tail` (which runs to
/// the episode end, rewards already shaped) to q_a. Returns the error; q_a
/// moved by learning_rate times it.
inline double mixed_mc_update(QTable& q_a, const QTable& q_b, std::span<const Transition> tail, double eta) {
  if (tail.empty()) throw ContractViolation("mixed_mc_update needs a nonempty tail");
  const double err = mixed_mc_error(q_a, q_b, tail.front(), discounted_return(tail, q_a.discount()), eta);
  q_a.at(tail.front().state, tail.front().action) += q_a.learning_rate() * err;
  return err;
}

inline ActionId epsilon_greedy_values(std::span<const double> values, double epsilon, std::mt19937_64& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractViolation("epsilon must be in [0,1]");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    return static_cast<ActionId>(pick(rng));
  }
  return QTable::argmax_of(values);
}

inline ActionId epsilon_greedy(const QTable& q, const Observation& s, double epsilon, std::mt19937_64& rng) {
  return epsilon_greedy_values(q.values(s), epsilon, rng);
}

/// Behaviour policy of a double-Q learner: epsilon-greedy on q_a + q_b.
inline ActionId epsilon_greedy(const QTable& q_a, const QTable& q_b, const Observation& s, double epsilon,
                               std::mt19937_64& rng) {
  const auto a = q_a.values(s);
  const auto b = q_b.values(s);
  std::vector<double> sum(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) sum[i] = a[i] + b[i];
  return epsilon_greedy_values(sum, epsilon, rng);
}

// Replay ------------------------------------------------------------------------------

struct ReplayEntry {
  Transition transition;  ///< reward is the shaped reward
  double mc_return = 0.0;
};

class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractViolation("replay capacity must be positive");
    buffer_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(ReplayEntry e) {
    if (buffer_.size() < capacity_) {
      buffer_.push_back(std::move(e));
    } else {
      buffer_[next_] = std::move(e);
    }
    next_ = (next_ + 1) % capacity_;
  }

  const ReplayEntry& sample(std::mt19937_64& rng) const {
    if (buffer_.empty()) throw ContractViolation("sampling from an empty replay memory");
    std::uniform_int_distribution<std::size_t> pick(0, buffer_.size() - 1);
    return buffer_[pick(rng)];
  }

  std::size_t size() const { return buffer_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<ReplayEntry> buffer_;
};

// Training loop ---------------------------------------------------------------------

struct StepRecord {
  double external = 0.0;
  double r_obj = 0.0;
  double psc = 0.0;
  double shaped = 0.0;
  /// next_state passed the dissimilar-sampling gate (MOL modes only).
  bool gated = false;
};

struct EpisodeResult {
  /// External rewards.
  Trajectory episode;
  std::vector<StepRecord> steps;
  std::vector<SuccessfulTrajectory> successes;
  /// Sampled states used to update the importance model at each goal.
  std::vector<std::vector<Observation>> sampled_segments;
  double score = 0.0;
  double shaped_return = 0.0;
  double epsilon = 0.0;
  /// Stopped by the frame budget before the environment ended the episode.
  bool cut_short = false;
};

using ActionChooser = std::function<ActionId(const Observation&)>;

/// One training run: double Q-tables, replay memory, the importance model
/// M (counts sampled states of successful segments) and the exploration
/// model (counts every visited state).
class Learner {
 public:
  Learner(std::size_t action_count, AgentConfig agent, ShapingConfig shaping, DissimilarConfig sampling,
          std::uint64_t seed, std::unique_ptr<DensityModel> importance_model,
          std::unique_ptr<DensityModel> exploration_model)
      : agent_(agent),
        shaping_(shaping),
        q_a_(action_count, agent.learning_rate, agent.gamma),
        q_b_(action_count, agent.learning_rate, agent.gamma),
        replay_(agent.replay_capacity),
        sampler_(sampling),
        importance_(std::move(importance_model)),
        exploration_(std::move(exploration_model)),
        rng_(seed) {
    agent_.validate();
    shaping_.validate();
    if (!importance_ || !exploration_) throw ContractViolation("Learner needs both density models");
  }

  /// Epsilon-greedy episode.
  EpisodeResult run_episode(Environment& env, std::uint64_t env_seed,
                            std::uint64_t frame_budget = std::numeric_limits<std::uint64_t>::max()) {
    return run(env, env_seed, frame_budget, nullptr);
  }

  /// Episode driven by an external action source; learning proceeds as usual.
  EpisodeResult run_episode(Environment& env, std::uint64_t env_seed, const ActionChooser& choose,
                            std::uint64_t frame_budget = std::numeric_limits<std::uint64_t>::max()) {
    return run(env, env_seed, frame_budget, &choose);
  }

  ActionId greedy_action(const Observation& s) const {
    const auto a = q_a_.values(s);
    const auto b = q_b_.values(s);
    std::vector<double> sum(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) sum[i] = a[i] + b[i];
    return QTable::argmax_of(sum);
  }

  const AgentConfig& agent_config() const { return agent_; }
  const ShapingConfig& shaping_config() const { return shaping_; }
  const QTable& q_a() const { return q_a_; }
  const QTable& q_b() const { return q_b_; }
  QTable& q_a() { return q_a_; }
  QTable& q_b() { return q_b_; }
  const DensityModel& importance_model() const { return *importance_; }
  const DensityModel& exploration_model() const { return *exploration_; }
  const CMaxTracker& tracker() const { return tracker_; }
  const ReplayMemory& replay() const { return replay_; }
  std::uint64_t frames() const { return frames_; }
  double epsilon() const { return agent_.epsilon_at(frames_); }

  DensityModel& importance_model() { return *importance_; }
  void restore_tracker(CMaxTracker t) { tracker_ = t; }

 private:
  EpisodeResult run(Environment& env, std::uint64_t env_seed, std::uint64_t frame_budget,
                    const ActionChooser* choose) {
    EpisodeResult res;
    std::vector<Transition> external;
    std::vector<Transition> shaped;
    std::vector<Transition> segment;
    Observation obs = env.reset(env_seed);
    sampler_.reset();

    while (!env.is_terminal()) {
      if (frames_ >= frame_budget) {
        res.cut_short = true;
        break;
      }
      const ActionId a = choose ? (*choose)(obs) : epsilon_greedy(q_a_, q_b_, obs, epsilon(), rng_);
      const Transition t = env.step(a);
      ++frames_;
      learn_from_replay();

      StepRecord rec;
      rec.external = t.reward;
      if (uses_mol(agent_.mode) && sampler_.offer(t.next_state)) {
        rec.gated = true;
        const double n = importance_->count(t.next_state, Degeneracy::Clamp);
        rec.r_obj = r_obj(r_exp(n), tracker_, shaping_);
      }
      if (uses_psc(agent_.mode))
        rec.psc = psc_bonus(observe_and_count(*exploration_, t.next_state, Degeneracy::Clamp), shaping_.beta);
      rec.shaped = shape_reward(t.reward, rec.r_obj) + rec.psc;

      Transition st = t;
      st.reward = rec.shaped;
      shaped.push_back(st);
      external.push_back(t);
      segment.push_back(t);
      res.steps.push_back(rec);
      res.score += t.reward;
      res.shaped_return += rec.shaped;

      if (t.reward > 0.0) {
        res.successes.emplace_back(Trajectory(std::move(segment)));
        segment.clear();
        if (uses_mol(agent_.mode)) {
          for (const auto& s : sampler_.sampled()) importance_->learn(s);
          res.sampled_segments.push_back(sampler_.sampled());
          sampler_.reset();
        }
      }
      obs = t.next_state;
    }

    // Monte-Carlo returns are known once the episode is over.
    double g = 0.0;
    std::vector<double> returns(shaped.size());
    for (std::size_t k = shaped.size(); k-- > 0;) {
      g = shaped[k].reward + agent_.gamma * g;
      returns[k] = g;
    }
    for (std::size_t k = 0; k < shaped.size(); ++k) replay_.push({std::move(shaped[k]), returns[k]});

    res.episode = Trajectory(std::move(external));
    res.epsilon = epsilon();
    return res;
  }

  void learn_from_replay() {
    if (replay_.size() < agent_.batch_size) return;
    std::bernoulli_distribution coin(0.5);
    for (std::size_t u = 0; u < agent_.updates_per_step; ++u)
      for (std::size_t b = 0; b < agent_.batch_size; ++b) {
        const ReplayEntry& e = replay_.sample(rng_);
        const bool first = coin(rng_);
        QTable& upd = first ? q_a_ : q_b_;
        const QTable& other = first ? q_b_ : q_a_;
        const double err = mixed_mc_error(upd, other, e.transition, e.mc_return, agent_.eta);
        upd.at(e.transition.state, e.transition.action) += upd.learning_rate() * err;
      }
  }

  AgentConfig agent_;
  ShapingConfig shaping_;
  QTable q_a_;
  QTable q_b_;
  ReplayMemory replay_;
  DissimilarSampler sampler_;
  std::unique_ptr<DensityModel> importance_;
  std::unique_ptr<DensityModel> exploration_;
  CMaxTracker tracker_;
  std::mt19937_64 rng_;
  std::uint64_t frames_ = 0;
};

}  // namespace mol
