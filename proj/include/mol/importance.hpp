#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <unordered_map>
#include <vector>

#include "mol/core.hpp"
#include "mol/sampling.hpp"

namespace mol {

enum class PathMode {
  AnyShortest,  ///< union of all shortest s_0 -> s_n paths
  Canonical     ///< one shortest path, ties to the earliest-seen successor
};

enum class CountScheme { FirstVisit, EveryVisit };

/// Observation -> nonnegative importance. Missing states read as 0.
class ImportanceMap {
 public:
  double operator[](const Observation& s) const {
    auto it = values_.find(s);
    return it == values_.end() ? 0.0 : it->second;
  }
  void add(const Observation& s, double v) { values_[s] += v; }
  void set(const Observation& s, double v) { values_[s] = v; }
  void scale(double f) {
    for (auto& [_, v] : values_) v *= f;
  }
  double total() const {
    double t = 0.0;
    for (const auto& [_, v] : values_) t += v;
    return t;
  }
  std::size_t size() const { return values_.size(); }
  const std::unordered_map<Observation, double, ObservationHash>& values() const { return values_; }

 private:
  std::unordered_map<Observation, double, ObservationHash> values_;
};

namespace detail {

/// States of a trajectory interned in first-appearance order, with the
/// observed successor lists.
struct TrajectoryGraph {
  std::vector<Observation> nodes;
  std::vector<std::vector<std::size_t>> succ;
  std::size_t goal = 0;

  explicit TrajectoryGraph(const Trajectory& t) {
    std::unordered_map<Observation, std::size_t, ObservationHash> index;
    auto intern = [&](const Observation& o) {
      auto [it, inserted] = index.try_emplace(o, nodes.size());
      if (inserted) {
        nodes.push_back(o);
        succ.emplace_back();
      }
      return it->second;
    };
    if (t.empty()) return;
    std::size_t prev = intern(t[0].state);
    for (const auto& tr : t.transitions()) {
      const std::size_t next = intern(tr.next_state);
      auto& out = succ[prev];
      if (std::find(out.begin(), out.end(), next) == out.end()) out.push_back(next);
      prev = next;
    }
    goal = prev;
    for (auto& out : succ) std::sort(out.begin(), out.end());
  }

  std::vector<std::size_t> bfs(std::size_t source, bool reverse) const {
    constexpr auto inf = std::numeric_limits<std::size_t>::max();
    std::vector<std::vector<std::size_t>> adj = succ;
    if (reverse) {
      adj.assign(nodes.size(), {});
      for (std::size_t u = 0; u < succ.size(); ++u)
        for (std::size_t v : succ[u]) adj[v].push_back(u);
    }
    std::vector<std::size_t> dist(nodes.size(), inf);
    std::queue<std::size_t> q;
    dist[source] = 0;
    q.push(source);
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t v : adj[u])
        if (dist[v] == inf) {
          dist[v] = dist[u] + 1;
          q.push(v);
        }
    }
    return dist;
  }
};

}  // namespace detail

/// States on the optimal s_0 -> s_n path(s) of the graph induced by the
/// trajectory's observed transitions, in first-appearance order.
inline std::vector<Observation> optimal_path_states(const SuccessfulTrajectory& traj,
                                                    PathMode mode = PathMode::AnyShortest) {
  const detail::TrajectoryGraph g(traj.trajectory());
  const auto from_start = g.bfs(0, false);
  const auto to_goal = g.bfs(g.goal, true);
  const std::size_t length = from_start[g.goal];
  std::vector<Observation> out;
  if (mode == PathMode::AnyShortest) {
    for (std::size_t v = 0; v < g.nodes.size(); ++v)
      if (from_start[v] != std::numeric_limits<std::size_t>::max() &&
          to_goal[v] != std::numeric_limits<std::size_t>::max() && from_start[v] + to_goal[v] == length)
        out.push_back(g.nodes[v]);
    return out;
  }
  std::vector<char> on_path(g.nodes.size(), 0);
  std::size_t v = 0;
  on_path[v] = 1;
  while (v != g.goal) {
    for (std::size_t w : g.succ[v])  // sorted: earliest first appearance first
      if (to_goal[w] != std::numeric_limits<std::size_t>::max() && to_goal[w] + 1 == to_goal[v]) {
        v = w;
        break;
      }
    on_path[v] = 1;
  }
  for (std::size_t u = 0; u < g.nodes.size(); ++u)
    if (on_path[u]) out.push_back(g.nodes[u]);
  return out;
}

/// I^L(s): 1 when s lies on the optimal path of the trajectory.
inline int importance_count(const SuccessfulTrajectory& traj, const Observation& s,
                            PathMode mode = PathMode::AnyShortest) {
  for (const auto& o : optimal_path_states(traj, mode))
    if (o == s) return 1;
  return 0;
}

// Trajectory enumeration ---------------------------------------------------------

/// pi(a | s), indexed [s][a].
using Policy = std::vector<std::vector<double>>;

inline Policy uniform_policy(const Mdp& mdp) {
  return Policy(mdp.num_states, std::vector<double>(mdp.num_actions, 1.0 / static_cast<double>(mdp.num_actions)));
}

struct WeightedTrajectory {
  SuccessfulTrajectory trajectory;
  double probability;
};

struct TrajectoryDistribution {
  std::vector<WeightedTrajectory> entries;
  Policy policy;

  double mass() const {
    double m = 0.0;
    for (const auto& e : entries) m += e.probability;
    return m;
  }
};

inline constexpr std::size_t kDefaultEnumerationBudget = 5'000'000;

/// Every successful trajectory of at most length_cap transitions starting
/// from the initial distribution, weighted by its exact probability. A branch
/// stops at its first positive reward, at a terminal state, or at the cap.
inline TrajectoryDistribution enumerate_successful(const Mdp& mdp, const Policy& policy, std::size_t length_cap,
                                                   std::size_t budget = kDefaultEnumerationBudget) {
  mdp.validate();
  if (length_cap == 0) throw ContractViolation("length_cap must be positive");
  if (policy.size() != mdp.num_states) throw ContractViolation("policy has the wrong number of states");
  for (const auto& row : policy) {
    if (row.size() != mdp.num_actions) throw ContractViolation("policy row has the wrong number of actions");
    double sum = 0.0;
    for (double p : row) sum += p;
    if (std::abs(sum - 1.0) > 1e-9) throw ContractViolation("policy row does not sum to 1");
  }

  TrajectoryDistribution dist;
  dist.policy = policy;
  std::vector<Transition> path;
  std::size_t expanded = 0;

  auto rec = [&](auto&& self, std::size_t s, double p) -> void {
    if (path.size() == length_cap) return;
    for (std::size_t a = 0; a < mdp.num_actions; ++a) {
      const double pa = policy[s][a];
      if (pa <= 0.0) continue;
      for (std::size_t s2 = 0; s2 < mdp.num_states; ++s2) {
        const double pt = mdp.transition_prob[s][a][s2];
        if (pt <= 0.0) continue;
        if (++expanded > budget)
          throw ResourceError("trajectory enumeration exceeded its budget of " + std::to_string(budget) + " nodes");
        const double r = mdp.reward[s][a][s2];
        path.push_back(Transition{Observation::discrete(s), static_cast<ActionId>(a), Observation::discrete(s2), r,
                                  r > 0.0 || mdp.is_terminal(s2)});
        const double q = p * pa * pt;
        if (r > 0.0)
          dist.entries.push_back({SuccessfulTrajectory(Trajectory(path)), q});
        else if (!mdp.is_terminal(s2))
          self(self, s2, q);
        path.pop_back();
      }
    }
  };
  for (std::size_t s = 0; s < mdp.num_states; ++s)
    if (mdp.initial_dist[s] > 0.0 && !mdp.is_terminal(s)) rec(rec, s, mdp.initial_dist[s]);
  return dist;
}

struct ExactImportance {
  ImportanceMap importance;
  /// Total probability of the enumerated successful trajectories.
  double mass = 0.0;
};

/// M(s) = sum over L of I^L(s) p(L) over the enumerated distribution.
inline ExactImportance exact_importance(const TrajectoryDistribution& dist, PathMode mode = PathMode::AnyShortest) {
  ExactImportance out;
  for (const auto& e : dist.entries) {
    for (const auto& s : optimal_path_states(e.trajectory, mode)) out.importance.add(s, e.probability);
    out.mass += e.probability;
  }
  return out;
}

inline ExactImportance exact_importance(const Mdp& mdp, const Policy& policy, std::size_t length_cap,
                                        PathMode mode = PathMode::AnyShortest,
                                        std::size_t budget = kDefaultEnumerationBudget) {
  return exact_importance(enumerate_successful(mdp, policy, length_cap, budget), mode);
}

/// Per-trajectory estimated importance count: first-visit membership or raw
/// visit counts over s_0..s_n.
inline ImportanceMap estimated_counts(const SuccessfulTrajectory& traj, CountScheme scheme) {
  ImportanceMap m;
  const auto states = traj.states();
  if (scheme == CountScheme::FirstVisit) {
    for (const auto& s : first_visit_sample(states)) m.add(s, 1.0);
  } else {
    for (const auto& s : states) m.add(s, 1.0);
  }
  return m;
}

/// Average of the per-trajectory counts, all trajectories weighted equally.
inline ImportanceMap estimate_importance(const std::vector<SuccessfulTrajectory>& trajs, CountScheme scheme) {
  if (trajs.empty()) throw ContractViolation("estimate_importance needs at least one trajectory");
  ImportanceMap m;
  for (const auto& t : trajs) {
    const ImportanceMap counts = estimated_counts(t, scheme);
    for (const auto& [s, v] : counts.values()) m.add(s, v);
  }
  m.scale(1.0 / static_cast<double>(trajs.size()));
  return m;
}

/// sum_s sum_L (I^L(s) - I^L_est(s)) p(L). The first term is the total
/// exact importance, so `exact` must come from the same distribution.
inline double estimation_loss(const ImportanceMap& exact, const TrajectoryDistribution& dist, CountScheme scheme) {
  double estimated = 0.0;
  for (const auto& e : dist.entries) estimated += estimated_counts(e.trajectory, scheme).total() * e.probability;
  return exact.total() - estimated;
}

}  // namespace mol
