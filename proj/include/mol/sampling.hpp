#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "mol/core.hpp"

namespace mol {

enum class Metric { L1, L2 };

struct DissimilarConfig {
  /// Number of recent consecutive-state differences averaged into the
  /// acceptance threshold.
  std::size_t history = 5;
  /// Floor on the threshold, in metric units.
  double min_pixel_diff = 0.0;
  Metric metric = Metric::L1;

  void validate() const {
    if (history < 1) throw ContractViolation("history must be >= 1");
    if (!(min_pixel_diff >= 0.0)) throw ContractViolation("min_pixel_diff must be >= 0");
  }
};

/// Keeps each distinct observation once, at its first position.
inline std::vector<Observation> first_visit_sample(std::span<const Observation> states) {
  std::vector<Observation> out;
  std::unordered_set<Observation, ObservationHash> seen;
  for (const auto& s : states)
    if (seen.insert(s).second) out.push_back(s);
  return out;
}

/// L1/L2 over pixel values. Discrete observations are 0 apart when equal and
/// infinitely far apart otherwise.
inline double state_distance(const Observation& a, const Observation& b, Metric metric = Metric::L1) {
  if (!a.same_shape(b)) throw ContractViolation("state_distance: observations differ in kind or dimensions");
  if (a.is_discrete()) return a.id() == b.id() ? 0.0 : std::numeric_limits<double>::infinity();
  const auto va = a.values();
  const auto vb = b.values();
  if (metric == Metric::L1) {
    long long sum = 0;
    for (std::size_t i = 0; i < va.size(); ++i) sum += std::abs(int{va[i]} - int{vb[i]});
    return static_cast<double>(sum);
  }
  long long sq = 0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const long long d = int{va[i]} - int{vb[i]};
    sq += d * d;
  }
  return std::sqrt(static_cast<double>(sq));
}

/// Mean of state_distance(s_k, s_{k+1}) for k in [max(0, i-h), i-1].
inline double recent_window_delta(std::span<const Observation> states, std::size_t i, std::size_t h,
                                  Metric metric = Metric::L1) {
  if (i == 0) throw ContractViolation("recent_window_delta needs i >= 1");
  if (i >= states.size()) throw ContractViolation("recent_window_delta index out of range");
  if (h == 0) throw ContractViolation("recent_window_delta needs h >= 1");
  const std::size_t lo = i > h ? i - h : 0;
  double sum = 0.0;
  for (std::size_t k = lo; k < i; ++k) sum += state_distance(states[k], states[k + 1], metric);
  return sum / static_cast<double>(i - lo);
}

/// Streaming dissimilar sampler. offer() decides for each new state whether
/// it joins the sampled list: the first state always does; later states
/// need a nonzero distance to every sampled state that is also at least
/// max(recent-window mean, min_pixel_diff).
class DissimilarSampler {
 public:
  explicit DissimilarSampler(DissimilarConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  bool offer(const Observation& s) {
    if (!last_) {
      accept(s);
      last_ = s;
      return true;
    }
    window_.push_back(state_distance(*last_, s, cfg_.metric));
    if (window_.size() > cfg_.history) window_.pop_front();
    last_ = s;
    // Summed afresh: the window may hold infinities (discrete states).
    double sum = 0.0;
    for (double d : window_) sum += d;
    const double threshold = std::max(sum / static_cast<double>(window_.size()), cfg_.min_pixel_diff);

    bool ok;
    if (s.is_discrete()) {
      // Distinct discrete states are infinitely far apart.
      ok = !discrete_seen_.contains(s.id());
    } else {
      ok = true;
      for (const auto& t : sampled_) {
        const double d = state_distance(t, s, cfg_.metric);
        if (!(d > 0.0 && d >= threshold)) {
          ok = false;
          break;
        }
      }
    }
    if (ok) accept(s);
    return ok;
  }

  void reset() {
    sampled_.clear();
    discrete_seen_.clear();
    window_.clear();
    last_.reset();
  }

  const std::vector<Observation>& sampled() const { return sampled_; }
  const DissimilarConfig& config() const { return cfg_; }

 private:
  void accept(const Observation& s) {
    sampled_.push_back(s);
    if (s.is_discrete()) discrete_seen_.insert(s.id());
  }

  DissimilarConfig cfg_;
  std::vector<Observation> sampled_;
  std::unordered_set<std::uint64_t> discrete_seen_;
  std::deque<double> window_;
  std::optional<Observation> last_;
};

/// Indices of the states kept by dissimilar sampling (batch form).
inline std::vector<std::size_t> dissimilar_sample_indices(std::span<const Observation> states,
                                                          const DissimilarConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> kept;
  if (states.empty()) return kept;
  kept.push_back(0);
  for (std::size_t i = 1; i < states.size(); ++i) {
    const double threshold = std::max(recent_window_delta(states, i, cfg.history, cfg.metric), cfg.min_pixel_diff);
    bool ok = true;
    for (std::size_t j : kept) {
      const double d = state_distance(states[j], states[i], cfg.metric);
      if (!(d > 0.0 && d >= threshold)) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(i);
  }
  return kept;
}

inline std::vector<Observation> dissimilar_sample(std::span<const Observation> states, const DissimilarConfig& cfg) {
  if (states.empty()) throw ContractViolation("dissimilar_sample needs a nonempty trajectory");
  std::vector<Observation> out;
  for (std::size_t i : dissimilar_sample_indices(states, cfg)) out.push_back(states[i]);
  return out;
}

/// True iff next_state is kept when dissimilar sampling runs over the
/// running trajectory extended by next_state.
inline bool should_reward(std::span<const Observation> running, const Observation& next_state,
                          const DissimilarConfig& cfg) {
  std::vector<Observation> extended(running.begin(), running.end());
  extended.push_back(next_state);
  const auto kept = dissimilar_sample_indices(extended, cfg);
  return kept.back() == extended.size() - 1;
}

}  // namespace mol
