#pragma once

#include <algorithm>
#include <cmath>

#include "mol/core.hpp"

namespace mol {

struct ShapingConfig {
  double alpha = 1.0;
  double r_max = 0.9;
  /// Exploration bonus coefficient.
  double beta = 0.05;
  /// Floor on the running maximum used as normaliser.
  double epsilon_cmax = 1e-8;

  void validate() const {
    if (!(alpha >= 0.0)) throw ContractViolation("alpha must be >= 0");
    if (!(r_max > 0.0 && r_max <= 1.0)) throw ContractViolation("r_max must be in (0,1]");
    if (!(beta >= 0.0)) throw ContractViolation("beta must be >= 0");
    if (!(epsilon_cmax > 0.0)) throw ContractViolation("epsilon_cmax must be > 0");
  }
};

/// Running maximum of (1 - R_exp) over a training run.
class CMaxTracker {
 public:
  CMaxTracker() = default;
  explicit CMaxTracker(double initial) : current_max_(initial) {}

  void observe(double one_minus_r_exp) { current_max_ = std::max(current_max_, one_minus_r_exp); }
  double current_max() const { return current_max_; }

 private:
  double current_max_ = 0.0;
};

/// 0.1 / sqrt(N + 0.01).
inline double r_exp(double pseudo_count) {
  if (!(pseudo_count >= 0.0)) throw ContractViolation("pseudo-count must be >= 0");
  return 0.1 / std::sqrt(pseudo_count + 0.01);
}

/// beta (N + 0.01)^(-1/2).
inline double psc_bonus(double pseudo_count, double beta) {
  if (!(pseudo_count >= 0.0)) throw ContractViolation("pseudo-count must be >= 0");
  return beta / std::sqrt(pseudo_count + 0.01);
}

/// alpha * min(R_max, (1 - R_exp) / R_cmax). The tracker absorbs
/// (1 - R_exp) before the ratio is taken, so the first counted state of a
/// run normalises to 1.
inline double r_obj(double r_exp_value, CMaxTracker& tracker, const ShapingConfig& cfg) {
  if (!(r_exp_value > 0.0 && r_exp_value <= 1.0)) throw ContractViolation("R_exp must lie in (0,1]");
  const double gap = 1.0 - r_exp_value;
  tracker.observe(gap);
  if (gap == 0.0) return 0.0;
  return cfg.alpha * std::min(cfg.r_max, gap / std::max(tracker.current_max(), cfg.epsilon_cmax));
}

inline double shape_reward(double external, double obj) { return external + obj; }

}  // namespace mol
