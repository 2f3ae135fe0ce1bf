#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <unordered_map>
#include <vector>

#include "mol/core.hpp"

namespace mol {

/// Cap used when a model reports rho' <= rho for a seen observation.
inline constexpr double kPseudoCountCap = 1e9;

enum class Degeneracy { Throw, Clamp };

/// N = rho (1 - rho') / (rho' - rho).
inline double pseudo_count(double rho, double rho_prime, Degeneracy on_degenerate = Degeneracy::Throw) {
  if (!(rho >= 0.0 && rho <= 1.0 && rho_prime >= 0.0 && rho_prime <= 1.0))
    throw ContractViolation("probabilities must lie in [0,1]");
  if (rho == 0.0 && rho_prime > 0.0) return 0.0;
  if (!(rho_prime > rho)) {
    if (on_degenerate == Degeneracy::Throw)
      throw DegenerateModelError("recoding probability does not exceed probability");
    return rho > 0.0 ? kPseudoCountCap : 0.0;
  }
  const double n = rho * (1.0 - rho_prime) / (rho_prime - rho);
  return std::min(std::max(n, 0.0), kPseudoCountCap);
}

/// Same quantity from log-probabilities, for models whose joint
/// probabilities underflow: N = -expm1(log rho') / expm1(log rho' - log rho).
inline double pseudo_count_log(double log_rho, double log_rho_prime,
                               Degeneracy on_degenerate = Degeneracy::Throw) {
  if (log_rho == -std::numeric_limits<double>::infinity()) return 0.0;
  const double gain = std::expm1(log_rho_prime - log_rho);
  if (!(gain > 0.0)) {
    if (on_degenerate == Degeneracy::Throw)
      throw DegenerateModelError("recoding probability does not exceed probability");
    return kPseudoCountCap;
  }
  const double n = -std::expm1(log_rho_prime) / gain;
  return std::min(std::max(n, 0.0), kPseudoCountCap);
}

/// Sequential density model over observations.
class DensityModel {
 public:
  virtual ~DensityModel() = default;

  /// rho_n(x).
  virtual double prob(const Observation& x) const = 0;
  /// rho'_n(x): probability of x if the model were updated with x. Const.
  virtual double recoding_prob(const Observation& x) const = 0;
  virtual void learn(const Observation& x) = 0;
  virtual std::unique_ptr<DensityModel> clone() const = 0;

  /// Pseudo-count of x under the current model, without updating it.
  virtual double count(const Observation& x, Degeneracy on_degenerate = Degeneracy::Throw) const {
    return pseudo_count(prob(x), recoding_prob(x), on_degenerate);
  }

  /// Advances the model by x and returns rho'_n(x).
  double update(const Observation& x) {
    learn(x);
    return prob(x);
  }
};

/// Computes rho_n(x), updates with x, and returns the pseudo-count.
inline double observe_and_count(DensityModel& model, const Observation& x,
                                Degeneracy on_degenerate = Degeneracy::Throw) {
  const double n = model.count(x, on_degenerate);
  model.learn(x);
  return n;
}

/// Empirical counts: rho_n = N/n, rho'_n = (N+1)/(n+1), and rho_0 = 0.
class TabularCountModel final : public DensityModel {
 public:
  double prob(const Observation& x) const override {
    if (total_ == 0) return 0.0;
    return static_cast<double>(raw_count(x)) / static_cast<double>(total_);
  }

  double recoding_prob(const Observation& x) const override {
    return static_cast<double>(raw_count(x) + 1) / static_cast<double>(total_ + 1);
  }

  void learn(const Observation& x) override {
    ++counts_[x];
    ++total_;
  }

  /// When x is the only observation seen so far, rho = rho' = 1 and the
  /// pseudo-count formula is 0/0. Its limit along the model's
  /// parametrisation is the empirical count, which is returned instead.
  double count(const Observation& x, Degeneracy on_degenerate = Degeneracy::Throw) const override {
    const auto c = raw_count(x);
    if (total_ > 0 && c == total_) return static_cast<double>(c);
    return DensityModel::count(x, on_degenerate);
  }

  std::unique_ptr<DensityModel> clone() const override { return std::make_unique<TabularCountModel>(*this); }

  std::uint64_t raw_count(const Observation& x) const {
    auto it = counts_.find(x);
    return it == counts_.end() ? 0 : it->second;
  }
  std::uint64_t total() const { return total_; }
  const std::unordered_map<Observation, std::uint64_t, ObservationHash>& counts() const { return counts_; }

  /// Restores a persisted model state.
  void set_count(const Observation& x, std::uint64_t c) {
    auto& slot = counts_[x];
    total_ = total_ - slot + c;
    slot = c;
  }

 private:
  std::unordered_map<Observation, std::uint64_t, ObservationHash> counts_;
  std::uint64_t total_ = 0;
};

/// Independent smoothed categorical per pixel over 256 intensities; the
/// frame probability is the product over pixels (kept in log space).
class FactoredPixelModel final : public DensityModel {
 public:
  static constexpr int kAlphabet = 256;

  explicit FactoredPixelModel(double smoothing = 0.1) : smoothing_(smoothing) {
    if (!(smoothing > 0.0)) throw ContractViolation("smoothing must be positive");
  }

  double log_prob(const Observation& x) const { return log_prob_with(x, 0); }
  double log_recoding_prob(const Observation& x) const { return log_prob_with(x, 1); }

  double prob(const Observation& x) const override { return std::exp(log_prob(x)); }
  double recoding_prob(const Observation& x) const override { return std::exp(log_recoding_prob(x)); }

  double count(const Observation& x, Degeneracy on_degenerate = Degeneracy::Throw) const override {
    return pseudo_count_log(log_prob(x), log_recoding_prob(x), on_degenerate);
  }

  void learn(const Observation& x) override {
    check_shape(x);
    if (counts_.empty()) {
      width_ = x.width();
      height_ = x.height();
      counts_.assign(x.values().size() * kAlphabet, 0);
    }
    const auto v = x.values();
    for (std::size_t i = 0; i < v.size(); ++i) ++counts_[i * kAlphabet + v[i]];
    ++total_;
  }

  std::unique_ptr<DensityModel> clone() const override { return std::make_unique<FactoredPixelModel>(*this); }

  /// Smoothed probability of intensity v at pixel i.
  double pixel_prob(std::size_t i, int v) const {
    const double c = counts_.empty() ? 0.0 : static_cast<double>(counts_[i * kAlphabet + static_cast<std::size_t>(v)]);
    return (c + smoothing_) / (static_cast<double>(total_) + kAlphabet * smoothing_);
  }

  double smoothing() const { return smoothing_; }
  std::uint64_t total() const { return total_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<std::uint32_t>& raw_counts() const { return counts_; }

  void restore(int width, int height, std::uint64_t total, std::vector<std::uint32_t> counts) {
    if (counts.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * kAlphabet)
      throw ContractViolation("pixel model counts have the wrong size");
    width_ = width;
    height_ = height;
    total_ = total;
    counts_ = std::move(counts);
  }

 private:
  void check_shape(const Observation& x) const {
    if (!x.is_pixels()) throw ContractViolation("FactoredPixelModel needs pixel observations");
    if (!counts_.empty() && (x.width() != width_ || x.height() != height_))
      throw ContractViolation("pixel observation dimensions changed");
  }

  double log_prob_with(const Observation& x, int extra) const {
    check_shape(x);
    const auto v = x.values();
    const double denom = std::log(static_cast<double>(total_ + extra) + kAlphabet * smoothing_);
    double lp = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double c = counts_.empty() ? 0.0 : static_cast<double>(counts_[i * kAlphabet + v[i]]);
      lp += std::log(c + extra + smoothing_) - denom;
    }
    return lp;
  }

  double smoothing_;
  int width_ = 0;
  int height_ = 0;
  std::uint64_t total_ = 0;
  std::vector<std::uint32_t> counts_;
};

}  // namespace mol
