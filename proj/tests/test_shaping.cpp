#include <gtest/gtest.h>

#include <random>

#include "mol/shaping.hpp"

namespace mol {
namespace {

constexpr double kTol = 1e-9;

TEST(RExp, Examples) {
  EXPECT_NEAR(r_exp(0.0), 1.0, kTol);
  EXPECT_NEAR(r_exp(0.99), 0.1, kTol);
  EXPECT_NEAR(r_exp(99.99), 0.01, kTol);
  EXPECT_THROW(r_exp(-1.0), ContractViolation);
}

TEST(PscBonus, Examples) {
  EXPECT_NEAR(psc_bonus(0.0, 0.05), 0.5, kTol);
  EXPECT_NEAR(psc_bonus(0.99, 1.0), 1.0, kTol);
  for (double n : {0.0, 1.0, 1e6}) EXPECT_EQ(psc_bonus(n, 0.0), 0.0);
}

TEST(RObj, UnseenStateIsZero) {
  CMaxTracker t;
  EXPECT_EQ(r_obj(1.0, t, ShapingConfig{}), 0.0);
  EXPECT_EQ(t.current_max(), 0.0);
}

TEST(RObj, HeavilyCountedClipsToRMax) {
  CMaxTracker t(0.995);
  EXPECT_NEAR(r_obj(0.005, t, ShapingConfig{}), 0.9, kTol);
}

// 0.5 / 0.995, cross-checked with a calculator.
TEST(RObj, UnclippedBranch) {
  CMaxTracker t(0.995);
  EXPECT_NEAR(r_obj(0.5, t, ShapingConfig{}), 0.50251256281407031, kTol);
  EXPECT_EQ(t.current_max(), 0.995);
}

TEST(RObj, FirstCountedStateSelfNormalises) {
  for (double alpha : {1.0, 0.5, 2.0})
    for (double rmax : {0.9, 1.0, 0.3}) {
      CMaxTracker t;
      ShapingConfig cfg;
      cfg.alpha = alpha;
      cfg.r_max = rmax;
      EXPECT_NEAR(r_obj(r_exp(1.0), t, cfg), alpha * std::min(rmax, 1.0), kTol);
    }
}

TEST(RObj, DomainChecked) {
  CMaxTracker t;
  EXPECT_THROW(r_obj(0.0, t, ShapingConfig{}), ContractViolation);
  EXPECT_THROW(r_obj(1.5, t, ShapingConfig{}), ContractViolation);
}

TEST(ShapeReward, Examples) {
  EXPECT_NEAR(shape_reward(0.0, 0.9), 0.9, kTol);
  EXPECT_NEAR(shape_reward(1.0, 0.0), 1.0, kTol);
  EXPECT_NEAR(shape_reward(0.5, 0.3), 0.8, kTol);
}

TEST(ShapingConfig, Validation) {
  ShapingConfig c;
  c.r_max = 0.0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = ShapingConfig{};
  c.alpha = -1.0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = ShapingConfig{};
  c.epsilon_cmax = 0.0;
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(Property, RObjBoundedAndTrackerMonotone) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> count(0.0, 1000.0), unit(0.0, 1.0);
  for (int run = 0; run < 100; ++run) {
    ShapingConfig cfg;
    cfg.alpha = 2.0 * unit(rng);
    cfg.r_max = 0.05 + 0.95 * unit(rng);
    CMaxTracker t(unit(rng) < 0.5 ? 0.0 : unit(rng));
    for (int i = 0; i < 100; ++i) {
      const double before = t.current_max();
      const double v = r_obj(r_exp(unit(rng) < 0.2 ? 0.0 : count(rng)), t, cfg);
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, cfg.alpha * cfg.r_max + 1e-12);
      ASSERT_GE(t.current_max(), before);
    }
  }
}

TEST(Property, BonusesStrictlyDecreasing) {
  double last_exp = r_exp(0.0), last_psc = psc_bonus(0.0, 0.05);
  for (double n = 0.25; n < 500.0; n *= 1.7) {
    ASSERT_LT(r_exp(n), last_exp);
    ASSERT_LT(psc_bonus(n, 0.05), last_psc);
    last_exp = r_exp(n);
    last_psc = psc_bonus(n, 0.05);
  }
}

}  // namespace
}  // namespace mol
