#include <gtest/gtest.h>

#include <random>
#include <unordered_set>

#include "mol/core.hpp"
#include "mol/envs.hpp"
#include "test_util.hpp"

namespace mol {
namespace {

TEST(Observation, DiscreteEqualityAndHash) {
  EXPECT_EQ(Observation::discrete(3), Observation::discrete(3));
  EXPECT_NE(Observation::discrete(3), Observation::discrete(4));
  EXPECT_EQ(ObservationHash{}(Observation::discrete(7)), ObservationHash{}(Observation::discrete(7)));
  EXPECT_EQ(Observation::discrete(12).label(), "s12");
}

TEST(Observation, PixelLengthMustMatchDimensions) {
  EXPECT_THROW(Observation::pixels(2, 2, {1, 2, 3}), ContractViolation);
  EXPECT_THROW(Observation::pixels(0, 2, {}), ContractViolation);
  const auto o = Observation::pixels(2, 2, {1, 2, 3, 4});
  EXPECT_EQ(o.values().size(), 4u);
  EXPECT_EQ(o, Observation::pixels(2, 2, {1, 2, 3, 4}));
  EXPECT_NE(o, Observation::pixels(4, 1, {1, 2, 3, 4}));
  EXPECT_NE(o, Observation::discrete(0));
  EXPECT_FALSE(o.same_shape(Observation::pixels(4, 1, {1, 2, 3, 4})));
  EXPECT_THROW(o.id(), ContractViolation);
}

TEST(Trajectory, RejectsGapsAndNonFiniteRewards) {
  EXPECT_THROW(Trajectory({test::tr(0, 1, 0.0), test::tr(2, 3, 0.0)}), ContractViolation);
  EXPECT_THROW(Trajectory({test::tr(0, 1, std::nan(""))}), ContractViolation);
  const Trajectory t({test::tr(0, 1, 0.0), test::tr(1, 2, 1.0)});
  const auto s = t.states();
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[2], Observation::discrete(2));
}

TEST(SuccessfulTrajectory, Invariant) {
  EXPECT_THROW(SuccessfulTrajectory(Trajectory{}), ContractViolation);
  EXPECT_THROW(SuccessfulTrajectory(test::chain({0, 1, 2}, {1.0, 1.0})), ContractViolation);
  EXPECT_THROW(SuccessfulTrajectory(test::chain({0, 1, 2}, {0.0, 0.0})), ContractViolation);
  const SuccessfulTrajectory ok(test::chain({0, 1, 2}, {0.0, 1.0}));
  EXPECT_EQ(ok.start(), Observation::discrete(0));
  EXPECT_EQ(ok.goal(), Observation::discrete(2));
}

TEST(SplitSuccessful, TwoGoals) {
  const auto segs = split_successful(test::chain({0, 1, 2, 3, 4, 5}, {0, 0, 1, 0, 1}));
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].size(), 3u);
  EXPECT_EQ(segs[1].size(), 2u);
  EXPECT_EQ(segs[1].start(), Observation::discrete(3));
}

TEST(SplitSuccessful, NoGoal) { EXPECT_TRUE(split_successful(test::chain({0, 1, 2, 3}, {0, 0, 0})).empty()); }

TEST(SplitSuccessful, SingleRewardedStep) {
  const auto segs = split_successful(test::chain({0, 1}, {1}));
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].size(), 1u);
}

// Segments plus the dropped tail give back the episode; every segment has
// one positive reward, at its end.
TEST(SplitSuccessful, PropertyConcatenationRoundTrip) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const auto ep = test::random_episode(rng, 1 + rng() % 30, 6, 0.2);
    const auto segs = split_successful(ep);
    std::vector<Transition> joined;
    for (const auto& s : segs) {
      std::size_t positives = 0;
      for (const auto& t : s.trajectory().transitions()) positives += t.reward > 0.0;
      ASSERT_EQ(positives, 1u);
      ASSERT_GT(s.trajectory().transitions().back().reward, 0.0);
      joined.insert(joined.end(), s.trajectory().transitions().begin(), s.trajectory().transitions().end());
    }
    ASSERT_LE(joined.size(), ep.size());
    for (std::size_t i = 0; i < joined.size(); ++i) {
      ASSERT_EQ(joined[i].state, ep[i].state);
      ASSERT_EQ(joined[i].reward, ep[i].reward);
    }
    for (std::size_t i = joined.size(); i < ep.size(); ++i) ASSERT_LE(ep[i].reward, 0.0);
  }
}

TEST(Mdp, ValidateChecksRowsAndInitialMass) {
  Mdp m = make_fig2_mdp();
  EXPECT_NO_THROW(m.validate());
  m.transition_prob[0][0][1] = 0.5;
  EXPECT_THROW(m.validate(), ContractViolation);
  m = make_fig2_mdp();
  m.initial_dist[0] = 0.9;
  EXPECT_THROW(m.validate(), ContractViolation);
}

TEST(EnvironmentStep, Fig1RightFromStart) {
  GridWorld env = make_fig1_gridworld();
  env.reset(0);
  const Transition t = env.step(kRight);
  EXPECT_EQ(t.state, Observation::discrete(0));
  EXPECT_EQ(t.action, kRight);
  EXPECT_EQ(t.next_state, Observation::discrete(1));
  EXPECT_EQ(t.reward, 0.0);
  EXPECT_FALSE(t.terminal);
}

TEST(EnvironmentStep, Fig1IntoGoal) {
  GridWorld env = make_fig1_gridworld();
  env.reset(0);
  env.step(kDown);
  env.step(kDown);
  env.step(kRight);  // s7
  const Transition t = env.step(kRight);
  EXPECT_EQ(t.state, Observation::discrete(7));
  EXPECT_EQ(t.next_state, Observation::discrete(8));
  EXPECT_EQ(t.reward, 1.0);
  EXPECT_TRUE(t.terminal);
  EXPECT_THROW(env.step(kUp), ContractViolation);
}

TEST(EnvironmentStep, ActionOutOfRange) {
  GridWorld env = make_fig1_gridworld();
  EXPECT_THROW(env.step(4), ContractViolation);
}

}  // namespace
}  // namespace mol
