#include <gtest/gtest.h>

#include <set>

#include "offmmd/offmmd.hpp"
#include "support.hpp"

using namespace offmmd;

namespace {

OnlineConfig small_config() {
  OnlineConfig c;
  c.iterations = 10;
  c.buffer_capacity = 5000;
  c.batch_size = 32;
  c.update_steps = 200;
  c.epsilon_anneal_steps = 5000;
  c.target_update_interval = 50;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(ReplayBuffer, NeverExceedsCapacityAndOverwritesOldest) {
  ReplayBuffer<int> buf(3);
  for (int i = 0; i < 7; ++i) buf.push(i);
  EXPECT_EQ(buf.size(), 3u);
  std::multiset<int> held{buf[0], buf[1], buf[2]};
  EXPECT_EQ(held, (std::multiset<int>{4, 5, 6}));
}

TEST(ReplayBuffer, SamplingEmptyBufferIsTrainingError) {
  ReplayBuffer<int> buf(3);
  Rng rng(1);
  std::vector<int> out;
  EXPECT_THROW(buf.sample(rng, 4, out), TrainingError);
  buf.push(9);
  buf.sample(rng, 4, out);
  EXPECT_EQ(out, (std::vector<int>{9, 9, 9, 9}));
}

TEST(EpsilonSchedule, EndpointsHonored) {
  const OnlineConfig c;
  EXPECT_EQ(c.epsilon_at(0), 1.0);
  EXPECT_NEAR(c.epsilon_at(500000), 0.55, 1e-12);
  EXPECT_EQ(c.epsilon_at(1000000), 0.1);
  EXPECT_EQ(c.epsilon_at(5000000), 0.1);
}

TEST(Rollout, FullExplorationGivesUniformActions) {
  const EnvironmentModel env(build_four_rooms(9, 9, 20), RewardKind::kExploration, 0.99);
  const TabularQ q(env.horizon(), env.num_states(), 5);
  const auto steps = rollout_epsilon_greedy(env, q, 1.0, 5000, 17);
  ASSERT_EQ(steps.size(), 100000u);
  std::vector<double> counts(5, 0.0);
  for (const auto& tr : steps) counts[static_cast<std::size_t>(tr.action)] += 1.0;
  const double expected = steps.size() / 5.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 13.277);  // chi-square(4) upper 1% point
}

TEST(Rollout, ZeroExplorationFollowsGreedyActions) {
  const EnvironmentModel env(build_four_rooms(5, 5, 8), RewardKind::kExploration, 0.99);
  TabularQ q(env.horizon(), env.num_states(), 5);
  Rng rng(2);
  for (double& v : q.mutable_parameters()) v = uniform01(rng);
  const auto steps = rollout_epsilon_greedy(env, q, 0.0, 20, 5);
  for (const auto& tr : steps) {
    const auto row = q.row(tr.t, tr.state);
    EXPECT_EQ(tr.action, std::max_element(row.begin(), row.end()) - row.begin());
  }
  // Episodes are contiguous chains.
  for (std::size_t k = 1; k < steps.size(); ++k) {
    if (steps[k].episode == steps[k - 1].episode) EXPECT_EQ(steps[k].state, steps[k - 1].next_state);
  }
}

TEST(Rollout, FixedSeedIsBitIdentical) {
  const EnvironmentModel env(build_four_rooms(5, 5, 8), RewardKind::kNavigation, 0.99, 0.2);
  const TabularQ q(env.horizon(), env.num_states(), 5);
  const auto a = rollout_epsilon_greedy(env, q, 0.3, 50, 9);
  const auto b = rollout_epsilon_greedy(env, q, 0.3, 50, 9);
  const auto c = rollout_epsilon_greedy(env, q, 0.3, 50, 10);
  ASSERT_EQ(a.size(), b.size());
  bool same_as_c = true;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(std::tie(a[k].episode, a[k].t, a[k].state, a[k].action, a[k].next_state),
              std::tie(b[k].episode, b[k].t, b[k].state, b[k].action, b[k].next_state));
    same_as_c = same_as_c && a[k].action == c[k].action && a[k].next_state == c[k].next_state;
  }
  EXPECT_FALSE(same_as_c);
}

TEST(Rollout, InvalidEpsilonIsConfigError) {
  const EnvironmentModel env(build_four_rooms(5, 5, 4), RewardKind::kExploration, 0.99);
  const TabularQ q(env.horizon(), env.num_states(), 5);
  EXPECT_THROW(rollout_epsilon_greedy(env, q, 1.5, 1, 0), ConfigError);
  EXPECT_THROW(rollout_epsilon_greedy(env, q, -0.1, 1, 0), ConfigError);
}

TEST(TrainOnline, ZeroIterationsReturnsUniformPolicy) {
  const EnvironmentModel env(build_four_rooms(5, 5, 6), RewardKind::kExploration, 0.99);
  OnlineConfig c = small_config();
  c.iterations = 0;
  const auto result = train_online(env, c, TabularQ(env.horizon(), env.num_states(), 5));
  EXPECT_EQ(result.policy, TimedPolicy::uniform(env.horizon(), env.num_states(), 5));
  ASSERT_EQ(result.metrics.size(), 1u);
  EXPECT_EQ(result.metrics[0].exploitability, exploitability(env, result.policy));
  EXPECT_TRUE(result.checkpoints.empty());
}

TEST(TrainOnline, ReducesExploitabilityAndRecordsCheckpoints) {
  const EnvironmentModel env(build_four_rooms(5, 5, 10), RewardKind::kExploration, 0.99);
  const auto result = train_online(env, small_config(), TabularQ(env.horizon(), env.num_states(), 5));
  ASSERT_EQ(result.metrics.size(), 11u);
  EXPECT_LT(result.metrics.back().exploitability, 0.5 * result.metrics.front().exploitability);
  EXPECT_NEAR(result.metrics.back().exploitability, exploitability(env, result.policy), 1e-9);
  ASSERT_EQ(result.checkpoints.count(1), 1u);
  EXPECT_NO_THROW(result.checkpoints.at(1).validate());
  for (std::size_t i = 1; i < result.metrics.size(); ++i) {
    EXPECT_EQ(result.metrics[i].iteration, static_cast<int>(i));
    EXPECT_GT(result.metrics[i].mean_loss, 0.0);
  }
}

TEST(TrainOnline, DeterministicGivenSeed) {
  const EnvironmentModel env(build_four_rooms(5, 5, 6), RewardKind::kNavigation, 0.99);
  OnlineConfig c = small_config();
  c.iterations = 3;
  const auto a = train_online(env, c, TabularQ(env.horizon(), env.num_states(), 5));
  const auto b = train_online(env, c, TabularQ(env.horizon(), env.num_states(), 5));
  EXPECT_EQ(a.policy, b.policy);
  EXPECT_EQ(a.q, b.q);
}

TEST(TrainOnline, FirstIterationCoversEveryTimestep) {
  // The first iteration collects update_steps * training_interval steps of
  // H-step episodes, so every timestep appears.
  const EnvironmentModel env(build_four_rooms(5, 5, 7), RewardKind::kExploration, 0.99);
  const OnlineConfig c = small_config();
  const long steps = static_cast<long>(c.update_steps) * c.training_interval;
  const auto episodes = static_cast<int>((steps + env.horizon() - 1) / env.horizon());
  const auto rollout = rollout_epsilon_greedy(env, TabularQ(env.horizon(), env.num_states(), 5), 1.0, episodes, 0);
  std::set<int> seen;
  for (const auto& tr : rollout) seen.insert(tr.t);
  EXPECT_EQ(seen.size(), static_cast<std::size_t>(env.horizon()));
}

TEST(TrainOnline, ShapeMismatchAndBadConfigRejected) {
  const EnvironmentModel env(build_four_rooms(5, 5, 6), RewardKind::kExploration, 0.99);
  EXPECT_THROW(train_online(env, small_config(), TabularQ(5, env.num_states(), 5)), ConfigError);
  OnlineConfig c = small_config();
  c.tau = 0.0;
  EXPECT_THROW(train_online(env, c, TabularQ(env.horizon(), env.num_states(), 5)), ConfigError);
  c = small_config();
  c.epsilon_finish = 1.2;
  EXPECT_THROW(train_online(env, c, TabularQ(env.horizon(), env.num_states(), 5)), ConfigError);
}

TEST(TrainOnline, WorksWithMlpQ) {
  const EnvironmentModel env(build_four_rooms(5, 5, 6), RewardKind::kExploration, 0.99);
  OnlineConfig c = small_config();
  c.iterations = 2;
  c.update_steps = 50;
  const auto result = train_online(env, c, MlpQ(env.horizon(), 5, grid_state_features(env), 16, 2, 1));
  EXPECT_NO_THROW(result.policy.validate());
  EXPECT_EQ(result.metrics.size(), 3u);
}
