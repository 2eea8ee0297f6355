#include <gtest/gtest.h>

#include <cmath>

#include "offmmd/offmmd.hpp"
#include "support.hpp"

using namespace offmmd;

namespace {

int state_at(const EnvironmentModel& env, int x, int y) { return env.state_of({x, y}); }

int step(const EnvironmentModel& env, int s, Action a) {
  const auto row = env.transitions(s, static_cast<int>(a));
  EXPECT_EQ(row.size(), 1u);
  return row.front().next;
}

}  // namespace

TEST(FourRooms, PaperScaleLayout) {
  const GridSpec g = build_four_rooms(13, 13, 40);
  EXPECT_EQ(g.horizon, 40);
  EXPECT_EQ(g.doors.size(), 4u);
  const EnvironmentModel env(g, RewardKind::kExploration, 0.99);
  // 169 cells minus the 25-cell cross plus four doors.
  EXPECT_EQ(env.num_states(), 169 - 25 + 4);
  EXPECT_EQ(env.num_actions(), 5);
}

TEST(FourRooms, DeskScaleFreeCellCounts) {
  EXPECT_EQ(EnvironmentModel(build_four_rooms(9, 9, 20), RewardKind::kExploration, 0.9).num_states(), 68);
  EXPECT_EQ(EnvironmentModel(build_four_rooms(5, 5, 1), RewardKind::kExploration, 0.9).num_states(), 20);
}

TEST(FourRooms, RejectsInvalidDimensions) {
  EXPECT_THROW(build_four_rooms(4, 5, 10), ConfigError);
  EXPECT_THROW(build_four_rooms(6, 7, 10), ConfigError);
  EXPECT_THROW(build_four_rooms(3, 3, 10), ConfigError);
  EXPECT_THROW(build_four_rooms(5, 5, 0), ConfigError);
}

TEST(FourRooms, UpFromStartStays) {
  const EnvironmentModel env(build_four_rooms(5, 5, 1), RewardKind::kExploration, 0.9);
  const int start = state_at(env, 0, 0);
  EXPECT_EQ(step(env, start, Action::kUp), start);
  EXPECT_EQ(step(env, start, Action::kLeft), start);
  EXPECT_EQ(step(env, start, Action::kRight), state_at(env, 1, 0));
  EXPECT_EQ(env.initial_distribution()[static_cast<std::size_t>(start)], 1.0);
}

TEST(FourRooms, WallsBlockMovesAndDoorsConnect) {
  const GridSpec g = build_four_rooms(9, 9, 5);
  const EnvironmentModel env(g, RewardKind::kExploration, 0.9);
  // Column 4 is the vertical wall; (3, 0) cannot step right.
  EXPECT_EQ(step(env, state_at(env, 3, 0), Action::kRight), state_at(env, 3, 0));
  for (const Cell& d : g.doors) EXPECT_TRUE(g.is_free(d));
  EXPECT_TRUE(g.is_wall({4, 4}));
}

TEST(FourRooms, TransitionRowsAreStochastic) {
  for (double slip : {0.0, 0.2}) {
    const EnvironmentModel env(build_four_rooms(9, 9, 5), RewardKind::kNavigation, 0.9, slip);
    for (int s = 0; s < env.num_states(); ++s) {
      for (int a = 0; a < env.num_actions(); ++a) {
        double total = 0.0;
        for (const auto& succ : env.transitions(s, a)) {
          EXPECT_GE(succ.prob, 0.0);
          total += succ.prob;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
      }
    }
  }
}

TEST(FourRooms, SlipSendsMassSideways) {
  const EnvironmentModel env(build_four_rooms(9, 9, 5), RewardKind::kExploration, 0.9, 0.2);
  const int s = state_at(env, 1, 1);
  std::map<int, double> probs;
  for (const auto& succ : env.transitions(s, static_cast<int>(Action::kDown))) probs[succ.next] += succ.prob;
  EXPECT_NEAR(probs[state_at(env, 1, 2)], 0.8, 1e-15);
  EXPECT_NEAR(probs[state_at(env, 0, 1)], 0.1, 1e-15);
  EXPECT_NEAR(probs[state_at(env, 2, 1)], 0.1, 1e-15);
}

TEST(AsciiMap, ParsesLayoutAndRoundTrips) {
  const std::string text =
      "S..#...\n"
      "...D...\n"
      "...#..T\n";
  const GridSpec g = parse_ascii_map(text, 7);
  EXPECT_EQ(g.width, 7);
  EXPECT_EQ(g.height, 3);
  EXPECT_EQ(g.start, (Cell{0, 0}));
  EXPECT_EQ(g.target, (Cell{6, 2}));
  EXPECT_TRUE(g.is_wall({3, 0}));
  EXPECT_TRUE(g.is_free({3, 1}));
  const GridSpec again = parse_ascii_map(g.to_ascii(), 7);
  EXPECT_EQ(again.walls, g.walls);
  EXPECT_EQ(again.start, g.start);
  EXPECT_EQ(again.target, g.target);
}

TEST(AsciiMap, RejectsBrokenMaps) {
  EXPECT_THROW(parse_ascii_map("", 3), ConfigError);
  EXPECT_THROW(parse_ascii_map("S..\n..\n", 3), ConfigError);
  EXPECT_THROW(parse_ascii_map("...\n...\n", 3), ConfigError);
  EXPECT_THROW(parse_ascii_map("S.x\n", 3), ConfigError);
  // Disconnected right part.
  EXPECT_THROW(parse_ascii_map("S#.\n.#.\n", 3), ConfigError);
  // Start on a wall is impossible to express; target enclosed is caught by connectivity.
  EXPECT_THROW(parse_ascii_map("S.#T\n", 3), ConfigError);
}

TEST(Reward, ExplorationAnchors) {
  const EnvironmentModel env(build_four_rooms(5, 5, 3), RewardKind::kExploration, 0.9);
  std::vector<double> mu(static_cast<std::size_t>(env.num_states()), 0.0);
  mu[0] = 1.0;
  EXPECT_EQ(reward(env, 0, 0, mu), 0.0);
  mu[0] = std::exp(-2.0);
  EXPECT_NEAR(reward(env, 0, 4, mu), 2.0, 1e-12);
  mu[1] = 0.0;
  EXPECT_NEAR(reward(env, 1, 0, mu), -std::log(kDensityFloor), 1e-9);
  EXPECT_TRUE(std::isfinite(reward(env, 1, 0, mu)));
}

TEST(Reward, NavigationAtTargetStayingIsZero) {
  const EnvironmentModel env(build_four_rooms(5, 5, 3), RewardKind::kNavigation, 0.9);
  const int target = env.state_of(env.grid().target);
  std::vector<double> mu(static_cast<std::size_t>(env.num_states()), 0.0);
  mu[static_cast<std::size_t>(target)] = 1.0;
  EXPECT_EQ(reward(env, target, static_cast<int>(Action::kStay), mu), 0.0);
  // Moving while crowded costs the density.
  EXPECT_NEAR(reward(env, target, static_cast<int>(Action::kUp), mu), -1.0, 1e-15);
}

TEST(Reward, NavigationDistanceIsNormalizedByDiagonal) {
  const EnvironmentModel env(build_four_rooms(5, 5, 3), RewardKind::kNavigation, 0.9);
  std::vector<double> mu(static_cast<std::size_t>(env.num_states()), 0.0);
  const int start = env.state_of({0, 0});
  mu[static_cast<std::size_t>(start)] = 1.0;
  // Start is exactly one diagonal away from the target.
  EXPECT_NEAR(reward(env, start, static_cast<int>(Action::kStay), mu), -1.0, 1e-15);
}

TEST(Flow, StayPolicyFixesTheFlow) {
  const EnvironmentModel env(build_four_rooms(9, 9, 6), RewardKind::kExploration, 0.9);
  std::vector<int> stay(static_cast<std::size_t>(env.horizon() * env.num_states()), static_cast<int>(Action::kStay));
  const TimedPolicy pi = TimedPolicy::deterministic(env.horizon(), env.num_states(), 5, stay);
  const MeanFieldFlow mu = propagate_flow(env, pi);
  for (int t = 0; t <= env.horizon(); ++t) {
    for (int s = 0; s < env.num_states(); ++s) EXPECT_EQ(mu(t, s), mu(0, s));
  }
}

TEST(Flow, TwoStateFlipAlternates) {
  const TabularGame game(2, 1, 4, 0.9, {1.0, 0.0}, {{{1, 1.0}}, {{0, 1.0}}},
                         [](int, int, int, std::span<const double>) { return 0.0; });
  const MeanFieldFlow mu = propagate_flow(game, TimedPolicy::uniform(4, 2, 1));
  for (int t = 0; t <= 4; ++t) {
    EXPECT_EQ(mu(t, 0), t % 2 == 0 ? 1.0 : 0.0);
    EXPECT_EQ(mu(t, 1), t % 2 == 0 ? 0.0 : 1.0);
  }
}

TEST(Flow, UniformPolicyOnSymmetricOpenGridKeepsUniform) {
  const GridSpec g = parse_ascii_map("S..\n...\n...\n", 2);
  std::vector<double> mu0(9, 1.0 / 9.0);
  const EnvironmentModel env(g, RewardKind::kExploration, 0.9);
  std::vector<std::vector<Successor>> kernel;
  for (int s = 0; s < 9; ++s) {
    for (int a = 0; a < 5; ++a) {
      const auto row = env.transitions(s, a);
      kernel.emplace_back(row.begin(), row.end());
    }
  }
  const TabularGame game(9, 5, 2, 0.9, mu0, kernel, [](int, int, int, std::span<const double>) { return 0.0; });
  const MeanFieldFlow mu = propagate_flow(game, TimedPolicy::uniform(2, 9, 5));
  // Every cell keeps 1/9: each cell has the same number of in-moves as out-moves under wall bounces.
  for (int s = 0; s < 9; ++s) EXPECT_NEAR(mu(1, s), 1.0 / 9.0, 1e-15);
}

TEST(Flow, RejectsUnnormalizedPolicy) {
  const EnvironmentModel env(build_four_rooms(5, 5, 2), RewardKind::kExploration, 0.9);
  TimedPolicy pi = TimedPolicy::uniform(2, env.num_states(), 5);
  pi.row(1, 3)[0] = 0.5;
  EXPECT_THROW(propagate_flow(env, pi), ValidationError);
  EXPECT_THROW(propagate_flow(env, TimedPolicy::uniform(3, env.num_states(), 5)), ValidationError);
}

// Property: simplex preservation and per-step mass conservation over many seeds.
TEST(FlowProperty, SimplexPreservationRandomPolicies) {
  const EnvironmentModel env(build_four_rooms(9, 9, 12), RewardKind::kExploration, 0.9, 0.1);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const TimedPolicy pi = oracle::random_policy(seed, env.horizon(), env.num_states(), 5);
    const MeanFieldFlow mu = propagate_flow(env, pi);
    EXPECT_NO_THROW(mu.validate(1e-9));
    for (int t = 0; t < env.horizon(); ++t) {
      double a = 0.0, b = 0.0;
      for (double v : mu.at(t)) a += v;
      for (double v : mu.at(t + 1)) b += v;
      EXPECT_NEAR(a, b, 1e-12);
    }
  }
}

TEST(FlowProperty, WallCellsCarryNoMass) {
  const EnvironmentModel env(build_four_rooms(9, 9, 12), RewardKind::kExploration, 0.9);
  const MeanFieldFlow mu = propagate_flow(env, TimedPolicy::uniform(12, env.num_states(), 5));
  for (int t = 0; t <= 12; ++t) {
    const auto grid = to_grid(env, mu.at(t), 0.0);
    for (int y = 0; y < 9; ++y) {
      for (int x = 0; x < 9; ++x) {
        if (env.grid().is_wall({x, y})) {
          EXPECT_EQ(grid[static_cast<std::size_t>(y) * 9 + x], 0.0);
        }
      }
    }
  }
}

TEST(FlowProperty, ExplorationRewardIsBoundedByFloor) {
  const EnvironmentModel env(build_four_rooms(5, 5, 2), RewardKind::kExploration, 0.9);
  std::vector<double> mu(static_cast<std::size_t>(env.num_states()), 0.0);
  for (double d : {0.0, 1e-300, 1e-12, 1e-10, 0.5, 1.0}) {
    mu[0] = d;
    const double r = reward(env, 0, 0, mu);
    EXPECT_TRUE(std::isfinite(r));
    EXPECT_LE(r, -std::log(kDensityFloor) + 1e-12);
  }
}

TEST(Environment, FingerprintDependsOnConfiguration) {
  const EnvironmentModel a(build_four_rooms(9, 9, 20), RewardKind::kExploration, 0.99);
  const EnvironmentModel b(build_four_rooms(9, 9, 20), RewardKind::kExploration, 0.99);
  const EnvironmentModel c(build_four_rooms(9, 9, 20), RewardKind::kNavigation, 0.99);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_NE(a.fingerprint(), c.fingerprint());
  EXPECT_THROW(EnvironmentModel(build_four_rooms(5, 5, 2), RewardKind::kExploration, 1.0), ConfigError);
  EXPECT_THROW(reward_kind_from_string("racing"), ConfigError);
}
