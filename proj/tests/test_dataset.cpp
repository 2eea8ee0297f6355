#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "offmmd/offmmd.hpp"
#include "support.hpp"

using namespace offmmd;

namespace {

constexpr int kStay = 4;

EnvironmentModel small_env(RewardKind kind = RewardKind::kExploration, int horizon = 8) {
  return EnvironmentModel(build_four_rooms(5, 5, horizon), kind, 0.99);
}

std::vector<DatasetRecord> sorted_records(std::vector<DatasetRecord> records) {
  std::sort(records.begin(), records.end(), [](const DatasetRecord& a, const DatasetRecord& b) {
    const auto& x = a.transition;
    const auto& y = b.transition;
    return std::tie(x.episode, x.t) < std::tie(y.episode, y.t);
  });
  return records;
}

TransitionDataset concatenate(const TransitionDataset& a, const TransitionDataset& b) {
  TransitionDataset out = a;
  const auto offset = static_cast<std::uint32_t>(a.metadata.episodes);
  for (auto r : b.records) {
    r.transition.episode += offset;
    out.records.push_back(r);
  }
  out.metadata.episodes += b.metadata.episodes;
  return out;
}

}  // namespace

TEST(Collect, StayPolicyNeverMoves) {
  const EnvironmentModel env = small_env();
  const std::vector<int> stay(static_cast<std::size_t>(env.horizon()) * env.num_states(), kStay);
  const auto ds = collect(env, TimedPolicy::deterministic(env.horizon(), env.num_states(), 5, stay), 20, 1);
  for (const auto& r : ds.records) EXPECT_EQ(r.transition.next_state, r.transition.state);
}

TEST(Collect, EmpiricalMarginalsMatchExactFlow) {
  const EnvironmentModel env = small_env();
  const TimedPolicy pi = TimedPolicy::uniform(env.horizon(), env.num_states(), 5);
  const auto ds = collect(env, pi, 100000, 7);
  const auto stats = empirical_statistics(ds, env);
  const MeanFieldFlow mu = propagate_flow(env, pi);
  for (int t = 0; t < env.horizon(); ++t) {
    double tv = 0.0;
    for (int s = 0; s < env.num_states(); ++s) tv += std::abs(stats.state_marginal(t, s) - mu(t, s));
    EXPECT_LT(0.5 * tv, 0.01) << "t=" << t;
  }
}

TEST(Collect, DeterministicAndIntegral) {
  const EnvironmentModel env(build_four_rooms(5, 5, 6), RewardKind::kNavigation, 0.99, 0.1);
  const TimedPolicy pi = oracle::random_policy(3, env.horizon(), env.num_states(), 5);
  const auto a = collect(env, pi, 200, 11, "rand", env.fingerprint());
  const auto b = collect(env, pi, 200, 11, "rand", env.fingerprint());
  EXPECT_EQ(a, b);
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.metadata.episodes, 200);
  EXPECT_EQ(a.metadata.env_hash, env.fingerprint());
  EXPECT_NE(a, collect(env, pi, 200, 12, "rand", env.fingerprint()));
  EXPECT_THROW(collect(env, pi, 0, 1), ConfigError);
}

TEST(Collect, BehaviorRewardMatchesRecomputation) {
  const EnvironmentModel env = small_env(RewardKind::kNavigation);
  const TimedPolicy pi = oracle::random_policy(4, env.horizon(), env.num_states(), 5);
  const auto ds = collect(env, pi, 100, 2);
  const MeanFieldFlow mu = propagate_flow(env, pi);
  for (const auto& r : ds.records) {
    const auto& tr = r.transition;
    EXPECT_NEAR(r.reward, env.reward(tr.t, tr.state, tr.action, mu.at(tr.t)), 1e-12);
  }
}

TEST(Coverage, FullAndSingleRecord) {
  const EnvironmentModel env = small_env(RewardKind::kExploration, 30);
  const auto ds = collect(env, TimedPolicy::uniform(env.horizon(), env.num_states(), 5), 2000, 3);
  EXPECT_EQ(coverage(ds, env), 1.0);
  TransitionDataset one = ds;
  one.records.resize(1);
  EXPECT_DOUBLE_EQ(coverage(one, env), 1.0 / (env.num_states() * 5));
}

TEST(Quality, AnchorsAndMixture) {
  const EnvironmentModel env = small_env(RewardKind::kNavigation);
  const int h = env.horizon(), ns = env.num_states();
  const MeanFieldFlow uniform_flow = propagate_flow(env, TimedPolicy::uniform(h, ns, 5));
  const TimedPolicy expert = best_response(env, uniform_flow).policy;
  const auto ds_min = collect(env, TimedPolicy::uniform(h, ns, 5), 400, 1);
  const auto ds_exp = collect(env, expert, 400, 2);
  EXPECT_EQ(quality(ds_exp, ds_min, ds_exp), 1.0);
  EXPECT_EQ(quality(ds_min, ds_min, ds_exp), 0.0);
  EXPECT_NEAR(quality(concatenate(ds_min, ds_exp), ds_min, ds_exp), 0.5, 1e-12);
  EXPECT_THROW(quality(ds_exp, ds_min, ds_min), MetricError);
}

TEST(AverageReturn, DiscountedEpisodeMean) {
  TransitionDataset ds;
  ds.metadata = {"", "", 0, 2, 2, 1, 1, 0.5};
  ds.records = {{{0, 0, 0, 0, 0}, 1.0}, {{0, 1, 0, 0, 0}, 2.0}, {{1, 0, 0, 0, 0}, 3.0}, {{1, 1, 0, 0, 0}, 4.0}};
  EXPECT_DOUBLE_EQ(average_return(ds), 0.5 * ((1.0 + 0.5 * 2.0) + (3.0 + 0.5 * 4.0)));
  EXPECT_THROW(average_return(TransitionDataset{}), MetricError);
}

TEST(Subsample, FullSizeIsPermutationOfEpisodes) {
  const EnvironmentModel env = small_env();
  const auto ds = collect(env, TimedPolicy::uniform(env.horizon(), env.num_states(), 5), 50, 5);
  const auto sub = subsample(ds, 50, 9);
  EXPECT_EQ(sorted_records(sub.records), sorted_records(ds.records));
  EXPECT_NE(sub.records, ds.records);
  EXPECT_NO_THROW(sub.validate());
}

TEST(Subsample, SingleEpisodeAndRangeErrors) {
  const EnvironmentModel env = small_env();
  const auto ds = collect(env, TimedPolicy::uniform(env.horizon(), env.num_states(), 5), 30, 5);
  const auto sub = subsample(ds, 1, 3);
  EXPECT_EQ(sub.records.size(), static_cast<std::size_t>(env.horizon()));
  EXPECT_NO_THROW(sub.validate());
  EXPECT_THROW(subsample(ds, 0, 1), DataError);
  EXPECT_THROW(subsample(ds, 31, 1), DataError);
}

TEST(Subsample, CoverageIsMonotoneAndEpisodesStayIntact) {
  const EnvironmentModel env = small_env();
  const auto ds = collect(env, oracle::random_policy(2, env.horizon(), env.num_states(), 5), 200, 5);
  const double full = coverage(ds, env);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (int k : {1, 3, 10, 50, 199}) {
      const auto sub = subsample(ds, k, seed);
      EXPECT_LE(coverage(sub, env), full);
      EXPECT_NO_THROW(sub.validate());
      EXPECT_EQ(sub, subsample(ds, k, seed));
    }
  }
}

TEST(EmpiricalStatistics, SingletonCounts) {
  TransitionDataset ds;
  ds.metadata = {"", "", 0, 1, 1, 3, 2, 0.9};
  ds.records = {{{0, 0, 2, 1, 0}, 0.0}};
  const auto st = empirical_statistics(ds, 3, 2);
  EXPECT_EQ(st.state_marginal(0, 2), 1.0);
  EXPECT_EQ(st.behavior(0, 2, 1), 1.0);
  EXPECT_EQ(st.behavior(0, 0, 1), 0.0);
  EXPECT_EQ(st.unique_pairs, 1);
  ASSERT_EQ(st.triples.size(), 1u);
  EXPECT_EQ(st.triples[0].count, 1);
}

TEST(EmpiricalStatistics, RowsSumToOneAndSupportBound) {
  const EnvironmentModel env = small_env();
  const auto ds = collect(env, oracle::random_policy(6, env.horizon(), env.num_states(), 5), 300, 5);
  const auto st = empirical_statistics(ds, env);
  EXPECT_LE(st.unique_pairs, static_cast<long>(env.num_states()) * 5);
  for (int t = 0; t < env.horizon(); ++t) {
    double total = 0.0;
    for (int s = 0; s < env.num_states(); ++s) {
      total += st.state_marginal(t, s);
      double row = 0.0;
      for (int a = 0; a < 5; ++a) row += st.behavior(t, s, a);
      if (st.state_marginal(t, s) > 0.0) {
        EXPECT_NEAR(row, 1.0, 1e-12);
      } else {
        EXPECT_EQ(row, 0.0);
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(EmpiricalStatistics, BehaviorEstimateConvergesOnPolicy) {
  const EnvironmentModel env = small_env(RewardKind::kExploration, 6);
  const TimedPolicy pi = oracle::random_policy(8, env.horizon(), env.num_states(), 5);
  const auto ds = collect(env, pi, 100000, 1);
  const auto st = empirical_statistics(ds, env);
  int checked = 0;
  for (int t = 0; t < env.horizon(); ++t) {
    for (int s = 0; s < env.num_states(); ++s) {
      if (st.state_marginal(t, s) * 100000 < 20000) continue;
      double tv = 0.0;
      for (int a = 0; a < 5; ++a) tv += std::abs(st.behavior(t, s, a) - pi.prob(t, s, a));
      EXPECT_LT(0.5 * tv, 0.01);
      ++checked;
    }
  }
  EXPECT_GE(checked, env.horizon());
}

TEST(EmpiricalStatistics, InitialMarginalIsStartFrequency) {
  const EnvironmentModel env = small_env();
  const auto ds = collect(env, TimedPolicy::uniform(env.horizon(), env.num_states(), 5), 100, 4);
  const auto st = empirical_statistics(ds, env);
  std::vector<int> starts(static_cast<std::size_t>(env.num_states()), 0);
  for (const auto& r : ds.records) {
    if (r.transition.t == 0) ++starts[static_cast<std::size_t>(r.transition.state)];
  }
  for (int s = 0; s < env.num_states(); ++s) EXPECT_EQ(st.state_marginal(0, s), starts[static_cast<std::size_t>(s)] / 100.0);
}

TEST(DatasetIo, TextAndBinaryRoundTripBitExact) {
  const EnvironmentModel env(build_four_rooms(5, 5, 6), RewardKind::kNavigation, 0.99, 0.1);
  auto ds = collect(env, oracle::random_policy(1, env.horizon(), env.num_states(), 5), 40, 3,
                    "label with = sign\nand newline", env.fingerprint());
  ds.records[0].reward = 1.0 / 3.0;
  ds.records[1].reward = -0.0;
  ds.records[2].reward = 1e-300;
  ds.records[3].reward = -123456.789e10;
  ds.metadata.seed = 0xffffffffffffffffULL;
  const auto dir = std::filesystem::temp_directory_path() / "offmmd_ds_test";
  std::filesystem::create_directories(dir);
  for (bool binary : {false, true}) {
    const std::string path = (dir / (binary ? "d.bin" : "d.txt")).string();
    save_dataset(ds, path, binary);
    const auto back = load_dataset(path);
    EXPECT_EQ(back, ds) << (binary ? "binary" : "text");
    EXPECT_TRUE(std::signbit(back.records[1].reward));
  }
  std::filesystem::remove_all(dir);
}

TEST(DatasetIo, CorruptInputsAreDataErrors) {
  const EnvironmentModel env = small_env();
  const auto ds = collect(env, TimedPolicy::uniform(env.horizon(), env.num_states(), 5), 3, 3);
  std::string text = dataset_to_text(ds);
  EXPECT_THROW(dataset_from_text("not a dataset\n"), DataError);
  EXPECT_THROW(dataset_from_text(text.substr(0, text.size() / 2)), DataError);
  std::string bin = dataset_to_binary(ds);
  EXPECT_THROW(dataset_from_binary(bin.substr(0, bin.size() - 3)), DataError);
  EXPECT_THROW(dataset_from_binary(bin + "x"), DataError);
  EXPECT_THROW(load_dataset("/nonexistent/path.txt"), DataError);
}

TEST(DatasetValidate, RejectsBrokenEpisodes) {
  const EnvironmentModel env = small_env();
  auto ds = collect(env, TimedPolicy::uniform(env.horizon(), env.num_states(), 5), 3, 3);
  auto broken = ds;
  broken.records[2].transition.t = 5;
  EXPECT_THROW(broken.validate(), DataError);
  broken = ds;
  broken.records[3].transition.state = (broken.records[2].transition.next_state + 1) % env.num_states();
  EXPECT_THROW(broken.validate(), DataError);
  broken = ds;
  broken.records[0].transition.action = 5;
  EXPECT_THROW(broken.validate(), DataError);
  broken = ds;
  broken.records.pop_back();
  EXPECT_THROW(broken.validate(), DataError);
}
