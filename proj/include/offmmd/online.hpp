#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "offmmd/common.hpp"
#include "offmmd/exact_solver.hpp"
#include "offmmd/game.hpp"
#include "offmmd/munchausen.hpp"
#include "offmmd/policy.hpp"
#include "offmmd/q_function.hpp"
#include "offmmd/replay_buffer.hpp"
#include "offmmd/tabular_q.hpp"

namespace offmmd {

/// Online D-MOMD settings. Defaults are the reference values; `tabular_learning_rate`
/// is the step size used when the Q-function is a table.
struct OnlineConfig {
  int iterations = 100;
  int buffer_capacity = 100000;
  int batch_size = 256;
  int update_steps = 4000;
  double learning_rate = 0.001;
  double tabular_learning_rate = 0.5;
  double epsilon_start = 1.0;
  double epsilon_finish = 0.1;
  long epsilon_anneal_steps = 1000000;
  double tau = 20.0;
  double alpha = 0.99;
  int target_update_interval = 200;
  int training_interval = 10;
  double log_floor = kDefaultLogPolicyFloor;
  std::vector<int> checkpoint_iterations;  // empty: iterations / 10
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations < 0) throw ConfigError("online: iterations must be >= 0");
    if (buffer_capacity < 1 || batch_size < 1 || update_steps < 0) {
      throw ConfigError("online: buffer_capacity and batch_size must be >= 1, update_steps >= 0");
    }
    if (!(tau > 0.0)) throw ConfigError("online: tau must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("online: alpha must lie in [0, 1]");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_finish >= 0.0 && epsilon_finish <= 1.0)) {
      throw ConfigError("online: epsilon endpoints must lie in [0, 1]");
    }
    if (epsilon_anneal_steps < 0) throw ConfigError("online: epsilon_anneal_steps must be >= 0");
    if (target_update_interval < 1 || training_interval < 1) {
      throw ConfigError("online: target_update_interval and training_interval must be >= 1");
    }
    if (!(learning_rate >= 0.0) || !(tabular_learning_rate >= 0.0)) {
      throw ConfigError("online: learning rates must be >= 0");
    }
  }

  /// Linear anneal from epsilon_start to epsilon_finish over the first
  /// epsilon_anneal_steps environment steps.
  double epsilon_at(long env_step) const {
    if (epsilon_anneal_steps <= 0 || env_step >= epsilon_anneal_steps) return epsilon_finish;
    const double frac = static_cast<double>(env_step) / static_cast<double>(epsilon_anneal_steps);
    return epsilon_start + (epsilon_finish - epsilon_start) * frac;
  }
};

struct OnlineIterationMetrics {
  int iteration = 0;
  double exploitability = 0.0;
  double mean_loss = 0.0;
};

template <QApproximator Q>
struct OnlineResult {
  TimedPolicy policy;
  Q q;
  std::vector<OnlineIterationMetrics> metrics;  // row 0 is the initial policy
  std::map<int, TimedPolicy> checkpoints;
};

template <QApproximator Q>
double step_size_for(double learning_rate, double tabular_learning_rate) {
  if constexpr (std::is_same_v<Q, TabularQ>) {
    return tabular_learning_rate;
  } else {
    return learning_rate;
  }
}

namespace detail {

inline int greedy_action(std::span<const double> values) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(values.size()); ++a) {
    if (values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(best)]) best = a;
  }
  return best;
}

/// Simulates one episode of exactly H steps; `epsilon(step)` gives the
/// exploration rate for the k-th step of the episode.
template <MeanFieldGame G, QApproximator Q, class EpsilonFn, class Sink>
void run_episode(const G& game, const Q& q, std::uint32_t episode_id, Rng& rng,
                 EpsilonFn&& epsilon, Sink&& sink) {
  std::vector<double> values(static_cast<std::size_t>(game.num_actions()));
  int s = sample_index(game.initial_distribution(), uniform01(rng));
  for (int t = 0; t < game.horizon(); ++t) {
    int a;
    const double eps = epsilon(t);
    if (eps >= 1.0 || (eps > 0.0 && uniform01(rng) < eps)) {
      a = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(game.num_actions())));
    } else {
      q.values(t, s, values);
      a = greedy_action(values);
    }
    const int next = sample_successor(game.transitions(s, a), rng);
    sink(Transition{episode_id, t, s, a, next});
    s = next;
  }
}

}  // namespace detail

/// Epsilon-greedy episodes with respect to `q`. Episode k draws from its own
/// stream derive_seed(seed, k), so the output depends only on the arguments.
template <MeanFieldGame G, QApproximator Q>
std::vector<Transition> rollout_epsilon_greedy(const G& game, const Q& q, double epsilon,
                                               int episodes, std::uint64_t seed) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("rollout: epsilon must lie in [0, 1]");
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(episodes) * game.horizon());
  for (int e = 0; e < episodes; ++e) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(e)));
    detail::run_episode(game, q, static_cast<std::uint32_t>(e), rng, [&](int) { return epsilon; },
                        [&](const Transition& tr) { out.push_back(tr); });
  }
  return out;
}

/// Online Munchausen mirror descent with a replay buffer. Each iteration
/// computes the exact mean field of the current policy, relabels rewards
/// with it, interleaves epsilon-greedy collection with TD steps on the
/// regularized target, and finally sets pi <- softmax(Q / tau).
template <MeanFieldGame G, QApproximator Q>
OnlineResult<Q> train_online(const G& game, const OnlineConfig& config, Q q) {
  config.validate();
  if (q.horizon() != game.horizon() || q.num_states() != game.num_states() ||
      q.num_actions() != game.num_actions()) {
    throw ConfigError("train_online: Q-function shape does not match the game");
  }
  OnlineResult<Q> result{TimedPolicy::uniform(game.horizon(), game.num_states(), game.num_actions()),
                         std::move(q), {}, {}};
  result.metrics.push_back({0, exploitability(game, result.policy), 0.0});

  std::vector<int> checkpoint_iters = config.checkpoint_iterations;
  if (checkpoint_iters.empty() && config.iterations >= 10) checkpoint_iters.push_back(config.iterations / 10);

  const MunchausenParams mparams{config.tau, config.alpha, game.gamma(), config.log_floor};
  const double lr = step_size_for<Q>(config.learning_rate, config.tabular_learning_rate);
  ReplayBuffer<Transition> buffer(static_cast<std::size_t>(config.buffer_capacity));
  Rng batch_rng(derive_seed(config.seed, 0x5eedba7c4ULL));
  std::vector<Transition> batch;
  std::vector<double> targets;
  long env_steps = 0;
  long updates = 0;
  std::uint64_t episode_counter = 0;
  const long steps_per_iteration = static_cast<long>(config.update_steps) * config.training_interval;

  for (int it = 1; it <= config.iterations; ++it) {
    const MeanFieldFlow mu = propagate_flow(game, result.policy);
    const RewardTable rewards = RewardTable::build(game, mu);
    const LogPolicy log_pi(result.policy, config.log_floor);
    double loss_sum = 0.0;
    long loss_count = 0;
    long iter_steps = 0;
    while (iter_steps < steps_per_iteration) {
      Rng rng(derive_seed(config.seed, episode_counter));
      const long episode_start = env_steps;
      detail::run_episode(
          game, result.q, static_cast<std::uint32_t>(episode_counter), rng,
          [&](int t) { return config.epsilon_at(episode_start + t); },
          [&](const Transition& tr) {
            buffer.push(tr);
            ++env_steps;
            ++iter_steps;
            if (env_steps % config.training_interval != 0) return;
            buffer.sample(batch_rng, static_cast<std::size_t>(config.batch_size), batch);
            targets.resize(batch.size());
            munchausen_targets(result.q, log_pi, rewards, batch, mparams, targets);
            const LossStats stats = result.q.update(batch, targets, 0.0, lr);
            if (!std::isfinite(stats.loss)) {
              throw TrainingError("train_online: non-finite loss at iteration " + std::to_string(it));
            }
            loss_sum += stats.loss;
            ++loss_count;
            if (++updates % config.target_update_interval == 0) result.q.sync_target();
          });
      ++episode_counter;
    }
    result.policy = softmax_policy(result.q, config.tau);
    result.metrics.push_back(
        {it, exploitability(game, result.policy), loss_count ? loss_sum / loss_count : 0.0});
    if (std::find(checkpoint_iters.begin(), checkpoint_iters.end(), it) != checkpoint_iters.end()) {
      result.checkpoints.emplace(it, result.policy);
    }
  }
  return result;
}

}  // namespace offmmd
