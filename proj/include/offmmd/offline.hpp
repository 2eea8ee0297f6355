#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "offmmd/common.hpp"
#include "offmmd/dataset.hpp"
#include "offmmd/game.hpp"
#include "offmmd/mis.hpp"
#include "offmmd/munchausen.hpp"
#include "offmmd/online.hpp"
#include "offmmd/policy.hpp"
#include "offmmd/q_function.hpp"

namespace offmmd {

/// Off-MMD settings. Defaults follow the reference table; the tabular step
/// size applies only when the Q-function is a table.
struct OffMmdConfig {
  int iterations = 100;
  int batches_per_iteration = 2000;
  int batch_size = 512;
  double learning_rate = 0.001;
  double tabular_learning_rate = 0.5;
  double tau = 20.0;
  double alpha = 0.99;
  double eta = 3.0;
  int target_update_interval = 200;
  double log_floor = kDefaultLogPolicyFloor;
  std::uint64_t seed = 0;
  MisOptions mis;

  void validate() const {
    if (iterations < 1) throw ConfigError("offline: iterations must be >= 1");
    // Zero batches is accepted: it degenerates to pure policy re-normalization.
    if (batches_per_iteration < 0) throw ConfigError("offline: batches_per_iteration must be >= 0");
    if (batch_size < 1) throw ConfigError("offline: batch_size must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("offline: tau must be positive");
    if (!(eta >= 0.0)) throw ConfigError("offline: eta must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("offline: alpha must lie in [0, 1]");
    if (target_update_interval < 1) throw ConfigError("offline: target_update_interval must be >= 1");
    if (!(learning_rate >= 0.0) || !(tabular_learning_rate >= 0.0)) {
      throw ConfigError("offline: learning rates must be >= 0");
    }
    if (!(log_floor < 0.0)) throw ConfigError("offline: log_floor must be negative");
  }
};

/// The only view of the game that offline training receives: sizes, discount
/// and the reward function. There is deliberately no access to transitions.
class RewardOracle {
 public:
  /// Borrows `game`, which must outlive the oracle.
  template <RewardModel G>
  explicit RewardOracle(const G& game)
      : num_states_(game.num_states()),
        num_actions_(game.num_actions()),
        horizon_(game.horizon()),
        gamma_(game.gamma()),
        reward_([&game](int t, int s, int a, std::span<const double> mu) {
          return game.reward(t, s, a, mu);
        }) {}

  RewardOracle(int num_states, int num_actions, int horizon, double gamma, RewardFunction reward)
      : num_states_(num_states),
        num_actions_(num_actions),
        horizon_(horizon),
        gamma_(gamma),
        reward_(std::move(reward)) {}

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int horizon() const { return horizon_; }
  double gamma() const { return gamma_; }
  double reward(int t, int s, int a, std::span<const double> mu) const { return reward_(t, s, a, mu); }

 private:
  int num_states_;
  int num_actions_;
  int horizon_;
  double gamma_;
  RewardFunction reward_;
};

/// Diagnostic hook: exploitability of a policy. Never feeds back into training.
using PolicyEvaluator = std::function<double(const TimedPolicy&)>;

struct OfflineIterationMetrics {
  int iteration = 0;
  double exploitability = std::numeric_limits<double>::quiet_NaN();
  double mean_loss = 0.0;
  double mean_regularizer = 0.0;
  double min_regularizer = 0.0;
  std::vector<double> mis_mass;  // raw estimator mass per t
};

template <QApproximator Q>
struct OfflineResult {
  TimedPolicy policy;
  Q q;
  std::vector<OfflineIterationMetrics> metrics;  // row 0 is the initial policy
  std::vector<std::string> warnings;
};

namespace detail {

/// Uniform batches over record indices: without replacement inside a batch
/// when n <= size, with replacement otherwise. The permutation persists
/// between calls so a draw costs O(n).
class BatchSampler {
 public:
  BatchSampler(std::size_t size, std::uint64_t seed) : order_(size), rng_(seed) {
    for (std::size_t i = 0; i < size; ++i) order_[i] = i;
  }

  void draw(std::size_t n, std::vector<std::size_t>& out) {
    out.resize(n);
    const std::size_t size = order_.size();
    if (n > size) {
      for (auto& idx : out) idx = static_cast<std::size_t>(uniform_index(rng_, size));
      return;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng_, size - i));
      std::swap(order_[i], order_[j]);
      out[i] = order_[i];
    }
  }

 private:
  std::vector<std::size_t> order_;
  Rng rng_;
};

}  // namespace detail

/// Offline mirror descent: each iteration estimates the current policy's
/// mean field from the data, relabels rewards with it, fits the regularized
/// Q-function with conservative steps, then sets pi <- softmax(Q / tau).
template <QApproximator Q>
OfflineResult<Q> train_offline(const RewardOracle& oracle, const TransitionDataset& ds,
                               const OffMmdConfig& config, Q q, const PolicyEvaluator& evaluator = {}) {
  config.validate();
  if (ds.records.empty()) throw DataError("train_offline: empty dataset");
  if (ds.metadata.horizon != oracle.horizon()) {
    throw DataError("train_offline: dataset horizon does not match the reward model");
  }
  if (q.horizon() != oracle.horizon() || q.num_states() != oracle.num_states() ||
      q.num_actions() != oracle.num_actions()) {
    throw ConfigError("train_offline: Q-function shape does not match the reward model");
  }
  const EmpiricalStatistics stats = empirical_statistics(ds, oracle.num_states(), oracle.num_actions());
  const std::vector<Transition> records = ds.transitions();

  OfflineResult<Q> result{TimedPolicy::uniform(oracle.horizon(), oracle.num_states(), oracle.num_actions()),
                          std::move(q), {}, {}};
  for (int t = 0; t < stats.horizon; ++t) {
    if (stats.step_count[static_cast<std::size_t>(t)] == 0) {
      result.warnings.push_back("train_offline: no records at t=" + std::to_string(t));
    }
  }
  const auto evaluate = [&](const TimedPolicy& pi) {
    return evaluator ? evaluator(pi) : std::numeric_limits<double>::quiet_NaN();
  };
  {
    OfflineIterationMetrics first;
    first.exploitability = evaluate(result.policy);
    result.metrics.push_back(std::move(first));
  }

  const MunchausenParams mparams{config.tau, config.alpha, oracle.gamma(), config.log_floor};
  const double lr = step_size_for<Q>(config.learning_rate, config.tabular_learning_rate);
  detail::BatchSampler sampler(records.size(), derive_seed(config.seed, 0x0ff11e5ULL));
  std::vector<std::size_t> indices;
  std::vector<Transition> batch;
  std::vector<double> targets;
  long updates = 0;

  for (int it = 1; it <= config.iterations; ++it) {
    const EstimatedFlow est = estimate_flow(stats, result.policy, config.mis);
    for (const auto& w : est.warnings) result.warnings.push_back("iteration " + std::to_string(it) + ": " + w);
    const RewardTable rewards = RewardTable::build(oracle, est.flow);
    const LogPolicy log_pi(result.policy, config.log_floor);

    OfflineIterationMetrics m;
    m.iteration = it;
    m.mis_mass = est.raw_mass;
    m.min_regularizer = std::numeric_limits<double>::infinity();
    for (int b = 0; b < config.batches_per_iteration; ++b) {
      sampler.draw(static_cast<std::size_t>(config.batch_size), indices);
      batch.resize(indices.size());
      for (std::size_t k = 0; k < indices.size(); ++k) batch[k] = records[indices[k]];
      targets.resize(batch.size());
      LossStats ls;
      try {
        munchausen_targets(result.q, log_pi, rewards, batch, mparams, targets);
        ls = result.q.update(batch, targets, config.eta, lr);
      } catch (const TrainingError& e) {
        throw TrainingError("train_offline: iteration " + std::to_string(it) + ", batch " +
                            std::to_string(b) + ": " + e.what());
      }
      m.mean_loss += ls.loss;
      m.mean_regularizer += ls.regularizer;
      m.min_regularizer = std::min(m.min_regularizer, ls.min_regularizer);
      if (++updates % config.target_update_interval == 0) result.q.sync_target();
    }
    if (config.batches_per_iteration > 0) {
      m.mean_loss /= config.batches_per_iteration;
      m.mean_regularizer /= config.batches_per_iteration;
    } else {
      m.min_regularizer = 0.0;
    }
    result.policy = softmax_policy(result.q, config.tau);
    m.exploitability = evaluate(result.policy);
    result.metrics.push_back(std::move(m));
  }
  return result;
}

/// A candidate dataset for the eta sweep, tagged with its coverage.
struct SweepDataset {
  std::string id;
  double coverage = 0.0;
  const TransitionDataset* data = nullptr;
};

struct EtaSweepRow {
  double eta = 0.0;
  double coverage_bin = 0.0;
  std::string dataset_id;
  double final_exploitability = 0.0;
};

struct EtaSweepCell {
  double eta = 0.0;
  double coverage_bin = 0.0;
  int datasets = 0;
  double mean_final_exploitability = 0.0;
};

struct EtaSweepResult {
  std::vector<EtaSweepRow> rows;
  std::vector<EtaSweepCell> cells;  // eta-major
  std::vector<std::string> warnings;
};

/// Indices of the `k` datasets whose coverage is closest to `bin`; ties go to
/// the earlier entry in the pool.
inline std::vector<std::size_t> nearest_coverage(const std::vector<SweepDataset>& pool, double bin,
                                                 std::size_t k) {
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(pool[a].coverage - bin) < std::abs(pool[b].coverage - bin);
  });
  order.resize(std::min(k, order.size()));
  return order;
}

/// One training run per (eta, bin, dataset) over the datasets nearest each
/// coverage bin, reporting per-run finals and per-cell means.
template <class MakeQ>
EtaSweepResult run_eta_sweep(const RewardOracle& oracle, const std::vector<SweepDataset>& pool,
                             const std::vector<double>& etas, const std::vector<double>& bins,
                             const OffMmdConfig& base, MakeQ&& make_q, const PolicyEvaluator& evaluator,
                             std::size_t per_bin = 5) {
  if (pool.empty()) throw ConfigError("run_eta_sweep: empty dataset pool");
  if (etas.empty() || bins.empty()) throw ConfigError("run_eta_sweep: empty eta or bin list");
  if (!evaluator) throw ConfigError("run_eta_sweep: an evaluator is required");
  EtaSweepResult out;
  for (double bin : bins) {
    if (nearest_coverage(pool, bin, per_bin).size() < per_bin) {
      out.warnings.push_back("run_eta_sweep: only " + std::to_string(pool.size()) +
                             " datasets available for bin " + std::to_string(bin));
    }
  }
  for (double eta : etas) {
    for (double bin : bins) {
      EtaSweepCell cell{eta, bin, 0, 0.0};
      for (std::size_t idx : nearest_coverage(pool, bin, per_bin)) {
        OffMmdConfig cfg = base;
        cfg.eta = eta;
        const auto res = train_offline(oracle, *pool[idx].data, cfg, make_q(), evaluator);
        const double final = res.metrics.back().exploitability;
        out.rows.push_back({eta, bin, pool[idx].id, final});
        cell.mean_final_exploitability += final;
        ++cell.datasets;
      }
      cell.mean_final_exploitability /= cell.datasets;
      out.cells.push_back(cell);
    }
  }
  return out;
}

}  // namespace offmmd
