#pragma once

#include <cmath>
#include <concepts>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "offmmd/common.hpp"
#include "offmmd/policy.hpp"

namespace offmmd {

/// Anything that can price a (t, s, a) against a population distribution.
/// Offline training only ever sees this much of a game.
template <class G>
concept RewardModel = requires(const G& g, int t, int s, int a, std::span<const double> mu) {
  { g.num_states() } -> std::convertible_to<int>;
  { g.num_actions() } -> std::convertible_to<int>;
  { g.horizon() } -> std::convertible_to<int>;
  { g.gamma() } -> std::convertible_to<double>;
  { g.reward(t, s, a, mu) } -> std::convertible_to<double>;
};

/// A finite-horizon mean-field game with mean-field-independent dynamics.
template <class G>
concept MeanFieldGame = RewardModel<G> && requires(const G& g, int s, int a) {
  { g.initial_distribution() } -> std::convertible_to<std::span<const double>>;
  { g.transitions(s, a) } -> std::convertible_to<std::span<const Successor>>;
};

/// Draws s' from a kernel row. Deterministic rows consume no randomness.
inline int sample_successor(std::span<const Successor> row, Rng& rng) {
  if (row.size() == 1) return row.front().next;
  const double u = uniform01(rng);
  double acc = 0.0;
  for (const auto& succ : row) {
    acc += succ.prob;
    if (u < acc) return succ.next;
  }
  return row.back().next;
}

/// Sequence mu_0..mu_H of distributions over states.
class MeanFieldFlow {
 public:
  MeanFieldFlow() = default;
  MeanFieldFlow(int horizon, int num_states)
      : horizon_(horizon),
        num_states_(num_states),
        values_(static_cast<std::size_t>(horizon + 1) * num_states, 0.0) {}

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }

  std::span<double> at(int t) {
    return {values_.data() + static_cast<std::size_t>(t) * num_states_,
            static_cast<std::size_t>(num_states_)};
  }
  std::span<const double> at(int t) const {
    return {values_.data() + static_cast<std::size_t>(t) * num_states_,
            static_cast<std::size_t>(num_states_)};
  }
  double operator()(int t, int s) const {
    return values_[static_cast<std::size_t>(t) * num_states_ + s];
  }

  std::span<const double> data() const { return values_; }

  void validate(double tol = kSimplexTolerance) const {
    for (int t = 0; t <= horizon_; ++t) {
      double total = 0.0;
      for (double v : at(t)) {
        if (!(v >= 0.0)) throw ValidationError("MeanFieldFlow: negative mass at t=" + std::to_string(t));
        total += v;
      }
      if (std::abs(total - 1.0) > tol) {
        throw ValidationError("MeanFieldFlow: mu_" + std::to_string(t) + " sums to " +
                              std::to_string(total));
      }
    }
  }

  bool operator==(const MeanFieldFlow&) const = default;

 private:
  int horizon_ = 0;
  int num_states_ = 0;
  std::vector<double> values_;
};

using RewardFunction = std::function<double(int t, int s, int a, std::span<const double> mu)>;

/// Explicit tabular game: arbitrary kernel, initial distribution and reward
/// callback. Used for small analytic instances and randomized checks.
class TabularGame {
 public:
  TabularGame(int num_states, int num_actions, int horizon, double gamma,
              std::vector<double> mu0, std::vector<std::vector<Successor>> kernel,
              RewardFunction reward)
      : num_states_(num_states),
        num_actions_(num_actions),
        horizon_(horizon),
        gamma_(gamma),
        mu0_(std::move(mu0)),
        kernel_(std::move(kernel)),
        reward_(std::move(reward)) {
    if (num_states < 1 || num_actions < 1) throw ConfigError("TabularGame: empty state or action set");
    if (horizon < 1) throw ConfigError("TabularGame: horizon must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("TabularGame: gamma out of range");
    if (mu0_.size() != static_cast<std::size_t>(num_states)) throw ConfigError("TabularGame: mu0 size");
    if (kernel_.size() != static_cast<std::size_t>(num_states) * num_actions) {
      throw ConfigError("TabularGame: kernel must have one row per (s, a)");
    }
    double mass = 0.0;
    for (double p : mu0_) {
      if (p < 0.0) throw ConfigError("TabularGame: negative mu0 entry");
      mass += p;
    }
    if (std::abs(mass - 1.0) > 1e-12) throw ConfigError("TabularGame: mu0 does not sum to 1");
    for (const auto& row : kernel_) {
      double total = 0.0;
      for (const auto& succ : row) {
        if (succ.next < 0 || succ.next >= num_states || succ.prob < 0.0) {
          throw ConfigError("TabularGame: invalid successor");
        }
        total += succ.prob;
      }
      if (std::abs(total - 1.0) > 1e-12) throw ConfigError("TabularGame: kernel row does not sum to 1");
    }
  }

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int horizon() const { return horizon_; }
  double gamma() const { return gamma_; }
  std::span<const double> initial_distribution() const { return mu0_; }
  std::span<const Successor> transitions(int s, int a) const {
    return kernel_[static_cast<std::size_t>(s) * num_actions_ + a];
  }
  double reward(int t, int s, int a, std::span<const double> mu) const { return reward_(t, s, a, mu); }

 private:
  int num_states_;
  int num_actions_;
  int horizon_;
  double gamma_;
  std::vector<double> mu0_;
  std::vector<std::vector<Successor>> kernel_;
  RewardFunction reward_;
};

/// r(t, s, a, mu_t) materialized for a fixed flow.
class RewardTable {
 public:
  RewardTable() = default;
  RewardTable(int horizon, int num_states, int num_actions)
      : horizon_(horizon),
        num_states_(num_states),
        num_actions_(num_actions),
        values_(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0) {}

  template <RewardModel G>
  static RewardTable build(const G& game, const MeanFieldFlow& mu) {
    RewardTable table(game.horizon(), game.num_states(), game.num_actions());
    for (int t = 0; t < game.horizon(); ++t) {
      const auto mu_t = mu.at(t);
      for (int s = 0; s < game.num_states(); ++s) {
        for (int a = 0; a < game.num_actions(); ++a) {
          table.values_[table.index(t, s, a)] = game.reward(t, s, a, mu_t);
        }
      }
    }
    return table;
  }

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  double operator()(int t, int s, int a) const { return values_[index(t, s, a)]; }
  double& operator()(int t, int s, int a) { return values_[index(t, s, a)]; }

 private:
  std::size_t index(int t, int s, int a) const {
    return (static_cast<std::size_t>(t) * num_states_ + s) * num_actions_ + a;
  }

  int horizon_ = 0;
  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<double> values_;
};

/// Exact mean-field flow induced by `pi` from the game's initial distribution:
/// mu_{t+1}(s') = sum_s sum_a p(s'|s,a) pi_t(a|s) mu_t(s).
template <MeanFieldGame G>
MeanFieldFlow propagate_flow(const G& game, const TimedPolicy& pi) {
  if (pi.horizon() != game.horizon() || pi.num_states() != game.num_states() ||
      pi.num_actions() != game.num_actions()) {
    throw ValidationError("propagate_flow: policy shape does not match the game");
  }
  pi.validate();
  MeanFieldFlow flow(game.horizon(), game.num_states());
  const auto mu0 = game.initial_distribution();
  std::copy(mu0.begin(), mu0.end(), flow.at(0).begin());
  for (int t = 0; t < game.horizon(); ++t) {
    const auto cur = flow.at(t);
    auto next = flow.at(t + 1);
    for (int s = 0; s < game.num_states(); ++s) {
      if (cur[s] == 0.0) continue;
      const auto probs = pi.row(t, s);
      for (int a = 0; a < game.num_actions(); ++a) {
        const double w = cur[s] * probs[a];
        if (w == 0.0) continue;
        for (const auto& succ : game.transitions(s, a)) next[succ.next] += w * succ.prob;
      }
    }
  }
  return flow;
}

}  // namespace offmmd
