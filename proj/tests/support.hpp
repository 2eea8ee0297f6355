#pragma once

// Shared fixtures and independent reference implementations for the tests.
// The oracles here deliberately avoid the library's solver code paths.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "offmmd/offmmd.hpp"

namespace offmmd::oracle {

/// Random finite-horizon game with a mean-field-dependent reward
/// r = base(s, a) - crowd * mu(s).
inline TabularGame random_game(std::uint64_t seed, int ns, int na, int horizon, double gamma = 0.9,
                               double crowd = 1.0) {
  Rng rng(seed);
  std::vector<double> mu0(static_cast<std::size_t>(ns));
  double total = 0.0;
  for (double& p : mu0) total += (p = 0.1 + uniform01(rng));
  for (double& p : mu0) p /= total;
  std::vector<std::vector<Successor>> kernel;
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      std::vector<double> w(static_cast<std::size_t>(ns));
      double sum = 0.0;
      for (double& x : w) sum += (x = uniform01(rng) < 0.3 ? 0.0 : uniform01(rng));
      if (sum == 0.0) {
        w[static_cast<std::size_t>(s)] = 1.0;
        sum = 1.0;
      }
      std::vector<Successor> row;
      double acc = 0.0;
      for (int n = 0; n < ns; ++n) {
        if (w[static_cast<std::size_t>(n)] == 0.0) continue;
        row.push_back({n, w[static_cast<std::size_t>(n)] / sum});
        acc += row.back().prob;
      }
      row.back().prob += 1.0 - acc;
      kernel.push_back(std::move(row));
    }
  }
  std::vector<double> base(static_cast<std::size_t>(ns) * na);
  for (double& b : base) b = uniform01(rng);
  return TabularGame(ns, na, horizon, gamma, std::move(mu0), std::move(kernel),
                     [base, na, crowd](int, int s, int a, std::span<const double> mu) {
                       return base[static_cast<std::size_t>(s) * na + a] - crowd * mu[s];
                     });
}

inline TimedPolicy random_policy(std::uint64_t seed, int horizon, int ns, int na) {
  Rng rng(seed);
  TimedPolicy pi(horizon, ns, na);
  for (int t = 0; t < horizon; ++t) {
    for (int s = 0; s < ns; ++s) {
      auto row = pi.row(t, s);
      double sum = 0.0;
      for (double& p : row) sum += (p = 0.05 + uniform01(rng));
      for (double& p : row) p /= sum;
    }
  }
  return pi;
}

/// Q^pi_t(s, a) against a fixed flow, by the plain Bellman expectation.
template <MeanFieldGame G>
std::vector<double> policy_q(const G& game, const TimedPolicy& pi, const MeanFieldFlow& mu) {
  const int h = game.horizon(), ns = game.num_states(), na = game.num_actions();
  std::vector<double> q(static_cast<std::size_t>(h) * ns * na, 0.0);
  std::vector<double> v_next(static_cast<std::size_t>(ns), 0.0);
  for (int t = h - 1; t >= 0; --t) {
    std::vector<double> v(static_cast<std::size_t>(ns), 0.0);
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < na; ++a) {
        double future = 0.0;
        for (const auto& succ : game.transitions(s, a)) future += succ.prob * v_next[succ.next];
        const double val = game.reward(t, s, a, mu.at(t)) + game.gamma() * future;
        q[(static_cast<std::size_t>(t) * ns + s) * na + a] = val;
        v[static_cast<std::size_t>(s)] += pi.prob(t, s, a) * val;
      }
    }
    v_next = std::move(v);
  }
  return q;
}

/// J(pi, mu) by enumerating every trajectory of a deterministic timed policy.
template <MeanFieldGame G>
double deterministic_value(const G& game, const std::vector<int>& actions, const MeanFieldFlow& mu) {
  const int ns = game.num_states();
  // Forward occupancy under the fixed action table (independent of the flow).
  std::vector<double> occ(game.initial_distribution().begin(), game.initial_distribution().end());
  double value = 0.0, discount = 1.0;
  for (int t = 0; t < game.horizon(); ++t) {
    std::vector<double> next(static_cast<std::size_t>(ns), 0.0);
    for (int s = 0; s < ns; ++s) {
      if (occ[static_cast<std::size_t>(s)] == 0.0) continue;
      const int a = actions[static_cast<std::size_t>(t) * ns + s];
      value += discount * occ[static_cast<std::size_t>(s)] * game.reward(t, s, a, mu.at(t));
      for (const auto& succ : game.transitions(s, a)) {
        next[static_cast<std::size_t>(succ.next)] += occ[static_cast<std::size_t>(s)] * succ.prob;
      }
    }
    occ = std::move(next);
    discount *= game.gamma();
  }
  return value;
}

/// Maximum over all |A|^(|S| H) deterministic timed policies.
template <MeanFieldGame G>
double brute_force_best_value(const G& game, const MeanFieldFlow& mu) {
  const int cells = game.horizon() * game.num_states();
  std::vector<int> actions(static_cast<std::size_t>(cells), 0);
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    best = std::max(best, deterministic_value(game, actions, mu));
    int k = 0;
    while (k < cells && ++actions[static_cast<std::size_t>(k)] == game.num_actions()) {
      actions[static_cast<std::size_t>(k)] = 0;
      ++k;
    }
    if (k == cells) break;
  }
  return best;
}

/// Explicit-sum mirror descent: pi^{i+1} = softmax(sum_{j<=i} Q^j / tau), pi^1 uniform.
template <MeanFieldGame G>
std::vector<TimedPolicy> explicit_omd(const G& game, double tau, int iterations) {
  const int h = game.horizon(), ns = game.num_states(), na = game.num_actions();
  std::vector<TimedPolicy> stack{TimedPolicy::uniform(h, ns, na)};
  std::vector<double> sum(static_cast<std::size_t>(h) * ns * na, 0.0);
  for (int i = 0; i < iterations; ++i) {
    const TimedPolicy& pi = stack.back();
    const auto q = policy_q(game, pi, propagate_flow(game, pi));
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += q[k];
    TimedPolicy next(h, ns, na);
    for (int t = 0; t < h; ++t) {
      for (int s = 0; s < ns; ++s) {
        const std::size_t off = (static_cast<std::size_t>(t) * ns + s) * na;
        double m = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < na; ++a) m = std::max(m, sum[off + a] / tau);
        double z = 0.0;
        for (int a = 0; a < na; ++a) z += std::exp(sum[off + a] / tau - m);
        for (int a = 0; a < na; ++a) next.row(t, s)[a] = std::exp(sum[off + a] / tau - m) / z;
      }
    }
    stack.push_back(std::move(next));
  }
  return stack;
}

/// Munchausen recursion with exact evaluation: pi^{i+1} = softmax(Qtilde^i / tau).
template <MeanFieldGame G>
std::vector<TimedPolicy> munchausen_md(const G& game, double tau, double alpha, int iterations) {
  std::vector<TimedPolicy> stack{TimedPolicy::uniform(game.horizon(), game.num_states(), game.num_actions())};
  const MunchausenParams params{tau, alpha, game.gamma(), kDefaultLogPolicyFloor};
  for (int i = 0; i < iterations; ++i) {
    const TimedPolicy& pi = stack.back();
    const TabularQ q = exact_munchausen_evaluation(game, propagate_flow(game, pi), pi, params);
    stack.push_back(softmax_policy(q, tau));
  }
  return stack;
}

/// Two-state chain: action 0 stays, action 1 switches with probability 3/4.
inline TabularGame two_state_chain(int horizon) {
  std::vector<std::vector<Successor>> kernel{
      {{0, 1.0}}, {{1, 0.75}, {0, 0.25}}, {{1, 1.0}}, {{0, 0.75}, {1, 0.25}}};
  return TabularGame(2, 2, horizon, 0.9, {0.5, 0.5}, std::move(kernel),
                     [](int, int s, int a, std::span<const double> mu) { return (s == 1 ? 1.0 : 0.0) - mu[s] - 0.1 * a; });
}

/// Every trajectory of `game` under `pi`, each repeated in proportion to its
/// exact probability times `scale`. Probabilities must make the counts integral.
template <MeanFieldGame G>
TransitionDataset enumerated_dataset(const G& game, const TimedPolicy& pi, double scale) {
  TransitionDataset ds;
  ds.metadata.horizon = game.horizon();
  ds.metadata.num_states = game.num_states();
  ds.metadata.num_actions = game.num_actions();
  ds.metadata.gamma = game.gamma();
  ds.metadata.behavior = "enumerated";
  std::vector<Transition> path;
  std::uint32_t episode = 0;
  const std::function<void(int, int, double)> walk = [&](int t, int s, double prob) {
    if (t == game.horizon()) {
      const double reps = prob * scale;
      const long n = std::lround(reps);
      if (std::abs(reps - static_cast<double>(n)) > 1e-9) throw std::logic_error("non-integral count");
      for (long r = 0; r < n; ++r) {
        for (auto tr : path) {
          tr.episode = episode;
          ds.records.push_back({tr, 0.0});
        }
        ++episode;
      }
      return;
    }
    for (int a = 0; a < game.num_actions(); ++a) {
      const double pa = pi.prob(t, s, a);
      if (pa == 0.0) continue;
      for (const auto& succ : game.transitions(s, a)) {
        path.push_back({0, t, s, a, succ.next});
        walk(t + 1, succ.next, prob * pa * succ.prob);
        path.pop_back();
      }
    }
  };
  const auto mu0 = game.initial_distribution();
  for (int s = 0; s < game.num_states(); ++s) {
    if (mu0[s] > 0.0) walk(0, s, mu0[s]);
  }
  ds.metadata.episodes = static_cast<int>(episode);
  return ds;
}

}  // namespace offmmd::oracle
