#pragma once

#include <vector>

#include "offmmd/common.hpp"
#include "offmmd/game.hpp"
#include "offmmd/policy.hpp"

namespace offmmd {

/// V_t(s) for t = 0..H (V_H = 0) and Q_t(s, a) for t = 0..H-1.
struct ValueTable {
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> v;
  std::vector<double> q;

  double value(int t, int s) const { return v[static_cast<std::size_t>(t) * num_states + s]; }
  double action_value(int t, int s, int a) const {
    return q[(static_cast<std::size_t>(t) * num_states + s) * num_actions + a];
  }
};

struct BestResponse {
  TimedPolicy policy;
  double value = 0.0;  // sum_s mu_0(s) V_0(s)
  ValueTable values;
};

namespace detail {

template <MeanFieldGame G>
void check_flow(const G& game, const MeanFieldFlow& mu) {
  if (mu.horizon() != game.horizon() || mu.num_states() != game.num_states()) {
    throw ValidationError("mean-field flow horizon/state count does not match the game");
  }
}

}  // namespace detail

/// J(pi, mu): expected discounted return of a representative agent following
/// `pi` against the fixed flow `mu`, by exact forward expectation.
template <MeanFieldGame G>
double evaluate_policy(const G& game, const TimedPolicy& pi, const MeanFieldFlow& mu) {
  detail::check_flow(game, mu);
  if (pi.horizon() != game.horizon() || pi.num_states() != game.num_states() ||
      pi.num_actions() != game.num_actions()) {
    throw ValidationError("evaluate_policy: policy horizon/shape does not match the game");
  }
  // The agent's own state marginal evolves exactly like the population flow
  // it would induce, since dynamics ignore the mean field.
  const MeanFieldFlow own = propagate_flow(game, pi);
  double total = 0.0;
  double discount = 1.0;
  for (int t = 0; t < game.horizon(); ++t) {
    const auto nu = own.at(t);
    const auto mu_t = mu.at(t);
    double step = 0.0;
    for (int s = 0; s < game.num_states(); ++s) {
      if (nu[s] == 0.0) continue;
      const auto probs = pi.row(t, s);
      double expected = 0.0;
      for (int a = 0; a < game.num_actions(); ++a) {
        if (probs[a] == 0.0) continue;
        expected += probs[a] * game.reward(t, s, a, mu_t);
      }
      step += nu[s] * expected;
    }
    total += discount * step;
    discount *= game.gamma();
  }
  return total;
}

/// Backward induction against a fixed flow. Ties go to the lowest action index.
template <MeanFieldGame G>
BestResponse best_response(const G& game, const MeanFieldFlow& mu) {
  detail::check_flow(game, mu);
  const int horizon = game.horizon();
  const int ns = game.num_states();
  const int na = game.num_actions();
  ValueTable table{horizon, ns, na,
                   std::vector<double>(static_cast<std::size_t>(horizon + 1) * ns, 0.0),
                   std::vector<double>(static_cast<std::size_t>(horizon) * ns * na, 0.0)};
  std::vector<int> greedy(static_cast<std::size_t>(horizon) * ns, 0);
  for (int t = horizon - 1; t >= 0; --t) {
    const auto mu_t = mu.at(t);
    const double* v_next = table.v.data() + static_cast<std::size_t>(t + 1) * ns;
    for (int s = 0; s < ns; ++s) {
      double best = 0.0;
      int best_a = 0;
      for (int a = 0; a < na; ++a) {
        double future = 0.0;
        for (const auto& succ : game.transitions(s, a)) future += succ.prob * v_next[succ.next];
        const double q = game.reward(t, s, a, mu_t) + game.gamma() * future;
        table.q[(static_cast<std::size_t>(t) * ns + s) * na + a] = q;
        if (a == 0 || q > best) {
          best = q;
          best_a = a;
        }
      }
      table.v[static_cast<std::size_t>(t) * ns + s] = best;
      greedy[static_cast<std::size_t>(t) * ns + s] = best_a;
    }
  }
  double value = 0.0;
  const auto mu0 = game.initial_distribution();
  for (int s = 0; s < ns; ++s) value += mu0[s] * table.value(0, s);
  return {TimedPolicy::deterministic(horizon, ns, na, greedy), value, std::move(table)};
}

/// max_pi' J(pi', phi(pi)) - J(pi, phi(pi)), always against the exact flow.
template <MeanFieldGame G>
double exploitability(const G& game, const TimedPolicy& pi) {
  const MeanFieldFlow mu = propagate_flow(game, pi);
  const BestResponse br = best_response(game, mu);
  return br.value - evaluate_policy(game, pi, mu);
}

}  // namespace offmmd
