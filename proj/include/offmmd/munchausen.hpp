#pragma once

#include <span>
#include <string>
#include <vector>

#include "offmmd/common.hpp"
#include "offmmd/game.hpp"
#include "offmmd/policy.hpp"
#include "offmmd/q_function.hpp"
#include "offmmd/tabular_q.hpp"

namespace offmmd {

struct MunchausenParams {
  double tau = 20.0;
  double alpha = 0.99;
  double gamma = 0.99;
  double log_floor = kDefaultLogPolicyFloor;
};

/// clip(ln pi_t(a|s), floor, 0) for a whole policy.
class LogPolicy {
 public:
  LogPolicy(const TimedPolicy& pi, double floor) : pi_(&pi), logs_(pi.data().size()) {
    const auto probs = pi.data();
    for (std::size_t i = 0; i < probs.size(); ++i) logs_[i] = clipped_log(probs[i], floor);
  }

  std::span<const double> row(int t, int s) const {
    const std::size_t n = static_cast<std::size_t>(pi_->num_actions());
    return {logs_.data() + (static_cast<std::size_t>(t) * pi_->num_states() + s) * n, n};
  }
  const TimedPolicy& policy() const { return *pi_; }

 private:
  const TimedPolicy* pi_;
  std::vector<double> logs_;
};

/// Regularized Bellman targets for a batch:
///   r(s,a,mu_t) + tau*alpha*ln pi(a|s)
///     + gamma * sum_a' pi_{t+1}(a'|s') [Qbar_{t+1}(s',a') - tau * ln pi_{t+1}(a'|s')]
/// with the bootstrap term dropped on the last timestep. `prev_pi` is the
/// policy whose mean field produced `rewards`; Qbar uses the target parameters.
template <QApproximator Q>
void munchausen_targets(const Q& q, const LogPolicy& log_pi, const RewardTable& rewards,
                        std::span<const Transition> batch, const MunchausenParams& params,
                        std::span<double> out) {
  const TimedPolicy& pi = log_pi.policy();
  const int horizon = pi.horizon();
  if (out.size() != batch.size()) throw DataError("munchausen_targets: output size mismatch");
  std::vector<double> next_q(static_cast<std::size_t>(q.num_actions()));
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto& tr = batch[k];
    if (tr.t < 0 || tr.t >= horizon) {
      throw DataError("munchausen_targets: timestep " + std::to_string(tr.t) + " outside [0, " +
                      std::to_string(horizon) + ")");
    }
    if (tr.state < 0 || tr.state >= pi.num_states() || tr.next_state < 0 ||
        tr.next_state >= pi.num_states() || tr.action < 0 || tr.action >= pi.num_actions()) {
      throw DataError("munchausen_targets: row " + std::to_string(k) + " is out of range");
    }
    double y = rewards(tr.t, tr.state, tr.action) +
               params.tau * params.alpha * log_pi.row(tr.t, tr.state)[static_cast<std::size_t>(tr.action)];
    if (tr.t + 1 < horizon) {
      q.target_values(tr.t + 1, tr.next_state, next_q);
      const auto probs = pi.row(tr.t + 1, tr.next_state);
      const auto logs = log_pi.row(tr.t + 1, tr.next_state);
      double expected = 0.0;
      for (std::size_t a = 0; a < next_q.size(); ++a) {
        expected += probs[a] * (next_q[a] - params.tau * logs[a]);
      }
      y += params.gamma * expected;
    }
    out[k] = y;
  }
}

template <QApproximator Q>
std::vector<double> munchausen_targets(const Q& q, const TimedPolicy& prev_pi,
                                       const RewardTable& rewards, std::span<const Transition> batch,
                                       const MunchausenParams& params) {
  const LogPolicy log_pi(prev_pi, params.log_floor);
  std::vector<double> out(batch.size());
  munchausen_targets(q, log_pi, rewards, batch, params, out);
  return out;
}

/// Model-based fixed point of the regularized operator for `prev_pi` against
/// `mu`, by backward induction. Returned with theta == theta_bar.
template <MeanFieldGame G>
TabularQ exact_munchausen_evaluation(const G& game, const MeanFieldFlow& mu,
                                     const TimedPolicy& prev_pi, const MunchausenParams& params) {
  const int horizon = game.horizon();
  const int ns = game.num_states();
  const int na = game.num_actions();
  const LogPolicy log_pi(prev_pi, params.log_floor);
  TabularQ q(horizon, ns, na);
  std::vector<double> soft_value(static_cast<std::size_t>(ns), 0.0);  // at t + 1
  for (int t = horizon - 1; t >= 0; --t) {
    const auto mu_t = mu.at(t);
    for (int s = 0; s < ns; ++s) {
      const auto logs = log_pi.row(t, s);
      for (int a = 0; a < na; ++a) {
        double future = 0.0;
        if (t + 1 < horizon) {
          for (const auto& succ : game.transitions(s, a)) future += succ.prob * soft_value[succ.next];
        }
        q.at(t, s, a) = game.reward(t, s, a, mu_t) + params.tau * params.alpha * logs[a] +
                        params.gamma * future;
      }
    }
    for (int s = 0; s < ns; ++s) {
      const auto probs = prev_pi.row(t, s);
      const auto logs = log_pi.row(t, s);
      double v = 0.0;
      for (int a = 0; a < na; ++a) v += probs[a] * (q.at(t, s, a) - params.tau * logs[a]);
      soft_value[static_cast<std::size_t>(s)] = v;
    }
  }
  q.sync_target();
  return q;
}

}  // namespace offmmd
