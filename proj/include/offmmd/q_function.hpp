#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "offmmd/common.hpp"
#include "offmmd/policy.hpp"

namespace offmmd {

/// Batch statistics of the conservative TD loss
///   eta * mean[logsumexp_a' Q(s,a') - Q(s,a)] + mean[(Q(s,a) - y)^2].
struct LossStats {
  double loss = 0.0;
  double td = 0.0;
  double regularizer = 0.0;
  double min_regularizer = std::numeric_limits<double>::infinity();
};

/// Common surface of the tabular and MLP value functions. Both hold online
/// parameters theta and frozen target parameters theta_bar; the target copy
/// only changes through sync_target().
template <class Q>
concept QApproximator = requires(Q q, const Q& cq, int t, int s, std::span<double> out,
                                 std::span<const Transition> batch, std::span<const double> y,
                                 double x, std::vector<double>& grad) {
  { cq.horizon() } -> std::convertible_to<int>;
  { cq.num_states() } -> std::convertible_to<int>;
  { cq.num_actions() } -> std::convertible_to<int>;
  cq.values(t, s, out);
  cq.target_values(t, s, out);
  q.sync_target();
  { cq.loss_and_gradient(batch, y, x, grad) } -> std::same_as<LossStats>;
  { q.update(batch, y, x, x) } -> std::same_as<LossStats>;
  { cq.parameters() } -> std::convertible_to<std::span<const double>>;
  { cq.target_parameters() } -> std::convertible_to<std::span<const double>>;
};

namespace detail {

inline void check_batch(std::span<const Transition> batch, std::span<const double> targets,
                        int horizon, int num_states, int num_actions) {
  if (batch.size() != targets.size()) {
    throw TrainingError("loss: batch has " + std::to_string(batch.size()) + " rows but " +
                        std::to_string(targets.size()) + " targets");
  }
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto& row = batch[k];
    if (row.t < 0 || row.t >= horizon || row.state < 0 || row.state >= num_states ||
        row.action < 0 || row.action >= num_actions) {
      throw DataError("loss: batch row " + std::to_string(k) + " is out of range");
    }
    if (!std::isfinite(targets[k])) {
      throw TrainingError("loss: non-finite target " + std::to_string(targets[k]) + " at row " +
                          std::to_string(k) + " (t=" + std::to_string(row.t) +
                          ", s=" + std::to_string(row.state) + ", a=" + std::to_string(row.action) + ")");
    }
  }
}

/// Adds one row's contribution to `stats` and writes d(row loss)/d(Q row) into
/// `dq` (unscaled by the batch size).
inline void row_loss(std::span<const double> qrow, int action, double target, double eta,
                     LossStats& stats, std::span<double> dq) {
  const double lse = log_sum_exp(qrow);
  const double reg = lse - qrow[static_cast<std::size_t>(action)];
  const double diff = qrow[static_cast<std::size_t>(action)] - target;
  stats.regularizer += reg;
  stats.td += diff * diff;
  stats.min_regularizer = std::min(stats.min_regularizer, reg);
  for (std::size_t a = 0; a < qrow.size(); ++a) dq[a] = eta * std::exp(qrow[a] - lse);
  dq[static_cast<std::size_t>(action)] += -eta + 2.0 * diff;
}

inline void finish_stats(LossStats& stats, std::size_t n, double eta) {
  if (n == 0) {
    stats = LossStats{};
    stats.min_regularizer = 0.0;
    return;
  }
  stats.td /= static_cast<double>(n);
  stats.regularizer /= static_cast<double>(n);
  stats.loss = eta * stats.regularizer + stats.td;
  if (!std::isfinite(stats.loss)) throw TrainingError("loss: non-finite loss value");
}

}  // namespace detail

/// Conservative TD loss of `q` on a batch, evaluated through the query
/// interface only (no gradients).
template <QApproximator Q>
LossStats cql_loss(const Q& q, std::span<const Transition> batch, std::span<const double> targets,
                   double eta) {
  detail::check_batch(batch, targets, q.horizon(), q.num_states(), q.num_actions());
  LossStats stats;
  std::vector<double> row(static_cast<std::size_t>(q.num_actions()));
  std::vector<double> scratch(row.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    q.values(batch[k].t, batch[k].state, row);
    detail::row_loss(row, batch[k].action, targets[k], eta, stats, scratch);
  }
  detail::finish_stats(stats, batch.size(), eta);
  return stats;
}

/// pi_t(.|s) = softmax(Q_t(s, .) / tau) for every (t, s).
template <QApproximator Q>
TimedPolicy softmax_policy(const Q& q, double tau) {
  if (!(tau > 0.0)) throw ConfigError("softmax_policy: temperature must be positive");
  TimedPolicy pi(q.horizon(), q.num_states(), q.num_actions());
  std::vector<double> row(static_cast<std::size_t>(q.num_actions()));
  for (int t = 0; t < q.horizon(); ++t) {
    for (int s = 0; s < q.num_states(); ++s) {
      q.values(t, s, row);
      softmax_row(row, tau, pi.row(t, s));
    }
  }
  return pi;
}

}  // namespace offmmd
