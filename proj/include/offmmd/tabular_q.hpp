#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "offmmd/common.hpp"
#include "offmmd/q_function.hpp"

namespace offmmd {

/// Q_t(s, a) stored as a dense table, zero-initialized.
class TabularQ {
 public:
  TabularQ() = default;
  TabularQ(int horizon, int num_states, int num_actions)
      : horizon_(horizon),
        num_states_(num_states),
        num_actions_(num_actions),
        theta_(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0),
        target_(theta_) {
    if (horizon < 1 || num_states < 1 || num_actions < 1) {
      throw ConfigError("TabularQ: dimensions must be positive");
    }
  }

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  void values(int t, int s, std::span<double> out) const {
    const auto* p = theta_.data() + offset(t, s);
    std::copy(p, p + num_actions_, out.begin());
  }
  void target_values(int t, int s, std::span<double> out) const {
    const auto* p = target_.data() + offset(t, s);
    std::copy(p, p + num_actions_, out.begin());
  }
  std::span<const double> row(int t, int s) const {
    return {theta_.data() + offset(t, s), static_cast<std::size_t>(num_actions_)};
  }
  std::span<const double> target_row(int t, int s) const {
    return {target_.data() + offset(t, s), static_cast<std::size_t>(num_actions_)};
  }

  double& at(int t, int s, int a) { return theta_[offset(t, s) + a]; }
  double at(int t, int s, int a) const { return theta_[offset(t, s) + a]; }

  void sync_target() { target_ = theta_; }

  std::span<const double> parameters() const { return theta_; }
  std::span<const double> target_parameters() const { return target_; }
  std::span<double> mutable_parameters() { return theta_; }
  std::span<double> mutable_target_parameters() { return target_; }

  /// Exact gradient of the batch-mean loss with respect to the table.
  LossStats loss_and_gradient(std::span<const Transition> batch, std::span<const double> targets,
                              double eta, std::vector<double>& grad) const {
    detail::check_batch(batch, targets, horizon_, num_states_, num_actions_);
    grad.assign(theta_.size(), 0.0);
    LossStats stats;
    std::vector<double> dq(static_cast<std::size_t>(num_actions_));
    const double scale = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const auto& tr = batch[k];
      detail::row_loss(row(tr.t, tr.state), tr.action, targets[k], eta, stats, dq);
      double* g = grad.data() + offset(tr.t, tr.state);
      for (int a = 0; a < num_actions_; ++a) g[a] += scale * dq[static_cast<std::size_t>(a)];
    }
    detail::finish_stats(stats, batch.size(), eta);
    return stats;
  }

  /// One row-preconditioned gradient step. The gradient restricted to a
  /// visited row (t, s) is rescaled by N / (2 n_s), n_s being the number of
  /// batch rows at (t, s), so the TD part becomes p_a * (Q - mean target) and
  /// learning_rate = 1 with eta = 0 jumps to the per-cell target average.
  LossStats update(std::span<const Transition> batch, std::span<const double> targets, double eta,
                   double learning_rate) {
    detail::check_batch(batch, targets, horizon_, num_states_, num_actions_);
    const std::size_t rows = static_cast<std::size_t>(horizon_) * num_states_;
    if (row_count_.size() != rows) {
      row_count_.assign(rows, 0);
      row_lse_.assign(rows, 0.0);
      cell_count_.assign(theta_.size(), 0);
      cell_diff_.assign(theta_.size(), 0.0);
    }
    LossStats stats;
    touched_.clear();
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const auto& tr = batch[k];
      const std::size_t r = static_cast<std::size_t>(tr.t) * num_states_ + tr.state;
      if (row_count_[r]++ == 0) {
        touched_.push_back(r);
        row_lse_[r] = log_sum_exp({theta_.data() + r * num_actions_, static_cast<std::size_t>(num_actions_)});
      }
      const std::size_t cell = r * num_actions_ + tr.action;
      ++cell_count_[cell];
      const double diff = theta_[cell] - targets[k];
      cell_diff_[cell] += diff;
      const double reg = row_lse_[r] - theta_[cell];
      stats.regularizer += reg;
      stats.td += diff * diff;
      stats.min_regularizer = std::min(stats.min_regularizer, reg);
    }
    detail::finish_stats(stats, batch.size(), eta);
    std::vector<double> soft(static_cast<std::size_t>(num_actions_));
    for (std::size_t r : touched_) {
      double* q = theta_.data() + r * num_actions_;
      const double n = row_count_[r];
      if (learning_rate != 0.0) {
        if (eta != 0.0) softmax_row({q, static_cast<std::size_t>(num_actions_)}, 1.0, soft);
        for (int a = 0; a < num_actions_; ++a) {
          const std::size_t cell = r * num_actions_ + a;
          double g = cell_diff_[cell] / n;
          if (eta != 0.0) g += 0.5 * eta * (soft[static_cast<std::size_t>(a)] - cell_count_[cell] / n);
          q[a] -= learning_rate * g;
        }
      }
      row_count_[r] = 0;
      for (int a = 0; a < num_actions_; ++a) {
        cell_count_[r * num_actions_ + a] = 0;
        cell_diff_[r * num_actions_ + a] = 0.0;
      }
    }
    return stats;
  }

  bool operator==(const TabularQ& o) const {
    return horizon_ == o.horizon_ && num_states_ == o.num_states_ &&
           num_actions_ == o.num_actions_ && theta_ == o.theta_ && target_ == o.target_;
  }

 private:
  std::size_t offset(int t, int s) const {
    return (static_cast<std::size_t>(t) * num_states_ + s) * num_actions_;
  }

  int horizon_ = 0;
  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<double> theta_;
  std::vector<double> target_;
  // Scratch for update(); sized lazily.
  std::vector<int> row_count_;
  std::vector<double> row_lse_;
  std::vector<int> cell_count_;
  std::vector<double> cell_diff_;
  std::vector<std::size_t> touched_;
};

static_assert(QApproximator<TabularQ>);

}  // namespace offmmd
