#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "offmmd/common.hpp"

namespace offmmd {

/// Time-indexed stochastic policy pi_t(a|s), t = 0..H-1, stored densely.
class TimedPolicy {
 public:
  TimedPolicy() = default;
  TimedPolicy(int horizon, int num_states, int num_actions)
      : horizon_(horizon),
        num_states_(num_states),
        num_actions_(num_actions),
        probs_(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0) {
    if (horizon < 1 || num_states < 1 || num_actions < 1) {
      throw ValidationError("TimedPolicy: dimensions must be positive");
    }
  }

  static TimedPolicy uniform(int horizon, int num_states, int num_actions) {
    TimedPolicy pi(horizon, num_states, num_actions);
    std::fill(pi.probs_.begin(), pi.probs_.end(), 1.0 / num_actions);
    return pi;
  }

  /// Deterministic policy from one action index per (t, s).
  static TimedPolicy deterministic(int horizon, int num_states, int num_actions,
                                   std::span<const int> actions) {
    TimedPolicy pi(horizon, num_states, num_actions);
    if (actions.size() != static_cast<std::size_t>(horizon) * num_states) {
      throw ValidationError("TimedPolicy::deterministic: wrong action count");
    }
    for (int t = 0; t < horizon; ++t) {
      for (int s = 0; s < num_states; ++s) {
        const int a = actions[static_cast<std::size_t>(t) * num_states + s];
        if (a < 0 || a >= num_actions) {
          throw ValidationError("TimedPolicy::deterministic: action out of range");
        }
        pi.row(t, s)[static_cast<std::size_t>(a)] = 1.0;
      }
    }
    return pi;
  }

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  std::span<double> row(int t, int s) {
    return {probs_.data() + offset(t, s), static_cast<std::size_t>(num_actions_)};
  }
  std::span<const double> row(int t, int s) const {
    return {probs_.data() + offset(t, s), static_cast<std::size_t>(num_actions_)};
  }
  double prob(int t, int s, int a) const { return probs_[offset(t, s) + a]; }

  std::span<const double> data() const { return probs_; }
  std::span<double> data() { return probs_; }

  bool same_shape(const TimedPolicy& other) const {
    return horizon_ == other.horizon_ && num_states_ == other.num_states_ &&
           num_actions_ == other.num_actions_;
  }

  /// Throws ValidationError unless every row lies on the simplex.
  void validate(double tol = kSimplexTolerance) const {
    if (probs_.empty()) throw ValidationError("TimedPolicy: empty policy");
    for (int t = 0; t < horizon_; ++t) {
      for (int s = 0; s < num_states_; ++s) {
        double total = 0.0;
        for (double p : row(t, s)) {
          if (!(p >= 0.0) || !std::isfinite(p)) {
            throw ValidationError("TimedPolicy: negative or non-finite entry at t=" +
                                  std::to_string(t) + " s=" + std::to_string(s));
          }
          total += p;
        }
        if (std::abs(total - 1.0) > tol) {
          throw ValidationError("TimedPolicy: row t=" + std::to_string(t) +
                                " s=" + std::to_string(s) + " sums to " +
                                std::to_string(total));
        }
      }
    }
  }

  /// Largest absolute elementwise difference.
  double max_abs_diff(const TimedPolicy& other) const {
    if (!same_shape(other)) throw ValidationError("TimedPolicy: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      m = std::max(m, std::abs(probs_[i] - other.probs_[i]));
    }
    return m;
  }

  bool operator==(const TimedPolicy&) const = default;

 private:
  std::size_t offset(int t, int s) const {
    return (static_cast<std::size_t>(t) * num_states_ + s) * num_actions_;
  }

  int horizon_ = 0;
  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<double> probs_;
};

/// softmax(values / tau) written into `out`, with max subtraction.
inline void softmax_row(std::span<const double> values, double tau, std::span<double> out) {
  double m = values[0];
  for (double v : values) m = std::max(m, v);
  double total = 0.0;
  for (std::size_t a = 0; a < values.size(); ++a) {
    out[a] = std::exp((values[a] - m) / tau);
    total += out[a];
  }
  for (double& p : out) p /= total;
}

/// clip(ln p, floor, 0)
inline double clipped_log(double p, double floor) {
  if (!(p > 0.0)) return floor;
  return std::clamp(std::log(p), floor, 0.0);
}

}  // namespace offmmd
