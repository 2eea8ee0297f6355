#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "offmmd/common.hpp"
#include "offmmd/dataset.hpp"
#include "offmmd/game.hpp"
#include "offmmd/policy.hpp"

namespace offmmd {

struct MisOptions {
  /// Rescale each step onto the simplex; when false the raw recursion is kept.
  bool renormalize = true;
  /// Below this raw mass the previous step is carried forward.
  double min_mass = 1e-6;
  /// Cap on pi / pi_hat_beta. Infinity disables the cap.
  double max_weight = std::numeric_limits<double>::infinity();
  /// Condition the behavior estimate on (s, t) rather than s alone.
  bool time_conditioned_behavior = true;
};

/// Offline estimate of a policy's mean-field flow.
struct EstimatedFlow {
  MeanFieldFlow flow;               // normalized per options
  std::vector<std::uint8_t> mask;   // [t][s], 1 where the state got no weight
  std::vector<double> raw_mass;     // [t], pre-normalization sum
  std::vector<std::uint8_t> fallback;  // [t], 1 where mu_{t-1} was carried forward
  std::vector<std::string> warnings;

  bool masked(int t, int s) const {
    return mask[static_cast<std::size_t>(t) * flow.num_states() + s] != 0;
  }
};

/// Marginalized importance sampling, recursively per timestep:
///   mu_0 = d_hat_0
///   mu_{t+1}(s) = 1/N_t sum_{i: t_i = t} mu_t(s_i)/d_hat_t(s_i)
///                 * pi_t(a_i|s_i)/pi_hat_beta(a_i|s_i) * 1[s'_i = s].
/// Records are consumed through the aggregated (t, s, a, s') counts, which
/// makes the result independent of record order.
inline EstimatedFlow estimate_flow(const EmpiricalStatistics& stats, const TimedPolicy& pi,
                                   const MisOptions& options = {}) {
  const int horizon = stats.horizon;
  const int ns = stats.num_states;
  if (pi.horizon() != horizon || pi.num_states() != ns || pi.num_actions() != stats.num_actions) {
    throw ValidationError("estimate_flow: policy shape does not match the dataset statistics");
  }
  EstimatedFlow est{MeanFieldFlow(horizon, ns),
                    std::vector<std::uint8_t>(static_cast<std::size_t>(horizon + 1) * ns, 0),
                    std::vector<double>(static_cast<std::size_t>(horizon + 1), 0.0),
                    std::vector<std::uint8_t>(static_cast<std::size_t>(horizon + 1), 0),
                    {}};
  // `acc` holds count-weighted sums; dividing by `n` gives the raw estimate.
  // Normalizing the sums directly keeps unit-weight (on-policy) steps exact.
  const auto finish_step = [&](int t, const std::vector<double>& acc, double n) {
    double total = 0.0;
    for (double v : acc) total += v;
    const double mass = n > 0.0 ? total / n : 0.0;
    est.raw_mass[static_cast<std::size_t>(t)] = mass;
    auto out = est.flow.at(t);
    if (mass > options.min_mass || (t == 0 && mass > 0.0)) {
      const double denom = options.renormalize ? total : n;
      for (int s = 0; s < ns; ++s) out[s] = acc[static_cast<std::size_t>(s)] / denom;
    } else if (t > 0) {
      est.fallback[static_cast<std::size_t>(t)] = 1;
      est.warnings.push_back("estimate_flow: raw mass " + std::to_string(mass) + " at t=" +
                             std::to_string(t) + "; carrying mu_" + std::to_string(t - 1) + " forward");
      const auto prev = est.flow.at(t - 1);
      std::copy(prev.begin(), prev.end(), out.begin());
    } else {
      est.warnings.push_back("estimate_flow: no records at t=0");
    }
    for (int s = 0; s < ns; ++s) {
      est.mask[static_cast<std::size_t>(t) * ns + s] = out[s] == 0.0 ? 1 : 0;
    }
  };

  std::vector<double> acc(static_cast<std::size_t>(ns), 0.0);
  for (int s = 0; s < ns; ++s) {
    acc[static_cast<std::size_t>(s)] = static_cast<double>(stats.state_count[static_cast<std::size_t>(s)]);
  }
  finish_step(0, acc, static_cast<double>(stats.step_count[0]));

  std::size_t cursor = 0;
  for (int t = 0; t < horizon; ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const long n_t = stats.step_count[static_cast<std::size_t>(t)];
    const auto mu_t = est.flow.at(t);
    while (cursor < stats.triples.size() && stats.triples[cursor].t == t) {
      const auto& tc = stats.triples[cursor++];
      const double d = stats.state_marginal(t, tc.state);
      const double beta = options.time_conditioned_behavior ? stats.behavior(t, tc.state, tc.action)
                                                            : stats.pooled_behavior(tc.state, tc.action);
      const double ratio = std::min(pi.prob(t, tc.state, tc.action) / beta, options.max_weight);
      const double weight = mu_t[tc.state] / d * ratio;
      acc[static_cast<std::size_t>(tc.next_state)] += static_cast<double>(tc.count) * weight;
    }
    if (n_t == 0) {
      est.warnings.push_back("estimate_flow: no records at t=" + std::to_string(t) + "; step masked");
    }
    finish_step(t + 1, acc, static_cast<double>(n_t));
  }
  return est;
}

inline EstimatedFlow estimate_flow(const TransitionDataset& ds, const EmpiricalStatistics& stats,
                                   const TimedPolicy& pi, const MisOptions& options = {}) {
  if (ds.metadata.horizon != stats.horizon) {
    throw ValidationError("estimate_flow: dataset and statistics disagree on the horizon");
  }
  return estimate_flow(stats, pi, options);
}

/// Total-variation distance per timestep between an estimate and a reference flow.
inline std::vector<double> flow_error(const MeanFieldFlow& estimate, const MeanFieldFlow& truth) {
  if (estimate.horizon() != truth.horizon() || estimate.num_states() != truth.num_states()) {
    throw ValidationError("flow_error: shape mismatch");
  }
  std::vector<double> tv(static_cast<std::size_t>(truth.horizon() + 1), 0.0);
  for (int t = 0; t <= truth.horizon(); ++t) {
    const auto a = estimate.at(t);
    const auto b = truth.at(t);
    double acc = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s) acc += std::abs(a[s] - b[s]);
    tv[static_cast<std::size_t>(t)] = 0.5 * acc;
  }
  return tv;
}

inline std::vector<double> flow_error(const EstimatedFlow& estimate, const MeanFieldFlow& truth) {
  return flow_error(estimate.flow, truth);
}

}  // namespace offmmd
