#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "offmmd/common.hpp"
#include "offmmd/q_function.hpp"

namespace offmmd {

/// Adam with the usual moment coefficients.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<double> m;
  std::vector<double> v;

  void apply(std::span<double> params, std::span<const double> grad, double learning_rate) {
    if (m.size() != params.size()) {
      m.assign(params.size(), 0.0);
      v.assign(params.size(), 0.0);
    }
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      params[i] -= learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon);
    }
  }
};

/// Fully connected ReLU network over a flat parameter vector. Layer l maps
/// sizes[l] -> sizes[l+1]; weights are row-major [out][in] followed by biases.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ConfigError("Mlp: need at least input and output sizes");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(total);
      total += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    num_params_ = total;
  }

  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t num_params() const { return num_params_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }

  /// He-uniform weights, zero biases.
  void initialize(std::span<double> params, std::uint64_t seed) const {
    Rng rng(seed);
    std::fill(params.begin(), params.end(), 0.0);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const int in = sizes_[l];
      const int out = sizes_[l + 1];
      const double bound = std::sqrt(6.0 / in);
      double* w = params.data() + offsets_[l];
      for (int i = 0; i < out * in; ++i) w[i] = bound * (2.0 * uniform01(rng) - 1.0);
    }
  }

  /// Forward pass. `acts` receives every layer's post-activation output
  /// (input first, logits last).
  void forward(std::span<const double> params, std::span<const double> input,
               std::vector<std::vector<double>>& acts) const {
    acts.resize(sizes_.size());
    acts[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const int in = sizes_[l];
      const int out = sizes_[l + 1];
      const double* w = params.data() + offsets_[l];
      const double* b = w + static_cast<std::size_t>(out) * in;
      auto& y = acts[l + 1];
      y.assign(static_cast<std::size_t>(out), 0.0);
      const auto& x = acts[l];
      const bool last = l + 2 == sizes_.size();
      for (int o = 0; o < out; ++o) {
        double acc = b[o];
        const double* wr = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) acc += wr[i] * x[static_cast<std::size_t>(i)];
        y[static_cast<std::size_t>(o)] = last ? acc : std::max(acc, 0.0);
      }
    }
  }

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits).
  void backward(std::span<const double> params, const std::vector<std::vector<double>>& acts,
                std::span<const double> dout, std::span<double> grad) const {
    std::vector<double> delta(dout.begin(), dout.end());
    std::vector<double> prev;
    for (std::size_t l = sizes_.size() - 1; l-- > 0;) {
      const int in = sizes_[l];
      const int out = sizes_[l + 1];
      const double* w = params.data() + offsets_[l];
      double* gw = grad.data() + offsets_[l];
      double* gb = gw + static_cast<std::size_t>(out) * in;
      const auto& x = acts[l];
      prev.assign(static_cast<std::size_t>(in), 0.0);
      for (int o = 0; o < out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        if (d == 0.0) continue;
        gb[o] += d;
        double* gwr = gw + static_cast<std::size_t>(o) * in;
        const double* wr = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) {
          gwr[i] += d * x[static_cast<std::size_t>(i)];
          prev[static_cast<std::size_t>(i)] += d * wr[i];
        }
      }
      if (l == 0) break;
      // ReLU derivative of the layer that produced x.
      for (int i = 0; i < in; ++i) {
        if (x[static_cast<std::size_t>(i)] <= 0.0) prev[static_cast<std::size_t>(i)] = 0.0;
      }
      delta.swap(prev);
    }
  }

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  std::size_t num_params_ = 0;
};

/// Q_theta(t, s, .) as an MLP over [state features, t / H].
class MlpQ {
 public:
  MlpQ() = default;

  /// `state_features[s]` is the encoding of state s (for grids: one-hot x
  /// concatenated with one-hot y).
  MlpQ(int horizon, int num_actions, std::vector<std::vector<double>> state_features,
       int hidden_width = 128, int hidden_layers = 3, std::uint64_t seed = 0)
      : horizon_(horizon),
        num_actions_(num_actions),
        features_(std::move(state_features)) {
    if (horizon < 1 || num_actions < 1 || features_.empty()) {
      throw ConfigError("MlpQ: dimensions must be positive");
    }
    if (hidden_width < 1 || hidden_layers < 0) throw ConfigError("MlpQ: invalid hidden layout");
    const int in = static_cast<int>(features_.front().size()) + 1;
    for (const auto& f : features_) {
      if (static_cast<int>(f.size()) + 1 != in) throw ConfigError("MlpQ: ragged state features");
    }
    std::vector<int> sizes{in};
    for (int l = 0; l < hidden_layers; ++l) sizes.push_back(hidden_width);
    sizes.push_back(num_actions);
    net_ = Mlp(std::move(sizes));
    theta_.assign(net_.num_params(), 0.0);
    net_.initialize(theta_, seed);
    target_ = theta_;
  }

  MlpQ(const MlpQ& o)
      : horizon_(o.horizon_), num_actions_(o.num_actions_), features_(o.features_), net_(o.net_),
        theta_(o.theta_), target_(o.target_), adam_(o.adam_) {}
  MlpQ& operator=(const MlpQ& o) {
    if (this != &o) *this = MlpQ(o);
    return *this;
  }
  MlpQ(MlpQ&&) = default;
  MlpQ& operator=(MlpQ&&) = default;

  int horizon() const { return horizon_; }
  int num_states() const { return static_cast<int>(features_.size()); }
  int num_actions() const { return num_actions_; }
  const Mlp& network() const { return net_; }
  const std::vector<std::vector<double>>& state_features() const { return features_; }

  void values(int t, int s, std::span<double> out) const { eval(theta_, t, s, out); }

  /// Target values are tabulated over all (t, s) on first use after a sync.
  void target_values(int t, int s, std::span<double> out) const {
    if (target_table_.empty()) {
      target_table_.resize(static_cast<std::size_t>(horizon_) * num_states() * num_actions_);
      for (int tt = 0; tt < horizon_; ++tt) {
        for (int ss = 0; ss < num_states(); ++ss) {
          eval(target_, tt, ss, {target_table_.data() + table_offset(tt, ss), static_cast<std::size_t>(num_actions_)});
        }
      }
    }
    const double* row = target_table_.data() + table_offset(t, s);
    std::copy(row, row + num_actions_, out.begin());
  }

  void sync_target() {
    target_ = theta_;
    target_table_.clear();
  }

  std::span<const double> parameters() const { return theta_; }
  std::span<const double> target_parameters() const { return target_; }
  std::span<double> mutable_parameters() { return theta_; }
  std::span<double> mutable_target_parameters() {
    target_table_.clear();
    return target_;
  }
  const AdamState& optimizer() const { return adam_; }

  LossStats loss_and_gradient(std::span<const Transition> batch, std::span<const double> targets,
                              double eta, std::vector<double>& grad) const {
    detail::check_batch(batch, targets, horizon_, num_states(), num_actions_);
    grad.assign(theta_.size(), 0.0);
    LossStats stats;
    auto& acts = scratch_acts_;
    auto& input = scratch_input_;
    std::vector<double> dq(static_cast<std::size_t>(num_actions_));
    const double scale = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const auto& tr = batch[k];
      encode(tr.t, tr.state, input);
      net_.forward(theta_, input, acts);
      detail::row_loss(acts.back(), tr.action, targets[k], eta, stats, dq);
      for (double& d : dq) d *= scale;
      net_.backward(theta_, acts, dq, grad);
    }
    detail::finish_stats(stats, batch.size(), eta);
    return stats;
  }

  /// One Adam step on the batch loss.
  LossStats update(std::span<const Transition> batch, std::span<const double> targets, double eta,
                   double learning_rate) {
    const LossStats stats = loss_and_gradient(batch, targets, eta, grad_);
    if (learning_rate == 0.0) return stats;
    for (double g : grad_) {
      if (!std::isfinite(g)) throw TrainingError("MlpQ: non-finite gradient");
    }
    adam_.apply(theta_, grad_, learning_rate);
    return stats;
  }

  void encode(int t, int s, std::vector<double>& input) const {
    const auto& f = features_[static_cast<std::size_t>(s)];
    input.assign(f.begin(), f.end());
    input.push_back(static_cast<double>(t) / horizon_);
  }

 private:
  void eval(const std::vector<double>& params, int t, int s, std::span<double> out) const {
    encode(t, s, scratch_input_);
    net_.forward(params, scratch_input_, scratch_acts_);
    std::copy(scratch_acts_.back().begin(), scratch_acts_.back().end(), out.begin());
  }

  std::size_t table_offset(int t, int s) const {
    return (static_cast<std::size_t>(t) * num_states() + s) * num_actions_;
  }

  int horizon_ = 0;
  int num_actions_ = 0;
  std::vector<std::vector<double>> features_;
  Mlp net_;
  std::vector<double> theta_;
  std::vector<double> target_;
  AdamState adam_;
  std::vector<double> grad_;
  // Scratch and caches; not shared between threads.
  mutable std::vector<double> target_table_;
  mutable std::vector<double> scratch_input_;
  mutable std::vector<std::vector<double>> scratch_acts_;
};

static_assert(QApproximator<MlpQ>);

}  // namespace offmmd
