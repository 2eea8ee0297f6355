#pragma once

#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "offmmd/common.hpp"
#include "offmmd/game.hpp"
#include "offmmd/grid.hpp"

namespace offmmd {

enum class RewardKind { kExploration, kNavigation };

inline std::string to_string(RewardKind kind) {
  return kind == RewardKind::kExploration ? "exploration" : "navigation";
}

inline RewardKind reward_kind_from_string(const std::string& name) {
  if (name == "exploration") return RewardKind::kExploration;
  if (name == "navigation") return RewardKind::kNavigation;
  throw ConfigError("unknown task '" + name + "' (expected exploration or navigation)");
}

/// Per-term coefficients of the navigation reward.
struct RewardScales {
  double distance = 1.0;
  double congestion = 1.0;
  double crowd = 1.0;
};

/// Gridworld mean-field game. States are the free cells in row-major order.
class EnvironmentModel {
 public:
  EnvironmentModel(GridSpec grid, RewardKind kind, double gamma, double slip = 0.0,
                   RewardScales scales = {}, double density_floor = kDensityFloor)
      : grid_(std::move(grid)),
        kind_(kind),
        gamma_(gamma),
        slip_(slip),
        scales_(scales),
        density_floor_(density_floor) {
    grid_.validate();
    if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw ConfigError("EnvironmentModel: gamma must lie in (0, 1)");
    if (!(slip_ >= 0.0 && slip_ <= 1.0)) throw ConfigError("EnvironmentModel: slip must lie in [0, 1]");
    state_of_cell_.assign(grid_.walls.size(), -1);
    for (int y = 0; y < grid_.height; ++y) {
      for (int x = 0; x < grid_.width; ++x) {
        if (grid_.is_free({x, y})) {
          state_of_cell_[static_cast<std::size_t>(y) * grid_.width + x] =
              static_cast<int>(cells_.size());
          cells_.push_back({x, y});
        }
      }
    }
    diagonal_ = std::hypot(grid_.width - 1.0, grid_.height - 1.0);
    if (diagonal_ == 0.0) diagonal_ = 1.0;
    build_kernel();
    mu0_.assign(cells_.size(), 0.0);
    mu0_[static_cast<std::size_t>(state_of(grid_.start))] = 1.0;
  }

  int num_states() const { return static_cast<int>(cells_.size()); }
  int num_actions() const { return kNumGridActions; }
  int horizon() const { return grid_.horizon; }
  double gamma() const { return gamma_; }
  double slip() const { return slip_; }
  RewardKind reward_kind() const { return kind_; }
  const RewardScales& reward_scales() const { return scales_; }
  double density_floor() const { return density_floor_; }
  const GridSpec& grid() const { return grid_; }
  std::span<const double> initial_distribution() const { return mu0_; }

  std::span<const Successor> transitions(int s, int a) const {
    return kernel_[static_cast<std::size_t>(s) * kNumGridActions + a];
  }

  Cell cell_of(int s) const { return cells_[static_cast<std::size_t>(s)]; }
  int state_of(Cell c) const {
    if (!grid_.inside(c)) return -1;
    return state_of_cell_[static_cast<std::size_t>(c.y) * grid_.width + c.x];
  }

  double reward(int /*t*/, int s, int a, std::span<const double> mu) const {
    const double density = mu[static_cast<std::size_t>(s)];
    const double crowd = -safe_log(density, density_floor_);
    if (kind_ == RewardKind::kExploration) return crowd;
    const Cell c = cell_of(s);
    const double dist = std::hypot(c.x - grid_.target.x, c.y - grid_.target.y) / diagonal_;
    const double move = a == static_cast<int>(Action::kStay) ? 0.0 : 1.0;
    return -scales_.distance * dist - scales_.congestion * density * move + scales_.crowd * crowd;
  }

  /// Canonical text description; two models with equal descriptions are
  /// interchangeable.
  std::string describe() const {
    std::ostringstream out;
    out.precision(17);
    out << "task=" << to_string(kind_) << ";w=" << grid_.width << ";h=" << grid_.height
        << ";H=" << grid_.horizon << ";gamma=" << gamma_ << ";slip=" << slip_
        << ";scales=" << scales_.distance << "," << scales_.congestion << "," << scales_.crowd
        << ";floor=" << density_floor_ << ";start=" << grid_.start.x << "," << grid_.start.y
        << ";target=" << grid_.target.x << "," << grid_.target.y << ";map=" << grid_.to_ascii();
    return out.str();
  }

  std::string fingerprint() const { return hex64(fnv1a(describe())); }

 private:
  void build_kernel() {
    kernel_.resize(cells_.size() * kNumGridActions);
    for (std::size_t s = 0; s < cells_.size(); ++s) {
      const Cell c = cells_[s];
      for (int a = 0; a < kNumGridActions; ++a) {
        auto& row = kernel_[s * kNumGridActions + static_cast<std::size_t>(a)];
        const auto add = [&](Action move, double p) {
          if (p == 0.0) return;
          Cell n = apply_move(c, move);
          if (grid_.is_wall(n)) n = c;
          const int next = state_of(n);
          for (auto& succ : row) {
            if (succ.next == next) {
              succ.prob += p;
              return;
            }
          }
          row.push_back({next, p});
        };
        const auto action = static_cast<Action>(a);
        if (action == Action::kStay || slip_ == 0.0) {
          add(action, 1.0);
          continue;
        }
        // Slip mass goes uniformly to the two perpendicular moves.
        const bool vertical = action == Action::kUp || action == Action::kDown;
        add(action, 1.0 - slip_);
        add(vertical ? Action::kLeft : Action::kUp, slip_ / 2);
        add(vertical ? Action::kRight : Action::kDown, slip_ / 2);
      }
    }
  }

  GridSpec grid_;
  RewardKind kind_;
  double gamma_;
  double slip_;
  RewardScales scales_;
  double density_floor_;
  double diagonal_ = 1.0;
  std::vector<Cell> cells_;
  std::vector<int> state_of_cell_;
  std::vector<std::vector<Successor>> kernel_;
  std::vector<double> mu0_;
};

/// Reward of taking `a` in state `s` under population distribution `mu_t`.
inline double reward(const EnvironmentModel& env, int s, int a, std::span<const double> mu_t) {
  return env.reward(0, s, a, mu_t);
}

/// Spreads a state-indexed vector onto the full grid (row-major), writing
/// `fill` on wall cells.
inline std::vector<double> to_grid(const EnvironmentModel& env, std::span<const double> per_state,
                                   double fill) {
  const auto& g = env.grid();
  std::vector<double> out(static_cast<std::size_t>(g.width) * g.height, fill);
  for (int s = 0; s < env.num_states(); ++s) {
    const Cell c = env.cell_of(s);
    out[static_cast<std::size_t>(c.y) * g.width + c.x] = per_state[static_cast<std::size_t>(s)];
  }
  return out;
}

}  // namespace offmmd
