#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "offmmd/common.hpp"
#include "offmmd/environment.hpp"
#include "offmmd/mlp_q.hpp"
#include "offmmd/policy.hpp"
#include "offmmd/tabular_q.hpp"

namespace offmmd {

inline constexpr int kCheckpointVersion = 1;

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw DataError("write failed for '" + path + "'");
}

/// One-hot x concatenated with one-hot y for every free cell.
inline std::vector<std::vector<double>> grid_state_features(const EnvironmentModel& env) {
  const auto& g = env.grid();
  std::vector<std::vector<double>> features;
  features.reserve(static_cast<std::size_t>(env.num_states()));
  for (int s = 0; s < env.num_states(); ++s) {
    std::vector<double> f(static_cast<std::size_t>(g.width + g.height), 0.0);
    const Cell c = env.cell_of(s);
    f[static_cast<std::size_t>(c.x)] = 1.0;
    f[static_cast<std::size_t>(g.width + c.y)] = 1.0;
    features.push_back(std::move(f));
  }
  return features;
}

inline nlohmann::json policy_to_json(const TimedPolicy& pi) {
  return {{"format", "offmmd-policy"},
          {"version", kCheckpointVersion},
          {"horizon", pi.horizon()},
          {"num_states", pi.num_states()},
          {"num_actions", pi.num_actions()},
          {"probs", std::vector<double>(pi.data().begin(), pi.data().end())}};
}

inline TimedPolicy policy_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "offmmd-policy") throw DataError("not a policy file");
    if (j.at("version").get<int>() != kCheckpointVersion) throw DataError("unsupported policy version");
    TimedPolicy pi(j.at("horizon").get<int>(), j.at("num_states").get<int>(),
                   j.at("num_actions").get<int>());
    const auto probs = j.at("probs").get<std::vector<double>>();
    if (probs.size() != pi.data().size()) throw DataError("policy file has the wrong number of entries");
    std::copy(probs.begin(), probs.end(), pi.data().begin());
    pi.validate();
    return pi;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed policy file: ") + e.what());
  }
}

inline void save_policy(const TimedPolicy& pi, const std::string& path) {
  write_text_file(path, policy_to_json(pi).dump() + "\n");
}

inline TimedPolicy load_policy(const std::string& path) {
  try {
    return policy_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed policy file '" + path + "': " + e.what());
  }
}

inline nlohmann::json checkpoint_to_json(const TabularQ& q, const std::string& config_hash) {
  return {{"format", "offmmd-qfunction"},
          {"version", kCheckpointVersion},
          {"kind", "tabular"},
          {"config_hash", config_hash},
          {"shape", {{"horizon", q.horizon()}, {"num_states", q.num_states()}, {"num_actions", q.num_actions()}}},
          {"theta", std::vector<double>(q.parameters().begin(), q.parameters().end())},
          {"theta_target",
           std::vector<double>(q.target_parameters().begin(), q.target_parameters().end())}};
}

inline nlohmann::json checkpoint_to_json(const MlpQ& q, const std::string& config_hash) {
  return {{"format", "offmmd-qfunction"},
          {"version", kCheckpointVersion},
          {"kind", "mlp"},
          {"config_hash", config_hash},
          {"shape",
           {{"horizon", q.horizon()},
            {"num_states", q.num_states()},
            {"num_actions", q.num_actions()},
            {"layers", q.network().sizes()}}},
          {"state_features", q.state_features()},
          {"theta", std::vector<double>(q.parameters().begin(), q.parameters().end())},
          {"theta_target",
           std::vector<double>(q.target_parameters().begin(), q.target_parameters().end())}};
}

namespace detail {

inline void check_checkpoint_header(const nlohmann::json& j, const char* kind) {
  if (j.at("format") != "offmmd-qfunction") throw DataError("not a Q-function checkpoint");
  if (j.at("version").get<int>() != kCheckpointVersion) throw DataError("unsupported checkpoint version");
  if (j.at("kind") != kind) {
    throw DataError("checkpoint holds a '" + j.at("kind").get<std::string>() + "' Q-function");
  }
}

template <class Q>
void restore_parameters(Q& q, const nlohmann::json& j) {
  const auto theta = j.at("theta").get<std::vector<double>>();
  const auto target = j.at("theta_target").get<std::vector<double>>();
  if (theta.size() != q.parameters().size() || target.size() != q.parameters().size()) {
    throw DataError("checkpoint parameter count does not match its shape");
  }
  std::copy(theta.begin(), theta.end(), q.mutable_parameters().begin());
  std::copy(target.begin(), target.end(), q.mutable_target_parameters().begin());
}

}  // namespace detail

inline TabularQ tabular_from_json(const nlohmann::json& j) {
  try {
    detail::check_checkpoint_header(j, "tabular");
    const auto& shape = j.at("shape");
    TabularQ q(shape.at("horizon").get<int>(), shape.at("num_states").get<int>(),
               shape.at("num_actions").get<int>());
    detail::restore_parameters(q, j);
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline MlpQ mlp_from_json(const nlohmann::json& j) {
  try {
    detail::check_checkpoint_header(j, "mlp");
    const auto& shape = j.at("shape");
    const auto layers = shape.at("layers").get<std::vector<int>>();
    if (layers.size() < 2) throw DataError("checkpoint has no layers");
    const int hidden_layers = static_cast<int>(layers.size()) - 2;
    const int width = hidden_layers > 0 ? layers[1] : 1;
    MlpQ q(shape.at("horizon").get<int>(), shape.at("num_actions").get<int>(),
           j.at("state_features").get<std::vector<std::vector<double>>>(), width, hidden_layers);
    if (q.network().sizes() != layers) throw DataError("checkpoint layer sizes are inconsistent");
    detail::restore_parameters(q, j);
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

template <class Q>
void save_checkpoint(const Q& q, const std::string& config_hash, const std::string& path) {
  write_text_file(path, checkpoint_to_json(q, config_hash).dump() + "\n");
}

}  // namespace offmmd
