#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "offmmd/checkpoint.hpp"
#include "offmmd/common.hpp"
#include "offmmd/environment.hpp"
#include "offmmd/grid.hpp"
#include "offmmd/offline.hpp"
#include "offmmd/online.hpp"

#ifndef OFFMMD_SOURCE_REVISION
#define OFFMMD_SOURCE_REVISION "unknown"
#endif

namespace offmmd {

inline constexpr const char* kSourceRevision = OFFMMD_SOURCE_REVISION;
inline constexpr const char* kOutputRootVariable = "OFFMMD_OUTPUT_ROOT";

struct EnvConfig {
  std::string task = "exploration";
  int width = 9;
  int height = 9;
  int horizon = 20;
  double gamma = 0.99;
  double slip = 0.0;
  std::string map_file;  // optional ASCII map; overrides width/height
  RewardScales scales;
};

struct QFunctionConfig {
  std::string kind = "tabular";  // tabular | mlp
  int hidden_width = 128;
  int hidden_layers = 3;
};

struct DatasetConfig {
  std::vector<std::string> paths;
  int episodes = 100000;
  std::vector<int> sizes;
  std::uint64_t seed = 0;
};

struct SweepConfig {
  std::vector<double> etas{0.0, 0.5, 1.0, 2.0, 3.0, 5.0};
  std::vector<double> coverage_bins{0.15, 0.25, 0.35, 0.45};
  int datasets_per_bin = 5;
  int num_datasets = 100;
  int min_episodes = 1000;
  int max_episodes = 100000;
};

struct OutputConfig {
  std::string directory = "runs";
  std::string dataset_format = "text";  // text | binary
};

struct ExperimentConfig {
  EnvConfig env;
  QFunctionConfig q_function;
  OnlineConfig online;
  OffMmdConfig offline;
  DatasetConfig dataset;
  SweepConfig sweep;
  OutputConfig output;
  std::vector<std::uint64_t> seeds{0};
};

// ---------------------------------------------------------------------------
// JSON mapping. Every field is written, so a parsed-then-dumped config is
// byte-identical to its canonical dump.

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  using J = nlohmann::ordered_json;
  J j;
  j["env"] = J{{"task", c.env.task},
               {"width", c.env.width},
               {"height", c.env.height},
               {"horizon", c.env.horizon},
               {"gamma", c.env.gamma},
               {"slip", c.env.slip},
               {"map_file", c.env.map_file},
               {"reward_scales",
                J{{"distance", c.env.scales.distance},
                  {"congestion", c.env.scales.congestion},
                  {"crowd", c.env.scales.crowd}}}};
  j["q_function"] = J{{"kind", c.q_function.kind},
                      {"hidden_width", c.q_function.hidden_width},
                      {"hidden_layers", c.q_function.hidden_layers}};
  const auto& o = c.online;
  j["online"] = J{{"iterations", o.iterations},
                  {"buffer_capacity", o.buffer_capacity},
                  {"batch_size", o.batch_size},
                  {"update_steps", o.update_steps},
                  {"learning_rate", o.learning_rate},
                  {"tabular_learning_rate", o.tabular_learning_rate},
                  {"epsilon_start", o.epsilon_start},
                  {"epsilon_finish", o.epsilon_finish},
                  {"epsilon_anneal_steps", o.epsilon_anneal_steps},
                  {"tau", o.tau},
                  {"alpha", o.alpha},
                  {"target_update_interval", o.target_update_interval},
                  {"training_interval", o.training_interval},
                  {"log_floor", o.log_floor},
                  {"checkpoint_iterations", o.checkpoint_iterations}};
  const auto& f = c.offline;
  j["offline"] = J{{"iterations", f.iterations},
                   {"batches_per_iteration", f.batches_per_iteration},
                   {"batch_size", f.batch_size},
                   {"learning_rate", f.learning_rate},
                   {"tabular_learning_rate", f.tabular_learning_rate},
                   {"tau", f.tau},
                   {"alpha", f.alpha},
                   {"eta", f.eta},
                   {"target_update_interval", f.target_update_interval},
                   {"log_floor", f.log_floor},
                   {"mis",
                    J{{"renormalize", f.mis.renormalize},
                      {"min_mass", f.mis.min_mass},
                      {"max_weight", std::isinf(f.mis.max_weight) ? J(nullptr) : J(f.mis.max_weight)},
                      {"time_conditioned_behavior", f.mis.time_conditioned_behavior}}}};
  j["dataset"] = J{{"paths", c.dataset.paths},
                   {"episodes", c.dataset.episodes},
                   {"sizes", c.dataset.sizes},
                   {"seed", c.dataset.seed}};
  j["sweep"] = J{{"etas", c.sweep.etas},
                 {"coverage_bins", c.sweep.coverage_bins},
                 {"datasets_per_bin", c.sweep.datasets_per_bin},
                 {"num_datasets", c.sweep.num_datasets},
                 {"min_episodes", c.sweep.min_episodes},
                 {"max_episodes", c.sweep.max_episodes}};
  j["output"] = J{{"directory", c.output.directory}, {"dataset_format", c.output.dataset_format}};
  j["seeds"] = c.seeds;
  return j;
}

namespace detail {

template <class T, class J>
void read_opt(const J& obj, const char* key, T& field) {
  if (obj.contains(key)) field = obj.at(key).template get<T>();
}

template <class J>
void reject_unknown(const J& obj, const char* section, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(std::string("config: section '") + section + "' must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* x) { return k == x; }) == keys.end()) {
      throw ConfigError(std::string("config: unknown key '") + k + "' in section '" + section + "'");
    }
  }
}

}  // namespace detail

/// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::ordered_json& j) {
  using detail::read_opt;
  using detail::reject_unknown;
  ExperimentConfig c;
  try {
    reject_unknown(j, "<root>", {"env", "q_function", "online", "offline", "dataset", "sweep", "output", "seeds"});
    if (j.contains("env")) {
      const auto& e = j.at("env");
      reject_unknown(e, "env", {"task", "width", "height", "horizon", "gamma", "slip", "map_file", "reward_scales"});
      read_opt(e, "task", c.env.task);
      read_opt(e, "width", c.env.width);
      read_opt(e, "height", c.env.height);
      read_opt(e, "horizon", c.env.horizon);
      read_opt(e, "gamma", c.env.gamma);
      read_opt(e, "slip", c.env.slip);
      read_opt(e, "map_file", c.env.map_file);
      if (e.contains("reward_scales")) {
        const auto& r = e.at("reward_scales");
        reject_unknown(r, "env.reward_scales", {"distance", "congestion", "crowd"});
        read_opt(r, "distance", c.env.scales.distance);
        read_opt(r, "congestion", c.env.scales.congestion);
        read_opt(r, "crowd", c.env.scales.crowd);
      }
    }
    if (j.contains("q_function")) {
      const auto& q = j.at("q_function");
      reject_unknown(q, "q_function", {"kind", "hidden_width", "hidden_layers"});
      read_opt(q, "kind", c.q_function.kind);
      read_opt(q, "hidden_width", c.q_function.hidden_width);
      read_opt(q, "hidden_layers", c.q_function.hidden_layers);
    }
    if (j.contains("online")) {
      const auto& o = j.at("online");
      reject_unknown(o, "online",
                     {"iterations", "buffer_capacity", "batch_size", "update_steps", "learning_rate",
                      "tabular_learning_rate", "epsilon_start", "epsilon_finish", "epsilon_anneal_steps", "tau",
                      "alpha", "target_update_interval", "training_interval", "log_floor",
                      "checkpoint_iterations"});
      auto& d = c.online;
      read_opt(o, "iterations", d.iterations);
      read_opt(o, "buffer_capacity", d.buffer_capacity);
      read_opt(o, "batch_size", d.batch_size);
      read_opt(o, "update_steps", d.update_steps);
      read_opt(o, "learning_rate", d.learning_rate);
      read_opt(o, "tabular_learning_rate", d.tabular_learning_rate);
      read_opt(o, "epsilon_start", d.epsilon_start);
      read_opt(o, "epsilon_finish", d.epsilon_finish);
      read_opt(o, "epsilon_anneal_steps", d.epsilon_anneal_steps);
      read_opt(o, "tau", d.tau);
      read_opt(o, "alpha", d.alpha);
      read_opt(o, "target_update_interval", d.target_update_interval);
      read_opt(o, "training_interval", d.training_interval);
      read_opt(o, "log_floor", d.log_floor);
      read_opt(o, "checkpoint_iterations", d.checkpoint_iterations);
    }
    if (j.contains("offline")) {
      const auto& o = j.at("offline");
      reject_unknown(o, "offline",
                     {"iterations", "batches_per_iteration", "batch_size", "learning_rate",
                      "tabular_learning_rate", "tau", "alpha", "eta", "target_update_interval", "log_floor",
                      "mis"});
      auto& d = c.offline;
      read_opt(o, "iterations", d.iterations);
      read_opt(o, "batches_per_iteration", d.batches_per_iteration);
      read_opt(o, "batch_size", d.batch_size);
      read_opt(o, "learning_rate", d.learning_rate);
      read_opt(o, "tabular_learning_rate", d.tabular_learning_rate);
      read_opt(o, "tau", d.tau);
      read_opt(o, "alpha", d.alpha);
      read_opt(o, "eta", d.eta);
      read_opt(o, "target_update_interval", d.target_update_interval);
      read_opt(o, "log_floor", d.log_floor);
      if (o.contains("mis")) {
        const auto& m = o.at("mis");
        reject_unknown(m, "offline.mis", {"renormalize", "min_mass", "max_weight", "time_conditioned_behavior"});
        read_opt(m, "renormalize", d.mis.renormalize);
        read_opt(m, "min_mass", d.mis.min_mass);
        if (m.contains("max_weight")) {
          d.mis.max_weight = m.at("max_weight").is_null() ? std::numeric_limits<double>::infinity()
                                                          : m.at("max_weight").get<double>();
        }
        read_opt(m, "time_conditioned_behavior", d.mis.time_conditioned_behavior);
      }
    }
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      reject_unknown(d, "dataset", {"paths", "episodes", "sizes", "seed"});
      read_opt(d, "paths", c.dataset.paths);
      read_opt(d, "episodes", c.dataset.episodes);
      read_opt(d, "sizes", c.dataset.sizes);
      read_opt(d, "seed", c.dataset.seed);
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      reject_unknown(s, "sweep",
                     {"etas", "coverage_bins", "datasets_per_bin", "num_datasets", "min_episodes", "max_episodes"});
      read_opt(s, "etas", c.sweep.etas);
      read_opt(s, "coverage_bins", c.sweep.coverage_bins);
      read_opt(s, "datasets_per_bin", c.sweep.datasets_per_bin);
      read_opt(s, "num_datasets", c.sweep.num_datasets);
      read_opt(s, "min_episodes", c.sweep.min_episodes);
      read_opt(s, "max_episodes", c.sweep.max_episodes);
    }
    if (j.contains("output")) {
      const auto& o = j.at("output");
      reject_unknown(o, "output", {"directory", "dataset_format"});
      read_opt(o, "directory", c.output.directory);
      read_opt(o, "dataset_format", c.output.dataset_format);
    }
    read_opt(j, "seeds", c.seeds);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

/// Canonical text form: two-space indented JSON with a trailing newline.
inline std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

/// Hash of everything except the seed list, so runs of one experiment agree.
inline std::string config_hash(const ExperimentConfig& c) {
  auto j = to_json(c);
  j.erase("seeds");
  return hex64(fnv1a(j.dump()));
}

inline void validate_config(const ExperimentConfig& c, bool check_files = true) {
  reward_kind_from_string(c.env.task);
  if (c.env.horizon < 1) throw ConfigError("config: env.horizon must be >= 1");
  if (!(c.env.gamma > 0.0 && c.env.gamma < 1.0)) throw ConfigError("config: env.gamma must lie in (0, 1)");
  if (!(c.env.slip >= 0.0 && c.env.slip <= 1.0)) throw ConfigError("config: env.slip must lie in [0, 1]");
  if (c.q_function.kind != "tabular" && c.q_function.kind != "mlp") {
    throw ConfigError("config: q_function.kind must be tabular or mlp");
  }
  if (c.q_function.hidden_width < 1 || c.q_function.hidden_layers < 1) {
    throw ConfigError("config: q_function hidden sizes must be >= 1");
  }
  c.online.validate();
  c.offline.validate();
  if (c.dataset.episodes < 1) throw ConfigError("config: dataset.episodes must be >= 1");
  for (int k : c.dataset.sizes) {
    if (k < 1) throw ConfigError("config: dataset.sizes entries must be >= 1");
  }
  if (c.sweep.datasets_per_bin < 1 || c.sweep.num_datasets < 1 || c.sweep.min_episodes < 1 ||
      c.sweep.max_episodes < c.sweep.min_episodes) {
    throw ConfigError("config: invalid sweep sizes");
  }
  if (c.output.dataset_format != "text" && c.output.dataset_format != "binary") {
    throw ConfigError("config: output.dataset_format must be text or binary");
  }
  if (c.seeds.empty()) throw ConfigError("config: seeds must not be empty");
  if (check_files) {
    if (!c.env.map_file.empty() && !std::filesystem::exists(c.env.map_file)) {
      throw ConfigError("config: map file '" + c.env.map_file + "' does not exist");
    }
    for (const auto& p : c.dataset.paths) {
      if (!std::filesystem::exists(p)) throw ConfigError("config: dataset '" + p + "' does not exist");
    }
  }
}

inline std::unique_ptr<EnvironmentModel> make_environment(const EnvConfig& e) {
  GridSpec grid = e.map_file.empty() ? build_four_rooms(e.width, e.height, e.horizon)
                                     : parse_ascii_map(read_text_file(e.map_file), e.horizon);
  return std::make_unique<EnvironmentModel>(std::move(grid), reward_kind_from_string(e.task), e.gamma, e.slip,
                                            e.scales);
}

/// Output directory: the configured one, placed under $OFFMMD_OUTPUT_ROOT when
/// that is set and the configured path is relative.
inline std::filesystem::path output_directory(const OutputConfig& o) {
  std::filesystem::path dir(o.directory);
  if (const char* root = std::getenv(kOutputRootVariable); root != nullptr && *root != '\0' && dir.is_relative()) {
    dir = std::filesystem::path(root) / dir;
  }
  return dir;
}

// ---------------------------------------------------------------------------
// Run records and seed aggregation.

struct MetricRow {
  int iteration = 0;
  double exploitability = 0.0;
  double mean_loss = 0.0;
  double mean_regularizer = 0.0;
};

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string revision = kSourceRevision;
  std::vector<MetricRow> rows;
  double wall_clock_seconds = 0.0;
  std::vector<std::string> artifacts;

  void validate() const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].iteration <= rows[i - 1].iteration) {
        throw ValidationError("RunRecord: iterations must be strictly increasing");
      }
    }
  }
};

inline nlohmann::ordered_json run_record_to_json(const RunRecord& r) {
  using J = nlohmann::ordered_json;
  J rows = J::array();
  for (const auto& m : r.rows) {
    rows.push_back(J{{"iteration", m.iteration},
                     {"exploitability", m.exploitability},
                     {"mean_loss", m.mean_loss},
                     {"mean_regularizer", m.mean_regularizer}});
  }
  return J{{"config_hash", r.config_hash}, {"seed", r.seed},     {"revision", r.revision},
           {"rows", rows},                 {"wall_clock_seconds", r.wall_clock_seconds},
           {"artifacts", r.artifacts}};
}

inline RunRecord run_record_from_json(const nlohmann::ordered_json& j) {
  RunRecord r;
  try {
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.revision = j.at("revision").get<std::string>();
    for (const auto& row : j.at("rows")) {
      r.rows.push_back({row.at("iteration").get<int>(), row.at("exploitability").get<double>(),
                        row.at("mean_loss").get<double>(), row.at("mean_regularizer").get<double>()});
    }
    r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    r.artifacts = j.at("artifacts").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("run record: ") + e.what());
  }
  r.validate();
  return r;
}

struct AggregateRow {
  int iteration = 0;
  int runs = 0;
  double mean = 0.0;
  double std_dev = 0.0;     // sample standard deviation
  double half_width = 0.0;  // 1.96 * std_dev / sqrt(runs)
};

/// Sample mean and normal-approximation 95% interval of `values`.
inline AggregateRow mean_ci(const std::vector<double>& values) {
  AggregateRow a;
  a.runs = static_cast<int>(values.size());
  if (values.empty()) return a;
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std_dev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    a.half_width = 1.96 * a.std_dev / std::sqrt(static_cast<double>(values.size()));
  }
  return a;
}

/// Per-iteration exploitability statistics over runs of one configuration.
inline std::vector<AggregateRow> aggregate_seeds(const std::vector<RunRecord>& runs) {
  if (runs.size() < 2) throw MetricError("aggregate_seeds: at least two runs are required");
  for (const auto& r : runs) {
    if (r.config_hash != runs.front().config_hash) {
      throw MetricError("aggregate_seeds: config hash mismatch (" + r.config_hash + " vs " +
                        runs.front().config_hash + ")");
    }
    if (r.rows.size() != runs.front().rows.size()) {
      throw MetricError("aggregate_seeds: runs have different numbers of metric rows");
    }
  }
  std::vector<AggregateRow> out;
  std::vector<double> values(runs.size());
  for (std::size_t i = 0; i < runs.front().rows.size(); ++i) {
    const int iteration = runs.front().rows[i].iteration;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      if (runs[k].rows[i].iteration != iteration) throw MetricError("aggregate_seeds: iteration mismatch");
      values[k] = runs[k].rows[i].exploitability;
    }
    AggregateRow a = mean_ci(values);
    a.iteration = iteration;
    out.push_back(a);
  }
  return out;
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw MetricError("spearman: need two equal-length samples");
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw MetricError("spearman: constant sample");
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces.

/// Calls `fn` with a freshly initialized Q-function of the configured kind.
/// Both instantiations of `fn` must return the same type.
template <class Fn>
auto with_q_function(const QFunctionConfig& qc, const EnvironmentModel& env, std::uint64_t seed, Fn&& fn) {
  if (qc.kind == "mlp") {
    return fn(MlpQ(env.horizon(), env.num_actions(), grid_state_features(env), qc.hidden_width,
                   qc.hidden_layers, derive_seed(seed, 0x11e7ULL)));
  }
  if (qc.kind != "tabular") throw ConfigError("unknown q_function.kind '" + qc.kind + "'");
  return fn(TabularQ(env.horizon(), env.num_states(), env.num_actions()));
}

/// Integer drawn log-uniformly from [lo, hi].
inline int log_uniform_int(Rng& rng, int lo, int hi) {
  if (lo < 1 || hi < lo) throw ConfigError("log_uniform_int: need 1 <= lo <= hi");
  const double x = std::exp(std::log(lo) + uniform01(rng) * (std::log(hi + 1.0) - std::log(lo)));
  return std::clamp(static_cast<int>(x), lo, hi);
}

struct PoolMember {
  std::string id;
  std::size_t parent = 0;
  TransitionDataset data;
};

/// `count` episode subsamples drawn round-robin from `parents`, member i
/// having a log-uniform size in [lo, min(hi, parent episodes)].
inline std::vector<PoolMember> subsample_pool(const std::vector<const TransitionDataset*>& parents, int count,
                                              int lo, int hi, std::uint64_t seed) {
  if (parents.empty()) throw ConfigError("subsample_pool: no parent datasets");
  if (count < 1) throw ConfigError("subsample_pool: count must be >= 1");
  std::vector<PoolMember> pool;
  pool.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::size_t p = static_cast<std::size_t>(i) % parents.size();
    const int available = parents[p]->metadata.episodes;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const int k = log_uniform_int(rng, std::min(lo, available), std::min(hi, available));
    PoolMember m{"d" + std::to_string(i), p, subsample(*parents[p], k, derive_seed(seed, 1000003ULL + i))};
    pool.push_back(std::move(m));
  }
  return pool;
}

// ---------------------------------------------------------------------------
// Delimited output.

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  return detail::format_double(v);
}

inline std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "iteration,exploitability,mean_loss,mean_regularizer\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + "," + format_number(r.exploitability) + "," +
           format_number(r.mean_loss) + "," + format_number(r.mean_regularizer) + "\n";
  }
  return out;
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::string out = "iteration,runs,mean,std,ci_half_width\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + "," + std::to_string(r.runs) + "," + format_number(r.mean) + "," +
           format_number(r.std_dev) + "," + format_number(r.half_width) + "\n";
  }
  return out;
}

inline std::string eta_sweep_csv(const EtaSweepResult& res) {
  std::string out = "eta,coverage_bin,dataset_id,final_exploitability\n";
  for (const auto& r : res.rows) {
    out += format_number(r.eta) + "," + format_number(r.coverage_bin) + "," + r.dataset_id + "," +
           format_number(r.final_exploitability) + "\n";
  }
  return out;
}

struct ScatterRow {
  std::string dataset_id;
  int episodes = 0;
  double coverage = 0.0;
  double quality = 0.0;
  double final_exploitability = 0.0;
};

inline std::string scatter_csv(const std::vector<ScatterRow>& rows) {
  std::string out = "dataset_id,episodes,coverage,quality,final_exploitability\n";
  for (const auto& r : rows) {
    out += r.dataset_id + "," + std::to_string(r.episodes) + "," + format_number(r.coverage) + "," +
           format_number(r.quality) + "," + format_number(r.final_exploitability) + "\n";
  }
  return out;
}

/// Row-major grid text: one line per grid row, space separated, 6 significant
/// digits. Walls and masked cells are written as "nan".
inline std::string heatmap_text(const EnvironmentModel& env, std::span<const double> per_state,
                                const std::vector<std::uint8_t>* mask = nullptr) {
  const auto& g = env.grid();
  std::vector<double> values = to_grid(env, per_state, std::numeric_limits<double>::quiet_NaN());
  if (mask != nullptr) {
    for (int s = 0; s < env.num_states(); ++s) {
      if ((*mask)[static_cast<std::size_t>(s)] != 0) {
        const Cell c = env.cell_of(s);
        values[static_cast<std::size_t>(c.y) * g.width + c.x] = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  std::string out;
  char buf[32];
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const double v = values[static_cast<std::size_t>(y) * g.width + x];
      if (x > 0) out += ' ';
      if (std::isnan(v)) {
        out += "nan";
      } else {
        std::snprintf(buf, sizeof(buf), "%.6g", v);
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace offmmd
