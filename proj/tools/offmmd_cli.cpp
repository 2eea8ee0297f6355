// offmmd command-line front end. Every verb reads an optional JSON config
// (defaults otherwise), writes its artifacts under the output directory and
// exits non-zero with a one-line diagnostic on failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "offmmd/offmmd.hpp"

namespace fs = std::filesystem;
using namespace offmmd;

namespace {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kConfigFailure = 3,
  kDataFailure = 4,
  kTrainingFailure = 5,
  kMetricFailure = 6,
};

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_seeds = true) {
  cmd->add_option("-c,--config", o.config_path, "Experiment config (JSON); defaults when omitted")
      ->check(CLI::ExistingFile);
  cmd->add_option("-o,--out-dir", o.out_dir, "Override output.directory");
  if (with_seeds) cmd->add_option("-s,--seed", o.seeds, "Override the seed list");
}

ExperimentConfig load(const CommonOptions& o) {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (!o.out_dir.empty()) cfg.output.directory = o.out_dir;
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  validate_config(cfg);
  return cfg;
}

/// Output file paths honor the output-root variable the same way directories do.
fs::path resolve_output(const std::string& path) {
  OutputConfig o;
  o.directory = path;
  return output_directory(o);
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text_file(path.string(), text);
}

TimedPolicy policy_argument(const std::string& path, bool uniform, const EnvironmentModel& env) {
  if (uniform == !path.empty()) throw ConfigError("exactly one of --policy or --uniform is required");
  if (uniform) return TimedPolicy::uniform(env.horizon(), env.num_states(), env.num_actions());
  TimedPolicy pi = load_policy(path);
  if (pi.horizon() != env.horizon() || pi.num_states() != env.num_states() ||
      pi.num_actions() != env.num_actions()) {
    throw ValidationError("policy '" + path + "' does not match the configured environment");
  }
  pi.validate();
  return pi;
}

TransitionDataset dataset_argument(const std::string& path, const EnvironmentModel& env) {
  TransitionDataset ds = load_dataset(path);
  const auto& m = ds.metadata;
  if (m.horizon != env.horizon() || m.num_states != env.num_states() || m.num_actions != env.num_actions()) {
    throw DataError("dataset '" + path + "' does not match the configured environment");
  }
  if (!m.env_hash.empty() && m.env_hash != env.fingerprint()) {
    std::cerr << "warning: dataset '" << path << "' was collected on environment " << m.env_hash
              << ", configured environment is " << env.fingerprint() << "\n";
  }
  return ds;
}

void save_dataset_as(const TransitionDataset& ds, const fs::path& path, const std::string& format) {
  if (format != "text" && format != "binary") throw ConfigError("--format must be text or binary");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_dataset(ds, path.string(), format == "binary");
}

fs::path seed_dir(const ExperimentConfig& cfg, const std::string& stage, std::uint64_t seed) {
  return output_directory(cfg.output) / stage / ("seed_" + std::to_string(seed));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void finish_runs(const ExperimentConfig& cfg, const std::string& stage, const std::vector<RunRecord>& runs) {
  if (runs.size() < 2) return;
  const fs::path path = output_directory(cfg.output) / stage / "aggregate.csv";
  write_file(path, aggregate_csv(aggregate_seeds(runs)));
  std::cout << "aggregate " << path.string() << "\n";
}

// --- train-online ----------------------------------------------------------

int cmd_train_online(const CommonOptions& opts) {
  const ExperimentConfig cfg = load(opts);
  const auto env = make_environment(cfg.env);
  const std::string hash = config_hash(cfg);
  std::vector<RunRecord> runs;
  for (std::uint64_t seed : cfg.seeds) {
    const auto start = std::chrono::steady_clock::now();
    OnlineConfig oc = cfg.online;
    oc.seed = seed;
    const fs::path dir = seed_dir(cfg, "online", seed);
    fs::create_directories(dir);
    RunRecord rec = with_q_function(cfg.q_function, *env, seed, [&](auto q) {
      const auto res = train_online(*env, oc, std::move(q));
      RunRecord r;
      r.config_hash = hash;
      r.seed = seed;
      for (const auto& m : res.metrics) r.rows.push_back({m.iteration, m.exploitability, m.mean_loss, 0.0});
      save_policy(res.policy, (dir / "policy.json").string());
      save_checkpoint(res.q, hash, (dir / "q.json").string());
      r.artifacts = {"metrics.csv", "policy.json", "q.json"};
      for (const auto& [it, pi] : res.checkpoints) {
        const std::string name = "policy_iter_" + std::to_string(it) + ".json";
        save_policy(pi, (dir / name).string());
        r.artifacts.push_back(name);
      }
      return r;
    });
    rec.wall_clock_seconds = seconds_since(start);
    write_file(dir / "metrics.csv", metrics_csv(rec.rows));
    write_file(dir / "run.json", run_record_to_json(rec).dump(2) + "\n");
    std::cout << "seed " << seed << " final_exploitability " << format_number(rec.rows.back().exploitability)
              << " dir " << dir.string() << "\n";
    runs.push_back(std::move(rec));
  }
  finish_runs(cfg, "online", runs);
  return kOk;
}

// --- collect / subsample / analyze-dataset ------------------------------------

struct CollectOptions {
  std::string policy;
  bool uniform = false;
  std::optional<int> episodes;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string label;
  std::string format;
};

int cmd_collect(const CommonOptions& opts, const CollectOptions& c) {
  const ExperimentConfig cfg = load(opts);
  const auto env = make_environment(cfg.env);
  const TimedPolicy behavior = policy_argument(c.policy, c.uniform, *env);
  const int episodes = c.episodes.value_or(cfg.dataset.episodes);
  const std::uint64_t seed = c.seed.value_or(cfg.dataset.seed);
  std::string label = c.label;
  if (label.empty()) label = c.uniform ? "uniform" : fs::path(c.policy).stem().string();
  const TransitionDataset ds = collect(*env, behavior, episodes, seed, label, env->fingerprint());
  const fs::path out = resolve_output(c.out);
  save_dataset_as(ds, out, c.format.empty() ? cfg.output.dataset_format : c.format);
  std::cout << "episodes " << episodes << " records " << ds.records.size() << " coverage "
            << format_number(coverage(ds, *env)) << " average_return " << format_number(average_return(ds))
            << " path " << out.string() << "\n";
  return kOk;
}

struct SubsampleOptions {
  std::string input;
  int episodes = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "text";
};

int cmd_subsample(const SubsampleOptions& s) {
  const TransitionDataset ds = load_dataset(s.input);
  const TransitionDataset sub = subsample(ds, s.episodes, s.seed);
  const fs::path out = resolve_output(s.out);
  save_dataset_as(sub, out, s.format);
  std::cout << "episodes " << sub.metadata.episodes << " records " << sub.records.size() << " path "
            << out.string() << "\n";
  return kOk;
}

struct AnalyzeOptions {
  std::string input;
  std::string min_ref;
  std::string expert_ref;
};

int cmd_analyze(const CommonOptions& opts, const AnalyzeOptions& a) {
  const ExperimentConfig cfg = load(opts);
  const auto env = make_environment(cfg.env);
  const TransitionDataset ds = dataset_argument(a.input, *env);
  const EmpiricalStatistics st = empirical_statistics(ds, *env);
  nlohmann::ordered_json j;
  j["path"] = a.input;
  j["behavior"] = ds.metadata.behavior;
  j["episodes"] = ds.metadata.episodes;
  j["records"] = ds.records.size();
  j["unique_pairs"] = st.unique_pairs;
  j["coverage"] = coverage(ds, *env);
  j["average_return"] = average_return(ds);
  j["env_match"] = ds.metadata.env_hash.empty() || ds.metadata.env_hash == env->fingerprint();
  if (!a.min_ref.empty() || !a.expert_ref.empty()) {
    if (a.min_ref.empty() || a.expert_ref.empty()) throw ConfigError("--min and --expert go together");
    j["quality"] = quality(ds, dataset_argument(a.min_ref, *env), dataset_argument(a.expert_ref, *env));
  }
  std::cout << j.dump(2) << "\n";
  return kOk;
}

// --- train-offline ----------------------------------------------------------

struct OfflineRun {
  TimedPolicy policy;
  std::vector<OfflineIterationMetrics> metrics;
  std::vector<std::string> warnings;
  nlohmann::json checkpoint;
};

OfflineRun run_offline(const ExperimentConfig& cfg, const EnvironmentModel& env, const TransitionDataset& ds,
                       const OffMmdConfig& oc, const std::string& hash) {
  const PolicyEvaluator evaluator = [&env](const TimedPolicy& pi) { return exploitability(env, pi); };
  return with_q_function(cfg.q_function, env, oc.seed, [&](auto q) {
    auto res = train_offline(RewardOracle(env), ds, oc, std::move(q), evaluator);
    return OfflineRun{std::move(res.policy), std::move(res.metrics), std::move(res.warnings),
                      checkpoint_to_json(res.q, hash)};
  });
}

std::string mis_mass_csv(const std::vector<OfflineIterationMetrics>& metrics) {
  std::string out = "iteration,t,raw_mass\n";
  for (const auto& m : metrics) {
    for (std::size_t t = 0; t < m.mis_mass.size(); ++t) {
      out += std::to_string(m.iteration) + "," + std::to_string(t) + "," + format_number(m.mis_mass[t]) + "\n";
    }
  }
  return out;
}

int cmd_train_offline(const CommonOptions& opts, const std::string& dataset, std::optional<double> eta) {
  ExperimentConfig cfg = load(opts);
  if (eta) cfg.offline.eta = *eta;
  validate_config(cfg);
  const auto env = make_environment(cfg.env);
  const TransitionDataset ds = dataset_argument(dataset, *env);
  const std::string hash = config_hash(cfg);
  std::vector<RunRecord> runs;
  for (std::uint64_t seed : cfg.seeds) {
    const auto start = std::chrono::steady_clock::now();
    OffMmdConfig oc = cfg.offline;
    oc.seed = seed;
    const OfflineRun run = run_offline(cfg, *env, ds, oc, hash);
    const fs::path dir = seed_dir(cfg, "offline", seed);
    RunRecord rec;
    rec.config_hash = hash;
    rec.seed = seed;
    for (const auto& m : run.metrics) {
      rec.rows.push_back({m.iteration, m.exploitability, m.mean_loss, m.mean_regularizer});
    }
    rec.wall_clock_seconds = seconds_since(start);
    rec.artifacts = {"metrics.csv", "mis_mass.csv", "policy.json", "q.json"};
    write_file(dir / "metrics.csv", metrics_csv(rec.rows));
    write_file(dir / "mis_mass.csv", mis_mass_csv(run.metrics));
    write_file(dir / "q.json", run.checkpoint.dump() + "\n");
    save_policy(run.policy, (dir / "policy.json").string());
    if (!run.warnings.empty()) {
      std::string text;
      for (const auto& w : run.warnings) text += w + "\n";
      write_file(dir / "warnings.txt", text);
      rec.artifacts.push_back("warnings.txt");
      std::cerr << "warning: " << run.warnings.size() << " estimator warnings, see "
                << (dir / "warnings.txt").string() << "\n";
    }
    write_file(dir / "run.json", run_record_to_json(rec).dump(2) + "\n");
    std::cout << "seed " << seed << " final_exploitability " << format_number(rec.rows.back().exploitability)
              << " dir " << dir.string() << "\n";
    runs.push_back(std::move(rec));
  }
  finish_runs(cfg, "offline", runs);
  return kOk;
}

// --- evaluate ---------------------------------------------------------------

int cmd_evaluate(const CommonOptions& opts, const std::string& policy, bool uniform) {
  const ExperimentConfig cfg = load(opts);
  const auto env = make_environment(cfg.env);
  std::cout << format_number(exploitability(*env, policy_argument(policy, uniform, *env))) << "\n";
  return kOk;
}

// --- show-config ----------------------------------------------------------

int cmd_show_config(const CommonOptions& opts) {
  const ExperimentConfig cfg = load(opts);
  std::cout << serialize_config(cfg);
  return kOk;
}

// --- sweeps -----------------------------------------------------------------

struct SweepOptions {
  std::vector<std::string> datasets;
  std::vector<std::string> parents;
  std::string min_ref;
  std::string expert_ref;
};

/// Either the listed datasets as-is, or a generated subsample pool.
std::vector<PoolMember> build_pool(const ExperimentConfig& cfg, const EnvironmentModel& env, const SweepOptions& s,
                                   std::vector<TransitionDataset>& parents_storage) {
  std::vector<PoolMember> pool;
  if (!s.datasets.empty()) {
    for (std::size_t i = 0; i < s.datasets.size(); ++i) {
      pool.push_back({fs::path(s.datasets[i]).stem().string(), i, dataset_argument(s.datasets[i], env)});
    }
    return pool;
  }
  const auto& parent_paths = s.parents.empty() ? cfg.dataset.paths : s.parents;
  if (parent_paths.empty()) throw ConfigError("no datasets: pass --dataset or --parent, or set dataset.paths");
  for (const auto& p : parent_paths) parents_storage.push_back(dataset_argument(p, env));
  std::vector<const TransitionDataset*> parents;
  for (const auto& p : parents_storage) parents.push_back(&p);
  return subsample_pool(parents, cfg.sweep.num_datasets, cfg.sweep.min_episodes, cfg.sweep.max_episodes,
                        cfg.dataset.seed);
}

int cmd_sweep_eta(const CommonOptions& opts, const SweepOptions& s) {
  const ExperimentConfig cfg = load(opts);
  const auto env = make_environment(cfg.env);
  std::vector<TransitionDataset> parents;
  const std::vector<PoolMember> members = build_pool(cfg, *env, s, parents);
  std::vector<SweepDataset> pool;
  std::string pool_csv = "dataset_id,episodes,coverage\n";
  for (const auto& m : members) {
    pool.push_back({m.id, coverage(m.data, *env), &m.data});
    pool_csv += m.id + "," + std::to_string(m.data.metadata.episodes) + "," + format_number(pool.back().coverage) + "\n";
  }
  OffMmdConfig base = cfg.offline;
  base.seed = cfg.seeds.front();
  const PolicyEvaluator evaluator = [&env](const TimedPolicy& pi) { return exploitability(*env, pi); };
  const EtaSweepResult res = with_q_function(cfg.q_function, *env, base.seed, [&](auto proto) {
    return run_eta_sweep(RewardOracle(*env), pool, cfg.sweep.etas, cfg.sweep.coverage_bins, base,
                         [&] { return proto; }, evaluator, static_cast<std::size_t>(cfg.sweep.datasets_per_bin));
  });
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  const fs::path dir = output_directory(cfg.output) / "sweep_eta";
  std::string cells = "eta,coverage_bin,datasets,mean_final_exploitability\n";
  for (const auto& c : res.cells) {
    cells += format_number(c.eta) + "," + format_number(c.coverage_bin) + "," + std::to_string(c.datasets) + "," +
             format_number(c.mean_final_exploitability) + "\n";
  }
  write_file(dir / "pool.csv", pool_csv);
  write_file(dir / "eta_sweep.csv", eta_sweep_csv(res));
  write_file(dir / "eta_cells.csv", cells);
  std::cout << cells;
  return kOk;
}

int cmd_sweep_quality(const CommonOptions& opts, const SweepOptions& s) {
  const ExperimentConfig cfg = load(opts);
  const auto env = make_environment(cfg.env);
  if (s.min_ref.empty() || s.expert_ref.empty()) throw ConfigError("sweep-quality needs --min and --expert");
  const TransitionDataset ds_min = dataset_argument(s.min_ref, *env);
  const TransitionDataset ds_expert = dataset_argument(s.expert_ref, *env);
  std::vector<TransitionDataset> parents;
  const std::vector<PoolMember> members = build_pool(cfg, *env, s, parents);
  OffMmdConfig oc = cfg.offline;
  oc.seed = cfg.seeds.front();
  const std::string hash = config_hash(cfg);
  std::vector<ScatterRow> rows;
  std::vector<double> cov, qual, expl;
  for (const auto& m : members) {
    const OfflineRun run = run_offline(cfg, *env, m.data, oc, hash);
    rows.push_back({m.id, m.data.metadata.episodes, coverage(m.data, *env), quality(m.data, ds_min, ds_expert),
                    run.metrics.back().exploitability});
    cov.push_back(rows.back().coverage);
    qual.push_back(rows.back().quality);
    expl.push_back(rows.back().final_exploitability);
  }
  const fs::path dir = output_directory(cfg.output) / "sweep_quality";
  write_file(dir / "scatter.csv", scatter_csv(rows));
  nlohmann::ordered_json summary;
  summary["datasets"] = rows.size();
  if (rows.size() >= 2) {
    summary["spearman_coverage"] = spearman(cov, expl);
    summary["spearman_quality"] = spearman(qual, expl);
  }
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

// --- export-heatmaps --------------------------------------------------------

int cmd_export_heatmaps(const CommonOptions& opts, const std::string& dataset, const std::string& policy,
                        bool uniform, int timestep, bool all) {
  const ExperimentConfig cfg = load(opts);
  const auto env = make_environment(cfg.env);
  const TransitionDataset ds = dataset_argument(dataset, *env);
  const TimedPolicy pi = policy_argument(policy, uniform, *env);
  const EmpiricalStatistics st = empirical_statistics(ds, *env);
  const MeanFieldFlow exact = propagate_flow(*env, pi);
  const EstimatedFlow est = estimate_flow(ds, st, pi, cfg.offline.mis);
  if (!all && (timestep < 0 || timestep >= env->horizon())) {
    throw ConfigError("--timestep must lie in [0, " + std::to_string(env->horizon()) + ")");
  }
  const fs::path dir = output_directory(cfg.output) / "heatmaps";
  const int first = all ? 0 : timestep;
  const int last = all ? env->horizon() - 1 : timestep;
  const auto ns = static_cast<std::size_t>(env->num_states());
  for (int t = first; t <= last; ++t) {
    std::vector<double> empirical(ns);
    std::vector<std::uint8_t> unseen(ns);
    for (int s = 0; s < env->num_states(); ++s) {
      empirical[static_cast<std::size_t>(s)] = st.state_marginal(t, s);
      unseen[static_cast<std::size_t>(s)] = empirical[static_cast<std::size_t>(s)] == 0.0;
    }
    const std::vector<std::uint8_t> mis_mask(est.mask.begin() + static_cast<std::ptrdiff_t>(t * ns),
                                             est.mask.begin() + static_cast<std::ptrdiff_t>((t + 1) * ns));
    const std::string prefix = "t" + std::to_string(t) + "_";
    write_file(dir / (prefix + "dataset.txt"), heatmap_text(*env, empirical, &unseen));
    write_file(dir / (prefix + "exact.txt"), heatmap_text(*env, exact.at(t)));
    write_file(dir / (prefix + "mis.txt"), heatmap_text(*env, est.flow.at(t), &mis_mask));
  }
  std::cout << "heatmaps " << dir.string() << " timesteps " << first << ".." << last << " mis_tv_at_t"
            << last << " " << format_number(flow_error(est, exact)[static_cast<std::size_t>(last)]) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline mean-field mirror descent experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("offmmd ") + kSourceRevision);

  CommonOptions common;

  auto* online = app.add_subcommand("train-online", "Train the online baseline for every seed");
  add_common(online, common);

  CollectOptions col;
  auto* collect_cmd = app.add_subcommand("collect", "Collect a dataset from a behavior policy");
  add_common(collect_cmd, common, false);
  auto* col_policy = collect_cmd->add_option("--policy", col.policy, "Behavior policy JSON")->check(CLI::ExistingFile);
  collect_cmd->add_flag("--uniform", col.uniform, "Use the uniform policy")->excludes(col_policy);
  collect_cmd->add_option("-n,--episodes", col.episodes, "Episodes (default dataset.episodes)")
      ->check(CLI::PositiveNumber);
  collect_cmd->add_option("--seed", col.seed, "Collection seed (default dataset.seed)");
  collect_cmd->add_option("--out", col.out, "Output dataset path")->required();
  collect_cmd->add_option("--label", col.label, "Behavior label stored in the metadata");
  collect_cmd->add_option("--format", col.format, "text or binary (default output.dataset_format)");

  SubsampleOptions sub;
  auto* sub_cmd = app.add_subcommand("subsample", "Keep k whole episodes chosen uniformly at random");
  sub_cmd->add_option("--input", sub.input, "Source dataset")->required()->check(CLI::ExistingFile);
  sub_cmd->add_option("-n,--episodes", sub.episodes, "Episodes to keep")->required();
  sub_cmd->add_option("--seed", sub.seed, "Subsampling seed");
  sub_cmd->add_option("--out", sub.out, "Output dataset path")->required();
  sub_cmd->add_option("--format", sub.format, "text or binary");

  AnalyzeOptions ana;
  auto* analyze = app.add_subcommand("analyze-dataset", "Print coverage, return and quality of a dataset");
  add_common(analyze, common, false);
  analyze->add_option("--input", ana.input, "Dataset")->required()->check(CLI::ExistingFile);
  analyze->add_option("--min", ana.min_ref, "Lower quality reference dataset")->check(CLI::ExistingFile);
  analyze->add_option("--expert", ana.expert_ref, "Upper quality reference dataset")->check(CLI::ExistingFile);

  std::string off_dataset;
  std::optional<double> off_eta;
  auto* offline = app.add_subcommand("train-offline", "Train Off-MMD on a dataset for every seed");
  add_common(offline, common);
  offline->add_option("--dataset", off_dataset, "Training dataset")->required()->check(CLI::ExistingFile);
  offline->add_option("--eta", off_eta, "Override offline.eta");

  std::string eval_policy;
  bool eval_uniform = false;
  auto* evaluate = app.add_subcommand("evaluate", "Print the exploitability of a policy");
  add_common(evaluate, common, false);
  auto* eval_opt = evaluate->add_option("--policy", eval_policy, "Policy JSON")->check(CLI::ExistingFile);
  evaluate->add_flag("--uniform", eval_uniform, "Evaluate the uniform policy")->excludes(eval_opt);

  auto* show_config = app.add_subcommand("show-config", "Print the effective config with defaults filled in");
  add_common(show_config, common);

  SweepOptions sweep;
  auto* sweep_eta = app.add_subcommand("sweep-eta", "Regularization sweep over coverage bins");
  add_common(sweep_eta, common);
  sweep_eta->add_option("--dataset", sweep.datasets, "Pool members (repeatable)")->check(CLI::ExistingFile);
  sweep_eta->add_option("--parent", sweep.parents, "Parents to subsample a pool from (repeatable)")
      ->check(CLI::ExistingFile);

  auto* sweep_quality = app.add_subcommand("sweep-quality", "Coverage/quality scatter over subsampled datasets");
  add_common(sweep_quality, common);
  sweep_quality->add_option("--parent", sweep.parents, "Parent datasets (repeatable)")->check(CLI::ExistingFile);
  sweep_quality->add_option("--dataset", sweep.datasets, "Use these datasets instead of subsampling")
      ->check(CLI::ExistingFile);
  sweep_quality->add_option("--min", sweep.min_ref, "Lower quality reference")->required()->check(CLI::ExistingFile);
  sweep_quality->add_option("--expert", sweep.expert_ref, "Upper quality reference")
      ->required()
      ->check(CLI::ExistingFile);

  std::string heat_dataset, heat_policy;
  bool heat_uniform = false, heat_all = false;
  int heat_t = 15;
  auto* heatmaps = app.add_subcommand("export-heatmaps", "Dataset, exact and estimated mean-field grids");
  add_common(heatmaps, common, false);
  heatmaps->add_option("--dataset", heat_dataset, "Dataset")->required()->check(CLI::ExistingFile);
  auto* heat_pol = heatmaps->add_option("--policy", heat_policy, "Target policy JSON")->check(CLI::ExistingFile);
  heatmaps->add_flag("--uniform", heat_uniform, "Use the uniform policy")->excludes(heat_pol);
  auto* heat_t_opt = heatmaps->add_option("-t,--timestep", heat_t, "Timestep to export");
  heatmaps->add_flag("--all-timesteps", heat_all, "Export every timestep")->excludes(heat_t_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*online) return cmd_train_online(common);
    if (*collect_cmd) return cmd_collect(common, col);
    if (*sub_cmd) return cmd_subsample(sub);
    if (*analyze) return cmd_analyze(common, ana);
    if (*offline) return cmd_train_offline(common, off_dataset, off_eta);
    if (*evaluate) return cmd_evaluate(common, eval_policy, eval_uniform);
    if (*show_config) return cmd_show_config(common);
    if (*sweep_eta) return cmd_sweep_eta(common, sweep);
    if (*sweep_quality) return cmd_sweep_quality(common, sweep);
    if (*heatmaps) return cmd_export_heatmaps(common, heat_dataset, heat_policy, heat_uniform, heat_t, heat_all);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataFailure;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kTrainingFailure;
  } catch (const MetricError& e) {
    std::cerr << "metric error: " << e.what() << "\n";
    return kMetricFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
