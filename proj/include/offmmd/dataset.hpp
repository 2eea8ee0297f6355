#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "offmmd/common.hpp"
#include "offmmd/game.hpp"
#include "offmmd/policy.hpp"

namespace offmmd {

/// One logged step. `reward` is what the collecting population experienced;
/// training never reads it (rewards are relabeled against estimated flows).
struct DatasetRecord {
  Transition transition;
  double reward = 0.0;

  bool operator==(const DatasetRecord& o) const {
    const auto& a = transition;
    const auto& b = o.transition;
    return a.episode == b.episode && a.t == b.t && a.state == b.state && a.action == b.action &&
           a.next_state == b.next_state && std::bit_cast<std::uint64_t>(reward) ==
                                               std::bit_cast<std::uint64_t>(o.reward);
  }
};

struct DatasetMetadata {
  std::string env_hash;
  std::string behavior;
  std::uint64_t seed = 0;
  int episodes = 0;
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  double gamma = 0.99;

  bool operator==(const DatasetMetadata& o) const {
    return env_hash == o.env_hash && behavior == o.behavior && seed == o.seed &&
           episodes == o.episodes && horizon == o.horizon && num_states == o.num_states &&
           num_actions == o.num_actions &&
           std::bit_cast<std::uint64_t>(gamma) == std::bit_cast<std::uint64_t>(o.gamma);
  }
};

struct TransitionDataset {
  DatasetMetadata metadata;
  std::vector<DatasetRecord> records;

  bool operator==(const TransitionDataset&) const = default;

  std::vector<Transition> transitions() const {
    std::vector<Transition> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.transition);
    return out;
  }

  /// Distinct episode ids in order of first appearance.
  std::vector<std::uint32_t> episode_ids() const {
    std::vector<std::uint32_t> ids;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (i == 0 || records[i].transition.episode != records[i - 1].transition.episode) {
        ids.push_back(records[i].transition.episode);
      }
    }
    return ids;
  }

  /// Checks ranges and episode integrity: each episode is a contiguous run
  /// t = 0..H-1 whose states chain through s'.
  void validate() const {
    const auto& m = metadata;
    if (m.horizon < 1 || m.num_states < 1 || m.num_actions < 1) {
      throw DataError("dataset: metadata dimensions must be positive");
    }
    if (records.size() != static_cast<std::size_t>(m.episodes) * m.horizon) {
      throw DataError("dataset: expected " + std::to_string(m.episodes) + " episodes of " +
                      std::to_string(m.horizon) + " steps, found " + std::to_string(records.size()) +
                      " records");
    }
    std::set<std::uint32_t> seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& tr = records[i].transition;
      const int expected_t = static_cast<int>(i % static_cast<std::size_t>(m.horizon));
      if (tr.t != expected_t) {
        throw DataError("dataset: record " + std::to_string(i) + " has t=" + std::to_string(tr.t) +
                        ", expected " + std::to_string(expected_t));
      }
      if (tr.state < 0 || tr.state >= m.num_states || tr.next_state < 0 ||
          tr.next_state >= m.num_states || tr.action < 0 || tr.action >= m.num_actions) {
        throw DataError("dataset: record " + std::to_string(i) + " is out of range");
      }
      if (!std::isfinite(records[i].reward)) {
        throw DataError("dataset: record " + std::to_string(i) + " has a non-finite reward");
      }
      if (expected_t == 0) {
        if (!seen.insert(tr.episode).second) {
          throw DataError("dataset: episode " + std::to_string(tr.episode) + " is not contiguous");
        }
      } else {
        const auto& prev = records[i - 1].transition;
        if (prev.episode != tr.episode) {
          throw DataError("dataset: episode " + std::to_string(prev.episode) + " is truncated");
        }
        if (prev.next_state != tr.state) {
          throw DataError("dataset: record " + std::to_string(i) + " does not continue from s'");
        }
      }
    }
  }
};

/// Rolls out `behavior` for `episodes` episodes. Rewards are priced against
/// the exact flow phi(behavior) of a population following the same policy.
template <MeanFieldGame G>
TransitionDataset collect(const G& game, const TimedPolicy& behavior, int episodes,
                          std::uint64_t seed, std::string behavior_label = "",
                          std::string env_hash = "") {
  if (episodes < 1) throw ConfigError("collect: episodes must be >= 1");
  const MeanFieldFlow mu = propagate_flow(game, behavior);
  TransitionDataset ds;
  ds.metadata = {std::move(env_hash), std::move(behavior_label), seed,           episodes,
                 game.horizon(),      game.num_states(),        game.num_actions(), game.gamma()};
  ds.records.reserve(static_cast<std::size_t>(episodes) * game.horizon());
  for (int e = 0; e < episodes; ++e) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(e)));
    int s = sample_index(game.initial_distribution(), uniform01(rng));
    for (int t = 0; t < game.horizon(); ++t) {
      const int a = sample_index(behavior.row(t, s), uniform01(rng));
      const int next = sample_successor(game.transitions(s, a), rng);
      ds.records.push_back({{static_cast<std::uint32_t>(e), t, s, a, next},
                            game.reward(t, s, a, mu.at(t))});
      s = next;
    }
  }
  return ds;
}

/// Fraction of (state, action) pairs present at least once, time ignored.
inline double coverage(const TransitionDataset& ds, int num_states, int num_actions) {
  std::vector<bool> seen(static_cast<std::size_t>(num_states) * num_actions, false);
  std::size_t unique = 0;
  for (const auto& r : ds.records) {
    const auto idx = static_cast<std::size_t>(r.transition.state) * num_actions + r.transition.action;
    if (!seen[idx]) {
      seen[idx] = true;
      ++unique;
    }
  }
  return static_cast<double>(unique) / (static_cast<double>(num_states) * num_actions);
}

template <class G>
double coverage(const TransitionDataset& ds, const G& game) {
  return coverage(ds, game.num_states(), game.num_actions());
}

/// Mean over episodes of the discounted logged return.
inline double average_return(const TransitionDataset& ds) {
  if (ds.records.empty()) throw MetricError("average_return: empty dataset");
  double total = 0.0;
  std::size_t episodes = 0;
  double episode_return = 0.0;
  double discount = 1.0;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& tr = ds.records[i].transition;
    if (i == 0 || tr.episode != ds.records[i - 1].transition.episode) {
      if (i > 0) total += episode_return;
      ++episodes;
      episode_return = 0.0;
      discount = 1.0;
    }
    episode_return += discount * ds.records[i].reward;
    discount *= ds.metadata.gamma;
  }
  total += episode_return;
  return total / static_cast<double>(episodes);
}

/// Trajectory quality normalized between a reference minimum and expert dataset.
inline double quality(const TransitionDataset& ds, const TransitionDataset& ds_min,
                      const TransitionDataset& ds_expert) {
  const double g_min = average_return(ds_min);
  const double g_expert = average_return(ds_expert);
  const double span = g_expert - g_min;
  if (!(std::abs(span) > 0.0) || !std::isfinite(span)) {
    throw MetricError("quality: expert and minimum datasets have the same average return");
  }
  return (average_return(ds) - g_min) / span;
}

/// Uniform selection of k whole episodes without replacement.
inline TransitionDataset subsample(const TransitionDataset& ds, int k, std::uint64_t seed) {
  auto ids = ds.episode_ids();
  if (k < 1 || k > static_cast<int>(ids.size())) {
    throw DataError("subsample: k=" + std::to_string(k) + " outside [1, " +
                    std::to_string(ids.size()) + "]");
  }
  const std::size_t horizon = static_cast<std::size_t>(ds.metadata.horizon);
  // Episode j occupies records [j*H, (j+1)*H) in a validated dataset.
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x5b5a3b1eULL));
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const std::size_t j = i + uniform_index(rng, order.size() - i);
    std::swap(order[i], order[j]);
  }
  TransitionDataset out;
  out.metadata = ds.metadata;
  out.metadata.episodes = k;
  out.metadata.behavior = ds.metadata.behavior;
  out.records.reserve(static_cast<std::size_t>(k) * horizon);
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const std::size_t begin = order[i] * horizon;
    out.records.insert(out.records.end(), ds.records.begin() + static_cast<std::ptrdiff_t>(begin),
                       ds.records.begin() + static_cast<std::ptrdiff_t>(begin + horizon));
  }
  return out;
}

/// Counts behind the empirical state marginals and behavior policy.
struct EmpiricalStatistics {
  struct TripleCount {
    int t = 0;
    int state = 0;
    int action = 0;
    int next_state = 0;
    long count = 0;
  };

  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  std::vector<long> step_count;    // N_t
  std::vector<long> state_count;   // [t][s]
  std::vector<long> action_count;  // [t][s][a]
  std::vector<long> pooled_state_count;   // [s]
  std::vector<long> pooled_action_count;  // [s][a]
  std::vector<TripleCount> triples;       // sorted by (t, s, a, s')
  long unique_pairs = 0;

  /// d_hat_t(s)
  double state_marginal(int t, int s) const {
    const long n = step_count[static_cast<std::size_t>(t)];
    return n == 0 ? 0.0 : static_cast<double>(state_count[idx(t, s)]) / static_cast<double>(n);
  }
  /// pi_hat_beta(a | s, t); zero where (t, s) is unobserved.
  double behavior(int t, int s, int a) const {
    const long n = state_count[idx(t, s)];
    return n == 0 ? 0.0
                  : static_cast<double>(action_count[idx(t, s) * num_actions + a]) / static_cast<double>(n);
  }
  /// Time-pooled pi_hat_beta(a | s).
  double pooled_behavior(int s, int a) const {
    const long n = pooled_state_count[static_cast<std::size_t>(s)];
    return n == 0 ? 0.0
                  : static_cast<double>(pooled_action_count[static_cast<std::size_t>(s) * num_actions + a]) /
                        static_cast<double>(n);
  }

 private:
  std::size_t idx(int t, int s) const { return static_cast<std::size_t>(t) * num_states + s; }
};

inline EmpiricalStatistics empirical_statistics(const TransitionDataset& ds, int num_states,
                                                int num_actions) {
  EmpiricalStatistics st;
  st.horizon = ds.metadata.horizon;
  st.num_states = num_states;
  st.num_actions = num_actions;
  const auto h = static_cast<std::size_t>(st.horizon);
  const auto ns = static_cast<std::size_t>(num_states);
  const auto na = static_cast<std::size_t>(num_actions);
  st.step_count.assign(h, 0);
  st.state_count.assign(h * ns, 0);
  st.action_count.assign(h * ns * na, 0);
  st.pooled_state_count.assign(ns, 0);
  st.pooled_action_count.assign(ns * na, 0);
  std::map<std::tuple<int, int, int, int>, long> triples;
  for (const auto& r : ds.records) {
    const auto& tr = r.transition;
    if (tr.t < 0 || tr.t >= st.horizon || tr.state < 0 || tr.state >= num_states || tr.action < 0 ||
        tr.action >= num_actions || tr.next_state < 0 || tr.next_state >= num_states) {
      throw DataError("empirical_statistics: record out of range");
    }
    const auto t = static_cast<std::size_t>(tr.t);
    const auto s = static_cast<std::size_t>(tr.state);
    const auto a = static_cast<std::size_t>(tr.action);
    ++st.step_count[t];
    ++st.state_count[t * ns + s];
    ++st.action_count[(t * ns + s) * na + a];
    ++st.pooled_state_count[s];
    if (st.pooled_action_count[s * na + a]++ == 0) ++st.unique_pairs;
    ++triples[{tr.t, tr.state, tr.action, tr.next_state}];
  }
  st.triples.reserve(triples.size());
  for (const auto& [key, count] : triples) {
    const auto& [t, s, a, n] = key;
    st.triples.push_back({t, s, a, n, count});
  }
  return st;
}

template <class G>
EmpiricalStatistics empirical_statistics(const TransitionDataset& ds, const G& game) {
  return empirical_statistics(ds, game.num_states(), game.num_actions());
}

// ---------------------------------------------------------------------------
// Storage. Text: a header line, key=value metadata, a "---" separator, then
// one whitespace-separated record per line. Binary: same schema, packed.

inline constexpr std::string_view kDatasetTextMagic = "offmmd-dataset v1";
inline constexpr char kDatasetBinaryMagic[8] = {'O', 'M', 'M', 'D', 'B', 'I', 'N', '1'};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError("dataset: cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

template <class Int>
Int parse_int(std::string_view s) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError("dataset: cannot parse integer '" + std::string(s) + "'");
  }
  return v;
}

inline nlohmann::json metadata_to_json(const DatasetMetadata& m) {
  return {{"env_hash", m.env_hash},     {"behavior", m.behavior}, {"seed", m.seed},
          {"episodes", m.episodes},     {"horizon", m.horizon},   {"num_states", m.num_states},
          {"num_actions", m.num_actions}, {"gamma", m.gamma}};
}

inline DatasetMetadata metadata_from_json(const nlohmann::json& j) {
  DatasetMetadata m;
  m.env_hash = j.at("env_hash").get<std::string>();
  m.behavior = j.at("behavior").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.episodes = j.at("episodes").get<int>();
  m.horizon = j.at("horizon").get<int>();
  m.num_states = j.at("num_states").get<int>();
  m.num_actions = j.at("num_actions").get<int>();
  m.gamma = j.at("gamma").get<double>();
  return m;
}

inline std::string escape_line(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\n') out += "\\n";
    else out += c;
  }
  return out;
}

inline std::string unescape_line(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      out += s[i + 1] == 'n' ? '\n' : s[i + 1];
      ++i;
    } else {
      out += s[i];
    }
  }
  return out;
}

}  // namespace detail

inline std::string dataset_to_text(const TransitionDataset& ds) {
  const auto& m = ds.metadata;
  std::string out;
  out.reserve(ds.records.size() * 24 + 256);
  out += kDatasetTextMagic;
  out += "\nenv_hash=" + detail::escape_line(m.env_hash);
  out += "\nbehavior=" + detail::escape_line(m.behavior);
  out += "\nseed=" + std::to_string(m.seed);
  out += "\nepisodes=" + std::to_string(m.episodes);
  out += "\nhorizon=" + std::to_string(m.horizon);
  out += "\nnum_states=" + std::to_string(m.num_states);
  out += "\nnum_actions=" + std::to_string(m.num_actions);
  out += "\ngamma=" + detail::format_double(m.gamma);
  out += "\nrecords=" + std::to_string(ds.records.size());
  out += "\n---\n";
  for (const auto& r : ds.records) {
    const auto& tr = r.transition;
    out += std::to_string(tr.episode);
    out += ' ';
    out += std::to_string(tr.t);
    out += ' ';
    out += std::to_string(tr.state);
    out += ' ';
    out += std::to_string(tr.action);
    out += ' ';
    out += std::to_string(tr.next_state);
    out += ' ';
    out += detail::format_double(r.reward);
    out += '\n';
  }
  return out;
}

inline TransitionDataset dataset_from_text(const std::string& text) {
  TransitionDataset ds;
  std::size_t pos = 0;
  const auto next_line = [&]() -> std::string_view {
    if (pos >= text.size()) throw DataError("dataset: unexpected end of file");
    const std::size_t end = text.find('\n', pos);
    const std::size_t stop = end == std::string::npos ? text.size() : end;
    std::string_view line(text.data() + pos, stop - pos);
    pos = stop + 1;
    return line;
  };
  if (next_line() != kDatasetTextMagic) throw DataError("dataset: missing text header");
  std::map<std::string, std::string, std::less<>> meta;
  for (;;) {
    const auto line = next_line();
    if (line == "---") break;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw DataError("dataset: malformed metadata line");
    meta.emplace(std::string(line.substr(0, eq)), detail::unescape_line(line.substr(eq + 1)));
  }
  const auto field = [&](const char* key) -> const std::string& {
    const auto it = meta.find(key);
    if (it == meta.end()) throw DataError(std::string("dataset: missing metadata field ") + key);
    return it->second;
  };
  auto& m = ds.metadata;
  m.env_hash = field("env_hash");
  m.behavior = field("behavior");
  m.seed = detail::parse_int<std::uint64_t>(field("seed"));
  m.episodes = detail::parse_int<int>(field("episodes"));
  m.horizon = detail::parse_int<int>(field("horizon"));
  m.num_states = detail::parse_int<int>(field("num_states"));
  m.num_actions = detail::parse_int<int>(field("num_actions"));
  m.gamma = detail::parse_double(field("gamma"));
  const auto count = detail::parse_int<std::size_t>(field("records"));
  ds.records.reserve(count);
  std::string_view parts[6];
  for (std::size_t i = 0; i < count; ++i) {
    const auto line = next_line();
    std::size_t start = 0;
    for (int k = 0; k < 6; ++k) {
      const std::size_t sp = k < 5 ? line.find(' ', start) : line.size();
      if (sp == std::string_view::npos) throw DataError("dataset: short record line");
      parts[k] = line.substr(start, sp - start);
      start = sp + 1;
    }
    ds.records.push_back({{detail::parse_int<std::uint32_t>(parts[0]), detail::parse_int<int>(parts[1]),
                           detail::parse_int<int>(parts[2]), detail::parse_int<int>(parts[3]),
                           detail::parse_int<int>(parts[4])},
                          detail::parse_double(parts[5])});
  }
  ds.validate();
  return ds;
}

inline std::string dataset_to_binary(const TransitionDataset& ds) {
  static_assert(std::endian::native == std::endian::little, "binary datasets assume little-endian hosts");
  const std::string meta = detail::metadata_to_json(ds.metadata).dump();
  std::string out(kDatasetBinaryMagic, sizeof(kDatasetBinaryMagic));
  const auto put = [&out](const auto& v) {
    char buf[sizeof(v)];
    std::memcpy(buf, &v, sizeof(v));
    out.append(buf, sizeof(v));
  };
  put(static_cast<std::uint32_t>(meta.size()));
  out += meta;
  put(static_cast<std::uint64_t>(ds.records.size()));
  for (const auto& r : ds.records) {
    const auto& tr = r.transition;
    put(tr.episode);
    put(static_cast<std::int32_t>(tr.t));
    put(static_cast<std::int32_t>(tr.state));
    put(static_cast<std::int32_t>(tr.action));
    put(static_cast<std::int32_t>(tr.next_state));
    put(r.reward);
  }
  return out;
}

inline TransitionDataset dataset_from_binary(const std::string& bytes) {
  std::size_t pos = 0;
  const auto take = [&](auto& v) {
    if (pos + sizeof(v) > bytes.size()) throw DataError("dataset: truncated binary file");
    std::memcpy(&v, bytes.data() + pos, sizeof(v));
    pos += sizeof(v);
  };
  if (bytes.size() < sizeof(kDatasetBinaryMagic) ||
      std::memcmp(bytes.data(), kDatasetBinaryMagic, sizeof(kDatasetBinaryMagic)) != 0) {
    throw DataError("dataset: missing binary header");
  }
  pos = sizeof(kDatasetBinaryMagic);
  std::uint32_t meta_size = 0;
  take(meta_size);
  if (pos + meta_size > bytes.size()) throw DataError("dataset: truncated metadata");
  TransitionDataset ds;
  try {
    ds.metadata = detail::metadata_from_json(nlohmann::json::parse(bytes.substr(pos, meta_size)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("dataset: malformed metadata: ") + e.what());
  }
  pos += meta_size;
  std::uint64_t count = 0;
  take(count);
  ds.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    DatasetRecord r;
    std::int32_t t = 0, s = 0, a = 0, n = 0;
    take(r.transition.episode);
    take(t);
    take(s);
    take(a);
    take(n);
    take(r.reward);
    r.transition.t = t;
    r.transition.state = s;
    r.transition.action = a;
    r.transition.next_state = n;
    ds.records.push_back(r);
  }
  if (pos != bytes.size()) throw DataError("dataset: trailing bytes after records");
  ds.validate();
  return ds;
}

inline void save_dataset(const TransitionDataset& ds, const std::string& path, bool binary = false) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << (binary ? dataset_to_binary(ds) : dataset_to_text(ds));
  if (!out) throw DataError("write failed for '" + path + "'");
}

/// Loads either format, detected from the leading bytes.
inline TransitionDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.size() >= sizeof(kDatasetBinaryMagic) &&
      std::memcmp(bytes.data(), kDatasetBinaryMagic, sizeof(kDatasetBinaryMagic)) == 0) {
    return dataset_from_binary(bytes);
  }
  return dataset_from_text(bytes);
}

}  // namespace offmmd
