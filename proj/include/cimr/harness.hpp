#pragma once

// Experiment runner: configuration, paired variant sweeps, cumulative accuracy
// tables, trace/corpus persistence and correction-triplet export.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cimr/backends.hpp"
#include "cimr/engine.hpp"
#include "cimr/remote.hpp"
#include "cimr/scenario.hpp"
#include "cimr/serialization.hpp"

namespace cimr {

inline const std::vector<double> kReferenceTargets{78.5, 88.0, 91.0, 91.5};
inline constexpr double kDefaultContextFactor = 0.42;
inline constexpr int kDefaultEpisodes = 10000;

enum class TableFormat : std::uint8_t { csv, markdown };

struct ExperimentConfig {
  std::uint64_t base_seed = 0;
  int episodes = kDefaultEpisodes;
  std::array<double, 3> task_mix{1.0 / 3, 1.0 / 3, 1.0 / 3};  // Place, IdentifyAll, Count
  std::vector<Variant> variants{Variant::full, Variant::no_self_correction,
                                Variant::no_dynamic_context};
  std::optional<std::vector<double>> targets;  // oracle backend
  std::optional<std::string> backend_url;      // remote backend
  double timeout_s = kDefaultRemoteTimeoutSeconds;
  double context_factor = kDefaultContextFactor;  // no_dynamic_context only
  int t_max = kDefaultMaxRounds;
  int threads = 0;  // 0 = hardware concurrency
  std::string results_path;
  std::string traces_path;
  std::string triplets_path;
  TableFormat format = TableFormat::csv;
};

inline void validate(const ExperimentConfig& c) {
  if (c.episodes < 1) throw ConfigError(ConfigErrc::NoEpisodes, "episodes must be >= 1");
  if (c.t_max < 1) throw ConfigError(ConfigErrc::BadValue, "T_max must be >= 1");
  if (c.variants.empty()) throw ConfigError(ConfigErrc::BadVariant, "no variants selected");
  double sum = 0.0;
  for (double p : c.task_mix) {
    if (p < 0.0) throw ConfigError(ConfigErrc::BadValue, "task_mix entries must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(ConfigErrc::BadValue, "task_mix must sum to 1");
  if (c.context_factor < 0.0 || c.context_factor > 1.0) {
    throw ConfigError(ConfigErrc::BadValue, "context_factor must lie in [0, 1]");
  }
  if (c.targets) {
    try {
      calibrate_oracle(*c.targets);
    } catch (const DomainError& e) {
      throw ConfigError(ConfigErrc::BadCalibration, e.what());
    }
  }
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Splits on commas and whitespace.
inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T v{};
  in >> v;
  if (!in || !(in >> std::ws).eof()) {
    throw ConfigError(ConfigErrc::BadValue, key + ": cannot parse '" + text + "'");
  }
  return v;
}

inline std::vector<double> parse_numbers(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<double>(key, item));
  return out;
}

}  // namespace detail

inline Variant parse_variant(const std::string& name) {
  const auto v = variant_from_name(name);
  if (!v) throw ConfigError(ConfigErrc::BadVariant, "unknown variant '" + name + "'");
  return *v;
}

/// Parses `key = value` lines ('#' starts a comment), applies defaults and
/// validates. With neither targets nor backend_url the reference accuracy
/// curve is used for the oracle.
inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(ConfigErrc::BadValue, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));

    if (key == "base_seed") {
      c.base_seed = detail::parse_number<std::uint64_t>(key, value);
    } else if (key == "episodes") {
      c.episodes = detail::parse_number<int>(key, value);
    } else if (key == "task_mix") {
      const auto mix = detail::parse_numbers(key, value);
      if (mix.size() != 3) throw ConfigError(ConfigErrc::BadValue, "task_mix needs 3 proportions");
      std::copy(mix.begin(), mix.end(), c.task_mix.begin());
    } else if (key == "variants") {
      c.variants.clear();
      for (const auto& name : detail::split_list(value)) c.variants.push_back(parse_variant(name));
    } else if (key == "targets") {
      c.targets = detail::parse_numbers(key, value);
    } else if (key == "backend_url") {
      c.backend_url = value;
    } else if (key == "timeout_s") {
      c.timeout_s = detail::parse_number<double>(key, value);
    } else if (key == "context_factor") {
      c.context_factor = detail::parse_number<double>(key, value);
    } else if (key == "T_max") {
      c.t_max = detail::parse_number<int>(key, value);
    } else if (key == "threads") {
      c.threads = detail::parse_number<int>(key, value);
    } else if (key == "results_path") {
      c.results_path = value;
    } else if (key == "traces_path") {
      c.traces_path = value;
    } else if (key == "triplets_path") {
      c.triplets_path = value;
    } else if (key == "format") {
      if (value == "csv") c.format = TableFormat::csv;
      else if (value == "markdown") c.format = TableFormat::markdown;
      else throw ConfigError(ConfigErrc::BadValue, "format must be csv or markdown");
    } else {
      throw ConfigError(ConfigErrc::UnknownKey, "line " + std::to_string(line_no) + ": '" + key + "'");
    }
  }
  if (!c.targets && !c.backend_url) c.targets = kReferenceTargets;
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(ConfigErrc::Missing, "cannot open config " + path);
  return parse_config(in);
}

// ---------------------------------------------------------------------------
// Scenario corpus

/// Task kind of the scenario with this seed under the given mix.
inline GoalKind kind_for_seed(std::uint64_t seed, const std::array<double, 3>& mix) {
  Rng rng(derive_seed(seed, 0, 0x7A5CULL));
  const double u = rng.uniform();
  double acc = 0.0;
  for (int k = 0; k < 3; ++k) {
    acc += mix[static_cast<std::size_t>(k)];
    if (u < acc) return static_cast<GoalKind>(k);
  }
  for (int k = 2; k >= 0; --k) {
    if (mix[static_cast<std::size_t>(k)] > 0.0) return static_cast<GoalKind>(k);
  }
  return GoalKind::count;
}

/// Scenarios for seeds base_seed .. base_seed + episodes - 1.
inline std::vector<Scenario> build_scenarios(const ExperimentConfig& c) {
  std::vector<Scenario> out;
  out.reserve(static_cast<std::size_t>(c.episodes));
  for (int i = 0; i < c.episodes; ++i) {
    const std::uint64_t seed = c.base_seed + static_cast<std::uint64_t>(i);
    out.push_back(generate_scenario(seed, kind_for_seed(seed, c.task_mix)));
  }
  return out;
}

inline void write_corpus(const std::string& path, const std::vector<Scenario>& scenarios) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoErrc::Write, "cannot open " + path);
  for (const auto& s : scenarios) out << scenario_to_json(s).dump() << '\n';
  if (!out) throw IoError(IoErrc::Write, "write failed for " + path);
}

inline std::vector<Scenario> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrc::Read, "cannot open " + path);
  std::vector<Scenario> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(scenario_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw IoError(IoErrc::Read, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Results

struct ResultRow {
  Variant variant = Variant::full;
  int round = 1;
  int episodes = 0;
  int successes = 0;
  double accuracy_pct = 0.0;
  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct ResultsTable {
  std::vector<ResultRow> rows;

  std::optional<ResultRow> find(Variant v, int round) const {
    for (const auto& r : rows) {
      if (r.variant == v && r.round == round) return r;
    }
    return std::nullopt;
  }
  /// Accuracy after the last round recorded for a variant.
  std::optional<double> final_accuracy(Variant v) const {
    std::optional<double> out;
    for (const auto& r : rows) {
      if (r.variant == v) out = r.accuracy_pct;
    }
    return out;
  }
  friend bool operator==(const ResultsTable&, const ResultsTable&) = default;
};

inline double accuracy_pct(int successes, int episodes) {
  return std::round(1000.0 * successes / episodes) / 10.0;
}

/// Round at which an episode first succeeded, if it did.
inline std::optional<int> success_round(const EpisodeTrace& t) {
  if (!t.outcome.success) return std::nullopt;
  return t.rounds_used;
}

/// Cumulative accuracy by round: row (v, k) counts episodes of variant v that
/// succeeded at round <= k. Variants appear in first-seen order; rounds run
/// 1..t_max.
inline ResultsTable aggregate_metrics(const std::vector<EpisodeTrace>& traces, int t_max) {
  std::vector<Variant> order;
  std::map<Variant, std::vector<int>> successes_by_round;  // index k-1
  std::map<Variant, int> counts;
  for (const auto& t : traces) {
    if (!counts.contains(t.variant)) {
      order.push_back(t.variant);
      successes_by_round[t.variant].assign(static_cast<std::size_t>(t_max), 0);
    }
    ++counts[t.variant];
    if (const auto k = success_round(t)) {
      auto& col = successes_by_round[t.variant];
      for (int r = std::max(*k, 1); r <= t_max; ++r) ++col[static_cast<std::size_t>(r - 1)];
    }
  }
  ResultsTable table;
  for (Variant v : order) {
    for (int k = 1; k <= t_max; ++k) {
      const int s = successes_by_round[v][static_cast<std::size_t>(k - 1)];
      table.rows.push_back({v, k, counts[v], s, accuracy_pct(s, counts[v])});
    }
  }
  return table;
}

inline std::string format_pct(double pct) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", pct);
  return buf;
}

inline std::string render_csv(const ResultsTable& table) {
  std::string out = "variant,round,episodes,successes,accuracy_pct\n";
  for (const auto& r : table.rows) {
    out += std::string(to_string(r.variant)) + "," + std::to_string(r.round) + "," +
           std::to_string(r.episodes) + "," + std::to_string(r.successes) + "," +
           format_pct(r.accuracy_pct) + "\n";
  }
  return out;
}

/// One iteration/accuracy table per variant; the first row is labelled as the
/// initial pass and the last as "k+".
inline std::string render_markdown(const ResultsTable& table) {
  std::string out;
  std::vector<Variant> order;
  for (const auto& r : table.rows) {
    if (std::find(order.begin(), order.end(), r.variant) == order.end()) order.push_back(r.variant);
  }
  for (Variant v : order) {
    int last = 0;
    for (const auto& r : table.rows) {
      if (r.variant == v) last = std::max(last, r.round);
    }
    if (!out.empty()) out += "\n";
    out += "### " + std::string(to_string(v)) + "\n\n| Iteration | Accuracy (%) |\n|---|---|\n";
    for (const auto& r : table.rows) {
      if (r.variant != v) continue;
      std::string label = std::to_string(r.round);
      if (r.round == 1) label += " (Initial Pass)";
      else if (r.round == last) label += "+";
      out += "| " + label + " | " + format_pct(r.accuracy_pct) + " |\n";
    }
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoErrc::Write, "cannot open " + path);
  out << text;
  if (!out.flush()) throw IoError(IoErrc::Write, "write failed for " + path);
}

inline void emit_results(const ResultsTable& table, TableFormat format, const std::string& path) {
  write_text(path, format == TableFormat::csv ? render_csv(table) : render_markdown(table));
}

// ---------------------------------------------------------------------------
// Traces

/// Episodes are numbered per variant; the index is the offset from base_seed.
struct IndexedTrace {
  std::size_t episode = 0;
  EpisodeTrace trace;
};

/// One JSON object per round record. The last record of an episode also
/// carries "success" and "rounds_used".
inline std::string render_trace_lines(const IndexedTrace& it) {
  std::string out;
  const auto& t = it.trace;
  for (std::size_t i = 0; i < t.rounds.size(); ++i) {
    const auto& r = t.rounds[i];
    json j{{"episode", it.episode},
           {"round", r.round},
           {"variant", to_string(t.variant)},
           {"seed", t.seed},
           {"kind", to_string(t.kind)},
           {"response", response_to_json(r.response)},
           {"feedback", feedback_to_json(r.feedback)},
           {"confidence", r.confidence}};
    if (i + 1 == t.rounds.size()) {
      j["success"] = t.outcome.success;
      j["rounds_used"] = t.rounds_used;
    }
    out += j.dump() + "\n";
  }
  return out;
}

inline void write_traces(const std::string& path, const std::vector<IndexedTrace>& traces) {
  std::string text;
  for (const auto& t : traces) text += render_trace_lines(t);
  write_text(path, text);
}

/// Parses a trace file back into episodes. Structural problems (bad JSON,
/// missing keys, rounds out of order, an episode without its final record)
/// raise IoError(BadTrace).
inline std::vector<IndexedTrace> read_traces(std::istream& in) {
  std::vector<IndexedTrace> out;
  bool open = false;
  std::string line;
  int line_no = 0;
  auto bad = [&](const std::string& why) {
    return IoError(IoErrc::BadTrace, "line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw bad(e.what());
    }
    try {
      const auto episode = j.at("episode").get<std::size_t>();
      const int round = j.at("round").get<int>();
      const auto variant = variant_from_name(j.at("variant").get<std::string>());
      if (!variant) throw bad("unknown variant");
      if (!open) {
        if (round != 1) throw bad("episode does not start at round 1");
        IndexedTrace it;
        it.episode = episode;
        it.trace.variant = *variant;
        it.trace.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("kind")) {
          const auto kind = goal_kind_from_name(j.at("kind").get<std::string>());
          if (!kind) throw bad("unknown kind");
          it.trace.kind = *kind;
        }
        out.push_back(std::move(it));
        open = true;
      } else {
        const auto& cur = out.back();
        if (episode != cur.episode || *variant != cur.trace.variant ||
            round != static_cast<int>(cur.trace.rounds.size()) + 1) {
          throw bad("round record out of sequence");
        }
      }
      auto& t = out.back().trace;
      const json& resp = j.at("response");
      t.rounds.push_back({round, response_from_json(resp, resp.value("rationale", std::string())),
                          feedback_from_json(j.at("feedback")), j.at("confidence").get<double>()});
      if (j.contains("success")) {
        t.rounds_used = j.at("rounds_used").get<int>();
        if (t.rounds_used != static_cast<int>(t.rounds.size())) throw bad("rounds_used mismatch");
        t.outcome = TaskOutcome{};
        if (!j.at("success").get<bool>()) t.outcome.fail("recorded", "episode failed");
        open = false;
      }
    } catch (const json::exception& e) {
      throw bad(e.what());
    }
  }
  if (open) throw IoError(IoErrc::BadTrace, "trace ends inside an episode");
  return out;
}

inline std::vector<IndexedTrace> read_traces(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrc::Read, "cannot open " + path);
  return read_traces(in);
}

inline ResultsTable aggregate_metrics(const std::vector<IndexedTrace>& traces, int t_max) {
  std::vector<EpisodeTrace> plain;
  plain.reserve(traces.size());
  for (const auto& t : traces) plain.push_back(t.trace);
  return aggregate_metrics(plain, t_max);
}

// ---------------------------------------------------------------------------
// Correction triplets

struct CorrectionTriplet {
  std::size_t episode = 0;
  std::uint64_t seed = 0;
  GoalKind kind = GoalKind::place;
  Response erroneous;
  FeedbackSignal feedback;
  Response corrected;
};

/// (R_t, S_t, R_{t+1}) for every round t whose feedback was non-empty and
/// whose successor's feedback was empty.
inline std::vector<CorrectionTriplet> correction_triplets(const std::vector<IndexedTrace>& traces) {
  std::vector<CorrectionTriplet> out;
  for (const auto& it : traces) {
    const auto& rounds = it.trace.rounds;
    for (std::size_t t = 0; t + 1 < rounds.size(); ++t) {
      if (!rounds[t].feedback.empty() && rounds[t + 1].feedback.empty()) {
        out.push_back({it.episode, it.trace.seed, it.trace.kind, rounds[t].response,
                       rounds[t].feedback, rounds[t + 1].response});
      }
    }
  }
  return out;
}

/// Writes one JSON object per triplet and returns how many were written.
inline int export_correction_triplets(const std::vector<IndexedTrace>& traces,
                                      const std::string& out_path) {
  const auto triplets = correction_triplets(traces);
  std::string text;
  for (const auto& t : triplets) {
    text += json{{"episode", t.episode},
                 {"seed", t.seed},
                 {"kind", to_string(t.kind)},
                 {"erroneous", response_to_json(t.erroneous)},
                 {"feedback", feedback_to_json(t.feedback)},
                 {"corrected", response_to_json(t.corrected)}}
                .dump() +
            "\n";
  }
  write_text(out_path, text);
  return static_cast<int>(triplets.size());
}

// ---------------------------------------------------------------------------
// Experiment

struct ExperimentResult {
  ResultsTable table;
  std::vector<IndexedTrace> traces;  // variant-major, episode order within a variant
  int triplets_written = 0;
  double seconds = 0.0;
};

/// Oracle configuration a variant runs with: the calibrated curve, with the
/// configured context factor applied to the static-context variant.
inline OracleConfig oracle_for_variant(const ExperimentConfig& c, Variant v) {
  OracleConfig oracle = calibrate_oracle(*c.targets);
  oracle.context_factor = v == Variant::no_dynamic_context ? c.context_factor : 1.0;
  return oracle;
}

/// Seed of the rng owned by episode `index`; identical across variants so
/// sweeps are paired.
inline std::uint64_t episode_rng_seed(std::uint64_t base_seed, std::size_t index) {
  return derive_seed(base_seed, index, 0xE915ULL);
}

/// Runs every variant over the same scenarios. Writes results, traces and
/// triplets to the configured paths (empty path = skip). A backend failure
/// aborts the run with the first failing episode's BackendError.
inline ExperimentResult run_experiment(const ExperimentConfig& c,
                                       const EngineResources& resources = EngineResources{}) {
  validate(c);
  const auto start = std::chrono::steady_clock::now();
  const std::vector<Scenario> scenarios = build_scenarios(c);

  ExperimentResult result;
  for (Variant v : c.variants) {
    std::unique_ptr<BackendFactory> factory;
    if (c.backend_url) {
      factory = std::make_unique<RemoteBackendFactory>(*c.backend_url, c.timeout_s);
    } else {
      factory = std::make_unique<ScriptedOracleFactory>(oracle_for_variant(c, v));
    }
    const VariantConfig vc{v, c.t_max};

    std::vector<EpisodeTrace> traces(scenarios.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < scenarios.size(); i = next++) {
        auto backend = factory->open(scenarios[i]);
        Rng rng(episode_rng_seed(c.base_seed, i));
        traces[i] = run_episode(scenarios[i], *backend, vc, rng, resources);
      }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const auto n_threads = static_cast<std::size_t>(c.threads > 0 ? static_cast<unsigned>(c.threads) : hw);
    if (n_threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < std::min(n_threads, scenarios.size()); ++t) pool.emplace_back(worker);
    }

    for (std::size_t i = 0; i < traces.size(); ++i) {
      if (traces[i].backend_error) {
        const BackendError& e = *traces[i].backend_error;
        throw BackendError(e.code(), "episode " + std::to_string(i) + ": " + e.what());
      }
      result.traces.push_back({i, std::move(traces[i])});
    }
  }

  result.table = aggregate_metrics(result.traces, c.t_max);
  if (!c.results_path.empty()) emit_results(result.table, c.format, c.results_path);
  if (!c.traces_path.empty()) write_traces(c.traces_path, result.traces);
  if (!c.triplets_path.empty()) {
    result.triplets_written = export_correction_triplets(result.traces, c.triplets_path);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace cimr
