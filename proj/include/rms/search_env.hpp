#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rms/metapath.hpp"
#include "rms/rl.hpp"

namespace rms {

/// Result of scoring a candidate set with a lightly trained recommender.
/// `metric` is empty when the probe failed (for example every path was
/// density-rejected); `diagnostic` then says why.
struct ProbeOutcome {
  std::optional<double> metric;
  std::string diagnostic;
};

using SetProbe = std::function<ProbeOutcome(const MetaPathSet&)>;

struct SearchState {
  MetaPathSet set;
  int step_index = 0;
  Eigen::VectorXd encoding;  // encode_set(set)
};

SearchState make_state(const HinSchema& schema, MetaPathSet set, int step_index = 0);

struct StepOutcome {
  SearchState next_state;
  double reward = 0.0;
  bool done = false;
  bool changed = false;
  std::optional<double> probe_metric;
  std::string diagnostic;
};

struct EnvOptions {
  int max_steps = 4;
  int max_path_len = kDefaultMaxPathLen;
};

/// {User-Item-User}, {Item-User-Item} or {User-Item} over the interaction relation.
MetaPathSet initial_set(const HinSchema& schema, PathForm form);

/// Extends every path by [r, comp(r)] at its first node of type head(r), then
/// adds [r, comp(r)] itself when it fits the form. Old paths stay first.
MetaPathSet apply_action(const MetaPathSet& set, RelationId r, const HinSchema& schema, int max_len);

/// One transition of the search MDP. STOP gives reward 0 and ends the episode;
/// an action that leaves the set unchanged gives -1; otherwise the reward is
/// probe(new set) - last_metric. A failed probe also gives -1.
StepOutcome step(const HinSchema& schema, const SearchState& state, int action, const SetProbe& probe,
                 double last_metric, const EnvOptions& options);

struct TraceRecord {
  std::string agent;
  int episode = 0;
  int step = 0;
  std::string action;
  std::vector<std::string> set;
  double reward = 0.0;
  std::optional<double> probe_metric;
  std::int64_t wall_ms = 0;
};

/// Appends one JSON object per line.
class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path, bool append = false);
  void write(const TraceRecord& record);

 private:
  std::ofstream out_;
};

/// The search MDP for one path form, bound to a probe.
class SearchEnv final : public Environment {
 public:
  SearchEnv(const HinSchema& schema, PathForm form, SetProbe probe, EnvOptions options = {});

  int state_dim() const override { return schema_.num_relations(); }
  int num_actions() const override { return schema_.num_relations() + 1; }
  int max_steps() const override { return options_.max_steps; }
  Eigen::VectorXd reset() override;
  EnvStep step(int action) override;

  const HinSchema& schema() const { return schema_; }
  PathForm form() const { return form_; }
  const EnvOptions& options() const { return options_; }
  const SearchState& state() const { return state_; }
  const StepOutcome& last_outcome() const { return last_; }
  bool done() const { return done_; }

  /// N(s0): probe metric of the initial set (0 if that probe fails).
  double baseline();
  ProbeOutcome probe(const MetaPathSet& set);
  std::int64_t probe_calls() const { return probe_calls_; }

  void set_trace(TraceWriter* trace, std::string agent) {
    trace_ = trace;
    agent_ = std::move(agent);
  }
  void trace(const TraceRecord& record);
  std::string action_name(int action) const;

 private:
  HinSchema schema_;
  PathForm form_;
  SetProbe probe_;
  EnvOptions options_;
  SearchState state_;
  StepOutcome last_;
  bool done_ = true;
  double last_metric_ = 0.0;
  std::optional<double> baseline_;
  std::int64_t probe_calls_ = 0;
  int episode_ = -1;
  TraceWriter* trace_ = nullptr;
  std::string agent_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Wall-clock limit, iteration limit, or both (whichever hits first).
struct SearchBudget {
  std::optional<std::chrono::milliseconds> wall;
  std::optional<std::int64_t> iterations;
};

/// Probes random sets (random action sequences of random length from the
/// initial set) and returns the best-probing one.
MetaPathSet random_search(SearchEnv& env, const SearchBudget& budget, Rng& rng);

/// Each round probes `candidates_per_round` random one-action extensions of
/// the current set and moves to the best unless all are worse. Stops at the
/// budget or after `max_extensions` accepted extensions.
MetaPathSet greedy_search(SearchEnv& env, const SearchBudget& budget, int candidates_per_round, Rng& rng,
                          int max_extensions);

}  // namespace rms
