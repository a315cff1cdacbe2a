#pragma once

#include <map>
#include <memory>
#include <optional>

#include "rms/dqn.hpp"
#include "rms/eval.hpp"
#include "rms/hrec.hpp"
#include "rms/search_env.hpp"

namespace rms {

/// A graph prepared for recommendation: the leave-one-out split, the graph
/// used for subgraphs (held-out edges removed unless leak_guard is off), and
/// the MF embeddings every model starts from.
struct Workbench {
  Workbench(const HinGraph& full, std::uint64_t seed, const MfConfig& mf, bool leak_guard = true,
            int num_negatives = 499);

  HinGraph graph;
  SplitSet split;
  MfResult init;
  std::uint64_t seed;
};

struct FitResult {
  std::unique_ptr<HRecModel> model;
  TrainResult training;
  double validation_ndcg = 0.0;  // NDCG@10 of the returned parameters
};

/// Builds a fresh model on `bench` and trains it. With `early_stop`, the
/// validation NDCG@10 drives patience and best-epoch restore.
FitResult fit(const Workbench& bench, SubgraphCache& cache, const MetaPathSet& user_set, const MetaPathSet& item_set,
              const HRecConfig& config, std::uint64_t seed, bool early_stop, int jobs = 1);

/// Validation NDCG@10 after `epochs` of training from the MF init; the
/// search reward oracle. Results are memoized per pair of sets.
class PerformanceProbe {
 public:
  PerformanceProbe(const Workbench& bench, HRecConfig config, int epochs = 1, int jobs = 1);

  ProbeOutcome operator()(const MetaPathSet& user_set, const MetaPathSet& item_set);

  /// The user-side probe with the item set frozen, and the reverse.
  SetProbe with_item_set(MetaPathSet item_set);
  SetProbe with_user_set(MetaPathSet user_set);

  SubgraphCache& cache() { return cache_; }
  const Workbench& bench() const { return *bench_; }
  /// Distinct set pairs actually trained (cache misses).
  std::int64_t trainings() const { return trainings_; }

 private:
  const Workbench* bench_;
  HRecConfig config_;
  int epochs_;
  int jobs_;
  SubgraphCache cache_;
  std::map<std::string, ProbeOutcome> memo_;
  std::int64_t trainings_ = 0;
};

struct DualResult {
  MetaPathSet user_set{PathForm::UserSymmetric};
  MetaPathSet item_set{PathForm::ItemSymmetric};
  std::int64_t probe_calls = 0;  // environment probe requests over both sides
};

struct RmsRunOptions {
  std::optional<std::chrono::milliseconds> wall;  // split evenly between the two agents
  std::filesystem::path checkpoint_dir;            // empty: no checkpoints
  bool resume = false;                              // continue from checkpoints found there
  int checkpoint_every = 10;                        // episodes
};

/// Trains the user agent with the item set frozen at its initial set, then the
/// item agent with the user set frozen likewise, and returns both found sets.
DualResult dual_agent_search(PerformanceProbe& probe, const DqnConfig& config, const EnvOptions& options,
                             TraceWriter* trace = nullptr, const RmsRunOptions& run = {});

enum class Strategy { Rms, Greedy, Random };
Strategy parse_strategy(std::string_view name);
std::string to_string(Strategy s);

struct BaselineConfig {
  SearchBudget budget;          // per side
  int candidates_per_round = 3; // greedy only
};

/// Random or greedy search run the same two-sided way as dual_agent_search.
DualResult dual_baseline_search(PerformanceProbe& probe, Strategy strategy, const BaselineConfig& config,
                                const EnvOptions& options, std::uint64_t seed, TraceWriter* trace = nullptr);

}  // namespace rms
