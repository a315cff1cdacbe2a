#include "rms/probe.hpp"

namespace rms {

Workbench::Workbench(const HinGraph& full, std::uint64_t seed_, const MfConfig& mf, bool leak_guard,
                     int num_negatives)
    : seed(seed_) {
  Rng split_rng(mix_seed(seed, 1));
  split = split_leave_one_out(interactions_of(full), split_rng, num_negatives, mix_seed(seed, 2));
  graph = leak_guard ? training_graph(full, split) : full;
  Rng mf_rng(mix_seed(seed, 3));
  init = mf_pretrain(split.train, mf, mf_rng);
}

FitResult fit(const Workbench& bench, SubgraphCache& cache, const MetaPathSet& user_set, const MetaPathSet& item_set,
              const HRecConfig& config, std::uint64_t seed, bool early_stop, int jobs) {
  Rng rng(seed);
  FitResult out;
  out.model = std::make_unique<HRecModel>(cache, user_set, item_set, bench.init, config, rng);
  const std::vector<int> k10{10};
  auto validate = [&](const HRecModel& m) {
    return evaluate(m, bench.split.validation_cases, k10, jobs).ndcg.front();
  };
  out.training = train(*out.model, bench.split.train, config, rng,
                       early_stop ? std::function<double(const HRecModel&)>(validate) : nullptr);
  out.validation_ndcg = early_stop && out.training.best_epoch >= 0 ? out.training.best_validation
                                                                   : validate(*out.model);
  return out;
}

PerformanceProbe::PerformanceProbe(const Workbench& bench, HRecConfig config, int epochs, int jobs)
    : bench_(&bench),
      config_(std::move(config)),
      epochs_(epochs),
      jobs_(jobs),
      cache_(bench.graph, config_.density_threshold) {
  if (epochs_ < 1) throw Error("probe needs at least one epoch");
  config_.epochs = epochs_;
}

ProbeOutcome PerformanceProbe::operator()(const MetaPathSet& user_set, const MetaPathSet& item_set) {
  std::string key = user_set.key() + "#" + item_set.key();
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  ++trainings_;
  ProbeOutcome outcome;
  try {
    auto r = fit(*bench_, cache_, user_set, item_set, config_, mix_seed(bench_->seed, 4), false, jobs_);
    outcome.metric = r.validation_ndcg;
  } catch (const AllPathsRejected& e) {
    outcome.diagnostic = e.what();
  }
  memo_.emplace(std::move(key), outcome);
  return outcome;
}

SetProbe PerformanceProbe::with_item_set(MetaPathSet item_set) {
  return [this, item = std::move(item_set)](const MetaPathSet& user) { return (*this)(user, item); };
}

SetProbe PerformanceProbe::with_user_set(MetaPathSet user_set) {
  return [this, user = std::move(user_set)](const MetaPathSet& item) { return (*this)(user, item); };
}

namespace {

MetaPathSet run_agent(SearchEnv& env, const DqnConfig& config, const RmsRunOptions& run, const std::string& name,
                      std::optional<std::chrono::milliseconds> wall) {
  DqnAgent agent(env.state_dim(), env.num_actions(), config);
  std::filesystem::path ckpt;
  if (!run.checkpoint_dir.empty()) {
    std::filesystem::create_directories(run.checkpoint_dir);
    ckpt = run.checkpoint_dir / ("agent-" + name + ".ckpt");
    if (run.resume && std::filesystem::exists(ckpt)) agent.load(ckpt);
  }
  const auto start = std::chrono::steady_clock::now();
  const int every = std::max(1, run.checkpoint_every);
  while (agent.episodes_done() < config.episodes) {
    if (wall && std::chrono::steady_clock::now() - start >= *wall) break;
    agent.train(env, agent.episodes_done() + 1);
    if (!ckpt.empty() && agent.episodes_done() % every == 0) agent.save(ckpt);
  }
  if (!ckpt.empty()) agent.save(ckpt);
  agent.greedy_episode(env);
  return env.state().set;
}

}  // namespace

DualResult dual_agent_search(PerformanceProbe& probe, const DqnConfig& config, const EnvOptions& options,
                             TraceWriter* trace, const RmsRunOptions& run) {
  const auto& schema = probe.bench().graph.schema();
  std::optional<std::chrono::milliseconds> half;
  if (run.wall) half = *run.wall / 2;
  DualResult out;

  SearchEnv user_env(schema, PathForm::UserSymmetric,
                     probe.with_item_set(initial_set(schema, PathForm::ItemSymmetric)), options);
  user_env.set_trace(trace, "rms-user");
  DqnConfig user_config = config;
  user_config.seed = mix_seed(config.seed, 10);
  out.user_set = run_agent(user_env, user_config, run, "user", half);

  SearchEnv item_env(schema, PathForm::ItemSymmetric,
                     probe.with_user_set(initial_set(schema, PathForm::UserSymmetric)), options);
  item_env.set_trace(trace, "rms-item");
  DqnConfig item_config = config;
  item_config.seed = mix_seed(config.seed, 11);
  out.item_set = run_agent(item_env, item_config, run, "item", half);

  out.probe_calls = user_env.probe_calls() + item_env.probe_calls();
  return out;
}

Strategy parse_strategy(std::string_view name) {
  if (name == "rms") return Strategy::Rms;
  if (name == "greedy") return Strategy::Greedy;
  if (name == "random") return Strategy::Random;
  throw Error("unknown strategy '" + std::string(name) + "' (expected rms, greedy or random)");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Rms:
      return "rms";
    case Strategy::Greedy:
      return "greedy";
    case Strategy::Random:
      return "random";
  }
  return "?";
}

DualResult dual_baseline_search(PerformanceProbe& probe, Strategy strategy, const BaselineConfig& config,
                                const EnvOptions& options, std::uint64_t seed, TraceWriter* trace) {
  if (strategy == Strategy::Rms) throw Error("dual_baseline_search handles greedy and random only");
  const auto& schema = probe.bench().graph.schema();
  const std::string name = to_string(strategy);
  DualResult out;
  auto run = [&](SearchEnv& env, std::uint64_t stream) {
    Rng rng(mix_seed(seed, stream));
    return strategy == Strategy::Random
               ? random_search(env, config.budget, rng)
               : greedy_search(env, config.budget, config.candidates_per_round, rng, options.max_steps);
  };

  SearchEnv user_env(schema, PathForm::UserSymmetric,
                     probe.with_item_set(initial_set(schema, PathForm::ItemSymmetric)), options);
  user_env.set_trace(trace, name + "-user");
  out.user_set = run(user_env, 20);

  SearchEnv item_env(schema, PathForm::ItemSymmetric,
                     probe.with_user_set(initial_set(schema, PathForm::UserSymmetric)), options);
  item_env.set_trace(trace, name + "-item");
  out.item_set = run(item_env, 21);

  out.probe_calls = user_env.probe_calls() + item_env.probe_calls();
  return out;
}

}  // namespace rms
