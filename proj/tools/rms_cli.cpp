// rms: meta-path search and HRec training from the command line.
//
// Config precedence, lowest to highest: built-in defaults, --config file,
// --set key=value, then the dedicated flags (--seed, --out, --jobs,
// --iter-limit, ...).

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "rms/artifacts.hpp"
#include "rms/config.hpp"
#include "rms/probe.hpp"
#include "rms/synth.hpp"

namespace fs = std::filesystem;
using namespace rms;

namespace {

struct Globals {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
};

RunConfig resolve(const Globals& g, const fs::path& base_file = {}) {
  RunConfig c;
  if (!base_file.empty()) c.load_file(base_file);
  if (!g.config_file.empty()) c.load_file(g.config_file);
  for (const auto& kv : g.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) c.seed = *g.seed;
  if (g.out) c.out = *g.out;
  if (g.jobs) c.jobs = *g.jobs;
  return c;
}

fs::path prepare_out(const RunConfig& c) {
  fs::path out(c.out);
  fs::create_directories(out);
  std::ofstream(out / "config.resolved") << c.resolved();
  std::cerr << "config hash " << c.hash() << ", seed " << c.seed << ", output " << out.string() << "\n";
  return out;
}

fs::path require_data(const RunConfig& c) {
  if (c.data.empty()) throw Error("no dataset given (use --data or data = ... in the config)");
  return c.data;
}

Workbench make_bench(const HinGraph& graph, const RunConfig& c) {
  Workbench bench(graph, c.seed, c.mf, c.leak_guard, c.num_negatives);
  if (bench.split.reduced_pools > 0)
    std::cerr << "warning: " << bench.split.reduced_pools << " held-out pairs have fewer than " << c.num_negatives
              << " negatives\n";
  if (bench.init.cold_users + bench.init.cold_items > 0)
    std::cerr << "warning: " << bench.init.cold_users << " users and " << bench.init.cold_items
              << " items have no training interactions and keep their random init\n";
  return bench;
}

// --- ingest ---------------------------------------------------------------------

int cmd_ingest(const RunConfig& c, const std::string& schema, const std::string& nodes, const std::string& edges) {
  auto graph = load_graph(nodes, edges, HinSchema::load(schema));
  auto out = prepare_out(c);
  write_bundle(graph, out / "dataset.bin");
  write_json(out / "stats.json", graph_stats(graph));
  std::cout << graph_stats(graph).dump(2) << "\n";
  return 0;
}

// --- synth ----------------------------------------------------------------------

int cmd_synth(const RunConfig& c, const std::string& profile) {
  auto ds = synthesize(synth_profile(profile), c.seed);
  auto out = prepare_out(c);
  std::ofstream(out / "schema.txt") << ds.graph.schema().to_text();
  write_graph_tsv(ds.graph, out / "nodes.tsv", out / "edges.tsv");
  write_bundle(ds.graph, out / "dataset.bin");
  Json m;
  m["profile"] = ds.profile;
  m["seed"] = ds.seed;
  m["planted"] = ds.planted;
  m["planted_side"] = ds.planted_side;
  m["stats"] = graph_stats(ds.graph);
  write_json(out / "manifest.json", m);
  std::cout << "planted " << ds.planted.front() << " (" << ds.planted_side << " side), "
            << ds.graph.num_nodes() << " nodes, "
            << ds.graph.num_edges(ds.graph.schema().interaction_relation()) << " interactions\n";
  return 0;
}

// --- search ---------------------------------------------------------------------

int cmd_search(RunConfig c, const std::string& strategy_name, bool resume) {
  auto strategy = parse_strategy(strategy_name);
  auto graph = load_dataset(require_data(c));
  auto out = prepare_out(c);
  auto bench = make_bench(graph, c);
  const auto& schema = bench.graph.schema();
  PerformanceProbe probe(bench, c.hrec, c.probe_epochs, c.jobs);
  TraceWriter trace(out / "trace.jsonl", resume);

  std::optional<std::chrono::milliseconds> wall;
  if (c.time_limit) wall = std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(*c.time_limit * 1000)));

  DualResult found;
  if (strategy == Strategy::Rms) {
    DqnConfig dqn = c.dqn;
    dqn.seed = mix_seed(c.seed, 30);
    if (c.iter_limit) dqn.episodes = static_cast<int>(*c.iter_limit);
    RmsRunOptions run;
    run.wall = wall;
    run.checkpoint_dir = out / "checkpoints";
    run.resume = resume;
    found = dual_agent_search(probe, dqn, c.env, &trace, run);
  } else {
    if (!c.iter_limit && !c.time_limit) throw Error(strategy_name + " search needs --iter-limit or --time-limit");
    BaselineConfig base;
    base.budget.iterations = c.iter_limit;
    if (wall) base.budget.wall = *wall / 2;
    base.candidates_per_round = c.greedy_candidates;
    found = dual_baseline_search(probe, strategy, base, c.env, mix_seed(c.seed, 31), &trace);
  }

  auto final_probe = probe(found.user_set, found.item_set);
  Json j;
  j["strategy"] = to_string(strategy);
  j["seed"] = c.seed;
  j["config_hash"] = c.hash();
  j["user"] = set_to_json(schema, found.user_set);
  j["item"] = set_to_json(schema, found.item_set);
  j["probe_calls"] = found.probe_calls;
  j["probe_trainings"] = probe.trainings();
  j["probe_ndcg10"] = final_probe.metric ? Json(*final_probe.metric) : Json(nullptr);
  write_json(out / "sets.json", j);
  std::cout << "user: ";
  for (const auto& p : path_strings(schema, found.user_set)) std::cout << p << " ";
  std::cout << "\nitem: ";
  for (const auto& p : path_strings(schema, found.item_set)) std::cout << p << " ";
  std::cout << "\n";
  return 0;
}

// --- train ----------------------------------------------------------------------

Json metric_record(const std::string& phase, const std::string& split, std::optional<int> k, const std::string& metric,
                   double value, int n_users, int epoch, const RunConfig& c, const Json& sets,
                   const std::string& strategy, const std::string& hash) {
  Json r;
  r["phase"] = phase;
  r["split"] = split;
  r["k"] = k ? Json(*k) : Json(nullptr);
  r["metric"] = metric;
  r["value"] = value;
  r["n_users"] = n_users;
  r["epoch"] = epoch;
  r["seed"] = c.seed;
  r["metapath_sets"] = sets;
  r["strategy"] = strategy;
  r["config_hash"] = hash;
  return r;
}

int cmd_train(const RunConfig& c, const std::string& sets_file) {
  auto graph = load_dataset(require_data(c));
  const auto& schema = graph.schema();
  auto sets = read_json(sets_file);
  auto user_set = set_from_json(schema, sets.at("user"), PathForm::UserSymmetric);
  auto item_set = set_from_json(schema, sets.at("item"), PathForm::ItemSymmetric);
  const std::string strategy = sets.value("strategy", "manual");
  auto out = prepare_out(c);
  auto bench = make_bench(graph, c);
  SubgraphCache cache(bench.graph, c.hrec.density_threshold);
  auto fitted = fit(bench, cache, user_set, item_set, c.hrec, mix_seed(c.seed, 40), true, c.jobs);
  for (const auto& [path, density] : fitted.model->rejected())
    std::cerr << "note: " << path << " dropped by the density filter (density " << density << ")\n";

  TensorArchive ar;
  fitted.model->save(ar);
  ar.save(out / "model.ckpt");
  std::ofstream(out / "model.config") << c.resolved();

  const Json used = metapath_sets_json(schema, fitted.model->user_paths(), fitted.model->item_paths());
  Json m;
  m["kind"] = "hrec";
  m["checkpoint"] = "model.ckpt";
  m["config"] = "model.config";
  m["dataset"] = fs::absolute(c.data).lexically_normal().string();
  m["seed"] = c.seed;
  m["config_hash"] = c.hash();
  m["strategy"] = strategy;
  m["user"] = set_to_json(schema, user_set);
  m["item"] = set_to_json(schema, item_set);
  m["metapath_sets"] = used;
  m["best_epoch"] = fitted.training.best_epoch;
  m["validation_ndcg10"] = fitted.validation_ndcg;
  write_json(out / "manifest.json", m);

  std::ofstream history(out / "history.jsonl");
  const int n_val = static_cast<int>(bench.split.validation_cases.size());
  for (const auto& e : fitted.training.history) {
    history << metric_record("train", "train", std::nullopt, "bpr_loss", e.train_loss,
                             static_cast<int>(bench.split.train.num_users), e.epoch, c, used, strategy, c.hash())
                   .dump()
            << "\n";
    if (e.validation)
      history << metric_record("train", "validation", 10, "ndcg", *e.validation, n_val, e.epoch, c, used, strategy,
                               c.hash())
                     .dump()
              << "\n";
  }
  std::cout << "best epoch " << fitted.training.best_epoch << ", validation NDCG@10 " << fitted.validation_ndcg
            << "\n";
  return 0;
}

// --- eval -----------------------------------------------------------------------

int cmd_eval(const Globals& g, const std::string& checkpoint_dir, const std::string& split_name,
             const std::optional<std::string>& ks_text) {
  fs::path dir(checkpoint_dir);
  auto manifest = read_json(dir / "manifest.json");
  if (manifest.value("kind", "") != "hrec") throw Error((dir / "manifest.json").string() + " is not an HRec manifest");
  // The training config is the base so the split and negatives match training.
  RunConfig c = resolve(g, dir / manifest.at("config").get<std::string>());
  if (!g.out) c.out = (dir / "eval").string();
  if (ks_text) c.set("ks", *ks_text);
  if (c.data.empty()) c.data = manifest.at("dataset").get<std::string>();
  const std::string hash = manifest.at("config_hash").get<std::string>();

  SplitName which;
  if (split_name == "validation") which = SplitName::Validation;
  else if (split_name == "test") which = SplitName::Test;
  else throw Error("unknown split '" + split_name + "' (expected validation or test)");

  auto graph = load_dataset(c.data);
  const auto& schema = graph.schema();
  auto user_set = set_from_json(schema, manifest.at("user"), PathForm::UserSymmetric);
  auto item_set = set_from_json(schema, manifest.at("item"), PathForm::ItemSymmetric);
  auto out = prepare_out(c);
  auto bench = make_bench(graph, c);
  SubgraphCache cache(bench.graph, c.hrec.density_threshold);
  Rng rng(0);
  HRecModel model(cache, user_set, item_set, bench.init, c.hrec, rng);
  model.load(TensorArchive::load(dir / manifest.at("checkpoint").get<std::string>()));

  auto metrics = evaluate(model, cases_of(bench.split, which), c.ks, c.jobs);
  const Json used = metapath_sets_json(schema, model.user_paths(), model.item_paths());
  const std::string strategy = manifest.value("strategy", "manual");
  const int epoch = manifest.value("best_epoch", -1);
  std::ofstream lines(out / "metrics.jsonl");
  for (std::size_t i = 0; i < metrics.ks.size(); ++i) {
    for (const char* name : {"hr", "ndcg"}) {
      double v = std::string(name) == "hr" ? metrics.hr[i] : metrics.ndcg[i];
      lines << metric_record("eval", split_name, metrics.ks[i], name, v, metrics.n_users, epoch, c, used, strategy, hash)
                   .dump()
            << "\n";
      std::cout << name << "@" << metrics.ks[i] << " " << std::fixed << std::setprecision(6) << v << "\n";
    }
  }
  return 0;
}

// --- report ---------------------------------------------------------------------

int cmd_report(const RunConfig& c, const std::vector<std::string>& runs) {
  struct Acc {
    std::vector<double> values;
  };
  std::map<std::tuple<std::string, std::string, std::string, int>, Acc> groups;
  std::optional<std::string> hash;
  std::string hash_source;
  int files = 0;
  for (const auto& run : runs) {
    if (!fs::exists(run)) throw Error("run directory not found: " + run);
    std::vector<fs::path> found;
    for (const auto& entry : fs::recursive_directory_iterator(run))
      if (entry.is_regular_file() && entry.path().filename() == "metrics.jsonl") found.push_back(entry.path());
    std::sort(found.begin(), found.end());
    for (const auto& file : found) {
      ++files;
      std::ifstream in(file);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto r = Json::parse(line);
        if (r.value("phase", "") != "eval") continue;
        auto h = r.value("config_hash", "");
        if (!hash) {
          hash = h;
          hash_source = file.string();
        } else if (*hash != h) {
          throw Error("config hash mismatch: " + file.string() + " has " + h + " but " + hash_source + " has " + *hash);
        }
        groups[{r.value("strategy", "manual"), r.value("split", ""), r.value("metric", ""), r.value("k", 0)}]
            .values.push_back(r.at("value").get<double>());
      }
    }
  }
  if (groups.empty()) throw Error("no eval metrics.jsonl found under the given run directories");

  auto out = prepare_out(c);
  std::ofstream csv(out / "report.csv");
  csv << "strategy,split,metric,k,mean,std,n\n";
  std::ostringstream table;
  table << std::left << std::setw(10) << "strategy" << std::setw(12) << "split" << std::setw(10) << "metric"
        << std::right << std::setw(6) << "k" << std::setw(12) << "mean" << std::setw(12) << "std" << std::setw(5)
        << "n" << "\n";
  for (const auto& [key, acc] : groups) {
    const auto& [strategy, split, metric, k] = key;
    const double n = static_cast<double>(acc.values.size());
    double mean = 0.0;
    for (double v : acc.values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : acc.values) var += (v - mean) * (v - mean);
    const double sd = acc.values.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    csv << strategy << "," << split << "," << metric << "," << k << "," << std::setprecision(10) << mean << "," << sd
        << "," << acc.values.size() << "\n";
    table << std::left << std::setw(10) << strategy << std::setw(12) << split << std::setw(10) << metric << std::right
          << std::setw(6) << k << std::fixed << std::setprecision(4) << std::setw(12) << mean << std::setw(12) << sd
          << std::setw(5) << acc.values.size() << "\n";
    table.unsetf(std::ios::fixed);
  }
  std::ofstream(out / "summary.txt") << table.str();
  std::cout << table.str() << "(" << files << " metrics files, config hash " << *hash << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-path search for HIN recommendation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_file, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", g.sets, "override one config key (key=value), repeatable");
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--jobs", g.jobs, "evaluation threads");

  std::string data;
  auto add_data = [&](CLI::App* sub) { sub->add_option("--data", data, "dataset bundle or directory"); };

  auto* ingest = app.add_subcommand("ingest", "validate TSV files and write a dataset bundle");
  std::string schema_file, nodes_file, edges_file;
  ingest->add_option("--schema", schema_file)->required();
  ingest->add_option("--nodes", nodes_file)->required();
  ingest->add_option("--edges", edges_file)->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic HIN with a planted meta-path");
  std::string profile = "planted-MAM";
  synth->add_option("--profile", profile, "planted-MAM, planted-MDM or toy");

  auto* search = app.add_subcommand("search", "search user and item meta-path sets");
  add_data(search);
  std::string strategy = "rms";
  std::optional<std::int64_t> iter_limit;
  std::optional<double> time_limit;
  bool resume = false;
  search->add_option("--strategy", strategy, "rms, greedy or random");
  search->add_option("--iter-limit", iter_limit, "episodes per agent (rms) or probes per side (greedy, random)");
  search->add_option("--time-limit", time_limit, "wall-clock seconds for the whole search");
  search->add_flag("--resume", resume, "continue rms agents from their checkpoints");

  auto* train_cmd = app.add_subcommand("train", "train HRec on a pair of meta-path sets");
  add_data(train_cmd);
  std::string sets_file;
  train_cmd->add_option("--sets", sets_file, "sets.json from search")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained checkpoint");
  add_data(eval_cmd);
  std::string checkpoint, split = "test";
  std::optional<std::string> ks;
  eval_cmd->add_option("--checkpoint", checkpoint, "directory written by train")->required();
  eval_cmd->add_option("--split", split, "validation or test");
  eval_cmd->add_option("--ks", ks, "comma-separated cutoffs");

  auto* report = app.add_subcommand("report", "aggregate eval metrics across runs");
  std::vector<std::string> runs;
  report->add_option("runs", runs, "run directories")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*eval_cmd) {
      if (!data.empty()) g.sets.push_back("data=" + data);
      return cmd_eval(g, checkpoint, split, ks);
    }
    RunConfig c = resolve(g);
    if (!data.empty()) c.data = data;
    if (iter_limit) c.iter_limit = *iter_limit;
    if (time_limit) c.time_limit = *time_limit;
    if (*ingest) return cmd_ingest(c, schema_file, nodes_file, edges_file);
    if (*synth) return cmd_synth(c, profile);
    if (*search) return cmd_search(c, strategy, resume);
    if (*train_cmd) return cmd_train(c, sets_file);
    if (*report) return cmd_report(c, runs);
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
