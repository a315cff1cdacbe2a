#include "rms/search_env.hpp"

#include <algorithm>
#include <iostream>

#include "json.hpp"

namespace rms {

SearchState make_state(const HinSchema& schema, MetaPathSet set, int step_index) {
  SearchState s;
  s.encoding = encode_set(schema, set);
  s.set = std::move(set);
  s.step_index = step_index;
  return s;
}

MetaPathSet initial_set(const HinSchema& schema, PathForm form) {
  RelationId r = schema.interaction_relation();
  RelationId back = complement_relation(schema, r);
  MetaPathSet set(form);
  switch (form) {
    case PathForm::UserSymmetric:
      set.insert(schema, MetaPath::make(schema, {r, back}));
      break;
    case PathForm::ItemSymmetric:
      set.insert(schema, MetaPath::make(schema, {back, r}));
      break;
    case PathForm::UserToItem:
      set.insert(schema, MetaPath::make(schema, {r}));
      break;
  }
  return set;
}

MetaPathSet apply_action(const MetaPathSet& set, RelationId r, const HinSchema& schema, int max_len) {
  const auto& rel = schema.relation(r);
  MetaPathSet next = set;
  for (const auto& path : set) {
    if (path.length() + 2 > max_len) continue;
    auto types = path.node_types();
    auto pos = std::find(types.begin(), types.end(), rel.head);
    if (pos == types.end()) continue;
    auto at = pos - types.begin();
    std::vector<RelationId> rels(path.relations().begin(), path.relations().end());
    rels.insert(rels.begin() + at, {r, rel.complement});
    next.insert(schema, MetaPath::make(schema, std::move(rels), max_len));
  }
  if (max_len >= 2) {
    auto segment = MetaPath::make(schema, {r, rel.complement}, max_len);
    if (satisfies_form(schema, segment, set.form())) next.insert(schema, std::move(segment));
  }
  return next;
}

StepOutcome step(const HinSchema& schema, const SearchState& state, int action, const SetProbe& probe,
                 double last_metric, const EnvOptions& options) {
  StepOutcome out;
  if (action == kStop) {
    out.next_state = state;
    out.done = true;
    return out;
  }
  auto next = apply_action(state.set, action, schema, options.max_path_len);
  int next_index = state.step_index + 1;
  out.done = next_index >= options.max_steps;
  if (next == state.set) {
    out.next_state = make_state(schema, std::move(next), next_index);
    out.reward = -1.0;
    return out;
  }
  out.changed = true;
  auto probed = probe(next);
  out.next_state = make_state(schema, std::move(next), next_index);
  if (!probed.metric) {
    out.reward = -1.0;
    out.diagnostic = probed.diagnostic;
    return out;
  }
  out.probe_metric = probed.metric;
  out.reward = *probed.metric - last_metric;
  return out;
}

// --- TraceWriter ------------------------------------------------------------

TraceWriter::TraceWriter(const std::filesystem::path& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw Error("cannot write trace " + path.string());
}

void TraceWriter::write(const TraceRecord& r) {
  nlohmann::ordered_json j;
  if (!r.agent.empty()) j["agent"] = r.agent;
  j["episode"] = r.episode;
  j["step"] = r.step;
  j["action"] = r.action;
  j["set"] = r.set;
  j["reward"] = r.reward;
  j["probe_metric"] = r.probe_metric ? nlohmann::ordered_json(*r.probe_metric) : nlohmann::ordered_json(nullptr);
  j["wall_ms"] = r.wall_ms;
  out_ << j.dump() << '\n';
  out_.flush();
}

// --- SearchEnv --------------------------------------------------------------

SearchEnv::SearchEnv(const HinSchema& schema, PathForm form, SetProbe probe, EnvOptions options)
    : schema_(schema), form_(form), probe_(std::move(probe)), options_(options) {
  state_ = make_state(schema_, initial_set(schema_, form_));
}

ProbeOutcome SearchEnv::probe(const MetaPathSet& set) {
  ++probe_calls_;
  return probe_(set);
}

double SearchEnv::baseline() {
  if (!baseline_) {
    auto outcome = probe(initial_set(schema_, form_));
    if (!outcome.metric) std::cerr << "warning: initial set probe failed: " << outcome.diagnostic << "\n";
    baseline_ = outcome.metric.value_or(0.0);
  }
  return *baseline_;
}

Eigen::VectorXd SearchEnv::reset() {
  state_ = make_state(schema_, initial_set(schema_, form_));
  last_metric_ = baseline();
  done_ = false;
  ++episode_;
  return state_.encoding;
}

EnvStep SearchEnv::step(int action) {
  if (done_) throw Error("step() on a finished episode; call reset()");
  if (action < 0 || action >= num_actions()) throw Error("action out of range");
  SetProbe counted = [this](const MetaPathSet& s) { return probe(s); };
  last_ = rms::step(schema_, state_, action, counted, last_metric_, options_);
  if (last_.probe_metric) last_metric_ = *last_.probe_metric;
  state_ = last_.next_state;
  done_ = last_.done;
  if (!last_.diagnostic.empty()) std::cerr << "warning: " << last_.diagnostic << " (reward -1)\n";
  TraceRecord rec;
  rec.episode = episode_;
  rec.step = state_.step_index;
  rec.action = action_name(action);
  rec.set = path_strings(schema_, state_.set);
  rec.reward = last_.reward;
  rec.probe_metric = last_.probe_metric;
  trace(rec);
  return {state_.encoding, last_.reward, last_.done};
}

void SearchEnv::trace(const TraceRecord& record) {
  if (!trace_) return;
  TraceRecord r = record;
  r.agent = agent_;
  r.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
  trace_->write(r);
}

std::string SearchEnv::action_name(int action) const {
  return action == kStop ? "STOP" : schema_.relation(action).name;
}

// --- Baseline searchers -----------------------------------------------------

namespace {

class BudgetClock {
 public:
  explicit BudgetClock(const SearchBudget& budget) : budget_(budget), start_(std::chrono::steady_clock::now()) {
    if (!budget.wall && !budget.iterations) throw Error("search budget needs a wall-clock or iteration limit");
  }
  bool exhausted(std::int64_t used) const {
    if (budget_.iterations && used >= *budget_.iterations) return true;
    if (budget_.wall && std::chrono::steady_clock::now() - start_ >= *budget_.wall) return true;
    return false;
  }

 private:
  SearchBudget budget_;
  std::chrono::steady_clock::time_point start_;
};

RelationId random_relation(const HinSchema& schema, Rng& rng) {
  return std::uniform_int_distribution<RelationId>(1, schema.num_relations())(rng);
}

}  // namespace

MetaPathSet random_search(SearchEnv& env, const SearchBudget& budget, Rng& rng) {
  BudgetClock clock(budget);
  const auto& schema = env.schema();
  MetaPathSet best = initial_set(schema, env.form());
  if (clock.exhausted(0)) return best;
  double best_metric = env.baseline();
  std::int64_t used = 0;
  std::int64_t completed = 0;
  while (!clock.exhausted(used)) {
    ++used;
    int length = std::uniform_int_distribution<int>(1, std::max(1, env.max_steps()))(rng);
    MetaPathSet candidate = initial_set(schema, env.form());
    RelationId last = 0;
    for (int s = 0; s < length; ++s) {
      last = random_relation(schema, rng);
      candidate = apply_action(candidate, last, schema, env.options().max_path_len);
    }
    auto outcome = env.probe(candidate);
    TraceRecord rec;
    rec.episode = static_cast<int>(used - 1);
    rec.step = length;
    rec.action = env.action_name(last);
    rec.set = path_strings(schema, candidate);
    rec.probe_metric = outcome.metric;
    rec.reward = outcome.metric ? *outcome.metric - best_metric : -1.0;
    env.trace(rec);
    if (!outcome.metric) continue;
    ++completed;
    if (*outcome.metric > best_metric) {
      best_metric = *outcome.metric;
      best = std::move(candidate);
    }
  }
  if (completed == 0) std::cerr << "warning: random search completed no probes; returning the initial set\n";
  return best;
}

MetaPathSet greedy_search(SearchEnv& env, const SearchBudget& budget, int candidates_per_round, Rng& rng,
                          int max_extensions) {
  if (candidates_per_round < 1) throw Error("candidates_per_round must be >= 1");
  BudgetClock clock(budget);
  const auto& schema = env.schema();
  MetaPathSet current = initial_set(schema, env.form());
  if (clock.exhausted(0)) return current;
  double current_metric = env.baseline();
  std::int64_t used = 0;
  int round = 0;
  int extensions = 0;
  while (extensions < max_extensions && !clock.exhausted(used)) {
    std::optional<MetaPathSet> best;
    double best_metric = 0.0;
    for (int c = 0; c < candidates_per_round && !clock.exhausted(used); ++c) {
      ++used;
      RelationId r = random_relation(schema, rng);
      auto candidate = apply_action(current, r, schema, env.options().max_path_len);
      if (candidate == current) continue;
      auto outcome = env.probe(candidate);
      TraceRecord rec;
      rec.episode = round;
      rec.step = c;
      rec.action = env.action_name(r);
      rec.set = path_strings(schema, candidate);
      rec.probe_metric = outcome.metric;
      rec.reward = outcome.metric ? *outcome.metric - current_metric : -1.0;
      env.trace(rec);
      if (!outcome.metric) continue;
      if (!best || *outcome.metric > best_metric) {
        best = std::move(candidate);
        best_metric = *outcome.metric;
      }
    }
    ++round;
    if (best && best_metric >= current_metric) {
      current = std::move(*best);
      current_metric = best_metric;
      ++extensions;
    }
  }
  return current;
}

}  // namespace rms
