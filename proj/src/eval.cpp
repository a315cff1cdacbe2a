#include "rms/eval.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "rms/hrec.hpp"

namespace rms {

NegativeSample sample_negatives(const SplitSet& split, int user, int count, Rng& rng) {
  const auto& seen = split.interacted.at(user);
  std::vector<int> eligible;
  eligible.reserve(split.train.num_items);
  for (int i = 0; i < split.train.num_items; ++i)
    if (!std::binary_search(seen.begin(), seen.end(), i)) eligible.push_back(i);
  NegativeSample out;
  out.reduced = static_cast<int>(eligible.size()) < count;
  std::sample(eligible.begin(), eligible.end(), std::back_inserter(out.items), count, rng);
  return out;
}

SplitSet split_leave_one_out(const InteractionSet& interactions, Rng& rng, int num_negatives,
                             std::uint64_t negative_seed) {
  if (interactions.pairs.empty()) throw Error("split: no interactions");
  SplitSet split;
  for (auto* s : {&split.train, &split.validation, &split.test}) {
    s->relation = interactions.relation;
    s->num_users = interactions.num_users;
    s->num_items = interactions.num_items;
  }
  split.interacted.resize(interactions.num_users);
  for (const auto& p : interactions.pairs) split.interacted[p.user].push_back(p.item);

  for (int u = 0; u < interactions.num_users; ++u) {
    auto& items = split.interacted[u];
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    std::vector<int> order = items;
    if (order.size() >= 3) {
      std::shuffle(order.begin(), order.end(), rng);
      split.test.pairs.push_back({u, order[0]});
      split.validation.pairs.push_back({u, order[1]});
      order.erase(order.begin(), order.begin() + 2);
    }
    for (int i : order) split.train.pairs.push_back({u, i});
  }
  std::sort(split.train.pairs.begin(), split.train.pairs.end());

  for (const auto& [pairs, cases, stream] :
       {std::tuple{&split.validation.pairs, &split.validation_cases, 0}, std::tuple{&split.test.pairs, &split.test_cases, 1}}) {
    for (const auto& p : *pairs) {
      Rng local(mix_seed(negative_seed, 2 * static_cast<std::uint64_t>(p.user) + stream));
      auto neg = sample_negatives(split, p.user, num_negatives, local);
      split.reduced_pools += neg.reduced ? 1 : 0;
      cases->push_back({p.user, p.item, std::move(neg.items)});
    }
  }
  return split;
}

HinGraph training_graph(const HinGraph& graph, const SplitSet& split) {
  const auto& schema = graph.schema();
  std::vector<std::pair<NodeId, NodeId>> removed;
  for (const auto* held : {&split.validation, &split.test})
    for (const auto& p : held->pairs)
      removed.emplace_back(graph.node_at(schema.user_type(), p.user), graph.node_at(schema.item_type(), p.item));
  return graph.without_edges(schema.interaction_relation(), removed);
}

int rank_position(std::span<const double> scores, int positive_index) {
  const double pos = scores[positive_index];
  int rank = 1;
  for (int k = 0; k < static_cast<int>(scores.size()); ++k)
    if (k != positive_index && scores[k] >= pos) ++rank;
  return rank;
}

double hr_at_k(int rank, int k) { return rank <= k ? 1.0 : 0.0; }

double ndcg_at_k(int rank, int k) { return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0; }

double RankingMetrics::hr_at(int k) const {
  auto it = std::find(ks.begin(), ks.end(), k);
  if (it == ks.end()) throw Error("no HR@" + std::to_string(k) + " in these metrics");
  return hr[it - ks.begin()];
}

double RankingMetrics::ndcg_at(int k) const {
  auto it = std::find(ks.begin(), ks.end(), k);
  if (it == ks.end()) throw Error("no NDCG@" + std::to_string(k) + " in these metrics");
  return ndcg[it - ks.begin()];
}

const std::vector<EvalCase>& cases_of(const SplitSet& split, SplitName which) {
  return which == SplitName::Validation ? split.validation_cases : split.test_cases;
}

RankingMetrics evaluate(const Scorer& scorer, std::span<const EvalCase> cases, std::span<const int> ks, int jobs) {
  if (cases.empty()) throw Error("evaluate: no eligible users");
  std::vector<int> ranks(cases.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<int> items;
    std::vector<double> scores;
    for (std::size_t c = begin; c < end; ++c) {
      const auto& ec = cases[c];
      items.assign(1, ec.positive);
      items.insert(items.end(), ec.negatives.begin(), ec.negatives.end());
      scores.assign(items.size(), 0.0);
      scorer(ec.user, items, scores);
      ranks[c] = rank_position(scores, 0);
    }
  };
  jobs = std::clamp<int>(jobs, 1, static_cast<int>(cases.size()));
  if (jobs == 1) {
    work(0, cases.size());
  } else {
    std::vector<std::thread> threads;
    const std::size_t chunk = (cases.size() + jobs - 1) / jobs;
    for (std::size_t begin = 0; begin < cases.size(); begin += chunk)
      threads.emplace_back(work, begin, std::min(cases.size(), begin + chunk));
    for (auto& t : threads) t.join();
  }

  RankingMetrics m;
  m.ks.assign(ks.begin(), ks.end());
  m.n_users = static_cast<int>(cases.size());
  for (int k : ks) {
    double hr = 0.0, ndcg = 0.0;
    for (int r : ranks) {
      hr += hr_at_k(r, k);
      ndcg += ndcg_at_k(r, k);
    }
    m.hr.push_back(hr / m.n_users);
    m.ndcg.push_back(ndcg / m.n_users);
  }
  return m;
}

RankingMetrics evaluate(const HRecModel& model, std::span<const EvalCase> cases, std::span<const int> ks, int jobs) {
  auto [users, items] = model.embed();
  Scorer scorer = [&](int user, std::span<const int> candidates, std::span<double> out) {
    for (std::size_t k = 0; k < candidates.size(); ++k) out[k] = users.row(user).dot(items.row(candidates[k]));
  };
  return evaluate(scorer, cases, ks, jobs);
}

}  // namespace rms
