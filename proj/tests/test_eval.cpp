#include <set>

#include "doctest.h"
#include "rms/eval.hpp"
#include "rms/synth.hpp"
#include "support.hpp"

using namespace rms;

namespace {

InteractionSet dense_interactions(int users, int items, int per_user, Rng& rng) {
  InteractionSet out;
  out.num_users = users;
  out.num_items = items;
  std::vector<int> all(items);
  std::iota(all.begin(), all.end(), 0);
  for (int u = 0; u < users; ++u) {
    std::vector<int> pick;
    std::sample(all.begin(), all.end(), std::back_inserter(pick), per_user, rng);
    for (int i : pick) out.pairs.push_back({u, i});
  }
  return out;
}

/// A score that is a fixed pseudo-random function of (user, item).
Scorer hashed_scorer(std::uint64_t seed) {
  return [seed](int user, std::span<const int> items, std::span<double> out) {
    for (std::size_t k = 0; k < items.size(); ++k)
      out[k] = static_cast<double>(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(user)),
                                            static_cast<std::uint64_t>(items[k])) >>
                                   11);
  };
}

}  // namespace

TEST_CASE("metric values at ranks 1, 2 and 11") {
  CHECK(hr_at_k(1, 10) == 1.0);
  CHECK(ndcg_at_k(1, 10) == 1.0);
  CHECK(hr_at_k(2, 10) == 1.0);
  CHECK(ndcg_at_k(2, 10) == doctest::Approx(0.630930).epsilon(1e-6));
  CHECK(hr_at_k(11, 10) == 0.0);
  CHECK(ndcg_at_k(11, 10) == 0.0);
  CHECK(hr_at_k(10, 10) == 1.0);
  CHECK(ndcg_at_k(10, 10) == doctest::Approx(1.0 / std::log2(11.0)));
}

TEST_CASE("rank counts ties against the positive") {
  std::vector<double> s{0.5, 0.9, 0.5, 0.1};
  CHECK(rank_position(s, 0) == 3);
  CHECK(rank_position(s, 1) == 1);
  CHECK(rank_position(s, 3) == 4);
  std::vector<double> flat(500, 0.0);
  CHECK(rank_position(flat, 0) == 500);
}

TEST_CASE("metrics are monotone in k and bounded") {
  for (int rank = 1; rank <= 30; ++rank) {
    for (int k = 1; k < 25; ++k) {
      CHECK(hr_at_k(rank, k) <= hr_at_k(rank, k + 1));
      CHECK(ndcg_at_k(rank, k) <= ndcg_at_k(rank, k + 1));
      CHECK(ndcg_at_k(rank, k) <= hr_at_k(rank, k));
      CHECK(ndcg_at_k(rank, k) >= 0.0);
    }
  }
}

TEST_CASE("leave-one-out split partitions every user's items") {
  Rng rng(1);
  auto inter = dense_interactions(40, 60, 5, rng);
  inter.pairs.push_back({0, inter.pairs[0].item});  // duplicate collapses
  inter.num_users = 42;
  inter.pairs.push_back({40, 3});
  inter.pairs.push_back({40, 7});
  Rng split_rng(2);
  auto split = split_leave_one_out(inter, split_rng, 20, 9);
  CHECK(split.test.pairs.size() == 40);
  CHECK(split.validation.pairs.size() == 40);
  CHECK(split.train.pairs.size() == 40 * 3 + 2);
  std::set<std::pair<int, int>> seen;
  for (const auto* part : {&split.train, &split.validation, &split.test})
    for (const auto& p : part->pairs) CHECK(seen.insert({p.user, p.item}).second);
  CHECK(seen.size() == 40 * 5 + 2);
  CHECK(split.interacted[41].empty());
  CHECK(split.interacted[40] == std::vector<int>{3, 7});
}

TEST_CASE("negatives are distinct, unseen and independent of split order") {
  Rng rng(3);
  auto inter = dense_interactions(30, 80, 6, rng);
  Rng a(4), b(5);
  auto x = split_leave_one_out(inter, a, 50, 11);
  auto y = split_leave_one_out(inter, b, 50, 11);
  REQUIRE(x.test_cases.size() == 30);
  for (std::size_t c = 0; c < x.test_cases.size(); ++c) {
    const auto& ec = x.test_cases[c];
    std::set<int> distinct(ec.negatives.begin(), ec.negatives.end());
    CHECK(distinct.size() == 50);
    for (int n : ec.negatives) CHECK_FALSE(std::binary_search(x.interacted[ec.user].begin(), x.interacted[ec.user].end(), n));
    // Same negative seed, different split stream: negatives per user agree.
    CHECK(ec.negatives == y.test_cases[c].negatives);
  }
  CHECK(x.reduced_pools == 0);
  Rng c(4);
  auto z = split_leave_one_out(inter, c, 50, 12);
  CHECK(z.test_cases[0].negatives != x.test_cases[0].negatives);
}

TEST_CASE("short negative pools are flagged") {
  Rng rng(6);
  auto inter = dense_interactions(5, 10, 4, rng);
  Rng s(7);
  auto split = split_leave_one_out(inter, s, 499, 1);
  CHECK(split.reduced_pools == 10);
  for (const auto& ec : split.test_cases) CHECK(ec.negatives.size() == 6);
  CHECK_THROWS_AS(split_leave_one_out(InteractionSet{}, s), Error);
}

TEST_CASE("sampling negatives is uniform over eligible items") {
  Rng rng(8);
  InteractionSet inter;
  inter.num_users = 1;
  inter.num_items = 8;
  inter.pairs = {{0, 0}, {0, 1}, {0, 2}};
  Rng s(1);
  auto split = split_leave_one_out(inter, s, 1, 0);
  std::vector<int> hits(8, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++hits[sample_negatives(split, 0, 1, rng).items[0]];
  for (int i = 0; i < 3; ++i) CHECK(hits[i] == 0);
  double chi2 = 0.0;
  for (int i = 3; i < 8; ++i) chi2 += (hits[i] - draws / 5.0) * (hits[i] - draws / 5.0) / (draws / 5.0);
  CHECK(chi2 < 18.47);  // 99.9th percentile, 4 degrees of freedom
}

TEST_CASE("a perfect scorer gets full marks and a reversed one gets none") {
  std::vector<EvalCase> cases;
  for (int u = 0; u < 20; ++u) cases.push_back({u, 0, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}});
  Scorer perfect = [](int, std::span<const int> items, std::span<double> out) {
    for (std::size_t k = 0; k < items.size(); ++k) out[k] = -items[k];
  };
  Scorer reversed = [](int, std::span<const int> items, std::span<double> out) {
    for (std::size_t k = 0; k < items.size(); ++k) out[k] = items[k];
  };
  std::vector<int> ks{1, 10};
  auto p = evaluate(perfect, cases, ks);
  CHECK(p.hr_at(1) == 1.0);
  CHECK(p.ndcg_at(10) == 1.0);
  auto r = evaluate(reversed, cases, ks);
  CHECK(r.hr_at(10) == 0.0);
  CHECK(r.n_users == 20);
  CHECK_THROWS_AS(r.hr_at(3), Error);
  CHECK_THROWS_AS(evaluate(perfect, std::span<const EvalCase>{}, ks), Error);
}

TEST_CASE("a random scorer hits the top 10 of 500 about 2% of the time") {
  Rng rng(9);
  auto inter = dense_interactions(800, 1200, 5, rng);
  Rng s(10);
  auto split = split_leave_one_out(inter, s, 499, 3);
  std::vector<int> ks{10};
  auto m = evaluate(hashed_scorer(77), split.test_cases, ks);
  const double p = 10.0 / 500.0;
  const double sigma = std::sqrt(p * (1 - p) / m.n_users);
  CHECK(m.n_users == 800);
  CHECK(std::abs(m.hr_at(10) - p) < 3 * sigma);
}

TEST_CASE("evaluation does not depend on the number of jobs") {
  Rng rng(11);
  auto inter = dense_interactions(97, 300, 6, rng);
  Rng s(12);
  auto split = split_leave_one_out(inter, s, 99, 4);
  std::vector<int> ks{1, 3, 10, 20};
  auto one = evaluate(hashed_scorer(5), split.validation_cases, ks, 1);
  for (int jobs : {2, 3, 8, 500}) {
    auto many = evaluate(hashed_scorer(5), split.validation_cases, ks, jobs);
    CHECK(many.hr == one.hr);
    CHECK(many.ndcg == one.ndcg);
  }
}

TEST_CASE("training graph drops exactly the held-out interactions") {
  auto ds = synthesize(synth_profile("toy"), 3);
  auto inter = interactions_of(ds.graph);
  Rng s(13);
  auto split = split_leave_one_out(inter, s, 10, 0);
  auto g = training_graph(ds.graph, split);
  auto kept = interactions_of(g);
  CHECK(kept.pairs == split.train.pairs);
  const auto& schema = g.schema();
  auto acted = *schema.find_relation("acted_by");
  CHECK(g.num_edges(acted) == ds.graph.num_edges(acted));
  auto watched = schema.interaction_relation();
  CHECK(g.num_edges(complement_relation(schema, watched)) == g.num_edges(watched));
}
