#pragma once

#include <functional>
#include <span>
#include <vector>

#include "rms/hin.hpp"

namespace rms {

class HRecModel;

/// One ranking task: a held-out positive against sampled negatives.
struct EvalCase {
  int user = 0;
  int positive = 0;
  std::vector<int> negatives;
};

struct SplitSet {
  InteractionSet train;
  InteractionSet validation;
  InteractionSet test;
  /// Every item each user interacted with, across all three splits (sorted).
  std::vector<std::vector<int>> interacted;
  std::vector<EvalCase> validation_cases;
  std::vector<EvalCase> test_cases;
  /// Users whose negative pool came up short of the requested count.
  int reduced_pools = 0;
};

enum class SplitName { Validation, Test };

/// Per user with at least 3 interactions: one random pair to test, one to
/// validation, the rest to train. Smaller users stay entirely in train.
/// Negatives for every held-out pair are drawn here, from a stream derived
/// from (negative_seed, user), so they never depend on evaluation order.
SplitSet split_leave_one_out(const InteractionSet& interactions, Rng& rng, int num_negatives = 499,
                             std::uint64_t negative_seed = 0);

struct NegativeSample {
  std::vector<int> items;
  bool reduced = false;  // fewer eligible items than requested
};

/// `count` distinct items the user never interacted with, uniform without replacement.
NegativeSample sample_negatives(const SplitSet& split, int user, int count, Rng& rng);

/// The interaction graph minus validation and test edges.
HinGraph training_graph(const HinGraph& graph, const SplitSet& split);

/// 1 + number of other candidates scoring at least as high as the positive.
int rank_position(std::span<const double> scores, int positive_index);

double hr_at_k(int rank, int k);
double ndcg_at_k(int rank, int k);

struct RankingMetrics {
  std::vector<int> ks;
  std::vector<double> hr;
  std::vector<double> ndcg;
  int n_users = 0;

  double hr_at(int k) const;
  double ndcg_at(int k) const;
};

/// Fills `out` with a score per candidate item of `user`.
using Scorer = std::function<void(int user, std::span<const int> items, std::span<double> out)>;

/// Ranks each case's positive among its candidates (positive first, then the
/// negatives) and averages the metrics over cases. `jobs` > 1 splits the cases
/// over threads; the result does not depend on it.
RankingMetrics evaluate(const Scorer& scorer, std::span<const EvalCase> cases, std::span<const int> ks, int jobs = 1);

/// Scores with the model's inference embeddings.
RankingMetrics evaluate(const HRecModel& model, std::span<const EvalCase> cases, std::span<const int> ks,
                        int jobs = 1);

const std::vector<EvalCase>& cases_of(const SplitSet& split, SplitName which);

inline const std::vector<int> kDefaultKs = {1, 3, 10, 20};

}  // namespace rms
