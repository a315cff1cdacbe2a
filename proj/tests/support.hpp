#pragma once

// Shared fixtures and reference implementations for the test binaries.

#include <algorithm>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rms/dqn.hpp"
#include "rms/hin.hpp"
#include "rms/metapath.hpp"
#include "rms/optim.hpp"
#include "rms/rl.hpp"
#include "rms/synth.hpp"

namespace rms::test {

/// Movie graph used across the tests:
///   u0 watches m0, m1; u1 watches m1, m2; u2 watches m3
///   m0, m1 share actor a0; m2 has a1; m3 has no actor
///   m0, m2 share director d0; m1 has d1
inline HinGraph tiny_movies() {
  std::vector<NodeRecord> nodes;
  for (auto [id, type] : std::vector<std::pair<const char*, const char*>>{
           {"u0", "User"}, {"u1", "User"}, {"u2", "User"}, {"m0", "Movie"}, {"m1", "Movie"}, {"m2", "Movie"},
           {"m3", "Movie"}, {"a0", "Actor"}, {"a1", "Actor"}, {"d0", "Director"}, {"d1", "Director"}})
    nodes.push_back({id, type});
  std::vector<EdgeRecord> edges;
  for (auto [s, r, d] : std::vector<std::tuple<const char*, const char*, const char*>>{
           {"u0", "watch", "m0"}, {"u0", "watch", "m1"}, {"u1", "watch", "m1"}, {"u1", "watch", "m2"},
           {"u2", "watch", "m3"}, {"m0", "acted_by", "a0"}, {"m1", "acted_by", "a0"}, {"m2", "acted_by", "a1"},
           {"m0", "directed_by", "d0"}, {"m2", "directed_by", "d0"}, {"m1", "directed_by", "d1"}})
    edges.push_back({s, r, d});
  return HinGraph::build(movie_schema(), nodes, edges);
}

/// Six relations where [2, 6, 6, 4] chains: watched (M->U), followed_by
/// (U->U) twice, member_of (U->G).
inline HinSchema six_relation_schema() {
  return HinSchema({{"User", "U"}, {"Movie", "M"}, {"Group", "G"}},
                   {{"watch", "User", "Movie", "watched"},
                    {"has_member", "Group", "User", "member_of"},
                    {"follows", "User", "User", "followed_by"}},
                   "watch");
}

inline MetaPath path_of(const HinSchema& schema, std::initializer_list<const char*> names) {
  std::vector<RelationId> ids;
  for (const char* n : names) ids.push_back(*schema.find_relation(n));
  return MetaPath::make(schema, ids);
}

/// Random typed graph: up to `max_types` types, up to `max_pairs` relation
/// pairs (so up to 2 * max_pairs relations), up to `max_nodes` nodes.
inline HinGraph random_graph(Rng& rng, int max_types = 3, int max_pairs = 3, int max_nodes = 50,
                             double edge_prob = 0.15) {
  std::uniform_int_distribution<int> n_types(1, max_types), n_pairs(1, max_pairs);
  const int T = n_types(rng);
  const int P = n_pairs(rng);
  std::vector<NodeType> types;
  for (int t = 0; t < T; ++t) types.push_back({"T" + std::to_string(t), std::string(1, char('A' + t))});
  std::vector<HinSchema::RelationDecl> decls;
  std::uniform_int_distribution<int> pick_type(0, T - 1);
  for (int p = 0; p < P; ++p)
    decls.push_back({"r" + std::to_string(p), types[pick_type(rng)].name, types[pick_type(rng)].name,
                     "r" + std::to_string(p) + "_inv"});
  HinSchema schema(types, decls, "");

  std::uniform_int_distribution<int> n_nodes(T, max_nodes);
  const int N = n_nodes(rng);
  std::vector<NodeRecord> nodes;
  std::vector<std::vector<std::string>> by_type(T);
  for (int i = 0; i < N; ++i) {
    int t = i < T ? i : pick_type(rng);
    std::string id = "n" + std::to_string(i);
    by_type[t].push_back(id);
    nodes.push_back({id, types[t].name});
  }
  std::bernoulli_distribution coin(edge_prob);
  std::vector<EdgeRecord> edges;
  for (const auto& rel : schema.relations()) {
    if (rel.id % 2 == 0) continue;  // declared relations are the odd ids
    for (const auto& s : by_type[rel.head])
      for (const auto& d : by_type[rel.tail])
        if (coin(rng)) edges.push_back({s, rel.name, d});
  }
  return HinGraph::build(schema, nodes, edges);
}

/// Random chained path of 1..max_len relations.
inline MetaPath random_path(const HinSchema& schema, Rng& rng, int max_len) {
  std::uniform_int_distribution<int> len_dist(1, max_len);
  const int len = len_dist(rng);
  std::vector<RelationId> rels;
  std::uniform_int_distribution<int> any(1, schema.num_relations());
  rels.push_back(any(rng));
  while (static_cast<int>(rels.size()) < len) {
    std::vector<RelationId> next;
    for (const auto& r : schema.relations())
      if (r.head == schema.tail(rels.back())) next.push_back(r.id);
    if (next.empty()) break;
    std::uniform_int_distribution<std::size_t> pick(0, next.size() - 1);
    rels.push_back(next[pick(rng)]);
  }
  return MetaPath::make(schema, rels);
}

/// Reference: depth-first enumeration of every path instance from v, reading
/// raw edge lists instead of the adjacency index.
inline std::vector<NodeId> brute_force_neighbors(const HinGraph& graph, const MetaPath& path, NodeId v) {
  if (graph.type_of(v) != path.start_type()) return {};
  std::vector<std::vector<std::pair<NodeId, NodeId>>> edges;
  for (RelationId r : path.relations()) edges.push_back(graph.edges(r));
  std::set<NodeId> found;
  std::function<void(NodeId, std::size_t)> walk = [&](NodeId at, std::size_t depth) {
    if (depth == edges.size()) {
      found.insert(at);
      return;
    }
    for (auto [s, d] : edges[depth])
      if (s == at) walk(d, depth + 1);
  };
  walk(v, 0);
  return {found.begin(), found.end()};
}

/// Episodic toy task: `n` relations, one of which (`good`) earns +1 and every
/// other relation -1; STOP earns 0 and ends the episode. The state is the
/// normalized count of actions taken plus a constant first component, so the
/// optimal first action is `good` from the start state.
class OneGoodRelationEnv final : public Environment {
 public:
  OneGoodRelationEnv(int n, int good, int max_steps = 4) : n_(n), good_(good), max_steps_(max_steps) {}

  int state_dim() const override { return n_ + 1; }
  int num_actions() const override { return n_ + 1; }
  int max_steps() const override { return max_steps_; }

  Eigen::VectorXd reset() override {
    counts_ = Eigen::VectorXd::Zero(n_ + 1);
    counts_[0] = 1.0;
    steps_ = 0;
    return counts_.normalized();
  }

  EnvStep step(int action) override {
    ++steps_;
    if (action == kStop) return {counts_.normalized(), 0.0, true};
    counts_[action] += 1.0;
    return {counts_.normalized(), action == good_ ? 1.0 : -1.0, steps_ >= max_steps_};
  }

 private:
  int n_, good_, max_steps_;
  int steps_ = 0;
  Eigen::VectorXd counts_;
};

/// Smallest |pre-activation| of any hidden unit over the given states. A
/// finite difference with a step larger than this can straddle a ReLU kink.
inline double kink_margin(const Mlp& q, const std::vector<Transition>& batch) {
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& t : batch) {
    Eigen::VectorXd h = t.state;
    for (std::size_t k = 0; k + 1 < q.layers().size(); ++k) {
      Eigen::VectorXd z = q.layers()[k].weight * h + q.layers()[k].bias;
      margin = std::min(margin, z.cwiseAbs().minCoeff());
      h = z.cwiseMax(0.0);
    }
  }
  return margin;
}

/// Central-difference gradient of f with respect to every entry of params,
/// compared against the analytic gradient. Returns the worst relative error
/// |a - n| / max(|a|, |n|, floor); the floor keeps entries whose true
/// gradient is zero from dividing roundoff by roundoff.
inline double max_gradient_error(const std::function<double()>& f, std::vector<ParamRef> params,
                                 std::vector<ParamRef> grads, double step = 1e-5, std::string* worst = nullptr,
                                 double floor = 1e-6) {
  double err = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (Eigen::Index i = 0; i < params[t].size; ++i) {
      double& x = params[t].data[i];
      const double keep = x;
      x = keep + step;
      const double up = f();
      x = keep - step;
      const double down = f();
      x = keep;
      const double numeric = (up - down) / (2 * step);
      const double analytic = grads[t].data[i];
      const double e = std::abs(analytic - numeric) / std::max({floor, std::abs(analytic), std::abs(numeric)});
      if (e > err) {
        err = e;
        if (worst) {
          std::ostringstream msg;
          msg << "tensor " << t << " entry " << i << ": analytic " << analytic << " numeric " << numeric;
          *worst = msg.str();
        }
      }
    }
  }
  return err;
}

}  // namespace rms::test
