#include "rms/metapath.hpp"

#include <algorithm>
#include <sstream>

#include <Eigen/SparseCore>

namespace rms {

std::string to_string(PathForm form) {
  switch (form) {
    case PathForm::UserSymmetric:
      return "user-symmetric";
    case PathForm::ItemSymmetric:
      return "item-symmetric";
    case PathForm::UserToItem:
      return "user-to-item";
  }
  return "?";
}

PathForm parse_path_form(std::string_view text) {
  if (text == "user-symmetric") return PathForm::UserSymmetric;
  if (text == "item-symmetric") return PathForm::ItemSymmetric;
  if (text == "user-to-item") return PathForm::UserToItem;
  throw Error("unknown path form '" + std::string(text) + "'");
}

MetaPath MetaPath::make(const HinSchema& schema, std::vector<RelationId> relations, int max_len) {
  if (relations.empty()) throw Error("meta-path must contain at least one relation");
  if (static_cast<int>(relations.size()) > max_len)
    throw Error("meta-path longer than max_path_len " + std::to_string(max_len));
  MetaPath p;
  p.types_.push_back(schema.head(relations.front()));
  for (RelationId r : relations) {
    const auto& rel = schema.relation(r);
    if (rel.head != p.types_.back()) throw Error("meta-path relations do not chain at '" + rel.name + "'");
    p.types_.push_back(rel.tail);
  }
  p.relations_ = std::move(relations);
  return p;
}

std::string path_string(const HinSchema& schema, const MetaPath& path) {
  std::string s;
  for (TypeId t : path.node_types()) s += schema.type(t).abbrev;
  return s;
}

bool satisfies_form(const HinSchema& schema, const MetaPath& path, PathForm form) {
  TypeId u = schema.user_type();
  TypeId i = schema.item_type();
  switch (form) {
    case PathForm::UserSymmetric:
      return path.start_type() == u && path.end_type() == u;
    case PathForm::ItemSymmetric:
      return path.start_type() == i && path.end_type() == i;
    case PathForm::UserToItem:
      return path.start_type() == u && path.end_type() == i;
  }
  return false;
}

bool MetaPathSet::contains(const MetaPath& p) const { return std::find(paths_.begin(), paths_.end(), p) != paths_.end(); }

bool MetaPathSet::insert(const HinSchema& schema, MetaPath p) {
  if (!satisfies_form(schema, p, form_))
    throw Error("meta-path " + path_string(schema, p) + " violates form " + to_string(form_));
  if (contains(p)) return false;
  paths_.push_back(std::move(p));
  return true;
}

std::string MetaPathSet::key() const {
  std::ostringstream out;
  out << static_cast<int>(form_) << ':';
  for (std::size_t i = 0; i < paths_.size(); ++i) {
    if (i) out << '|';
    auto rels = paths_[i].relations();
    for (std::size_t k = 0; k < rels.size(); ++k) out << (k ? "." : "") << rels[k];
  }
  return out.str();
}

std::vector<std::string> path_strings(const HinSchema& schema, const MetaPathSet& set) {
  std::vector<std::string> out;
  for (const auto& p : set) out.push_back(path_string(schema, p));
  return out;
}

Eigen::VectorXi encode_metapath(const HinSchema& schema, const MetaPath& path) {
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(schema.num_relations());
  for (RelationId r : path.relations()) ++counts[r - 1];
  return counts;
}

Eigen::VectorXd encode_set(const HinSchema& schema, const MetaPathSet& set) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(schema.num_relations());
  for (const auto& p : set) sum += encode_metapath(schema, p).cast<double>();
  double norm = sum.norm();
  if (norm > 0.0) sum /= norm;
  return sum;
}

std::vector<NodeId> metapath_neighbors(const HinGraph& graph, const MetaPath& path, NodeId v) {
  if (v < 0 || v >= graph.num_nodes() || graph.type_of(v) != path.start_type()) return {};
  std::vector<NodeId> frontier{v};
  std::vector<char> mark(graph.num_nodes(), 0);
  for (RelationId r : path.relations()) {
    std::vector<NodeId> next;
    for (NodeId u : frontier)
      for (NodeId w : graph.neighbors(r, u))
        if (!mark[w]) {
          mark[w] = 1;
          next.push_back(w);
        }
    for (NodeId w : next) mark[w] = 0;
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
    if (frontier.empty()) break;
  }
  return frontier;
}

namespace {

using SparseBool = Eigen::SparseMatrix<double, Eigen::RowMajor>;

SparseBool relation_matrix(const HinGraph& graph, RelationId r) {
  const auto& rel = graph.schema().relation(r);
  SparseBool m(graph.num_nodes(rel.head), graph.num_nodes(rel.tail));
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(graph.num_edges(r));
  for (int i = 0; i < graph.num_nodes(rel.head); ++i)
    for (NodeId d : graph.neighbors(r, graph.node_at(rel.head, i))) entries.emplace_back(i, graph.local_index(d), 1.0);
  m.setFromTriplets(entries.begin(), entries.end());
  return m;
}

}  // namespace

SparseBool reachability(const HinGraph& graph, const MetaPath& path) {
  auto rels = path.relations();
  SparseBool reach = relation_matrix(graph, rels[0]);
  for (std::size_t k = 1; k < rels.size(); ++k) {
    SparseBool next = reach * relation_matrix(graph, rels[k]);
    // Collapse instance counts to reachability so values stay bounded.
    for (Eigen::Index row = 0; row < next.outerSize(); ++row)
      for (SparseBool::InnerIterator it(next, row); it; ++it) it.valueRef() = 1.0;
    reach = std::move(next);
  }
  reach.makeCompressed();
  return reach;
}

double subgraph_density(std::size_t non_self_edges, int num_nodes) {
  if (num_nodes <= 1) return 0.0;
  return static_cast<double>(non_self_edges) / (static_cast<double>(num_nodes) * (num_nodes - 1));
}

SubgraphResult materialize_subgraph(const HinGraph& graph, const MetaPath& path, double threshold, bool self_loops) {
  if (path.start_type() != path.end_type()) throw Error("subgraph requires symmetric meta-path");
  SparseBool reach = reachability(graph, path);

  MetaPathSubgraph sub;
  sub.path = path;
  sub.node_type = path.end_type();
  sub.num_nodes = graph.num_nodes(sub.node_type);
  sub.offsets.assign(sub.num_nodes + 1, 0);
  std::size_t non_self = 0;
  for (int i = 0; i < sub.num_nodes; ++i) {
    bool any = false;
    bool has_self = false;
    for (SparseBool::InnerIterator it(reach, i); it; ++it) {
      int j = static_cast<int>(it.col());
      any = true;
      if (j == i) has_self = true;
      else ++non_self;
      sub.targets.push_back(j);
    }
    if (any && self_loops && !has_self) {
      // Inner indices are sorted; keep the list sorted after adding i.
      auto first = sub.targets.begin() + sub.offsets[i];
      sub.targets.insert(std::upper_bound(first, sub.targets.end(), i), i);
    }
    sub.offsets[i + 1] = static_cast<std::int64_t>(sub.targets.size());
  }
  sub.density = subgraph_density(non_self, sub.num_nodes);
  if (sub.density > threshold) return Rejected{sub.density};
  return sub;
}

std::vector<int> sample_neighbors(const MetaPathSubgraph& subgraph, int v, int fanout, Rng& rng) {
  if (fanout <= 0) throw Error("fanout must be positive");
  auto nbrs = subgraph.neighbors(v);
  if (static_cast<int>(nbrs.size()) <= fanout) return {nbrs.begin(), nbrs.end()};
  std::vector<int> others;
  others.reserve(nbrs.size());
  bool has_self = false;
  for (int j : nbrs) {
    if (j == v) has_self = true;
    else others.push_back(j);
  }
  std::vector<int> out;
  out.reserve(fanout);
  if (has_self) out.push_back(v);
  std::sample(others.begin(), others.end(), std::back_inserter(out), fanout - static_cast<int>(out.size()), rng);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace rms
