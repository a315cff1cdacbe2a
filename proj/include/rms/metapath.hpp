#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/SparseCore>

#include "rms/hin.hpp"

namespace rms {

inline constexpr int kDefaultMaxPathLen = 8;

enum class PathForm { UserSymmetric, ItemSymmetric, UserToItem };

std::string to_string(PathForm form);
PathForm parse_path_form(std::string_view text);

/// A chain of relations r_1..r_k with tail(r_i) = head(r_{i+1}).
class MetaPath {
 public:
  MetaPath() = default;

  /// Throws Error when the relations do not chain, an id is out of range,
  /// the path is empty, or it is longer than max_len.
  static MetaPath make(const HinSchema& schema, std::vector<RelationId> relations, int max_len = kDefaultMaxPathLen);

  std::span<const RelationId> relations() const { return relations_; }
  std::span<const TypeId> node_types() const { return types_; }
  int length() const { return static_cast<int>(relations_.size()); }
  TypeId start_type() const { return types_.front(); }
  TypeId end_type() const { return types_.back(); }

  friend bool operator==(const MetaPath& a, const MetaPath& b) { return a.relations_ == b.relations_; }

 private:
  std::vector<RelationId> relations_;
  std::vector<TypeId> types_;
};

/// Node-type abbreviations joined, e.g. "UMAMU".
std::string path_string(const HinSchema& schema, const MetaPath& path);
bool satisfies_form(const HinSchema& schema, const MetaPath& path, PathForm form);

/// Ordered, duplicate-free collection of paths sharing one form.
class MetaPathSet {
 public:
  explicit MetaPathSet(PathForm form = PathForm::UserSymmetric) : form_(form) {}

  PathForm form() const { return form_; }
  const std::vector<MetaPath>& paths() const { return paths_; }
  std::size_t size() const { return paths_.size(); }
  bool empty() const { return paths_.empty(); }
  auto begin() const { return paths_.begin(); }
  auto end() const { return paths_.end(); }

  bool contains(const MetaPath& p) const;
  /// Appends unless already present; throws if p violates the form.
  bool insert(const HinSchema& schema, MetaPath p);

  /// Canonical text of the relation ids, e.g. "1.2|3.4"; used as a cache key.
  std::string key() const;

  friend bool operator==(const MetaPathSet& a, const MetaPathSet& b) {
    return a.form_ == b.form_ && a.paths_ == b.paths_;
  }

 private:
  PathForm form_;
  std::vector<MetaPath> paths_;
};

std::vector<std::string> path_strings(const HinSchema& schema, const MetaPathSet& set);

/// counts[r - 1] = occurrences of relation r in the path.
Eigen::VectorXi encode_metapath(const HinSchema& schema, const MetaPath& path);

/// L2-normalized sum of member encodings; the empty set maps to zero.
Eigen::VectorXd encode_set(const HinSchema& schema, const MetaPathSet& set);

/// Nodes reachable from v along some instance of the path, sorted. Empty when
/// type(v) is not the path's start type.
std::vector<NodeId> metapath_neighbors(const HinGraph& graph, const MetaPath& path, NodeId v);

/// Boolean reachability matrix over local indices (start type x end type),
/// composed relation by relation with sparse products.
Eigen::SparseMatrix<double, Eigen::RowMajor> reachability(const HinGraph& graph, const MetaPath& path);

/// Homogeneous graph over the path's end type. Neighbor lists hold local
/// indices, are sorted, and include a self-loop for every node that has at
/// least one meta-path neighbor (when self_loops is on).
struct MetaPathSubgraph {
  MetaPath path;
  TypeId node_type = 0;
  int num_nodes = 0;
  std::vector<std::int64_t> offsets;
  std::vector<int> targets;
  double density = 0.0;

  std::span<const int> neighbors(int v) const {
    return {targets.data() + offsets[v], static_cast<std::size_t>(offsets[v + 1] - offsets[v])};
  }
  int degree(int v) const { return static_cast<int>(offsets[v + 1] - offsets[v]); }
  std::size_t num_edges() const { return targets.size(); }
};

struct Rejected {
  double density = 0.0;
};

using SubgraphResult = std::variant<MetaPathSubgraph, Rejected>;

/// Directed non-self edges over m(m-1); 0 when m <= 1.
double subgraph_density(std::size_t non_self_edges, int num_nodes);

/// Throws Error("subgraph requires symmetric meta-path") unless the path
/// starts and ends on the same type. Rejected when density > threshold.
SubgraphResult materialize_subgraph(const HinGraph& graph, const MetaPath& path, double threshold,
                                    bool self_loops = true);

/// All neighbors when deg(v) <= fanout; otherwise v's self-loop plus a
/// uniform sample without replacement of the rest, fanout entries in total.
std::vector<int> sample_neighbors(const MetaPathSubgraph& subgraph, int v, int fanout, Rng& rng);

}  // namespace rms
