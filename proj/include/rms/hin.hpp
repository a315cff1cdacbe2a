#pragma once

#include <compare>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rms/common.hpp"

namespace rms {

/// Raised by the loaders; the message carries file and line context.
class LoadError : public Error {
 public:
  LoadError(const std::string& what, int line) : Error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct NodeType {
  std::string name;
  std::string abbrev;  // used in path strings such as "UMAMU"
  friend bool operator==(const NodeType&, const NodeType&) = default;
};

struct Relation {
  RelationId id = 0;
  std::string name;
  TypeId head = 0;
  TypeId tail = 0;
  RelationId complement = 0;
  friend bool operator==(const Relation&, const Relation&) = default;
};

/// Node types plus relations 1..n, every relation paired with its reverse.
///
/// Relations listed without their complement get the complement appended
/// directly after them, so `watch: User -> Movie ~ watched` yields ids
/// watch = k, watched = k + 1.
class HinSchema {
 public:
  struct RelationDecl {
    std::string name;
    std::string head;
    std::string tail;
    std::string complement;
  };

  HinSchema() = default;
  HinSchema(std::vector<NodeType> types, const std::vector<RelationDecl>& relations,
            std::string interaction_relation);

  /// Parses the key-value schema text:
  ///   node_types: User, Movie, Actor(A)
  ///   watch: User -> Movie ~ watched
  ///   interaction_relation: watch
  static HinSchema parse(std::istream& in, const std::string& source = "schema");
  static HinSchema load(const std::filesystem::path& path);
  std::string to_text() const;

  int num_types() const { return static_cast<int>(types_.size()); }
  int num_relations() const { return static_cast<int>(relations_.size()); }
  const NodeType& type(TypeId t) const { return types_.at(t); }
  const std::vector<NodeType>& types() const { return types_; }

  /// Throws std::out_of_range for r outside 1..n (including STOP).
  const Relation& relation(RelationId r) const;
  const std::vector<Relation>& relations() const { return relations_; }
  TypeId head(RelationId r) const { return relation(r).head; }
  TypeId tail(RelationId r) const { return relation(r).tail; }

  std::optional<TypeId> find_type(std::string_view name) const;
  std::optional<RelationId> find_relation(std::string_view name) const;

  bool has_interaction() const { return interaction_ != 0; }
  RelationId interaction_relation() const;
  TypeId user_type() const { return head(interaction_relation()); }
  TypeId item_type() const { return tail(interaction_relation()); }

  friend bool operator==(const HinSchema&, const HinSchema&) = default;

 private:
  std::vector<NodeType> types_;
  std::vector<Relation> relations_;  // relations_[r - 1]
  RelationId interaction_ = 0;
};

RelationId complement_relation(const HinSchema& schema, RelationId r);

struct NodeRecord {
  std::string id;
  std::string type;
  int line = 0;  // source line; 0 means "position in the record list"
};

struct EdgeRecord {
  std::string src;
  std::string relation;
  std::string dst;
  int line = 0;
};

/// Immutable typed multigraph. Nodes are remapped to dense ids grouped by
/// type, so each type owns the contiguous range [first_node(t), first_node(t + 1)).
/// Every edge under r has its mirror under comp(r); adjacency lists are sorted
/// and duplicate-free.
class HinGraph {
 public:
  HinGraph() = default;

  /// Validates and indexes. Errors report each record's `line`, or its
  /// 1-based position when `line` is 0. Duplicate nodes and edges collapse.
  static HinGraph build(HinSchema schema, const std::vector<NodeRecord>& nodes,
                        const std::vector<EdgeRecord>& edges);

  const HinSchema& schema() const { return schema_; }

  int num_nodes() const { return static_cast<int>(names_.size()); }
  int num_nodes(TypeId t) const { return type_offset_[t + 1] - type_offset_[t]; }
  NodeId first_node(TypeId t) const { return type_offset_[t]; }
  TypeId type_of(NodeId v) const { return node_type_[v]; }
  int local_index(NodeId v) const { return v - type_offset_[node_type_[v]]; }
  NodeId node_at(TypeId t, int local) const { return type_offset_[t] + local; }

  const std::string& name(NodeId v) const { return names_[v]; }
  std::optional<NodeId> find(std::string_view name) const;

  /// Destinations of edges (v, .) under r; empty when type(v) != head(r).
  std::span<const NodeId> neighbors(RelationId r, NodeId v) const;
  std::size_t num_edges(RelationId r) const { return adj_[r - 1].targets.size(); }
  std::size_t num_edges() const;
  std::vector<std::pair<NodeId, NodeId>> edges(RelationId r) const;

  /// Copy with the listed edges under r (and their mirrors) removed.
  HinGraph without_edges(RelationId r, std::span<const std::pair<NodeId, NodeId>> removed) const;

  friend bool operator==(const HinGraph&, const HinGraph&);

 private:
  struct Adjacency {
    std::vector<std::int64_t> offsets;  // over head-type local index
    std::vector<NodeId> targets;
    friend bool operator==(const Adjacency&, const Adjacency&) = default;
  };

  void index_edges(std::vector<std::vector<std::pair<NodeId, NodeId>>> per_relation);

  HinSchema schema_;
  std::vector<std::string> names_;
  std::vector<TypeId> node_type_;
  std::vector<NodeId> type_offset_;
  std::unordered_map<std::string, NodeId> by_name_;
  std::vector<Adjacency> adj_;
};

/// A user-item pair by local index within the user and item node types.
struct UserItem {
  int user = 0;
  int item = 0;
  friend auto operator<=>(const UserItem&, const UserItem&) = default;
};

/// Positive pairs: the edges stored under the schema's interaction relation.
struct InteractionSet {
  RelationId relation = 0;
  int num_users = 0;
  int num_items = 0;
  std::vector<UserItem> pairs;  // sorted, duplicate-free
};

InteractionSet interactions_of(const HinGraph& graph);

std::vector<NodeRecord> read_nodes_tsv(const std::filesystem::path& path);
std::vector<EdgeRecord> read_edges_tsv(const std::filesystem::path& path);

/// Reads and validates both TSV files; errors name the file and line.
HinGraph load_graph(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path,
                    const HinSchema& schema);

/// Writes nodes and one line per stored edge (mirrors included), in dense-id order.
void write_graph_tsv(const HinGraph& graph, const std::filesystem::path& nodes_path,
                     const std::filesystem::path& edges_path);

/// Dense-id binary bundle: schema text, node names per type, edge lists per relation.
void write_bundle(const HinGraph& graph, const std::filesystem::path& path);
HinGraph read_bundle(const std::filesystem::path& path);

}  // namespace rms
