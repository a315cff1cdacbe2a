#include "rms/hin.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "rms/archive.hpp"

namespace rms {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(std::string(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Shortest prefix of each name that no other name shares.
void assign_abbreviations(std::vector<NodeType>& types) {
  for (auto& t : types) {
    if (!t.abbrev.empty()) continue;
    std::size_t len = 1;
    for (; len < t.name.size(); ++len) {
      auto prefix = t.name.substr(0, len);
      bool clash = std::any_of(types.begin(), types.end(), [&](const NodeType& o) {
        return &o != &t && o.name.compare(0, len, prefix) == 0;
      });
      if (!clash) break;
    }
    t.abbrev = t.name.substr(0, len);
  }
}

std::string at_line(int line) { return " at line " + std::to_string(line); }

}  // namespace

HinSchema::HinSchema(std::vector<NodeType> types, const std::vector<RelationDecl>& relations,
                     std::string interaction_relation)
    : types_(std::move(types)) {
  if (types_.empty()) throw Error("schema: no node types");
  for (std::size_t i = 0; i < types_.size(); ++i)
    for (std::size_t j = i + 1; j < types_.size(); ++j)
      if (types_[i].name == types_[j].name) throw Error("schema: duplicate node type '" + types_[i].name + "'");
  assign_abbreviations(types_);

  auto type_id = [&](const std::string& name) {
    auto t = find_type(name);
    if (!t) throw Error("schema: unknown node type '" + name + "'");
    return *t;
  };

  for (const auto& decl : relations) {
    TypeId head = type_id(decl.head);
    TypeId tail = type_id(decl.tail);
    std::string comp_name = decl.complement.empty() ? decl.name + "_inv" : decl.complement;
    if (auto existing = find_relation(decl.name)) {
      const auto& r = relations_[*existing - 1];
      if (r.head != head || r.tail != tail || relations_[r.complement - 1].name != comp_name)
        throw Error("schema: relation '" + decl.name + "' conflicts with its complement declaration");
      continue;
    }
    if (find_relation(comp_name)) throw Error("schema: complement '" + comp_name + "' already paired");
    auto id = static_cast<RelationId>(relations_.size() + 1);
    if (comp_name == decl.name) {
      if (head != tail) throw Error("schema: self-complementary relation '" + decl.name + "' must have head == tail");
      relations_.push_back({id, decl.name, head, tail, id});
    } else {
      relations_.push_back({id, decl.name, head, tail, id + 1});
      relations_.push_back({id + 1, comp_name, tail, head, id});
    }
  }
  if (!interaction_relation.empty()) {
    auto r = find_relation(interaction_relation);
    if (!r) throw Error("schema: unknown interaction relation '" + interaction_relation + "'");
    interaction_ = *r;
  }
}

HinSchema HinSchema::parse(std::istream& in, const std::string& source) {
  std::vector<NodeType> types;
  std::vector<RelationDecl> decls;
  std::string interaction;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto hash = raw.find('#');
    auto line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string::npos) throw LoadError(source + ": expected 'key: value'" + at_line(line_no), line_no);
    auto key = trim(line.substr(0, colon));
    auto value = trim(line.substr(colon + 1));
    if (value.find("->") != std::string::npos) {
      RelationDecl d;
      d.name = key;
      auto arrow = value.find("->");
      d.head = trim(value.substr(0, arrow));
      auto rest = value.substr(arrow + 2);
      auto tilde = rest.find('~');
      d.tail = trim(rest.substr(0, tilde));
      if (tilde != std::string::npos) d.complement = trim(rest.substr(tilde + 1));
      if (d.name.empty() || d.head.empty() || d.tail.empty())
        throw LoadError(source + ": malformed relation" + at_line(line_no), line_no);
      decls.push_back(std::move(d));
    } else if (key == "node_types") {
      for (const auto& item : split(value, ',')) {
        auto tok = trim(item);
        if (tok.empty()) continue;
        NodeType t;
        auto paren = tok.find('(');
        if (paren != std::string::npos && tok.back() == ')') {
          t.name = trim(tok.substr(0, paren));
          t.abbrev = trim(tok.substr(paren + 1, tok.size() - paren - 2));
        } else {
          t.name = tok;
        }
        types.push_back(std::move(t));
      }
    } else if (key == "interaction_relation") {
      interaction = value;
    } else {
      throw LoadError(source + ": unknown key '" + key + "'" + at_line(line_no), line_no);
    }
  }
  try {
    return HinSchema(std::move(types), decls, interaction);
  } catch (const LoadError&) {
    throw;
  } catch (const Error& e) {
    throw LoadError(source + ": " + e.what(), 0);
  }
}

HinSchema HinSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return parse(in, path.filename().string());
}

std::string HinSchema::to_text() const {
  std::ostringstream out;
  out << "node_types: ";
  for (std::size_t i = 0; i < types_.size(); ++i)
    out << (i ? ", " : "") << types_[i].name << "(" << types_[i].abbrev << ")";
  out << "\n";
  for (const auto& r : relations_) {
    if (r.complement < r.id) continue;
    out << r.name << ": " << types_[r.head].name << " -> " << types_[r.tail].name << " ~ "
        << relations_[r.complement - 1].name << "\n";
  }
  if (interaction_ != 0) out << "interaction_relation: " << relations_[interaction_ - 1].name << "\n";
  return out.str();
}

const Relation& HinSchema::relation(RelationId r) const {
  if (r < 1 || r > num_relations())
    throw std::out_of_range("relation id " + std::to_string(r) + " outside 1.." + std::to_string(num_relations()));
  return relations_[r - 1];
}

std::optional<TypeId> HinSchema::find_type(std::string_view name) const {
  for (std::size_t i = 0; i < types_.size(); ++i)
    if (types_[i].name == name) return static_cast<TypeId>(i);
  return std::nullopt;
}

std::optional<RelationId> HinSchema::find_relation(std::string_view name) const {
  for (const auto& r : relations_)
    if (r.name == name) return r.id;
  return std::nullopt;
}

RelationId HinSchema::interaction_relation() const {
  if (interaction_ == 0) throw Error("schema: no interaction relation designated");
  return interaction_;
}

RelationId complement_relation(const HinSchema& schema, RelationId r) { return schema.relation(r).complement; }

// --- HinGraph ---------------------------------------------------------------

HinGraph HinGraph::build(HinSchema schema, const std::vector<NodeRecord>& nodes,
                         const std::vector<EdgeRecord>& edges) {
  HinGraph g;
  g.schema_ = std::move(schema);
  const int ntypes = g.schema_.num_types();

  std::vector<std::vector<std::string>> by_type(ntypes);
  std::unordered_map<std::string, TypeId> seen;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& rec = nodes[i];
    int line = rec.line ? rec.line : static_cast<int>(i + 1);
    auto t = g.schema_.find_type(rec.type);
    if (!t) throw LoadError("unknown node type '" + rec.type + "'" + at_line(line), line);
    auto [it, fresh] = seen.emplace(rec.id, *t);
    if (!fresh) {
      if (it->second != *t) throw LoadError("conflicting type for node '" + rec.id + "'" + at_line(line), line);
      continue;
    }
    by_type[*t].push_back(rec.id);
  }

  g.type_offset_.assign(ntypes + 1, 0);
  for (TypeId t = 0; t < ntypes; ++t) {
    g.type_offset_[t + 1] = g.type_offset_[t] + static_cast<NodeId>(by_type[t].size());
    for (auto& name : by_type[t]) {
      g.by_name_.emplace(name, static_cast<NodeId>(g.names_.size()));
      g.names_.push_back(std::move(name));
      g.node_type_.push_back(t);
    }
  }

  std::vector<std::vector<std::pair<NodeId, NodeId>>> per_relation(g.schema_.num_relations());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& rec = edges[i];
    int line = rec.line ? rec.line : static_cast<int>(i + 1);
    auto r = g.schema_.find_relation(rec.relation);
    if (!r) throw LoadError("unknown relation name '" + rec.relation + "'" + at_line(line), line);
    auto src = g.find(rec.src);
    auto dst = g.find(rec.dst);
    if (!src) throw LoadError("dangling node-id '" + rec.src + "'" + at_line(line), line);
    if (!dst) throw LoadError("dangling node-id '" + rec.dst + "'" + at_line(line), line);
    const auto& rel = g.schema_.relation(*r);
    if (g.type_of(*src) != rel.head || g.type_of(*dst) != rel.tail)
      throw LoadError("endpoint-type mismatch" + at_line(line), line);
    per_relation[*r - 1].emplace_back(*src, *dst);
    per_relation[rel.complement - 1].emplace_back(*dst, *src);
  }
  g.index_edges(std::move(per_relation));
  return g;
}

void HinGraph::index_edges(std::vector<std::vector<std::pair<NodeId, NodeId>>> per_relation) {
  adj_.assign(per_relation.size(), {});
  for (std::size_t k = 0; k < per_relation.size(); ++k) {
    auto& list = per_relation[k];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    TypeId head = schema_.relation(static_cast<RelationId>(k + 1)).head;
    auto& a = adj_[k];
    a.offsets.assign(num_nodes(head) + 1, 0);
    a.targets.reserve(list.size());
    for (auto [s, d] : list) {
      ++a.offsets[local_index(s) + 1];
      a.targets.push_back(d);
    }
    for (std::size_t i = 1; i < a.offsets.size(); ++i) a.offsets[i] += a.offsets[i - 1];
  }
}

std::optional<NodeId> HinGraph::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::span<const NodeId> HinGraph::neighbors(RelationId r, NodeId v) const {
  const auto& rel = schema_.relation(r);
  if (v < 0 || v >= num_nodes() || node_type_[v] != rel.head) return {};
  const auto& a = adj_[r - 1];
  auto i = local_index(v);
  return {a.targets.data() + a.offsets[i], static_cast<std::size_t>(a.offsets[i + 1] - a.offsets[i])};
}

std::size_t HinGraph::num_edges() const {
  std::size_t total = 0;
  for (const auto& a : adj_) total += a.targets.size();
  return total;
}

std::vector<std::pair<NodeId, NodeId>> HinGraph::edges(RelationId r) const {
  std::vector<std::pair<NodeId, NodeId>> out;
  TypeId head = schema_.head(r);
  out.reserve(num_edges(r));
  for (int i = 0; i < num_nodes(head); ++i) {
    NodeId s = node_at(head, i);
    for (NodeId d : neighbors(r, s)) out.emplace_back(s, d);
  }
  return out;
}

HinGraph HinGraph::without_edges(RelationId r, std::span<const std::pair<NodeId, NodeId>> removed) const {
  RelationId comp = schema_.relation(r).complement;
  std::set<std::pair<NodeId, NodeId>> drop(removed.begin(), removed.end());
  std::vector<std::vector<std::pair<NodeId, NodeId>>> per_relation(schema_.num_relations());
  for (RelationId k = 1; k <= schema_.num_relations(); ++k) {
    for (auto e : edges(k)) {
      if (k == r && drop.count(e)) continue;
      if (k == comp && drop.count({e.second, e.first})) continue;
      per_relation[k - 1].push_back(e);
    }
  }
  HinGraph g = *this;
  g.index_edges(std::move(per_relation));
  return g;
}

bool operator==(const HinGraph& a, const HinGraph& b) {
  return a.schema_ == b.schema_ && a.names_ == b.names_ && a.node_type_ == b.node_type_ && a.adj_ == b.adj_;
}

InteractionSet interactions_of(const HinGraph& graph) {
  const auto& schema = graph.schema();
  InteractionSet set;
  set.relation = schema.interaction_relation();
  set.num_users = graph.num_nodes(schema.user_type());
  set.num_items = graph.num_nodes(schema.item_type());
  for (auto [u, i] : graph.edges(set.relation)) set.pairs.push_back({graph.local_index(u), graph.local_index(i)});
  return set;
}

// --- TSV and bundle I/O -----------------------------------------------------

namespace {

template <typename Fn>
void for_each_record(const std::filesystem::path& path, std::size_t fields, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() != fields)
      throw LoadError(path.filename().string() + ": expected " + std::to_string(fields) + " tab-separated fields" +
                          at_line(line_no),
                      line_no);
    fn(cols, line_no);
  }
}

}  // namespace

std::vector<NodeRecord> read_nodes_tsv(const std::filesystem::path& path) {
  std::vector<NodeRecord> out;
  for_each_record(path, 2, [&](auto& c, int line) { out.push_back({c[0], c[1], line}); });
  return out;
}

std::vector<EdgeRecord> read_edges_tsv(const std::filesystem::path& path) {
  std::vector<EdgeRecord> out;
  for_each_record(path, 3, [&](auto& c, int line) { out.push_back({c[0], c[1], c[2], line}); });
  return out;
}

HinGraph load_graph(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path,
                    const HinSchema& schema) {
  auto nodes = read_nodes_tsv(nodes_path);
  auto edges = read_edges_tsv(edges_path);
  // Node validation runs first, so node errors point at the nodes file.
  try {
    (void)HinGraph::build(schema, nodes, {});
  } catch (const LoadError& e) {
    throw LoadError(nodes_path.filename().string() + ": " + e.what(), e.line());
  }
  try {
    return HinGraph::build(schema, nodes, edges);
  } catch (const LoadError& e) {
    throw LoadError(edges_path.filename().string() + ": " + e.what(), e.line());
  }
}

void write_graph_tsv(const HinGraph& graph, const std::filesystem::path& nodes_path,
                     const std::filesystem::path& edges_path) {
  std::ofstream nodes(nodes_path);
  std::ofstream edges(edges_path);
  if (!nodes || !edges) throw Error("cannot write graph TSV files");
  const auto& schema = graph.schema();
  for (NodeId v = 0; v < graph.num_nodes(); ++v)
    nodes << graph.name(v) << '\t' << schema.type(graph.type_of(v)).name << '\n';
  for (const auto& rel : schema.relations())
    for (auto [s, d] : graph.edges(rel.id)) edges << graph.name(s) << '\t' << rel.name << '\t' << graph.name(d) << '\n';
}

namespace {
constexpr std::string_view kBundleMagic{"RMSHIN\0\1", 8};
}

void write_bundle(const HinGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  BinaryWriter w(out);
  const auto& schema = graph.schema();
  w.bytes(kBundleMagic);
  w.u32(1);
  w.str(schema.to_text());
  w.u32(static_cast<std::uint32_t>(graph.num_nodes()));
  for (NodeId v = 0; v < graph.num_nodes(); ++v) {
    w.u32(static_cast<std::uint32_t>(graph.type_of(v)));
    w.str(graph.name(v));
  }
  // Only one direction per complement pair; the mirror is rebuilt on read.
  for (const auto& rel : schema.relations()) {
    if (rel.complement < rel.id) continue;
    auto list = graph.edges(rel.id);
    w.u64(list.size());
    for (auto [s, d] : list) {
      w.u32(static_cast<std::uint32_t>(s));
      w.u32(static_cast<std::uint32_t>(d));
    }
  }
}

HinGraph read_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  BinaryReader r(in);
  if (r.bytes(kBundleMagic.size()) != kBundleMagic) throw Error(path.string() + ": not a graph bundle");
  if (r.u32() != 1) throw Error(path.string() + ": unsupported bundle version");
  std::istringstream schema_text(r.str());
  auto schema = HinSchema::parse(schema_text, path.filename().string());
  auto n = r.u32();
  std::vector<NodeRecord> nodes;
  nodes.reserve(n);
  for (std::uint32_t v = 0; v < n; ++v) {
    auto t = r.u32();
    auto name = r.str();
    nodes.push_back({std::move(name), schema.type(static_cast<TypeId>(t)).name, 0});
  }
  std::vector<EdgeRecord> edges;
  for (const auto& rel : schema.relations()) {
    if (rel.complement < rel.id) continue;
    auto m = r.u64();
    for (std::uint64_t k = 0; k < m; ++k) {
      auto s = r.u32();
      auto d = r.u32();
      if (s >= n || d >= n) throw Error(path.string() + ": corrupt edge list");
      edges.push_back({nodes[s].id, rel.name, nodes[d].id, 0});
    }
  }
  return HinGraph::build(std::move(schema), nodes, edges);
}

}  // namespace rms
