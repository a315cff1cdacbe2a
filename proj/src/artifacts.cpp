#include "rms/artifacts.hpp"

#include <fstream>

namespace rms {

HinGraph load_dataset(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw Error("dataset not found: " + path.string());
  if (!fs::is_directory(path)) return read_bundle(path);
  if (fs::exists(path / "dataset.bin")) return read_bundle(path / "dataset.bin");
  for (const char* name : {"schema.txt", "nodes.tsv", "edges.tsv"})
    if (!fs::exists(path / name)) throw Error("dataset directory " + path.string() + " has no dataset.bin or " + name);
  return load_graph(path / "nodes.tsv", path / "edges.tsv", HinSchema::load(path / "schema.txt"));
}

Json set_to_json(const HinSchema& schema, const MetaPathSet& set) {
  Json j;
  j["paths"] = path_strings(schema, set);
  Json rels = Json::array();
  for (const auto& p : set) {
    Json names = Json::array();
    for (RelationId r : p.relations()) names.push_back(schema.relation(r).name);
    rels.push_back(std::move(names));
  }
  j["relations"] = std::move(rels);
  return j;
}

MetaPathSet set_from_json(const HinSchema& schema, const Json& j, PathForm form) {
  if (!j.contains("relations")) throw Error("meta-path set JSON has no \"relations\" list");
  MetaPathSet set(form);
  for (const auto& names : j.at("relations")) {
    std::vector<RelationId> rels;
    for (const auto& n : names) {
      auto r = schema.find_relation(n.get<std::string>());
      if (!r) throw Error("unknown relation name '" + n.get<std::string>() + "' in meta-path set");
      rels.push_back(*r);
    }
    set.insert(schema, MetaPath::make(schema, std::move(rels)));
  }
  return set;
}

Json metapath_sets_json(const HinSchema& schema, const MetaPathSet& user, const MetaPathSet& item) {
  Json j;
  j["user"] = path_strings(schema, user);
  j["item"] = path_strings(schema, item);
  return j;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Json graph_stats(const HinGraph& graph) {
  const auto& schema = graph.schema();
  Json j;
  j["num_node_types"] = schema.num_types();
  j["num_relations"] = schema.num_relations();
  j["num_nodes"] = graph.num_nodes();
  j["num_edges"] = graph.num_edges();
  Json nodes;
  for (TypeId t = 0; t < schema.num_types(); ++t) nodes[schema.type(t).name] = graph.num_nodes(t);
  j["nodes"] = std::move(nodes);
  Json edges;
  for (const auto& r : schema.relations()) edges[r.name] = graph.num_edges(r.id);
  j["edges"] = std::move(edges);
  j["interaction_relation"] = schema.relation(schema.interaction_relation()).name;
  return j;
}

}  // namespace rms
