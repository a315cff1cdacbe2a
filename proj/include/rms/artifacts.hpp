#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "rms/eval.hpp"
#include "rms/metapath.hpp"

namespace rms {

using Json = nlohmann::ordered_json;

/// A bundle file, or a directory holding dataset.bin or schema.txt + nodes.tsv + edges.tsv.
HinGraph load_dataset(const std::filesystem::path& path);

/// {"paths": ["UMU", ...], "relations": [["watch", "watched"], ...]}
Json set_to_json(const HinSchema& schema, const MetaPathSet& set);
/// Reads the "relations" lists back; throws on unknown names or form violations.
MetaPathSet set_from_json(const HinSchema& schema, const Json& j, PathForm form);

/// {"user": [...], "item": [...]} path strings, as embedded in metrics records.
Json metapath_sets_json(const HinSchema& schema, const MetaPathSet& user, const MetaPathSet& item);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed, newline-terminated.
void write_json(const std::filesystem::path& path, const Json& j);

/// Node and edge counts per type and relation.
Json graph_stats(const HinGraph& graph);

}  // namespace rms
