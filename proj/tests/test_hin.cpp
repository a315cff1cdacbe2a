#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "support.hpp"

using namespace rms;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("rms_test_hin_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("schema assigns complements directly after their relation") {
  auto s = movie_schema();
  REQUIRE(s.num_types() == 4);
  REQUIRE(s.num_relations() == 6);
  CHECK(s.relation(1).name == "watch");
  CHECK(s.relation(2).name == "watched");
  CHECK(complement_relation(s, 1) == 2);
  CHECK(complement_relation(s, 2) == 1);
  CHECK(complement_relation(s, 3) == 4);
  CHECK(s.relation(5).name == "directed_by");
  CHECK(s.head(2) == s.tail(1));
  CHECK(s.user_type() == *s.find_type("User"));
  CHECK(s.item_type() == *s.find_type("Movie"));
  CHECK(s.type(*s.find_type("Actor")).abbrev == "A");
}

TEST_CASE("complement of every relation is an involution with swapped endpoints") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = test::random_graph(rng);
    const auto& s = g.schema();
    for (const auto& r : s.relations()) {
      auto c = complement_relation(s, r.id);
      CHECK(complement_relation(s, c) == r.id);
      CHECK(s.head(c) == r.tail);
      CHECK(s.tail(c) == r.head);
    }
  }
}

TEST_CASE("relation lookup rejects STOP and out-of-range ids") {
  auto s = movie_schema();
  CHECK_THROWS_AS(s.relation(kStop), std::out_of_range);
  CHECK_THROWS_AS(s.relation(7), std::out_of_range);
}

TEST_CASE("schema text round-trips") {
  auto s = movie_schema();
  std::istringstream in(s.to_text());
  CHECK(HinSchema::parse(in) == s);
}

TEST_CASE("schema parse errors carry the line number") {
  std::istringstream bad("node_types: User, Movie\nwatch User Movie\n");
  try {
    HinSchema::parse(bad, "s.txt");
    FAIL("expected a LoadError");
  } catch (const LoadError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream unknown("node_types: User\nwatch: User -> Movie\n");
  CHECK_THROWS_AS(HinSchema::parse(unknown), LoadError);
}

TEST_CASE("graph mirrors every edge under the complement") {
  auto g = test::tiny_movies();
  const auto& s = g.schema();
  for (const auto& r : s.relations()) {
    auto fwd = g.edges(r.id);
    auto back = g.edges(r.complement);
    REQUIRE(fwd.size() == back.size());
    for (auto [a, b] : fwd) {
      auto nb = g.neighbors(r.complement, b);
      CHECK(std::find(nb.begin(), nb.end(), a) != nb.end());
    }
  }
  CHECK(g.num_edges(1) == 5);
  CHECK(g.num_edges() == 22);
}

TEST_CASE("nodes are grouped by type into contiguous ranges") {
  auto g = test::tiny_movies();
  const auto& s = g.schema();
  for (TypeId t = 0; t < s.num_types(); ++t)
    for (int i = 0; i < g.num_nodes(t); ++i) {
      NodeId v = g.node_at(t, i);
      CHECK(g.type_of(v) == t);
      CHECK(g.local_index(v) == i);
    }
  CHECK(g.num_nodes(*s.find_type("Movie")) == 4);
}

TEST_CASE("neighbors are empty for a node of the wrong type") {
  auto g = test::tiny_movies();
  CHECK(g.neighbors(1, *g.find("m0")).empty());
  CHECK(g.neighbors(1, *g.find("u0")).size() == 2);
}

TEST_CASE("duplicate nodes and edges collapse") {
  auto s = movie_schema();
  auto g = HinGraph::build(s, {{"u", "User"}, {"u", "User"}, {"m", "Movie"}},
                           {{"u", "watch", "m"}, {"u", "watch", "m"}, {"m", "watched", "u"}});
  CHECK(g.num_nodes() == 2);
  CHECK(g.num_edges(1) == 1);
  CHECK(g.num_edges(2) == 1);
}

TEST_CASE("graph build reports the offending record") {
  auto s = movie_schema();
  auto line_of = [&](std::vector<NodeRecord> n, std::vector<EdgeRecord> e) {
    try {
      HinGraph::build(s, n, e);
    } catch (const LoadError& err) {
      return err.line();
    }
    return -1;
  };
  CHECK(line_of({{"u", "User"}, {"x", "Alien"}}, {}) == 2);
  CHECK(line_of({{"u", "User"}, {"u", "Movie"}}, {}) == 2);
  CHECK(line_of({{"u", "User"}, {"m", "Movie"}}, {{"u", "watch", "m"}, {"u", "likes", "m"}}) == 2);
  CHECK(line_of({{"u", "User"}, {"m", "Movie"}}, {{"u", "watch", "ghost", 7}}) == 7);
  CHECK(line_of({{"u", "User"}, {"m", "Movie"}}, {{"m", "watch", "u"}}) == 1);
}

TEST_CASE("TSV loader names the file and line") {
  auto dir = scratch("tsv");
  write_file(dir / "nodes.tsv", "u0\tUser\nm0\tMovie\n");
  write_file(dir / "edges.tsv", "u0\twatch\tm0\n# comment\nu0\twatch\n");
  try {
    load_graph(dir / "nodes.tsv", dir / "edges.tsv", movie_schema());
    FAIL("expected a LoadError");
  } catch (const LoadError& e) {
    CHECK(e.line() == 3);
    std::string msg = e.what();
    CHECK(msg.find("edges.tsv") != std::string::npos);
    CHECK(msg.find("line 3") != std::string::npos);
  }
  write_file(dir / "edges.tsv", "u0\twatch\tm9\n");
  try {
    load_graph(dir / "nodes.tsv", dir / "edges.tsv", movie_schema());
    FAIL("expected a LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("dangling node-id 'm9'") != std::string::npos);
  }
  write_file(dir / "nodes.tsv", "u0\tUser\nm0\tFilm\n");
  try {
    load_graph(dir / "nodes.tsv", dir / "edges.tsv", movie_schema());
    FAIL("expected a LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("nodes.tsv") != std::string::npos);
    CHECK(e.line() == 2);
  }
}

TEST_CASE("TSV and bundle round-trips preserve the graph") {
  auto dir = scratch("roundtrip");
  auto g = synthesize(synth_profile("toy"), 3).graph;
  write_graph_tsv(g, dir / "nodes.tsv", dir / "edges.tsv");
  auto from_tsv = load_graph(dir / "nodes.tsv", dir / "edges.tsv", g.schema());
  CHECK(from_tsv == g);
  write_bundle(g, dir / "a.bin");
  CHECK(read_bundle(dir / "a.bin") == g);
  write_bundle(from_tsv, dir / "b.bin");
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
}

TEST_CASE("bundle reader rejects foreign files") {
  auto dir = scratch("bundle");
  write_file(dir / "junk.bin", "not a bundle at all");
  CHECK_THROWS_AS(read_bundle(dir / "junk.bin"), Error);
}

TEST_CASE("without_edges removes edges and their mirrors") {
  auto g = test::tiny_movies();
  std::vector<std::pair<NodeId, NodeId>> drop{{*g.find("u0"), *g.find("m1")}};
  auto h = g.without_edges(1, drop);
  CHECK(h.num_edges(1) == 4);
  CHECK(h.num_edges(2) == 4);
  CHECK(h.neighbors(2, *h.find("m1")).size() == 1);
  CHECK(h.num_edges(3) == g.num_edges(3));
}

TEST_CASE("interactions are the edges of the interaction relation by local index") {
  auto g = test::tiny_movies();
  auto in = interactions_of(g);
  CHECK(in.num_users == 3);
  CHECK(in.num_items == 4);
  REQUIRE(in.pairs.size() == 5);
  CHECK(in.pairs.front() == UserItem{0, 0});
  CHECK(in.pairs.back() == UserItem{2, 3});
  CHECK(std::is_sorted(in.pairs.begin(), in.pairs.end()));
}

TEST_CASE("synthetic data is deterministic and respects the schema") {
  auto a = synthesize(synth_profile("planted-MAM"), 7);
  auto b = synthesize(synth_profile("planted-MAM"), 7);
  CHECK(a.graph == b.graph);
  CHECK(a.planted == std::vector<std::string>{"MAM"});
  CHECK(a.graph.num_nodes() == 2000);
  const auto& s = a.graph.schema();
  for (const auto& r : s.relations())
    for (auto [x, y] : a.graph.edges(r.id)) {
      CHECK(a.graph.type_of(x) == r.head);
      CHECK(a.graph.type_of(y) == r.tail);
    }
  auto c = synthesize(synth_profile("planted-MAM"), 8);
  CHECK_FALSE(c.graph == a.graph);
  CHECK(synthesize(synth_profile("planted-MDM"), 7).planted == std::vector<std::string>{"MDM"});
  CHECK_THROWS_AS(synth_profile("nope"), Error);
}
