#include "rms/synth.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace rms {

SynthProfile synth_profile(std::string_view name) {
  SynthProfile p;
  p.name = std::string(name);
  if (name == "planted-MAM") return p;
  if (name == "planted-MDM") {
    p.planted = "MDM";
    p.favorites = 2;
    return p;
  }
  if (name == "toy") {
    p.users = 12;
    p.movies = 16;
    p.actors = 8;
    p.directors = 4;
    p.favorites = 1;
    p.watch_prob = 1.0;
    p.noise_watches = 1;
    return p;
  }
  throw Error("unknown synth profile '" + std::string(name) + "'");
}

std::vector<std::string> synth_profiles() { return {"planted-MAM", "planted-MDM", "toy"}; }

HinSchema movie_schema() {
  std::istringstream text(
      "node_types: User, Movie, Actor, Director\n"
      "watch: User -> Movie ~ watched\n"
      "acted_by: Movie -> Actor ~ acts_in\n"
      "directed_by: Movie -> Director ~ directs\n"
      "interaction_relation: watch\n");
  return HinSchema::parse(text, "movie schema");
}

SynthDataset synthesize(const SynthProfile& p, std::uint64_t seed) {
  if (p.planted != "MAM" && p.planted != "MDM") throw Error("planted path must be MAM or MDM");
  if (p.actors_per_movie > p.actors || p.favorites < 1) throw Error("synth profile is inconsistent");
  Rng rng(seed);
  auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };

  std::vector<NodeRecord> nodes;
  auto add_nodes = [&](const std::string& prefix, const std::string& type, int n) {
    for (int i = 0; i < n; ++i) nodes.push_back({prefix + std::to_string(i), type, 0});
  };
  add_nodes("u", "User", p.users);
  add_nodes("m", "Movie", p.movies);
  add_nodes("a", "Actor", p.actors);
  add_nodes("d", "Director", p.directors);

  std::vector<EdgeRecord> edges;
  std::vector<std::vector<int>> by_actor(p.actors), by_director(p.directors);
  for (int m = 0; m < p.movies; ++m) {
    std::set<int> cast;
    while (static_cast<int>(cast.size()) < p.actors_per_movie) cast.insert(pick(p.actors));
    for (int a : cast) {
      edges.push_back({"m" + std::to_string(m), "acted_by", "a" + std::to_string(a), 0});
      by_actor[a].push_back(m);
    }
    int d = pick(p.directors);
    edges.push_back({"m" + std::to_string(m), "directed_by", "d" + std::to_string(d), 0});
    by_director[d].push_back(m);
  }

  const auto& groups = p.planted == "MAM" ? by_actor : by_director;
  std::bernoulli_distribution watch(p.watch_prob);
  for (int u = 0; u < p.users; ++u) {
    std::set<int> favorites;
    const int wanted = std::min<int>(p.favorites, static_cast<int>(groups.size()));
    while (static_cast<int>(favorites.size()) < wanted) favorites.insert(pick(static_cast<int>(groups.size())));
    std::set<int> watched;
    for (int f : favorites)
      for (int m : groups[f])
        if (watch(rng)) watched.insert(m);
    for (int k = 0; k < p.noise_watches; ++k) watched.insert(pick(p.movies));
    for (int m : watched) edges.push_back({"u" + std::to_string(u), "watch", "m" + std::to_string(m), 0});
  }

  SynthDataset out;
  out.graph = HinGraph::build(movie_schema(), nodes, edges);
  out.profile = p.name;
  out.seed = seed;
  out.planted = {p.planted};
  out.planted_side = "item";
  return out;
}

}  // namespace rms
