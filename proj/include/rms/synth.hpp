#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rms/hin.hpp"

namespace rms {

/// Users, movies, actors and directors; users watch movies, movies have
/// actors and a director. Interactions are planted along one item-side
/// meta-path: each user picks favorite actors (MAM) or directors (MDM) and
/// watches their movies with some probability, plus a few random movies.
struct SynthProfile {
  std::string name;
  int users = 600;
  int movies = 800;
  int actors = 400;
  int directors = 200;
  int actors_per_movie = 2;
  int favorites = 3;
  double watch_prob = 0.7;
  int noise_watches = 2;
  std::string planted = "MAM";  // "MAM" or "MDM"
};

/// "planted-MAM", "planted-MDM" or "toy".
SynthProfile synth_profile(std::string_view name);
std::vector<std::string> synth_profiles();

/// The movie schema: watch, acted_by and directed_by plus their complements.
HinSchema movie_schema();

struct SynthDataset {
  HinGraph graph;
  std::string profile;
  std::uint64_t seed = 0;
  std::vector<std::string> planted;  // path strings, e.g. "MAM"
  std::string planted_side;          // "item"
};

SynthDataset synthesize(const SynthProfile& profile, std::uint64_t seed);

}  // namespace rms
