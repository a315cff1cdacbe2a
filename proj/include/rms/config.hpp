#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rms/dqn.hpp"
#include "rms/hrec.hpp"
#include "rms/search_env.hpp"

namespace rms {

/// Every tunable under one flat key namespace.
struct RunConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string data;
  std::string out = "out";

  HRecConfig hrec;
  MfConfig mf;
  DqnConfig dqn;
  EnvOptions env;
  int probe_epochs = 1;
  bool leak_guard = true;
  int num_negatives = 499;
  std::vector<int> ks = {1, 3, 10, 20};
  int greedy_candidates = 3;
  std::optional<std::int64_t> iter_limit;
  std::optional<double> time_limit;  // seconds

  /// Applies one `key = value` setting; throws Error for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  /// Reads `key = value` lines; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  void parse(std::istream& in, const std::string& source);

  /// All keys, sorted, one `key = value` per line.
  std::string resolved() const;
  /// FNV-1a over the resolved text minus seed, jobs and paths, as 16 hex digits.
  std::string hash() const;
};

}  // namespace rms
