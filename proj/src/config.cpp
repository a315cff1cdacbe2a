#include "rms/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace rms {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error("config: " + key + " = '" + value + "' is not " + expected);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty())
    bad_value(key, value, std::is_floating_point_v<T> ? "a number" : "an integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  bad_value(key, value, "on/off");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  if (out.empty()) bad_value(key, value, "a comma-separated list");
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
  bool hashed = true;
};

#define RMS_INT(path)                                                                                            \
  Field {                                                                                                        \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.path = parse_number<decltype(c.path)>(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.path); }                                               \
  }
#define RMS_REAL(path)                                                                                     \
  Field {                                                                                                  \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.path = parse_number<double>(k, v); }, \
        [](const RunConfig& c) { return fmt(c.path); }                                                     \
  }
#define RMS_ACT(path)                                                                                   \
  Field {                                                                                               \
    [](RunConfig& c, const std::string&, const std::string& v) { c.path = nn::parse_activation(v); }, \
        [](const RunConfig& c) { return nn::to_string(c.path); }                                        \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["seed"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                   c.seed = parse_number<std::uint64_t>(k, v);
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }, false};
    t["jobs"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.jobs = parse_number<int>(k, v); },
                 [](const RunConfig& c) { return std::to_string(c.jobs); }, false};
    t["data"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.data = v; },
                 [](const RunConfig& c) { return c.data; }, false};
    t["out"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.out = v; },
                [](const RunConfig& c) { return c.out; }, false};

    // The embedding size is shared by MF and HRec.
    t["dim"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                  c.hrec.dim = c.mf.dim = parse_number<int>(k, v);
                },
                [](const RunConfig& c) { return std::to_string(c.hrec.dim); }};
    t["att_hidden"] = RMS_INT(hrec.att_hidden);
    t["dropout"] = RMS_REAL(hrec.dropout);
    t["lr"] = RMS_REAL(hrec.lr);
    t["optimizer"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                        make_optimizer(v, 0.0);
                        c.hrec.optimizer = v;
                      },
                      [](const RunConfig& c) { return c.hrec.optimizer; }};
    t["batch_size"] = RMS_INT(hrec.batch_size);
    t["epochs"] = RMS_INT(hrec.epochs);
    t["patience"] = RMS_INT(hrec.patience);
    t["fanout"] = RMS_INT(hrec.fanout);
    t["eval_fanout"] = RMS_INT(hrec.eval_fanout);
    t["density_threshold"] = RMS_REAL(hrec.density_threshold);
    t["score_activation"] = RMS_ACT(hrec.act.score);
    t["leaky_slope"] = RMS_REAL(hrec.act.slope);
    t["aggregate_activation"] = RMS_ACT(hrec.act.aggregate);
    t["path_activation"] = RMS_ACT(hrec.act.path);
    t["identity_projection"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                  c.hrec.identity_projection = parse_bool(k, v);
                                },
                                [](const RunConfig& c) { return std::string(c.hrec.identity_projection ? "on" : "off"); }};

    t["mf_epochs"] = RMS_INT(mf.epochs);
    t["mf_lr"] = RMS_REAL(mf.lr);
    t["mf_reg"] = RMS_REAL(mf.reg);
    t["mf_init_std"] = RMS_REAL(mf.init_std);

    t["dqn_episodes"] = RMS_INT(dqn.episodes);
    t["gamma"] = RMS_REAL(dqn.gamma);
    t["dqn_lr"] = RMS_REAL(dqn.lr);
    t["dqn_optimizer"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                            make_optimizer(v, 0.0);
                            c.dqn.optimizer = v;
                          },
                          [](const RunConfig& c) { return c.dqn.optimizer; }};
    t["epsilon_start"] = RMS_REAL(dqn.epsilon_start);
    t["epsilon_end"] = RMS_REAL(dqn.epsilon_end);
    t["epsilon_decay_fraction"] = RMS_REAL(dqn.epsilon_decay_fraction);
    t["dqn_batch_size"] = RMS_INT(dqn.batch_size);
    t["warmup"] = RMS_INT(dqn.warmup);
    t["target_sync"] = RMS_INT(dqn.target_sync);
    t["updates_per_step"] = RMS_INT(dqn.updates_per_step);
    t["buffer_capacity"] = RMS_INT(dqn.buffer_capacity);
    t["dqn_hidden"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         c.dqn.hidden = parse_int_list(k, v);
                       },
                       [](const RunConfig& c) { return fmt(c.dqn.hidden); }};

    t["dqn_zero_output"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                              c.dqn.zero_output = parse_bool(k, v);
                            },
                            [](const RunConfig& c) { return std::string(c.dqn.zero_output ? "on" : "off"); }};

    t["max_steps"] = RMS_INT(env.max_steps);
    t["max_path_len"] = RMS_INT(env.max_path_len);
    t["probe_epochs"] = RMS_INT(probe_epochs);
    t["leak_guard"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.leak_guard = parse_bool(k, v); },
                       [](const RunConfig& c) { return std::string(c.leak_guard ? "on" : "off"); }};
    t["num_negatives"] = RMS_INT(num_negatives);
    t["ks"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.ks = parse_int_list(k, v); },
               [](const RunConfig& c) { return fmt(c.ks); }};
    t["greedy_candidates"] = RMS_INT(greedy_candidates);
    t["iter_limit"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         if (v == "none") c.iter_limit.reset();
                         else c.iter_limit = parse_number<std::int64_t>(k, v);
                       },
                       [](const RunConfig& c) { return c.iter_limit ? std::to_string(*c.iter_limit) : "none"; }};
    t["time_limit"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         if (v == "none") c.time_limit.reset();
                         else c.time_limit = parse_number<double>(k, v);
                       },
                       [](const RunConfig& c) { return c.time_limit ? fmt(*c.time_limit) : "none"; }};
    return t;
  }();
  return table;
}

#undef RMS_INT
#undef RMS_REAL
#undef RMS_ACT

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw Error("config: unknown key '" + key + "'");
  it->second.set(*this, key, value);
}

std::string RunConfig::get(const std::string& key) const {
  auto it = fields().find(key);
  if (it == fields().end()) throw Error("config: unknown key '" + key + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [k, f] : fields()) out.push_back(k);
    return out;
  }();
  return names;
}

void RunConfig::parse(std::istream& in, const std::string& source) {
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto hash = raw.find('#');
    auto line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw LoadError(source + ": expected 'key = value' at line " + std::to_string(line_no), line_no);
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const LoadError&) {
      throw;
    } catch (const Error& e) {
      throw LoadError(source + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path.string());
  parse(in, path.string());
}

std::string RunConfig::resolved() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(*this) + "\n";
  return out;
}

std::string RunConfig::hash() const {
  std::string text;
  for (const auto& [k, f] : fields())
    if (f.hashed) text += k + "=" + f.get(*this) + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

}  // namespace rms
