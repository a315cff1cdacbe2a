#pragma once

#include <deque>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "rms/optim.hpp"
#include "rms/rl.hpp"
#include "rms/search_env.hpp"

namespace rms {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Fully connected network: rectifier on hidden layers, linear output.
class Mlp {
 public:
  Mlp() = default;
  /// sizes = {input, hidden..., output}. Glorot-uniform weights, zero biases.
  Mlp(const std::vector<int>& sizes, Rng& rng);
  static Mlp zeros(const std::vector<int>& sizes);

  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }

  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  };

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  /// Column-batched forward; fills `cache` for backward when given.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache) const;
  /// Parameter gradients for upstream gradient d_out (output_dim x batch).
  std::vector<DenseLayer> backward(const Cache& cache, const Eigen::MatrixXd& d_out) const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::vector<ParamRef> parameters();
  static std::vector<ParamRef> parameters(std::vector<DenseLayer>& grads);

  void save(TensorArchive& ar, const std::string& prefix) const;
  static Mlp load(const TensorArchive& ar, const std::string& prefix);

 private:
  std::vector<DenseLayer> layers_;
};

Eigen::VectorXd q_forward(const Mlp& q, const Eigen::VectorXd& state);

/// argmax over legal actions, ties to the lowest id.
int greedy_action(const Eigen::VectorXd& q_values, const std::vector<bool>& mask);

/// With probability epsilon a uniformly random legal action, else the greedy one.
/// An empty mask means every action is legal.
int select_action(const Mlp& q, const Eigen::VectorXd& state, const std::vector<bool>& mask, double epsilon, Rng& rng);

struct Transition {
  Eigen::VectorXd state;
  int action = 0;
  double reward = 0.0;
  Eigen::VectorXd next_state;
  bool done = false;
};

/// Fixed-capacity FIFO of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// Oldest first.
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  /// Uniform sample without replacement (all items if n >= size).
  std::vector<Transition> sample(std::size_t n, Rng& rng) const;

  void save(TensorArchive& ar, const std::string& prefix) const;
  void load(const TensorArchive& ar, const std::string& prefix);

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

struct TdLoss {
  double loss = 0.0;
  std::vector<DenseLayer> grad;
};

/// Mean Huber loss of delta = Q(s,a) - (r + gamma max_a' Q_target(s',a')), with
/// the bootstrap term dropped for terminal transitions, and its gradient with
/// respect to q's parameters.
TdLoss td_loss(const Mlp& q, const Mlp& target, std::span<const Transition> batch, double gamma);

/// One optimizer step on td_loss. Returns the loss before the step.
double td_update(Mlp& q, const Mlp& target, std::span<const Transition> batch, double gamma, Optimizer& optimizer);

struct DqnConfig {
  int episodes = 200;
  double gamma = 0.9;
  double lr = 0.001;
  std::string optimizer = "adam";
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  double epsilon_decay_fraction = 0.5;  // of planned steps
  int batch_size = 32;
  int warmup = 200;        // transitions before updates begin
  int target_sync = 100;   // updates between target copies
  int updates_per_step = 1;
  int buffer_capacity = 10000;
  std::vector<int> hidden = {32, 64, 32};
  bool zero_output = true;  // output layer starts at zero, so initial Q and bootstrap targets are 0
  std::vector<bool> action_mask;  // empty = all legal
  std::uint64_t seed = 0;
};

class DqnAgent {
 public:
  DqnAgent(int state_dim, int num_actions, DqnConfig config);

  /// Runs training episodes until `config.episodes` have completed in total
  /// (so a resumed agent continues where it stopped).
  void train(Environment& env) { train(env, config_.episodes); }
  /// Trains until `until_episodes` episodes are done in total (capped at
  /// config.episodes); the epsilon schedule always follows config.episodes.
  void train(Environment& env, int until_episodes);
  /// One greedy episode; returns the actions taken.
  std::vector<int> greedy_episode(Environment& env);

  double epsilon() const;
  int episodes_done() const { return episodes_done_; }
  std::int64_t updates() const { return updates_; }
  const Mlp& q() const { return q_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const DqnConfig& config() const { return config_; }

  void save(const std::filesystem::path& path) const;
  /// Restores networks, optimizer, buffer, counters and the RNG stream.
  void load(const std::filesystem::path& path);

 private:
  void observe(Transition t);

  DqnConfig config_;
  int state_dim_;
  int num_actions_;
  Rng rng_;
  Mlp q_;
  Mlp target_;
  ReplayBuffer buffer_;
  std::unique_ptr<Optimizer> optimizer_;
  std::int64_t steps_ = 0;
  std::int64_t updates_ = 0;
  std::int64_t planned_steps_ = 1;
  int episodes_done_ = 0;
};

/// Trains an agent on the env, then returns the final set of one greedy
/// episode from the initial set.
MetaPathSet dqn_search(SearchEnv& env, DqnAgent& agent);

}  // namespace rms
