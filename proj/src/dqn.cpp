#include "rms/dqn.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "rms/nn.hpp"

namespace rms {

// --- Mlp --------------------------------------------------------------------

Mlp::Mlp(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw Error("mlp needs at least input and output sizes");
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k)
    layers_.push_back({nn::glorot(sizes[k + 1], sizes[k], rng), Eigen::VectorXd::Zero(sizes[k + 1])});
}

Mlp Mlp::zeros(const std::vector<int>& sizes) {
  Mlp m;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k)
    m.layers_.push_back({Eigen::MatrixXd::Zero(sizes[k + 1], sizes[k]), Eigen::VectorXd::Zero(sizes[k + 1])});
  return m;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const { return forward(Eigen::MatrixXd(x), nullptr).col(0); }

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  if (x.rows() != input_dim())
    throw Error("mlp: input has " + std::to_string(x.rows()) + " rows, expected " + std::to_string(input_dim()));
  Eigen::MatrixXd a = x;
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& L = layers_[k];
    Eigen::MatrixXd z = (L.weight * a).colwise() + L.bias;
    if (cache) {
      cache->inputs.push_back(a);
      cache->pre.push_back(z);
    }
    a = (k + 1 < layers_.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

std::vector<DenseLayer> Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_out) const {
  std::vector<DenseLayer> grads(layers_.size());
  Eigen::MatrixXd delta = d_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    if (k + 1 < layers_.size()) delta = delta.cwiseProduct(nn::apply_grad(nn::Activation::Relu, cache.pre[k]));
    grads[k].weight = delta * cache.inputs[k].transpose();
    grads[k].bias = delta.rowwise().sum();
    if (k > 0) delta = layers_[k].weight.transpose() * delta;
  }
  return grads;
}

std::vector<ParamRef> Mlp::parameters() { return parameters(layers_); }

std::vector<ParamRef> Mlp::parameters(std::vector<DenseLayer>& layers) {
  std::vector<ParamRef> out;
  for (auto& L : layers) {
    out.push_back(ParamRef::of(L.weight));
    out.push_back(ParamRef::of(L.bias));
  }
  return out;
}

void Mlp::save(TensorArchive& ar, const std::string& prefix) const {
  ar.put_int(prefix + ".layers", static_cast<std::int64_t>(layers_.size()));
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    ar.put(prefix + "." + std::to_string(k) + ".weight", layers_[k].weight);
    ar.put(prefix + "." + std::to_string(k) + ".bias", layers_[k].bias);
  }
}

Mlp Mlp::load(const TensorArchive& ar, const std::string& prefix) {
  Mlp m;
  auto n = ar.integer(prefix + ".layers");
  for (std::int64_t k = 0; k < n; ++k) {
    DenseLayer L{ar.matrix(prefix + "." + std::to_string(k) + ".weight"),
                 ar.vector(prefix + "." + std::to_string(k) + ".bias")};
    if (!m.layers_.empty() && L.weight.cols() != m.layers_.back().weight.rows())
      throw Error("mlp checkpoint: layer shapes do not chain");
    m.layers_.push_back(std::move(L));
  }
  return m;
}

// --- policy -----------------------------------------------------------------

Eigen::VectorXd q_forward(const Mlp& q, const Eigen::VectorXd& state) { return q.forward(state); }

int greedy_action(const Eigen::VectorXd& q_values, const std::vector<bool>& mask) {
  int best = -1;
  for (int a = 0; a < q_values.size(); ++a) {
    if (!mask.empty() && !mask[a]) continue;
    if (best < 0 || q_values[a] > q_values[best]) best = a;
  }
  if (best < 0) throw Error("no legal action");
  return best;
}

int select_action(const Mlp& q, const Eigen::VectorXd& state, const std::vector<bool>& mask, double epsilon, Rng& rng) {
  if (epsilon > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon) {
    std::vector<int> legal;
    for (int a = 0; a < q.output_dim(); ++a)
      if (mask.empty() || mask[a]) legal.push_back(a);
    if (legal.empty()) throw Error("no legal action");
    return legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)];
  }
  return greedy_action(q_forward(q, state), mask);
}

// --- replay -----------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  std::vector<std::size_t> idx(items_.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::size_t> picked;
  std::sample(idx.begin(), idx.end(), std::back_inserter(picked), n, rng);
  std::vector<Transition> out;
  out.reserve(picked.size());
  for (auto i : picked) out.push_back(items_[i]);
  return out;
}

void ReplayBuffer::save(TensorArchive& ar, const std::string& prefix) const {
  ar.put_int(prefix + ".capacity", static_cast<std::int64_t>(capacity_));
  if (items_.empty()) {
    ar.put_int(prefix + ".size", 0);
    return;
  }
  const auto n = static_cast<Eigen::Index>(items_.size());
  const auto dim = items_.front().state.size();
  Eigen::MatrixXd states(n, dim), next(n, dim), scalars(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = items_[i];
    states.row(i) = t.state.transpose();
    next.row(i) = t.next_state.transpose();
    scalars(i, 0) = t.action;
    scalars(i, 1) = t.reward;
    scalars(i, 2) = t.done ? 1.0 : 0.0;
  }
  ar.put_int(prefix + ".size", n);
  ar.put(prefix + ".states", states);
  ar.put(prefix + ".next_states", next);
  ar.put(prefix + ".scalars", scalars);
}

void ReplayBuffer::load(const TensorArchive& ar, const std::string& prefix) {
  capacity_ = static_cast<std::size_t>(ar.integer(prefix + ".capacity"));
  items_.clear();
  auto n = ar.integer(prefix + ".size");
  if (n == 0) return;
  const auto& states = ar.matrix(prefix + ".states");
  const auto& next = ar.matrix(prefix + ".next_states");
  const auto& scalars = ar.matrix(prefix + ".scalars");
  for (Eigen::Index i = 0; i < n; ++i)
    items_.push_back({states.row(i).transpose(), static_cast<int>(scalars(i, 0)), scalars(i, 1),
                      next.row(i).transpose(), scalars(i, 2) != 0.0});
}

// --- TD learning --------------------------------------------------------------

TdLoss td_loss(const Mlp& q, const Mlp& target, std::span<const Transition> batch, double gamma) {
  if (batch.empty()) throw Error("td_loss: empty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto dim = batch.front().state.size();
  Eigen::MatrixXd s(dim, n), s_next(dim, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    s.col(j) = batch[j].state;
    s_next.col(j) = batch[j].next_state;
  }
  Mlp::Cache cache;
  Eigen::MatrixXd q_values = q.forward(s, &cache);
  Eigen::MatrixXd q_next = target.forward(s_next, nullptr);

  TdLoss out;
  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(q_values.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& t = batch[j];
    double bootstrap = t.done ? 0.0 : gamma * q_next.col(j).maxCoeff();
    double delta = q_values(t.action, j) - (t.reward + bootstrap);
    out.loss += nn::huber_loss(delta);
    d_out(t.action, j) = nn::huber_grad(delta) / static_cast<double>(n);
  }
  out.loss /= static_cast<double>(n);
  if (!std::isfinite(out.loss)) {
    std::ostringstream msg;
    msg << "td_loss: non-finite loss over a batch of " << n << " transitions";
    throw Error(msg.str());
  }
  out.grad = q.backward(cache, d_out);
  return out;
}

double td_update(Mlp& q, const Mlp& target, std::span<const Transition> batch, double gamma, Optimizer& optimizer) {
  auto result = td_loss(q, target, batch, gamma);
  auto params = q.parameters();
  auto grads = Mlp::parameters(result.grad);
  optimizer.step(params, grads);
  return result.loss;
}

// --- agent ------------------------------------------------------------------

DqnAgent::DqnAgent(int state_dim, int num_actions, DqnConfig config)
    : config_(std::move(config)),
      state_dim_(state_dim),
      num_actions_(num_actions),
      rng_(config_.seed),
      buffer_(static_cast<std::size_t>(config_.buffer_capacity)),
      optimizer_(make_optimizer(config_.optimizer, config_.lr)) {
  std::vector<int> sizes{state_dim};
  sizes.insert(sizes.end(), config_.hidden.begin(), config_.hidden.end());
  sizes.push_back(num_actions);
  q_ = Mlp(sizes, rng_);
  if (config_.zero_output) q_.layers().back().weight.setZero();
  target_ = q_;
  if (!config_.action_mask.empty() && static_cast<int>(config_.action_mask.size()) != num_actions)
    throw Error("action mask size does not match the action count");
  if (!config_.action_mask.empty()) config_.action_mask[kStop] = true;
}

double DqnAgent::epsilon() const {
  double decay = std::max(1.0, config_.epsilon_decay_fraction * static_cast<double>(planned_steps_));
  double frac = std::min(1.0, static_cast<double>(steps_) / decay);
  if (frac >= 1.0) return config_.epsilon_end;
  return config_.epsilon_start + (config_.epsilon_end - config_.epsilon_start) * frac;
}

void DqnAgent::observe(Transition t) {
  buffer_.push(std::move(t));
  ++steps_;
  if (static_cast<int>(buffer_.size()) < std::max(config_.warmup, 1)) return;
  for (int k = 0; k < config_.updates_per_step; ++k) {
    auto batch = buffer_.sample(static_cast<std::size_t>(config_.batch_size), rng_);
    td_update(q_, target_, batch, config_.gamma, *optimizer_);
    ++updates_;
    if (config_.target_sync > 0 && updates_ % config_.target_sync == 0) target_ = q_;
  }
}

void DqnAgent::train(Environment& env, int until_episodes) {
  if (env.state_dim() != state_dim_ || env.num_actions() != num_actions_)
    throw Error("environment shape does not match the agent");
  planned_steps_ = std::max<std::int64_t>(1, static_cast<std::int64_t>(config_.episodes) * env.max_steps());
  const int target = std::min(until_episodes, config_.episodes);
  while (episodes_done_ < target) {
    Eigen::VectorXd s = env.reset();
    bool done = false;
    while (!done) {
      int a = select_action(q_, s, config_.action_mask, epsilon(), rng_);
      auto r = env.step(a);
      observe({s, a, r.reward, r.state, r.done});
      s = r.state;
      done = r.done;
    }
    ++episodes_done_;
  }
}

std::vector<int> DqnAgent::greedy_episode(Environment& env) {
  std::vector<int> actions;
  Eigen::VectorXd s = env.reset();
  bool done = false;
  while (!done) {
    int a = greedy_action(q_forward(q_, s), config_.action_mask);
    actions.push_back(a);
    auto r = env.step(a);
    s = r.state;
    done = r.done;
  }
  return actions;
}

void DqnAgent::save(const std::filesystem::path& path) const {
  TensorArchive ar;
  ar.put_text("kind", "dqn-agent");
  q_.save(ar, "q");
  target_.save(ar, "target");
  optimizer_->save(ar, "optimizer");
  buffer_.save(ar, "buffer");
  ar.put_int("steps", steps_);
  ar.put_int("updates", updates_);
  ar.put_int("episodes_done", episodes_done_);
  std::ostringstream rng_state;
  rng_state << rng_;
  ar.put_text("rng", rng_state.str());
  ar.save(path);
}

void DqnAgent::load(const std::filesystem::path& path) {
  auto ar = TensorArchive::load(path);
  if (ar.text("kind") != "dqn-agent") throw Error(path.string() + ": not a DQN checkpoint");
  auto q = Mlp::load(ar, "q");
  if (q.input_dim() != state_dim_ || q.output_dim() != num_actions_)
    throw Error(path.string() + ": checkpoint shape does not match the environment");
  q_ = std::move(q);
  target_ = Mlp::load(ar, "target");
  optimizer_->load(ar, "optimizer");
  buffer_.load(ar, "buffer");
  steps_ = ar.integer("steps");
  updates_ = ar.integer("updates");
  episodes_done_ = static_cast<int>(ar.integer("episodes_done"));
  std::istringstream rng_state(ar.text("rng"));
  rng_state >> rng_;
}

MetaPathSet dqn_search(SearchEnv& env, DqnAgent& agent) {
  agent.train(env);
  agent.greedy_episode(env);
  return env.state().set;
}

}  // namespace rms
