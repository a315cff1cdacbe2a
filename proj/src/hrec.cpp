#include "rms/hrec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rms {

// --- building blocks ----------------------------------------------------------

Eigen::VectorXd project(const Eigen::MatrixXd& W, const Eigen::VectorXd& x) {
  if (W.cols() != x.size()) throw Error("project: matrix has " + std::to_string(W.cols()) + " columns, vector has " +
                                        std::to_string(x.size()) + " entries");
  return W * x;
}

NodeAttention node_attention(const Eigen::VectorXd& a, const Eigen::VectorXd& z_i, const NodeMatrix& neighbors,
                             const AttentionActivations& act) {
  const auto d = z_i.size();
  if (neighbors.rows() == 0) throw Error("node_attention: empty neighbor list");
  if (a.size() != 2 * d || neighbors.cols() != d) throw Error("node_attention: dimension mismatch");
  NodeAttention out;
  out.pre_score = (neighbors * a.tail(d)).array() + a.head(d).dot(z_i);
  out.alpha = nn::softmax(nn::apply(act.score, out.pre_score, act.slope));
  out.pre_agg = neighbors.transpose() * out.alpha;
  out.h = nn::apply(act.aggregate, out.pre_agg);
  return out;
}

PathAttention path_attention(const Eigen::MatrixXd& mlp_weight, const Eigen::VectorXd& mlp_bias,
                             const Eigen::MatrixXd& queries, const std::vector<NodeMatrix>& per_path,
                             const AttentionActivations& act) {
  const auto X = static_cast<Eigen::Index>(per_path.size());
  if (X == 0) throw Error("path_attention: no paths");
  if (queries.cols() != X) throw Error("path_attention: one query per path required");
  const auto n = per_path.front().rows();
  PathAttention out;
  out.w.resize(X);
  for (Eigen::Index x = 0; x < X; ++x) {
    const auto& H = per_path[x];
    if (H.rows() != n || H.cols() != per_path.front().cols())
      throw Error("path_attention: paths cover different node sets");
    NodeMatrix pre = (H * mlp_weight.transpose()).rowwise() + mlp_bias.transpose();
    NodeMatrix a = nn::apply(act.path, pre);
    out.w[x] = (a * queries.col(x)).mean();
    out.pre.push_back(std::move(pre));
    out.act.push_back(std::move(a));
  }
  out.beta = nn::softmax(out.w);
  out.fused = NodeMatrix::Zero(n, per_path.front().cols());
  for (Eigen::Index x = 0; x < X; ++x) out.fused += out.beta[x] * per_path[x];
  return out;
}

double score(const Eigen::VectorXd& h_u, const Eigen::VectorXd& h_i) {
  if (h_u.size() != h_i.size()) throw Error("score: dimension mismatch");
  return h_u.dot(h_i);
}

double bpr_loss(std::span<const double> pos, std::span<const double> neg) {
  if (pos.size() != neg.size()) throw Error("bpr_loss: score lists differ in length");
  if (pos.empty()) throw Error("bpr_loss: empty batch");
  double total = 0.0;
  for (std::size_t k = 0; k < pos.size(); ++k) total += nn::softplus(-(pos[k] - neg[k]));
  return total / static_cast<double>(pos.size());
}

// --- matrix factorization -----------------------------------------------------

namespace {

std::vector<std::vector<int>> positives_by_user(const InteractionSet& set) {
  std::vector<std::vector<int>> out(set.num_users);
  for (const auto& p : set.pairs) out[p.user].push_back(p.item);
  for (auto& items : out) std::sort(items.begin(), items.end());
  return out;
}

/// Uniform item outside `positives` (sorted); -1 when there is none.
int sample_negative(const std::vector<int>& positives, int num_items, Rng& rng) {
  if (static_cast<int>(positives.size()) >= num_items) return -1;
  std::uniform_int_distribution<int> pick(0, num_items - 1);
  for (;;) {
    int j = pick(rng);
    if (!std::binary_search(positives.begin(), positives.end(), j)) return j;
  }
}

}  // namespace

MfResult mf_pretrain(const InteractionSet& train, const MfConfig& config, Rng& rng) {
  if (train.pairs.empty()) throw Error("mf_pretrain: no interactions");
  MfResult out;
  std::normal_distribution<double> init(0.0, config.init_std);
  out.users = NodeMatrix::NullaryExpr(train.num_users, config.dim, [&] { return init(rng); });
  out.items = NodeMatrix::NullaryExpr(train.num_items, config.dim, [&] { return init(rng); });

  auto positives = positives_by_user(train);
  std::vector<int> item_degree(train.num_items, 0);
  for (const auto& p : train.pairs) ++item_degree[p.item];
  for (const auto& items : positives) out.cold_users += items.empty() ? 1 : 0;
  for (int deg : item_degree) out.cold_items += deg == 0 ? 1 : 0;

  std::vector<UserItem> order = train.pairs;
  auto pass = [&](bool update) {
    double total = 0.0;
    int count = 0;
    for (const auto& p : order) {
      int j = sample_negative(positives[p.user], train.num_items, rng);
      if (j < 0) continue;
      auto u = out.users.row(p.user);
      auto i = out.items.row(p.item);
      auto n = out.items.row(j);
      double x = u.dot(i - n);
      total += nn::softplus(-x);
      ++count;
      if (!update) continue;
      double g = nn::sigmoid(-x);
      Eigen::RowVectorXd u0 = u;
      u += config.lr * (g * (i - n) - config.reg * u0);
      i += config.lr * (g * u0 - config.reg * i);
      n += config.lr * (-g * u0 - config.reg * n);
    }
    return count ? total / count : 0.0;
  };

  out.epoch_loss.push_back(pass(false));
  for (int e = 0; e < config.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    out.epoch_loss.push_back(pass(true));
  }
  return out;
}

// --- subgraphs ----------------------------------------------------------------

std::shared_ptr<const SubgraphResult> SubgraphCache::get(const MetaPath& path) {
  std::vector<RelationId> key(path.relations().begin(), path.relations().end());
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  auto result = std::make_shared<const SubgraphResult>(materialize_subgraph(*graph_, path, threshold_));
  cache_.emplace(std::move(key), result);
  return result;
}

// --- parameters ---------------------------------------------------------------

std::vector<ParamRef> SideParams::refs() {
  return {ParamRef::of(embedding), ParamRef::of(projection), ParamRef::of(attention),
          ParamRef::of(mlp_weight), ParamRef::of(mlp_bias),  ParamRef::of(queries)};
}

SideParams SideParams::zeros_like() const {
  return {NodeMatrix::Zero(embedding.rows(), embedding.cols()),
          Eigen::MatrixXd::Zero(projection.rows(), projection.cols()),
          Eigen::MatrixXd::Zero(attention.rows(), attention.cols()),
          Eigen::MatrixXd::Zero(mlp_weight.rows(), mlp_weight.cols()),
          Eigen::VectorXd::Zero(mlp_bias.size()),
          Eigen::MatrixXd::Zero(queries.rows(), queries.cols())};
}

std::vector<ParamRef> HRecParams::refs() {
  auto out = user.refs();
  auto more = item.refs();
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

HRecParams HRecParams::zeros_like() const { return {user.zeros_like(), item.zeros_like()}; }

// --- model --------------------------------------------------------------------

namespace {

SideParams init_side(const NodeMatrix& embedding, int num_paths, const HRecConfig& config, Rng& rng) {
  const int d = config.dim;
  if (embedding.cols() != d)
    throw Error("embedding init has width " + std::to_string(embedding.cols()) + ", model expects " +
                std::to_string(d));
  SideParams p;
  p.embedding = embedding;
  p.projection = config.identity_projection ? Eigen::MatrixXd::Identity(d, d) : nn::glorot(d, d, rng);
  p.attention = nn::glorot(2 * d, num_paths, rng);
  p.mlp_weight = nn::glorot(config.att_hidden, d, rng);
  p.mlp_bias = Eigen::VectorXd::Zero(config.att_hidden);
  p.queries = nn::glorot(config.att_hidden, num_paths, rng);
  return p;
}

void collect(SubgraphCache& cache, const MetaPathSet& set, TypeId expected, MetaPathSet& kept,
             std::vector<std::shared_ptr<const MetaPathSubgraph>>& graphs,
             std::vector<std::pair<std::string, double>>& rejected) {
  const auto& schema = cache.graph().schema();
  for (const auto& path : set) {
    if (path.start_type() != expected) throw Error("path " + path_string(schema, path) + " starts on the wrong type");
    auto result = cache.get(path);
    if (const auto* r = std::get_if<Rejected>(result.get())) {
      rejected.emplace_back(path_string(schema, path), r->density);
      continue;
    }
    // Alias into the cached variant so the subgraph is shared, not copied.
    graphs.emplace_back(result, &std::get<MetaPathSubgraph>(*result));
    kept.insert(schema, path);
  }
  if (kept.empty()) {
    std::ostringstream msg;
    msg << "every " << to_string(set.form()) << " path was rejected by the density filter (t="
        << cache.threshold() << ")";
    for (const auto& [name, density] : rejected) msg << "; " << name << " density " << density;
    throw AllPathsRejected(msg.str());
  }
}

}  // namespace

HRecModel::HRecModel(SubgraphCache& cache, const MetaPathSet& user_set, const MetaPathSet& item_set,
                     const MfResult& init, const HRecConfig& config, Rng& rng)
    : config_(config), user_paths_(user_set.form()), item_paths_(item_set.form()) {
  const auto& schema = cache.graph().schema();
  if (user_set.form() != PathForm::UserSymmetric || item_set.form() != PathForm::ItemSymmetric)
    throw Error("HRec needs a user-symmetric and an item-symmetric path set");
  collect(cache, user_set, schema.user_type(), user_paths_, user_graphs_, rejected_);
  collect(cache, item_set, schema.item_type(), item_paths_, item_graphs_, rejected_);
  if (init.users.rows() != cache.graph().num_nodes(schema.user_type()) ||
      init.items.rows() != cache.graph().num_nodes(schema.item_type()))
    throw Error("embedding init does not match the graph's user/item counts");
  params_.user = init_side(init.users, static_cast<int>(user_paths_.size()), config_, rng);
  params_.item = init_side(init.items, static_cast<int>(item_paths_.size()), config_, rng);
}

NodeMatrix HRecModel::embed_side(const SideParams& p, const std::vector<std::shared_ptr<const MetaPathSubgraph>>& graphs,
                                 const ForwardMode& mode, SideTape* tape) const {
  const auto n = p.embedding.rows();
  const auto d = p.embedding.cols();
  NodeMatrix z = p.embedding * p.projection.transpose();
  NodeMatrix keep;
  if (mode.train && config_.dropout > 0.0) {
    if (!mode.rng) throw Error("dropout needs a random stream");
    std::bernoulli_distribution kept(1.0 - config_.dropout);
    const double scale = 1.0 / (1.0 - config_.dropout);
    keep = NodeMatrix::NullaryExpr(n, d, [&] { return kept(*mode.rng) ? scale : 0.0; });
    z = z.cwiseProduct(keep);
  }

  std::vector<NodeMatrix> per_path;
  std::vector<SideTape::Path> paths;
  for (const auto& g : graphs) {
    SideTape::Path path;
    path.offsets.reserve(n + 1);
    path.offsets.push_back(0);
    path.h.resize(n, d);
    for (int v = 0; v < n; ++v) {
      std::vector<int> nbrs;
      if (mode.fanout > 0 && g->degree(v) > mode.fanout) {
        if (!mode.rng) throw Error("neighbor sampling needs a random stream");
        nbrs = sample_neighbors(*g, v, mode.fanout, *mode.rng);
      } else {
        auto all = g->neighbors(v);
        nbrs.assign(all.begin(), all.end());
      }
      if (nbrs.empty()) nbrs.push_back(v);  // isolated in this subgraph
      NodeMatrix zn = z(nbrs, Eigen::all);
      auto att = node_attention(p.attention.col(static_cast<Eigen::Index>(paths.size())), z.row(v).transpose(), zn,
                                config_.act);
      path.h.row(v) = att.h.transpose();
      path.neighbors.insert(path.neighbors.end(), nbrs.begin(), nbrs.end());
      path.offsets.push_back(static_cast<std::int64_t>(path.neighbors.size()));
      if (tape) path.nodes.push_back(std::move(att));
    }
    per_path.push_back(path.h);
    paths.push_back(std::move(path));
  }
  auto fusion = path_attention(p.mlp_weight, p.mlp_bias, p.queries, per_path, config_.act);
  NodeMatrix fused = fusion.fused;
  if (tape) {
    tape->z = std::move(z);
    tape->keep = std::move(keep);
    tape->paths = std::move(paths);
    tape->fusion = std::move(fusion);
  }
  return fused;
}

std::pair<NodeMatrix, NodeMatrix> HRecModel::embed(const ForwardMode& mode, ForwardTape* tape) const {
  NodeMatrix users = embed_side(params_.user, user_graphs_, mode, tape ? &tape->user : nullptr);
  NodeMatrix items = embed_side(params_.item, item_graphs_, mode, tape ? &tape->item : nullptr);
  return {std::move(users), std::move(items)};
}

std::pair<NodeMatrix, NodeMatrix> HRecModel::embed() const {
  Rng rng(0);
  return embed({false, config_.eval_fanout, &rng});
}

HRecModel::Scores HRecModel::forward(std::span<const Triple> batch, const ForwardMode& mode, ForwardTape* tape,
                                     NodeMatrix* users_out, NodeMatrix* items_out) const {
  auto [users, items] = embed(mode, tape);
  Scores s;
  s.pos.reserve(batch.size());
  s.neg.reserve(batch.size());
  for (const auto& t : batch) {
    if (t.user < 0 || t.user >= users.rows() || t.pos < 0 || t.pos >= items.rows() || t.neg < 0 ||
        t.neg >= items.rows())
      throw Error("forward: triple index out of range");
    s.pos.push_back(users.row(t.user).dot(items.row(t.pos)));
    s.neg.push_back(users.row(t.user).dot(items.row(t.neg)));
  }
  if (users_out) *users_out = std::move(users);
  if (items_out) *items_out = std::move(items);
  return s;
}

void HRecModel::backward_side(const SideParams& p, const SideTape& tape, const NodeMatrix& d_fused,
                              SideParams& g) const {
  const auto n = p.embedding.rows();
  const auto d = p.embedding.cols();
  const auto& fusion = tape.fusion;
  const auto X = static_cast<Eigen::Index>(tape.paths.size());

  Eigen::VectorXd d_beta(X);
  for (Eigen::Index x = 0; x < X; ++x) d_beta[x] = d_fused.cwiseProduct(tape.paths[x].h).sum();
  Eigen::VectorXd d_w = nn::softmax_backward(fusion.beta, d_beta);

  NodeMatrix dz = NodeMatrix::Zero(n, d);
  for (Eigen::Index x = 0; x < X; ++x) {
    const auto& path = tape.paths[x];
    NodeMatrix d_h = fusion.beta[x] * d_fused;

    // w_x = mean_i q_x . act(H_x M^T + c)
    g.queries.col(x) += d_w[x] * fusion.act[x].colwise().mean().transpose();
    Eigen::RowVectorXd d_act_row = (d_w[x] / static_cast<double>(n)) * p.queries.col(x).transpose();
    NodeMatrix d_pre = nn::apply_grad(config_.act.path, fusion.pre[x]).array().rowwise() * d_act_row.array();
    g.mlp_weight += d_pre.transpose() * path.h;
    g.mlp_bias += d_pre.colwise().sum().transpose();
    d_h += d_pre * p.mlp_weight;

    auto a_src = p.attention.col(x).head(d);
    auto a_dst = p.attention.col(x).tail(d);
    Eigen::VectorXd g_src = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd g_dst = Eigen::VectorXd::Zero(d);
    for (Eigen::Index v = 0; v < n; ++v) {
      const auto& att = path.nodes[v];
      const auto begin = path.offsets[v];
      const auto k = static_cast<Eigen::Index>(path.offsets[v + 1] - begin);
      Eigen::VectorXd d_agg = d_h.row(v).transpose().cwiseProduct(nn::apply_grad(config_.act.aggregate, att.pre_agg));
      Eigen::VectorXd d_alpha(k);
      for (Eigen::Index j = 0; j < k; ++j) {
        int u = path.neighbors[begin + j];
        d_alpha[j] = tape.z.row(u).dot(d_agg);
        dz.row(u) += att.alpha[j] * d_agg.transpose();
      }
      Eigen::VectorXd d_score = nn::softmax_backward(att.alpha, d_alpha)
                                    .cwiseProduct(nn::apply_grad(config_.act.score, att.pre_score, config_.act.slope));
      const double total = d_score.sum();
      g_src += total * tape.z.row(v).transpose();
      dz.row(v) += total * a_src.transpose();
      for (Eigen::Index j = 0; j < k; ++j) {
        int u = path.neighbors[begin + j];
        g_dst += d_score[j] * tape.z.row(u).transpose();
        dz.row(u) += d_score[j] * a_dst.transpose();
      }
    }
    g.attention.col(x).head(d) += g_src;
    g.attention.col(x).tail(d) += g_dst;
  }

  if (tape.keep.size() > 0) dz = dz.cwiseProduct(tape.keep);
  // z = E W^T
  g.projection += dz.transpose() * p.embedding;
  g.embedding += dz * p.projection;
}

HRecParams HRecModel::backward(const ForwardTape& tape, std::span<const Triple> batch, const NodeMatrix& users,
                               const NodeMatrix& items, const Scores& scores) const {
  HRecParams g = params_.zeros_like();
  NodeMatrix d_users = NodeMatrix::Zero(users.rows(), users.cols());
  NodeMatrix d_items = NodeMatrix::Zero(items.rows(), items.cols());
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto& t = batch[k];
    // d/dx softplus(-x) = -sigmoid(-x), x = pos - neg
    const double c = -nn::sigmoid(-(scores.pos[k] - scores.neg[k])) * inv;
    d_users.row(t.user) += c * (items.row(t.pos) - items.row(t.neg));
    d_items.row(t.pos) += c * users.row(t.user);
    d_items.row(t.neg) -= c * users.row(t.user);
  }
  backward_side(params_.user, tape.user, d_users, g.user);
  backward_side(params_.item, tape.item, d_items, g.item);
  return g;
}

double HRecModel::loss_and_grad(std::span<const Triple> batch, const ForwardMode& mode, HRecParams* grad) const {
  ForwardTape tape;
  NodeMatrix users, items;
  auto scores = forward(batch, mode, grad ? &tape : nullptr, &users, &items);
  double loss = bpr_loss(scores.pos, scores.neg);
  if (grad && std::isfinite(loss)) *grad = backward(tape, batch, users, items, scores);
  return loss;
}

void HRecModel::save(TensorArchive& ar) const {
  auto put_side = [&](const std::string& prefix, const SideParams& p) {
    ar.put(prefix + ".embedding", Eigen::MatrixXd(p.embedding));
    ar.put(prefix + ".projection", p.projection);
    ar.put(prefix + ".attention", p.attention);
    ar.put(prefix + ".mlp_weight", p.mlp_weight);
    ar.put(prefix + ".mlp_bias", p.mlp_bias);
    ar.put(prefix + ".queries", p.queries);
  };
  ar.put_text("kind", "hrec-model");
  put_side("user", params_.user);
  put_side("item", params_.item);
}

void HRecModel::load(const TensorArchive& ar) {
  if (!ar.has_text("kind") || ar.text("kind") != "hrec-model") throw Error("not an HRec checkpoint");
  auto get_side = [&](const std::string& prefix, SideParams& p) {
    auto take = [&](const std::string& name, auto& dst) {
      const auto& m = ar.matrix(prefix + "." + name);
      if (m.rows() != dst.rows() || m.cols() != dst.cols())
        throw Error("checkpoint tensor " + prefix + "." + name + " has the wrong shape");
      dst = m;
    };
    take("embedding", p.embedding);
    take("projection", p.projection);
    take("attention", p.attention);
    take("mlp_weight", p.mlp_weight);
    take("mlp_bias", p.mlp_bias);
    take("queries", p.queries);
  };
  get_side("user", params_.user);
  get_side("item", params_.item);
}

// --- training -----------------------------------------------------------------

TrainResult train(HRecModel& model, const InteractionSet& train_set, const HRecConfig& config, Rng& rng,
                  const std::function<double(const HRecModel&)>& validate) {
  if (train_set.pairs.empty()) throw Error("train: no training interactions");
  if (config.batch_size <= 0) throw Error("train: batch size must be positive");
  auto positives = positives_by_user(train_set);
  auto optimizer = make_optimizer(config.optimizer, config.lr);
  std::vector<UserItem> order = train_set.pairs;

  TrainResult result;
  HRecParams best;
  int stale = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Triple> triples;
    triples.reserve(order.size());
    for (const auto& p : order) {
      int j = sample_negative(positives[p.user], train_set.num_items, rng);
      if (j >= 0) triples.push_back({p.user, p.item, j});
    }
    double total = 0.0;
    for (std::size_t begin = 0; begin < triples.size(); begin += config.batch_size) {
      std::span<const Triple> batch(triples.data() + begin,
                                    std::min<std::size_t>(config.batch_size, triples.size() - begin));
      HRecParams grad;
      double loss = model.loss_and_grad(batch, {true, config.fanout, &rng}, &grad);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "train: non-finite loss at epoch " << epoch << ", batch starting at triple " << begin << " (user "
            << batch.front().user << ", pos " << batch.front().pos << ", neg " << batch.front().neg << ")";
        throw Error(msg.str());
      }
      auto params = model.params().refs();
      auto grads = grad.refs();
      optimizer->step(params, grads);
      total += loss * static_cast<double>(batch.size());
    }
    EpochRecord record{epoch, triples.empty() ? 0.0 : total / static_cast<double>(triples.size()), std::nullopt};
    if (validate) {
      double v = validate(model);
      record.validation = v;
      if (result.best_epoch < 0 || v > result.best_validation) {
        result.best_epoch = epoch;
        result.best_validation = v;
        best = model.params();
        stale = 0;
      } else {
        ++stale;
      }
    }
    result.history.push_back(record);
    if (validate && config.patience > 0 && stale >= config.patience) break;
  }
  if (validate && result.best_epoch >= 0) model.params() = std::move(best);
  return result;
}

}  // namespace rms
