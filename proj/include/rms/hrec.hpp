#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rms/metapath.hpp"
#include "rms/nn.hpp"
#include "rms/optim.hpp"

namespace rms {

// --- building blocks ----------------------------------------------------------

/// z = W x. Throws on a shape mismatch.
Eigen::VectorXd project(const Eigen::MatrixXd& W, const Eigen::VectorXd& x);

struct AttentionActivations {
  nn::Activation score = nn::Activation::LeakyRelu;
  double slope = 0.2;
  nn::Activation aggregate = nn::Activation::Elu;
  nn::Activation path = nn::Activation::Tanh;
};

struct NodeAttention {
  Eigen::VectorXd pre_score;  // a^T [z_i | z_j] per neighbor
  Eigen::VectorXd alpha;      // softmax of the activated scores
  Eigen::VectorXd pre_agg;    // sum_j alpha_j z_j
  Eigen::VectorXd h;          // activated aggregate
};

/// Attention of node i over its neighbor rows. `a` has length 2d: the first
/// half scores z_i, the second half z_j. Throws on an empty neighbor list.
NodeAttention node_attention(const Eigen::VectorXd& a, const Eigen::VectorXd& z_i, const NodeMatrix& neighbors,
                             const AttentionActivations& act = {});

struct PathAttention {
  Eigen::VectorXd w;     // per-path importance
  Eigen::VectorXd beta;  // softmax(w)
  NodeMatrix fused;      // sum_x beta_x H_x
  std::vector<NodeMatrix> pre;  // H_x M^T + c, per path
  std::vector<NodeMatrix> act;  // activated pre
};

/// mlp_weight is hidden x d, queries is hidden x X (one column per path).
PathAttention path_attention(const Eigen::MatrixXd& mlp_weight, const Eigen::VectorXd& mlp_bias,
                             const Eigen::MatrixXd& queries, const std::vector<NodeMatrix>& per_path,
                             const AttentionActivations& act = {});

double score(const Eigen::VectorXd& h_u, const Eigen::VectorXd& h_i);

/// mean of -ln sigmoid(pos - neg).
double bpr_loss(std::span<const double> pos, std::span<const double> neg);

// --- matrix factorization init --------------------------------------------------

struct MfConfig {
  int dim = 64;
  int epochs = 50;
  double lr = 0.05;
  double reg = 1e-4;
  double init_std = 0.1;
};

struct MfResult {
  NodeMatrix users;  // num_users x dim
  NodeMatrix items;  // num_items x dim
  /// epoch_loss[0] is the loss at initialization, epoch_loss[e] the mean loss seen during epoch e.
  std::vector<double> epoch_loss;
  int cold_users = 0;  // rows that kept their random init
  int cold_items = 0;
};

/// BPR matrix factorization with plain SGD.
MfResult mf_pretrain(const InteractionSet& train, const MfConfig& config, Rng& rng);

// --- subgraphs ----------------------------------------------------------------

/// Materialized subgraphs keyed by path, shared across models built on one graph.
class SubgraphCache {
 public:
  SubgraphCache(const HinGraph& graph, double density_threshold)
      : graph_(&graph), threshold_(density_threshold) {}

  std::shared_ptr<const SubgraphResult> get(const MetaPath& path);
  const HinGraph& graph() const { return *graph_; }
  double threshold() const { return threshold_; }
  std::size_t size() const { return cache_.size(); }

 private:
  const HinGraph* graph_;
  double threshold_;
  std::map<std::vector<RelationId>, std::shared_ptr<const SubgraphResult>> cache_;
};

/// Every path of a set was rejected by the density filter.
class AllPathsRejected : public Error {
 public:
  using Error::Error;
};

// --- model --------------------------------------------------------------------

struct HRecConfig {
  int dim = 64;
  int att_hidden = 32;
  double dropout = 0.1;
  double lr = 0.01;
  std::string optimizer = "adam";
  int batch_size = 1024;
  int epochs = 30;
  int patience = 3;
  int fanout = 20;       // training neighbor sample size; <= 0 keeps all
  int eval_fanout = 0;   // inference neighbor sample size; <= 0 keeps all
  double density_threshold = 0.5;
  AttentionActivations act;
  bool identity_projection = true;
};

/// Parameters of one side (users or items).
struct SideParams {
  NodeMatrix embedding;      // nodes x d
  Eigen::MatrixXd projection;  // d x d
  Eigen::MatrixXd attention;   // 2d x X, one column per path
  Eigen::MatrixXd mlp_weight;  // hidden x d
  Eigen::VectorXd mlp_bias;    // hidden
  Eigen::MatrixXd queries;     // hidden x X

  std::vector<ParamRef> refs();
  SideParams zeros_like() const;
};

struct HRecParams {
  SideParams user;
  SideParams item;

  std::vector<ParamRef> refs();
  HRecParams zeros_like() const;
};

struct Triple {
  int user = 0;
  int pos = 0;
  int neg = 0;
};

struct SideTape {
  NodeMatrix z;       // projected embeddings after dropout
  NodeMatrix keep;    // inverted-dropout scale; empty when dropout is off
  struct Path {
    std::vector<std::int64_t> offsets;
    std::vector<int> neighbors;
    std::vector<NodeAttention> nodes;
    NodeMatrix h;
  };
  std::vector<Path> paths;
  PathAttention fusion;
};

struct ForwardTape {
  SideTape user;
  SideTape item;
};

struct ForwardMode {
  bool train = false;
  int fanout = 0;
  Rng* rng = nullptr;  // required when sampling or dropout are active
};

class HRecModel {
 public:
  /// Builds subgraphs through `cache`, drops density-rejected paths, and
  /// initializes embeddings from `init`. Throws AllPathsRejected when a side
  /// has no usable path.
  HRecModel(SubgraphCache& cache, const MetaPathSet& user_set, const MetaPathSet& item_set, const MfResult& init,
            const HRecConfig& config, Rng& rng);

  const HRecConfig& config() const { return config_; }
  HRecParams& params() { return params_; }
  const HRecParams& params() const { return params_; }
  const MetaPathSet& user_paths() const { return user_paths_; }
  const MetaPathSet& item_paths() const { return item_paths_; }
  /// Paths dropped by the density filter, with their densities.
  const std::vector<std::pair<std::string, double>>& rejected() const { return rejected_; }
  int num_users() const { return static_cast<int>(params_.user.embedding.rows()); }
  int num_items() const { return static_cast<int>(params_.item.embedding.rows()); }

  /// Fused user and item embeddings for the whole graph.
  std::pair<NodeMatrix, NodeMatrix> embed(const ForwardMode& mode, ForwardTape* tape = nullptr) const;
  /// Inference embeddings (no dropout, eval_fanout).
  std::pair<NodeMatrix, NodeMatrix> embed() const;

  struct Scores {
    std::vector<double> pos;
    std::vector<double> neg;
  };
  Scores forward(std::span<const Triple> batch, const ForwardMode& mode, ForwardTape* tape,
                 NodeMatrix* users = nullptr, NodeMatrix* items = nullptr) const;

  /// Gradient of bpr_loss over the batch.
  HRecParams backward(const ForwardTape& tape, std::span<const Triple> batch, const NodeMatrix& users,
                      const NodeMatrix& items, const Scores& scores) const;

  /// bpr_loss and its gradient in one call.
  double loss_and_grad(std::span<const Triple> batch, const ForwardMode& mode, HRecParams* grad) const;

  void save(TensorArchive& ar) const;
  void load(const TensorArchive& ar);

 private:
  NodeMatrix embed_side(const SideParams& p, const std::vector<std::shared_ptr<const MetaPathSubgraph>>& graphs,
                        const ForwardMode& mode, SideTape* tape) const;
  void backward_side(const SideParams& p, const SideTape& tape, const NodeMatrix& d_fused, SideParams& g) const;

  HRecConfig config_;
  MetaPathSet user_paths_;
  MetaPathSet item_paths_;
  std::vector<std::shared_ptr<const MetaPathSubgraph>> user_graphs_;
  std::vector<std::shared_ptr<const MetaPathSubgraph>> item_graphs_;
  std::vector<std::pair<std::string, double>> rejected_;
  HRecParams params_;
};

// --- training -----------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> validation;  // NDCG@10 on the validation split
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_validation = 0.0;
};

/// Epoch loop of BPR minibatches with per-epoch negative resampling over items
/// the user has no training interaction with. When `validate` is given it runs
/// after every epoch; training stops after `patience` epochs without
/// improvement and the best parameters are restored.
TrainResult train(HRecModel& model, const InteractionSet& train_set, const HRecConfig& config, Rng& rng,
                  const std::function<double(const HRecModel&)>& validate = {});

}  // namespace rms
