#pragma once

#include "hagcn/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hagcn {

struct SplitRatio {
  double train = 7.0;
  double val = 1.5;
  double test = 1.5;
};

struct SplitMasks {
  Mask train;
  Mask val;
  Mask test;
};

/// Random disjoint train/val/test masks over n items. val and test receive
/// floor(n·r/Σr) items (at least one each); train receives the remainder.
SplitMasks split_nodes(int n, const SplitRatio& ratio, std::uint64_t seed);

struct NodeDataset {
  Graph graph;
  Matrix features;
  std::vector<int> labels;
  SplitMasks masks;

  int num_nodes() const { return graph.num_nodes(); }
  int num_classes() const;
  /// Throws std::invalid_argument on inconsistent sizes, negative labels or overlapping masks.
  void validate() const;
};

struct MetricsRow {
  int epoch = 0;
  double loss = 0.0;
  double train = 0.0;
  double val = 0.0;
  double test = 0.0;
};

using MetricsHistory = std::vector<MetricsRow>;

struct NodeRun {
  Model model;
  MetricsHistory history;
};

/// Masked cross-entropy training on the train mask; accuracies are evaluated
/// after every epoch. The last fc layer is widened to the class count.
NodeRun train_node_classifier(const NodeDataset& data, std::string_view arch, const TrainingConfig& config);

/// Evaluation-mode logits for every node.
Matrix node_logits(Model& model, const NodeDataset& data);

struct GraphItem {
  Graph graph;
  Matrix features;
  double target = 0.0;
};

/// Graphs of possibly different sizes, each zero-padded to a common capacity.
class GraphDatasetCollection {
 public:
  GraphDatasetCollection() = default;
  /// n_max defaults to the largest graph.
  explicit GraphDatasetCollection(std::vector<GraphItem> items, std::optional<int> n_max = std::nullopt);

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  int n_max() const { return n_max_; }
  int feature_width() const { return feature_width_; }
  const std::vector<GraphItem>& items() const { return items_; }
  const GraphItem& item(std::size_t i) const { return items_.at(i); }
  const PaddedGraph& padded(std::size_t i) const { return padded_.at(i); }
  /// Replaces padded features, e.g. to perturb pad rows.
  void set_padded_features(std::size_t i, Matrix features);

 private:
  std::vector<GraphItem> items_;
  std::vector<PaddedGraph> padded_;
  int n_max_ = 0;
  int feature_width_ = 0;
};

/// Train/val/test masks over graphs; with fewer than three graphs every graph trains.
SplitMasks split_graphs(std::size_t count, const SplitRatio& ratio, std::uint64_t seed);

/// Node-wise layers, masked mean over valid rows before the last fc layer, then the head.
Var graph_readout_forward(Model& model, Tape& tape, const ClippedPowers& powers, const PaddedGraph& graph,
                          const ForwardOptions& options = {});

struct GraphRun {
  Model model;
  MetricsHistory history;
  SplitMasks split;
  /// RMSE of predicting the mean training target on the training graphs.
  double baseline_rmse = 0.0;
};

/// Mini-batched MSE regression; history holds train/val/test RMSE per epoch
/// (NaN for an empty split).
GraphRun train_graph_regressor(const GraphDatasetCollection& data, std::string_view arch,
                               const TrainingConfig& config, const SplitRatio& ratio = {});

/// Evaluation-mode scalar predictions for every graph.
std::vector<double> predict_graphs(Model& model, const GraphDatasetCollection& data);

// Variational auto-encoder

struct VaeOptions {
  std::string encoder_arch = "gcn_{1,2,3}-ReLU-fc64-ReLU-fc16";
  /// Hidden stack between the latent code and the node-embedding projection.
  std::string decoder_arch = "fc16-fc64-ReLU";
  int latent_dim = 16;
  int embed_dim = 16;
};

class VaeModel {
 public:
  struct Encoding {
    Var mu;
    Var log_var;
  };

  static VaeModel build(int n_max, int m, const VaeOptions& options, GateVariant gate_variant, std::uint64_t seed);

  /// Per-graph latent statistics from the mean-pooled encoder output, each 1×latent_dim.
  Encoding encode(Tape& tape, const ClippedPowers& powers, const PaddedGraph& graph,
                  const ForwardOptions& options = {});
  /// Edge probabilities sigmoid(H Hᵀ) with H the n_max×embed_dim node embedding of z.
  Var decode(Tape& tape, Var z, const ForwardOptions& options = {});
  Matrix decode(const Matrix& z);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::vector<int> orders() const { return encoder_.orders(); }
  int n_max() const { return n_max_; }
  int latent_dim() const { return options_.latent_dim; }
  const VaeOptions& options() const { return options_; }
  Model& encoder() { return encoder_; }
  Model& decoder() { return decoder_; }

  nlohmann::json to_json() const;
  static VaeModel from_json(const nlohmann::json& j);

 private:
  VaeOptions options_;
  int n_max_ = 0;
  Model encoder_;
  DenseLayer mu_head_;
  DenseLayer log_var_head_;
  Model decoder_;
};

struct VaeLoss {
  Var total;
  Var reconstruction;
  Var kl;
};

/// Summed binary cross-entropy over entries where pair_mask is non-zero plus
/// the Gaussian KL term.
VaeLoss vae_loss(Var probabilities, const Matrix& target, Var mu, Var log_var, const Matrix& pair_mask);
/// Same, over every adjacency entry.
VaeLoss vae_loss(Var probabilities, const Matrix& target, Var mu, Var log_var);

/// 1 for off-diagonal pairs of valid nodes.
Matrix valid_pair_mask(const Mask& mask);

struct VaeRun {
  VaeModel model;
  /// loss = mean training loss; train/val/test = reconstruction AUC per split.
  MetricsHistory history;
  std::vector<double> kl_per_step;
  SplitMasks split;
};

VaeRun train_vae(const GraphDatasetCollection& data, const TrainingConfig& config, const VaeOptions& options = {},
                 const SplitRatio& ratio = {});

/// Thresholds, symmetrizes, strips self-loops and drops isolated trailing nodes.
Graph graph_from_probabilities(const Matrix& probabilities, double threshold = 0.5);

std::vector<Graph> sample_graphs(VaeModel& model, int count, std::uint64_t seed, double threshold = 0.5);

/// Mann-Whitney area under the ROC curve; ties count one half.
double roc_auc(std::span<const double> positives, std::span<const double> negatives);

/// AUC of decoded edge probabilities (z = mu) for true edges against all valid
/// non-edges, pooled over the selected graphs. Graphs lacking edges or
/// non-edges are skipped; throws if all are.
double reconstruction_auc(VaeModel& model, const GraphDatasetCollection& data,
                          const std::vector<std::size_t>& indices);
double reconstruction_auc(VaeModel& model, const GraphDatasetCollection& data);

std::vector<std::size_t> mask_indices(const Mask& mask);

}  // namespace hagcn
