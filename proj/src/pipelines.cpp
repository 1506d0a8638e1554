#include "hagcn/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace hagcn {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Salts separating the random streams drawn from one run seed.
constexpr std::uint64_t kShuffleStream = 0x5348;
constexpr std::uint64_t kNoiseStream = 0x4e4f;
constexpr std::uint64_t kHeadStream = 0x4844;
constexpr std::uint64_t kDecoderStream = 0x4445;

ForwardOptions training_pass(double dropout_rate, std::uint64_t seed) {
  ForwardOptions opts;
  opts.training = true;
  opts.dropout_rate = dropout_rate;
  opts.seed = seed;
  return opts;
}

bool any(const Mask& mask) {
  return std::any_of(mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; });
}

double accuracy_or_nan(const Matrix& logits, std::span<const int> labels, const Mask& mask) {
  return any(mask) ? accuracy(logits, labels, mask) : kNaN;
}

std::vector<ClippedPowers> powers_for(const GraphDatasetCollection& data, const std::vector<int>& orders) {
  std::vector<ClippedPowers> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.emplace_back(data.padded(i).adjacency, orders);
  return out;
}

void check_readout(const Model& model) {
  const auto idx = model.last_dense_index();
  if (!idx) throw BuildError("graph model: architecture needs an fc layer after the readout");
  for (std::size_t i = *idx + 1; i < model.size(); ++i) {
    const Layer& layer = model.layers()[i];
    if (!std::holds_alternative<ReluLayer>(layer) && !std::holds_alternative<SoftmaxLayer>(layer)) {
      throw BuildError("graph model: layer " + std::to_string(i) + " follows the readout but is not elementwise");
    }
  }
}

std::vector<double> predict_with(Model& model, const GraphDatasetCollection& data,
                                 const std::vector<ClippedPowers>& powers) {
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Tape tape;
    out[i] = graph_readout_forward(model, tape, powers[i], data.padded(i)).scalar();
  }
  return out;
}

double split_rmse(const std::vector<double>& preds, const GraphDatasetCollection& data, const Mask& mask) {
  std::vector<double> p, t;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == 0) continue;
    p.push_back(preds[i]);
    t.push_back(data.item(i).target);
  }
  return p.empty() ? kNaN : rmse(p, t);
}

template <typename BatchLoss>
double run_epoch(std::vector<std::size_t>& order, std::mt19937_64& rng, int batch_size,
                 std::span<Parameter* const> params, const TrainingConfig& config, Optimizer& optimizer,
                 BatchLoss&& batch_loss) {
  std::shuffle(order.begin(), order.end(), rng);
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    const std::span<const std::size_t> batch(order.data() + start, stop - start);
    const double loss = train_step(params, [&](Tape& t) { return batch_loss(t, batch); }, config, optimizer);
    total += loss * static_cast<double>(batch.size());
  }
  return total / static_cast<double>(order.size());
}

struct EdgeScores {
  std::vector<double> positives;
  std::vector<double> negatives;
};

EdgeScores score_pairs(const Matrix& probs, const PaddedGraph& g) {
  EdgeScores s;
  for (int i = 0; i < g.valid_count; ++i) {
    for (int j = i + 1; j < g.valid_count; ++j) {
      (g.adjacency(i, j) != 0.0 ? s.positives : s.negatives).push_back(probs(i, j));
    }
  }
  return s;
}

std::optional<double> pooled_auc(VaeModel& model, const GraphDatasetCollection& data,
                                 const std::vector<ClippedPowers>& powers, const std::vector<std::size_t>& indices) {
  EdgeScores pooled;
  for (std::size_t i : indices) {
    Tape tape;
    const auto enc = model.encode(tape, powers.at(i), data.padded(i));
    const Matrix probs = model.decode(tape, enc.mu).value();
    EdgeScores s = score_pairs(probs, data.padded(i));
    if (s.positives.empty() || s.negatives.empty()) continue;
    pooled.positives.insert(pooled.positives.end(), s.positives.begin(), s.positives.end());
    pooled.negatives.insert(pooled.negatives.end(), s.negatives.begin(), s.negatives.end());
  }
  if (pooled.positives.empty()) return std::nullopt;
  return roc_auc(pooled.positives, pooled.negatives);
}

}  // namespace

SplitMasks split_nodes(int n, const SplitRatio& ratio, std::uint64_t seed) {
  if (n < 3) throw std::invalid_argument("split_nodes: need at least 3 items, got " + std::to_string(n));
  for (double r : {ratio.train, ratio.val, ratio.test}) {
    if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("split_nodes: ratio components must be positive");
  }
  const double total = ratio.train + ratio.val + ratio.test;
  const int n_val = std::max(1, static_cast<int>(std::floor(n * ratio.val / total)));
  const int n_test = std::max(1, static_cast<int>(std::floor(n * ratio.test / total)));
  const int n_train = n - n_val - n_test;

  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  SplitMasks masks{Mask(n, 0), Mask(n, 0), Mask(n, 0)};
  for (int r = 0; r < n; ++r) {
    Mask& target = r < n_train ? masks.train : (r < n_train + n_val ? masks.val : masks.test);
    target[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])] = 1;
  }
  return masks;
}

std::vector<std::size_t> mask_indices(const Mask& mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0) out.push_back(i);
  }
  return out;
}

int NodeDataset::num_classes() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

void NodeDataset::validate() const {
  const auto n = static_cast<std::size_t>(num_nodes());
  if (features.rows() != num_nodes()) {
    throw std::invalid_argument("node dataset: " + std::to_string(features.rows()) + " feature rows for " +
                                std::to_string(n) + " nodes");
  }
  if (features.cols() < 1) throw std::invalid_argument("node dataset: features need at least one column");
  if (labels.size() != n) {
    throw std::invalid_argument("node dataset: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(n) + " nodes");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0) throw std::invalid_argument("node dataset: label " + std::to_string(i) + " is negative");
  }
  for (const Mask* m : {&masks.train, &masks.val, &masks.test}) {
    if (m->size() != n) throw std::invalid_argument("node dataset: mask length differs from node count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (masks.train[i] + masks.val[i] + masks.test[i] > 1) {
      throw std::invalid_argument("node dataset: node " + std::to_string(i) + " is in more than one split");
    }
  }
  if (!any(masks.train)) throw std::invalid_argument("node dataset: training mask is empty");
}

Matrix node_logits(Model& model, const NodeDataset& data) {
  const ClippedPowers powers(adjacency_from_graph(data.graph), model.orders());
  Tape tape;
  return model.forward(tape, powers, tape.constant(data.features)).value();
}

NodeRun train_node_classifier(const NodeDataset& data, std::string_view arch, const TrainingConfig& config) {
  config.validate();
  data.validate();
  BuildOptions build{config.gate_variant, data.num_classes(), config.seed};
  NodeRun run{Model::build(parse_architecture(arch), data.num_nodes(), static_cast<int>(data.features.cols()), build),
              {}};
  Model& model = run.model;
  const ClippedPowers powers(adjacency_from_graph(data.graph), model.orders());
  Optimizer optimizer(config);
  const auto params = model.parameters();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double loss = train_step(
        params,
        [&](Tape& t) {
          const auto fwd = training_pass(config.dropout_rate, mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
          return cross_entropy_loss(model.forward(t, powers, t.constant(data.features), fwd), data.labels,
                                    data.masks.train);
        },
        config, optimizer);
    Tape tape;
    const Matrix logits = model.forward(tape, powers, tape.constant(data.features)).value();
    run.history.push_back({epoch, loss, accuracy_or_nan(logits, data.labels, data.masks.train),
                           accuracy_or_nan(logits, data.labels, data.masks.val),
                           accuracy_or_nan(logits, data.labels, data.masks.test)});
  }
  return run;
}

GraphDatasetCollection::GraphDatasetCollection(std::vector<GraphItem> items, std::optional<int> n_max)
    : items_(std::move(items)) {
  int largest = 0;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const GraphItem& item = items_[i];
    const std::string where = "graphs[" + std::to_string(i) + "]";
    if (item.graph.num_nodes() < 1) throw std::invalid_argument(where + ": graph has no nodes");
    if (item.features.rows() != item.graph.num_nodes()) {
      throw ShapeError(where + ": " + std::to_string(item.features.rows()) + " feature rows for " +
                       std::to_string(item.graph.num_nodes()) + " nodes");
    }
    if (i == 0) feature_width_ = static_cast<int>(item.features.cols());
    if (item.features.cols() != feature_width_) {
      throw ShapeError(where + ": feature width " + std::to_string(item.features.cols()) + ", expected " +
                       std::to_string(feature_width_));
    }
    if (!std::isfinite(item.target)) throw std::invalid_argument(where + ": target is not finite");
    largest = std::max(largest, item.graph.num_nodes());
  }
  n_max_ = n_max.value_or(largest);
  padded_.reserve(items_.size());
  for (const GraphItem& item : items_) padded_.push_back(pad_graph(item.graph, item.features, n_max_));
}

void GraphDatasetCollection::set_padded_features(std::size_t i, Matrix features) {
  PaddedGraph& g = padded_.at(i);
  if (features.rows() != g.features.rows() || features.cols() != g.features.cols()) {
    throw ShapeError("set_padded_features: expected " + shape_string(g.features) + ", got " + shape_string(features));
  }
  g.features = std::move(features);
}

SplitMasks split_graphs(std::size_t count, const SplitRatio& ratio, std::uint64_t seed) {
  if (count < 3) return {Mask(count, 1), Mask(count, 0), Mask(count, 0)};
  return split_nodes(static_cast<int>(count), ratio, seed);
}

Var graph_readout_forward(Model& model, Tape& tape, const ClippedPowers& powers, const PaddedGraph& graph,
                          const ForwardOptions& options) {
  const auto idx = model.last_dense_index();
  if (!idx) throw BuildError("graph model: architecture needs an fc layer after the readout");
  Var h = model.forward_range(tape, &powers, tape.constant(graph.features), 0, *idx, options);
  h = masked_mean_rows(h, graph.mask);
  return model.forward_range(tape, nullptr, h, *idx, model.size(), options);
}

std::vector<double> predict_graphs(Model& model, const GraphDatasetCollection& data) {
  return predict_with(model, data, powers_for(data, model.orders()));
}

GraphRun train_graph_regressor(const GraphDatasetCollection& data, std::string_view arch,
                               const TrainingConfig& config, const SplitRatio& ratio) {
  config.validate();
  if (data.size() < 2) throw std::invalid_argument("train_graph_regressor: need at least 2 graphs");
  BuildOptions build{config.gate_variant, 1, config.seed};
  GraphRun run{Model::build(parse_architecture(arch), data.n_max(), data.feature_width(), build), {},
               split_graphs(data.size(), ratio, config.seed), 0.0};
  Model& model = run.model;
  check_readout(model);
  const auto powers = powers_for(data, model.orders());

  std::vector<std::size_t> order = mask_indices(run.split.train);
  double mean = 0.0;
  for (std::size_t i : order) mean += data.item(i).target;
  mean /= static_cast<double>(order.size());
  double sq = 0.0;
  for (std::size_t i : order) sq += (data.item(i).target - mean) * (data.item(i).target - mean);
  run.baseline_rmse = std::sqrt(sq / static_cast<double>(order.size()));

  Optimizer optimizer(config);
  const auto params = model.parameters();
  std::mt19937_64 rng(mix_seed(config.seed, kShuffleStream));
  const Mask single{1};

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double loss = run_epoch(order, rng, config.batch_size, params, config, optimizer,
                                  [&](Tape& t, std::span<const std::size_t> batch) {
                                    Var total;
                                    for (std::size_t b = 0; b < batch.size(); ++b) {
                                      const std::size_t g = batch[b];
                                      const auto fwd = training_pass(config.dropout_rate, mix_seed(config.seed, epoch, g));
                                      const Var pred = graph_readout_forward(model, t, powers[g], data.padded(g), fwd);
                                      const Var err =
                                          mse_loss(pred, Matrix::Constant(1, 1, data.item(g).target), single);
                                      total = b == 0 ? err : add(total, err);
                                    }
                                    return scale(total, 1.0 / static_cast<double>(batch.size()));
                                  });
    const auto preds = predict_with(model, data, powers);
    run.history.push_back({epoch, loss, split_rmse(preds, data, run.split.train),
                           split_rmse(preds, data, run.split.val), split_rmse(preds, data, run.split.test)});
  }
  return run;
}

// Variational auto-encoder

VaeModel VaeModel::build(int n_max, int m, const VaeOptions& options, GateVariant gate_variant, std::uint64_t seed) {
  if (options.latent_dim < 1 || options.embed_dim < 1) throw BuildError("vae: latent and embedding widths must be positive");
  VaeModel vae;
  vae.options_ = options;
  vae.n_max_ = n_max;
  vae.encoder_ = Model::build(parse_architecture(options.encoder_arch), n_max, m, {gate_variant, std::nullopt, seed});

  std::mt19937_64 rng(mix_seed(seed, kHeadStream));
  const int pooled = vae.encoder_.output_width();
  vae.mu_head_ = DenseLayer::create(pooled, options.latent_dim, rng, "vae.mu");
  vae.log_var_head_ = DenseLayer::create(pooled, options.latent_dim, rng, "vae.log_var");

  ArchitectureSpec decoder = parse_architecture(options.decoder_arch);
  for (const LayerDesc& desc : decoder.layers) {
    if (!std::holds_alternative<FcDesc>(desc) && !std::holds_alternative<ReluDesc>(desc)) {
      throw BuildError("vae: decoder stack may only contain fc and ReLU layers");
    }
  }
  decoder.layers.emplace_back(FcDesc{n_max * options.embed_dim});
  vae.decoder_ = Model::build(decoder, 1, options.latent_dim, {gate_variant, std::nullopt, mix_seed(seed, kDecoderStream)});
  return vae;
}

VaeModel::Encoding VaeModel::encode(Tape& tape, const ClippedPowers& powers, const PaddedGraph& graph,
                                    const ForwardOptions& options) {
  const Var h = encoder_.forward(tape, powers, tape.constant(graph.features), options);
  const Var pooled = masked_mean_rows(h, graph.mask);
  return {mu_head_.forward(pooled), log_var_head_.forward(pooled)};
}

Var VaeModel::decode(Tape& tape, Var z, const ForwardOptions& options) {
  ForwardOptions opts = options;
  opts.seed = mix_seed(options.seed, kDecoderStream);
  const Var flat = decoder_.forward_range(tape, nullptr, z, 0, decoder_.size(), opts);
  return dconv_decode(reshape(flat, n_max_, options_.embed_dim));
}

Matrix VaeModel::decode(const Matrix& z) {
  Tape tape;
  return decode(tape, tape.constant(z)).value();
}

std::vector<Parameter*> VaeModel::parameters() {
  std::vector<Parameter*> out = encoder_.parameters();
  for (Parameter* p : {&mu_head_.weight, &mu_head_.bias, &log_var_head_.weight, &log_var_head_.bias}) out.push_back(p);
  for (Parameter* p : decoder_.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> VaeModel::parameters() const {
  std::vector<const Parameter*> out = encoder_.parameters();
  for (const Parameter* p : {&mu_head_.weight, &mu_head_.bias, &log_var_head_.weight, &log_var_head_.bias}) {
    out.push_back(p);
  }
  for (const Parameter* p : decoder_.parameters()) out.push_back(p);
  return out;
}

nlohmann::json VaeModel::to_json() const {
  nlohmann::json heads = nlohmann::json::array();
  for (const Parameter* p : {&mu_head_.weight, &mu_head_.bias, &log_var_head_.weight, &log_var_head_.bias}) {
    heads.push_back(parameter_to_json(*p));
  }
  return {{"encoder_arch", options_.encoder_arch},
          {"decoder_arch", options_.decoder_arch},
          {"latent_dim", options_.latent_dim},
          {"embed_dim", options_.embed_dim},
          {"n_max", n_max_},
          {"encoder", encoder_.to_json()},
          {"heads", std::move(heads)},
          {"decoder", decoder_.to_json()}};
}

VaeModel VaeModel::from_json(const nlohmann::json& j) {
  VaeModel vae;
  vae.options_.encoder_arch = j.at("encoder_arch").get<std::string>();
  vae.options_.decoder_arch = j.at("decoder_arch").get<std::string>();
  vae.options_.latent_dim = j.at("latent_dim").get<int>();
  vae.options_.embed_dim = j.at("embed_dim").get<int>();
  vae.n_max_ = j.at("n_max").get<int>();
  vae.encoder_ = Model::from_json(j.at("encoder"));
  vae.decoder_ = Model::from_json(j.at("decoder"));
  if (vae.decoder_.input_width() != vae.options_.latent_dim ||
      vae.decoder_.output_width() != vae.n_max_ * vae.options_.embed_dim) {
    throw std::runtime_error("checkpoint: decoder widths disagree with latent_dim/embed_dim/n_max");
  }
  std::mt19937_64 rng(0);
  const int pooled = vae.encoder_.output_width();
  vae.mu_head_ = DenseLayer::create(pooled, vae.options_.latent_dim, rng, "vae.mu");
  vae.log_var_head_ = DenseLayer::create(pooled, vae.options_.latent_dim, rng, "vae.log_var");
  const auto& heads = j.at("heads");
  if (heads.size() != 4) throw std::runtime_error("checkpoint: expected 4 head parameters");
  Parameter* targets[] = {&vae.mu_head_.weight, &vae.mu_head_.bias, &vae.log_var_head_.weight,
                          &vae.log_var_head_.bias};
  for (std::size_t i = 0; i < 4; ++i) parameter_from_json(heads[i], *targets[i]);
  return vae;
}

Matrix valid_pair_mask(const Mask& mask) {
  const auto n = static_cast<Eigen::Index>(mask.size());
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && mask[i] != 0 && mask[j] != 0) out(i, j) = 1.0;
    }
  }
  return out;
}

VaeLoss vae_loss(Var probabilities, const Matrix& target, Var mu, Var log_var, const Matrix& pair_mask) {
  const Var reconstruction = binary_cross_entropy(probabilities, target, pair_mask);
  const Var kl = gaussian_kl(mu, log_var);
  return {add(reconstruction, kl), reconstruction, kl};
}

VaeLoss vae_loss(Var probabilities, const Matrix& target, Var mu, Var log_var) {
  return vae_loss(probabilities, target, mu, log_var, Matrix::Ones(target.rows(), target.cols()));
}

VaeRun train_vae(const GraphDatasetCollection& data, const TrainingConfig& config, const VaeOptions& options,
                 const SplitRatio& ratio) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("train_vae: dataset is empty");
  VaeRun run{VaeModel::build(data.n_max(), data.feature_width(), options, config.gate_variant, config.seed), {}, {},
             split_graphs(data.size(), ratio, config.seed)};
  VaeModel& model = run.model;
  const auto powers = powers_for(data, model.orders());
  std::vector<Matrix> pair_masks;
  for (std::size_t i = 0; i < data.size(); ++i) pair_masks.push_back(valid_pair_mask(data.padded(i).mask));

  Optimizer optimizer(config);
  const auto params = model.parameters();
  std::mt19937_64 rng(mix_seed(config.seed, kShuffleStream));
  std::vector<std::size_t> order = mask_indices(run.split.train);
  const std::vector<std::size_t> val = mask_indices(run.split.val);
  const std::vector<std::size_t> test = mask_indices(run.split.test);
  auto auc_or_nan = [&](const std::vector<std::size_t>& idx) {
    return idx.empty() ? kNaN : pooled_auc(model, data, powers, idx).value_or(kNaN);
  };

  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double loss = run_epoch(
        order, rng, config.batch_size, params, config, optimizer, [&](Tape& t, std::span<const std::size_t> batch) {
          Var total;
          Var kl_total;
          for (std::size_t b = 0; b < batch.size(); ++b) {
            const std::size_t g = batch[b];
            const auto fwd = training_pass(config.dropout_rate, mix_seed(config.seed, step, g));
            const auto enc = model.encode(t, powers[g], data.padded(g), fwd);
            std::mt19937_64 noise_rng(mix_seed(config.seed ^ kNoiseStream, step, g));
            std::normal_distribution<double> normal;
            Matrix eps(1, model.latent_dim());
            for (Eigen::Index c = 0; c < eps.cols(); ++c) eps(0, c) = normal(noise_rng);
            const Var z = add(enc.mu, hadamard(exp(scale(enc.log_var, 0.5)), t.constant(eps)));
            const Var probs = model.decode(t, z, fwd);
            const VaeLoss l = vae_loss(probs, data.padded(g).adjacency, enc.mu, enc.log_var, pair_masks[g]);
            total = b == 0 ? l.total : add(total, l.total);
            kl_total = b == 0 ? l.kl : add(kl_total, l.kl);
          }
          const double inv = 1.0 / static_cast<double>(batch.size());
          run.kl_per_step.push_back(kl_total.scalar() * inv);
          ++step;
          return scale(total, inv);
        });
    run.history.push_back({epoch, loss, auc_or_nan(order), auc_or_nan(val), auc_or_nan(test)});
  }
  return run;
}

Graph graph_from_probabilities(const Matrix& probabilities, double threshold) {
  if (probabilities.rows() != probabilities.cols()) {
    throw ShapeError("graph_from_probabilities: expected a square matrix, got " + shape_string(probabilities));
  }
  const int n = static_cast<int>(probabilities.rows());
  std::vector<Edge> edges;
  int last = -1;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (probabilities(i, j) > threshold || probabilities(j, i) > threshold) {
        edges.emplace_back(i, j);
        last = std::max(last, j);
      }
    }
  }
  return Graph(last + 1, edges);
}

std::vector<Graph> sample_graphs(VaeModel& model, int count, std::uint64_t seed, double threshold) {
  if (count < 0) throw std::invalid_argument("sample_graphs: count must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Graph> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    Matrix z(1, model.latent_dim());
    for (Eigen::Index i = 0; i < z.cols(); ++i) z(0, i) = normal(rng);
    out.push_back(graph_from_probabilities(model.decode(z), threshold));
  }
  return out;
}

double roc_auc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) throw std::invalid_argument("roc_auc: need positives and negatives");
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(positives.size() + negatives.size());
  for (double s : positives) scored.emplace_back(s, true);
  for (double s : negatives) scored.emplace_back(s, false);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < scored.size();) {
    std::size_t j = i;
    while (j < scored.size() && scored[j].first == scored[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (scored[k].second) positive_rank_sum += rank;
    }
    i = j;
  }
  const auto p = static_cast<double>(positives.size());
  const auto q = static_cast<double>(negatives.size());
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double reconstruction_auc(VaeModel& model, const GraphDatasetCollection& data,
                          const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("reconstruction_auc: no held-out graphs");
  const auto powers = powers_for(data, model.orders());
  const auto auc = pooled_auc(model, data, powers, indices);
  if (!auc) throw std::runtime_error("reconstruction_auc: every graph lacks edges or non-edges");
  return *auc;
}

double reconstruction_auc(VaeModel& model, const GraphDatasetCollection& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return reconstruction_auc(model, data, all);
}

}  // namespace hagcn
