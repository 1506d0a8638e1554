#include "hagcn/pipelines.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace hagcn {
namespace {

std::size_t count(const Mask& m) { return static_cast<std::size_t>(std::accumulate(m.begin(), m.end(), 0)); }

NodeDataset two_cliques(int c, std::uint64_t split_seed) {
  std::vector<Edge> edges;
  for (int block = 0; block < 2; ++block)
    for (int i = 0; i < c; ++i)
      for (int j = i + 1; j < c; ++j) edges.emplace_back(block * c + i, block * c + j);
  edges.emplace_back(c - 1, c);
  NodeDataset data;
  data.graph = Graph(2 * c, edges);
  data.features = Matrix::Identity(2 * c, 2 * c);
  for (int i = 0; i < 2 * c; ++i) data.labels.push_back(i < c ? 0 : 1);
  data.masks = split_nodes(2 * c, {}, split_seed);
  return data;
}

GraphDatasetCollection random_collection(int count, int n_min, int n_max, std::mt19937_64& rng,
                                         const std::function<double(const Graph&)>& target) {
  std::uniform_int_distribution<int> size(n_min, n_max);
  std::vector<GraphItem> items;
  for (int g = 0; g < count; ++g) {
    const int n = size(rng);
    GraphItem item;
    item.graph = testing::random_graph(n, 0.5, rng);
    item.features = testing::random_matrix(n, 2, rng);
    item.target = target(item.graph);
    items.push_back(std::move(item));
  }
  return GraphDatasetCollection(std::move(items), n_max);
}

TEST(SplitNodes, PaperRatioOnHundredNodes) {
  const SplitMasks m = split_nodes(100, {}, 0);
  EXPECT_EQ(count(m.train), 70u);
  EXPECT_EQ(count(m.val), 15u);
  EXPECT_EQ(count(m.test), 15u);
}

TEST(SplitNodes, ExactDivision) {
  const SplitMasks m = split_nodes(10, {8, 1, 1}, 3);
  EXPECT_EQ(count(m.train), 8u);
  EXPECT_EQ(count(m.val), 1u);
  EXPECT_EQ(count(m.test), 1u);
}

TEST(SplitNodes, RemaindersGoToTrain) {
  // 7:1.5:1.5 of 21 gives floor(3.15) = 3 for val and test.
  const SplitMasks m = split_nodes(21, {}, 1);
  EXPECT_EQ(count(m.val), 3u);
  EXPECT_EQ(count(m.test), 3u);
  EXPECT_EQ(count(m.train), 15u);
}

TEST(SplitNodes, DisjointCoveringAndSeeded) {
  for (int n : {3, 4, 17, 50}) {
    const SplitMasks a = split_nodes(n, {}, 9);
    const SplitMasks b = split_nodes(n, {}, 9);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.val, b.val);
    for (int i = 0; i < n; ++i) EXPECT_EQ(a.train[i] + a.val[i] + a.test[i], 1) << n << " " << i;
    EXPECT_GE(count(a.val), 1u);
    EXPECT_GE(count(a.test), 1u);
  }
  EXPECT_NE(split_nodes(50, {}, 1).train, split_nodes(50, {}, 2).train);
}

TEST(SplitNodes, Errors) {
  EXPECT_THROW(split_nodes(2, {}, 0), std::invalid_argument);
  EXPECT_THROW(split_nodes(10, {1, 0, 1}, 0), std::invalid_argument);
  EXPECT_THROW(split_nodes(10, {1, -1, 1}, 0), std::invalid_argument);
}

TEST(NodeClassifier, TwoCliqueReachesFullTrainAccuracy) {
  TrainingConfig config;
  const NodeRun run = train_node_classifier(two_cliques(10, 0), "gcn_{1,2}-fc8-gcn_{1,2}-fc1-softmax", config);
  ASSERT_EQ(run.history.size(), 200u);
  EXPECT_EQ(run.history.back().train, 1.0);
  EXPECT_EQ(run.model.output_width(), 2);
}

TEST(NodeClassifier, SingleLabelIsTriviallyAccurate) {
  NodeDataset data = two_cliques(4, 0);
  std::fill(data.labels.begin(), data.labels.end(), 0);
  TrainingConfig config;
  config.epochs = 1;
  const NodeRun run = train_node_classifier(data, "gcn_{1}-fc1-softmax", config);
  EXPECT_EQ(run.history.back().train, 1.0);
  EXPECT_EQ(run.history.back().test, 1.0);
}

TEST(NodeClassifier, ZeroLearningRateKeepsMetricsConstant) {
  TrainingConfig config;
  config.learning_rate = 0.0;
  config.epochs = 5;
  const NodeRun run = train_node_classifier(two_cliques(5, 2), "gcn_{1}-fc4-softmax", config);
  for (const MetricsRow& row : run.history) {
    EXPECT_EQ(row.loss, run.history.front().loss);
    EXPECT_EQ(row.train, run.history.front().train);
    EXPECT_EQ(row.test, run.history.front().test);
  }
}

TEST(NodeClassifier, HeldOutLabelsNeverReachTheLoss) {
  TrainingConfig config;
  config.epochs = 20;
  config.dropout_rate = 0.3;
  const NodeDataset data = two_cliques(6, 4);
  NodeDataset mutated = data;
  for (int i = 0; i < mutated.num_nodes(); ++i) {
    if (!mutated.masks.train[i]) mutated.labels[i] = 1 - mutated.labels[i];
  }
  const auto a = train_node_classifier(data, "adp_gcn_{1,2}-fc4-fc1-softmax", config).history;
  const auto b = train_node_classifier(mutated, "adp_gcn_{1,2}-fc4-fc1-softmax", config).history;
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t e = 0; e < a.size(); ++e) EXPECT_EQ(a[e].loss, b[e].loss);
}

TEST(NodeClassifier, SeedDeterminism) {
  TrainingConfig config;
  config.epochs = 10;
  config.dropout_rate = 0.5;
  const auto a = train_node_classifier(two_cliques(5, 0), "gcn_{1,2}-fc4-fc1-softmax", config).history;
  const auto b = train_node_classifier(two_cliques(5, 0), "gcn_{1,2}-fc4-fc1-softmax", config).history;
  for (std::size_t e = 0; e < a.size(); ++e) EXPECT_EQ(a[e].loss, b[e].loss);
}

TEST(NodeDataset, ValidationErrors) {
  NodeDataset data = two_cliques(3, 0);
  data.labels.pop_back();
  EXPECT_THROW(data.validate(), std::invalid_argument);
  data = two_cliques(3, 0);
  data.masks.val = data.masks.train;
  EXPECT_THROW(data.validate(), std::invalid_argument);
}

TEST(GraphCollection, PadsToLargestGraph) {
  std::vector<GraphItem> items{{testing::path3(), Matrix::Ones(3, 1), 2.0},
                               {Graph(5, {{0, 4}}), Matrix::Ones(5, 1), 1.0}};
  const GraphDatasetCollection data(items);
  EXPECT_EQ(data.n_max(), 5);
  EXPECT_EQ(data.padded(0).valid_count, 3);
  EXPECT_EQ(data.padded(0).mask, (Mask{1, 1, 1, 0, 0}));
}

TEST(GraphCollection, Errors) {
  std::vector<GraphItem> ragged{{testing::path3(), Matrix::Ones(3, 1), 0.0}, {testing::path3(), Matrix::Ones(3, 2), 0.0}};
  EXPECT_THROW(GraphDatasetCollection{ragged}, ShapeError);
  std::vector<GraphItem> nonfinite{{testing::path3(), Matrix::Ones(3, 1), std::nan("")}};
  EXPECT_THROW(GraphDatasetCollection{nonfinite}, std::invalid_argument);
  std::vector<GraphItem> big{{testing::path3(), Matrix::Ones(3, 1), 0.0}};
  EXPECT_THROW(GraphDatasetCollection(big, 2), ShapeError);
}

TEST(GraphRegressor, ConstantTargetsAreFitted) {
  std::mt19937_64 rng(1);
  const auto data = random_collection(12, 2, 5, rng, [](const Graph&) { return 3.0; });
  TrainingConfig config;
  config.epochs = 300;
  const GraphRun run = train_graph_regressor(data, "gcn_{1}-ReLU-fc4-ReLU-fc1", config);
  EXPECT_EQ(run.baseline_rmse, 0.0);
  EXPECT_LT(run.history.back().train, 0.05);
}

TEST(GraphRegressor, PadRowsNeverInfluencePredictions) {
  std::mt19937_64 rng(2);
  auto data = random_collection(6, 2, 6, rng, [](const Graph& g) { return double(g.num_undirected_edges()); });
  for (GateVariant variant : {GateVariant::prod, GateVariant::lin}) {
    TrainingConfig config;
    config.epochs = 3;
    config.gate_variant = variant;
    GraphRun run = train_graph_regressor(data, "[adp_gcn_{1,2,3}-ReLU]*2-fc8-ReLU-fc1", config);
    const auto before = predict_graphs(run.model, data);
    auto perturbed = data;
    for (std::size_t i = 0; i < perturbed.size(); ++i) {
      Matrix x = perturbed.padded(i).features;
      for (Eigen::Index r = perturbed.padded(i).valid_count; r < x.rows(); ++r) {
        x.row(r) = testing::random_matrix(1, x.cols(), rng, 100.0);
      }
      perturbed.set_padded_features(i, x);
    }
    EXPECT_EQ(predict_graphs(run.model, perturbed), before);
  }
}

TEST(GraphRegressor, Errors) {
  std::mt19937_64 rng(3);
  const auto one = random_collection(1, 3, 3, rng, [](const Graph&) { return 1.0; });
  EXPECT_THROW(train_graph_regressor(one, "gcn_{1}-fc1", {}), std::invalid_argument);
  const auto two = random_collection(2, 3, 3, rng, [](const Graph&) { return 1.0; });
  EXPECT_THROW(train_graph_regressor(two, "gcn_{1}-ReLU", {}), BuildError);
  EXPECT_THROW(train_graph_regressor(two, "fc4-gcn_{1}", {}), BuildError);
}

TEST(SplitGraphs, SmallCollectionsTrainOnEverything) {
  const SplitMasks m = split_graphs(2, {}, 0);
  EXPECT_EQ(m.train, (Mask{1, 1}));
  EXPECT_EQ(count(m.val) + count(m.test), 0u);
}

TEST(VaeLoss, Examples) {
  Tape t(true);
  const Matrix target = (Matrix(2, 2) << 0, 1, 1, 0).finished();
  const auto zero = vae_loss(t.constant(target), target, t.constant(Matrix::Zero(1, 4)), t.constant(Matrix::Zero(1, 4)));
  EXPECT_EQ(zero.kl.scalar(), 0.0);
  EXPECT_LT(zero.reconstruction.scalar(), 1e-5);
  EXPECT_EQ(zero.total.scalar(), zero.reconstruction.scalar());

  const auto unit = vae_loss(t.constant(target), target, t.constant(Matrix::Ones(1, 1)), t.constant(Matrix::Zero(1, 1)));
  EXPECT_EQ(unit.kl.scalar(), 0.5);
}

TEST(VaeLoss, KlIsNonNegative) {
  std::mt19937_64 rng(4);
  Tape t(true);
  for (int trial = 0; trial < 200; ++trial) {
    const Var mu = t.constant(testing::random_matrix(1, 8, rng, 3.0));
    const Var lv = t.constant(testing::random_matrix(1, 8, rng, 5.0));
    EXPECT_GE(gaussian_kl(mu, lv).scalar(), 0.0);
  }
}

TEST(ValidPairMask, OffDiagonalValidPairs) {
  EXPECT_EQ(valid_pair_mask(Mask{1, 1, 0}), (Matrix(3, 3) << 0, 1, 0, 1, 0, 0, 0, 0, 0).finished());
}

TEST(GraphFromProbabilities, ThresholdRule) {
  const Graph complete = graph_from_probabilities(Matrix::Constant(4, 4, 0.9));
  EXPECT_EQ(complete.num_undirected_edges(), 6u);
  EXPECT_FALSE(complete.has_edge(0, 0));
  EXPECT_EQ(graph_from_probabilities(Matrix::Constant(4, 4, 0.1)).num_nodes(), 0);

  Matrix p = Matrix::Zero(5, 5);
  p(0, 2) = 0.8;  // one-sided entries are symmetrized
  const Graph g = graph_from_probabilities(p);
  EXPECT_EQ(g.num_nodes(), 3);
  EXPECT_TRUE(g.has_edge(2, 0));
}

TEST(RocAuc, Definition) {
  const std::vector<double> hi{0.9, 0.8}, lo{0.1, 0.2, 0.3};
  EXPECT_EQ(roc_auc(hi, lo), 1.0);
  EXPECT_EQ(roc_auc(lo, hi), 0.0);
  const std::vector<double> tie{0.5};
  EXPECT_EQ(roc_auc(tie, tie), 0.5);
  const std::vector<double> pos{0.3, 0.7}, neg{0.5};
  EXPECT_EQ(roc_auc(pos, neg), 0.5);
  EXPECT_THROW(roc_auc(pos, {}), std::invalid_argument);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  std::vector<double> a(4000), b(4000);
  for (double& v : a) v = u(rng);
  for (double& v : b) v = u(rng);
  EXPECT_NEAR(roc_auc(a, b), 0.5, 0.02);
}

class VaeFixture : public ::testing::Test {
 protected:
  static GraphDatasetCollection communities(int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<GraphItem> items;
    for (int g = 0; g < count; ++g) {
      const int n = 6;
      std::vector<Edge> edges;
      std::bernoulli_distribution in(0.9), out(0.05);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (((i < 3) == (j < 3)) ? in(rng) : out(rng)) edges.emplace_back(i, j);
      items.push_back({Graph(n, edges), Matrix::Ones(n, 1), 0.0});
    }
    return GraphDatasetCollection(std::move(items), 7);
  }

  static VaeOptions small() {
    VaeOptions o;
    o.encoder_arch = "gcn_{1,2}-ReLU-fc8";
    o.decoder_arch = "fc8-ReLU";
    o.latent_dim = 4;
    o.embed_dim = 4;
    return o;
  }
};

TEST_F(VaeFixture, TrainingRecordsNonNegativeKlAndIsSeeded) {
  const auto data = communities(12, 1);
  TrainingConfig config;
  config.epochs = 5;
  config.batch_size = 4;
  const VaeRun a = train_vae(data, config, small());
  const VaeRun b = train_vae(data, config, small());
  ASSERT_EQ(a.kl_per_step.size(), 5u * 3u);
  for (double kl : a.kl_per_step) EXPECT_GE(kl, 0.0);
  EXPECT_EQ(a.kl_per_step, b.kl_per_step);
  EXPECT_EQ(a.history.back().loss, b.history.back().loss);
}

TEST_F(VaeFixture, SamplesAreValidGraphsAndSeeded) {
  const auto data = communities(8, 2);
  TrainingConfig config;
  config.epochs = 3;
  VaeRun run = train_vae(data, config, small());
  EXPECT_TRUE(sample_graphs(run.model, 0, 1).empty());
  const auto a = sample_graphs(run.model, 20, 7);
  EXPECT_EQ(a, sample_graphs(run.model, 20, 7));
  for (const Graph& g : a) {
    EXPECT_LE(g.num_nodes(), data.n_max());
    for (const auto& [i, j] : g.edges()) {
      EXPECT_NE(i, j);
      EXPECT_TRUE(g.has_edge(j, i));
      EXPECT_LT(std::max(i, j), g.num_nodes());
    }
  }
}

TEST_F(VaeFixture, DecoderIsSymmetricProbabilities) {
  VaeModel vae = VaeModel::build(7, 1, small(), GateVariant::lin, 3);
  std::mt19937_64 rng(3);
  const Matrix p = vae.decode(testing::random_matrix(1, 4, rng));
  EXPECT_EQ(p.rows(), 7);
  EXPECT_EQ(p, p.transpose());
  EXPECT_TRUE((p.array() > 0.0 && p.array() < 1.0).all());
}

TEST_F(VaeFixture, CheckpointRoundTrip) {
  VaeModel vae = VaeModel::build(7, 1, small(), GateVariant::prod, 5);
  VaeModel loaded = VaeModel::from_json(nlohmann::json::parse(vae.to_json().dump()));
  const Matrix z = Matrix::Constant(1, 4, 0.3);
  EXPECT_EQ(vae.decode(z), loaded.decode(z));
  const auto a = vae.parameters();
  const auto b = loaded.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->name;
}

TEST_F(VaeFixture, ReconstructionAucErrors) {
  VaeModel vae = VaeModel::build(3, 1, small(), GateVariant::lin, 0);
  const GraphDatasetCollection empty_graphs({{Graph(3, {}), Matrix::Ones(3, 1), 0.0}});
  EXPECT_THROW(reconstruction_auc(vae, empty_graphs), std::runtime_error);
  EXPECT_THROW(reconstruction_auc(vae, empty_graphs, {}), std::invalid_argument);
  const GraphDatasetCollection complete({{testing::triangle(), Matrix::Ones(3, 1), 0.0}});
  EXPECT_THROW(reconstruction_auc(vae, complete), std::runtime_error);
  const GraphDatasetCollection path({{testing::path3(), Matrix::Ones(3, 1), 0.0}});
  const double auc = reconstruction_auc(vae, path);
  EXPECT_GE(auc, 0.0);
  EXPECT_LE(auc, 1.0);
}

}  // namespace
}  // namespace hagcn
