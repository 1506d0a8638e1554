#include "hagcn/ha_operators.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace hagcn {
namespace {

Matrix column(std::initializer_list<double> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

const Matrix kP3Features = column({1, 2, 3});

TEST(FpForward, Examples) {
  Tape t(true);
  const Matrix a = adjacency_from_graph(testing::path3());
  EXPECT_EQ(fp_forward(a, t.constant(kP3Features)).value(), column({2, 4, 2}));
  EXPECT_TRUE(fp_forward(Matrix::Zero(3, 3), t.constant(kP3Features)).value().isZero());
  EXPECT_EQ(fp_forward(Matrix::Identity(3, 3), t.constant(kP3Features)).value(), kP3Features);
  EXPECT_THROW(fp_forward(Matrix::Zero(4, 4), t.constant(kP3Features)), ShapeError);
}

TEST(NodeGcnForward, Examples) {
  Tape t(true);
  std::mt19937_64 rng(1);
  const Matrix a = adjacency_from_graph(testing::path3());
  const Matrix x = testing::random_matrix(3, 2, rng);
  EXPECT_EQ(node_gcn_forward(a, t.constant(x), t.constant(Matrix::Identity(2, 2)), Activation::identity).value(), a * x);
  const Matrix out = node_gcn_forward(a, t.constant(Matrix::Zero(3, 2)), t.constant(Matrix::Ones(2, 4)),
                                      Activation::sigmoid).value();
  EXPECT_TRUE((out.array() == 0.5).all());
  EXPECT_EQ(node_gcn_forward(a, t.constant(kP3Features), t.constant(Matrix::Ones(1, 1)), Activation::relu).value(),
            column({2, 4, 2}));
}

TEST(GconvForward, Examples) {
  Tape t(true);
  const Matrix a1 = clipped_power(adjacency_from_graph(testing::path3()), 1);
  Var x = t.constant(kP3Features);
  EXPECT_EQ(gconv_forward(a1, x, t.constant(Matrix::Ones(3, 3)), t.constant(Matrix::Zero(3, 1))).value(),
            column({3, 6, 5}));
  EXPECT_TRUE(gconv_forward(a1, x, t.constant(Matrix::Zero(3, 3)), t.constant(Matrix::Zero(3, 1))).value().isZero());
  const Matrix b = column({0.5, -1, 2});
  EXPECT_EQ(gconv_forward(a1, x, t.constant(Matrix::Zero(3, 3)), t.constant(b)).value(), b);
}

TEST(GconvForward, NoGradientFlowsIntoAdjacency) {
  std::mt19937_64 rng(2);
  Parameter w("w", testing::random_matrix(3, 3, rng));
  Parameter b("b", testing::random_matrix(3, 1, rng));
  const Matrix a1 = clipped_power(adjacency_from_graph(testing::path3()), 1);
  Tape t(true);
  t.backward(sum(gconv_forward(a1, t.constant(kP3Features), t.parameter(w), t.parameter(b))));
  // d/dW_ij = Ã_ij x_j: zero wherever Ã is zero.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(w.grad(i, j), a1(i, j) * kP3Features(j, 0));
  EXPECT_EQ(b.grad, Matrix::Ones(3, 1));
}

// Straight-line evaluation of the gate formulas with explicit loops.
Matrix gate_oracle(const Matrix& a, const Matrix& x, const Matrix& q, GateVariant variant) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = x.cols();
  Matrix pre = Matrix::Zero(n, n);
  if (variant == GateVariant::prod) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < n; ++c) {
        double total = 0;
        for (Eigen::Index f = 0; f < m; ++f) {
          double ax = 0;
          for (Eigen::Index j = 0; j < n; ++j) ax += a(i, j) * x(j, f);
          total += ax * q(f, c);
        }
        pre(i, c) = total;
      }
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < n; ++c) {
        double total = 0;
        for (Eigen::Index j = 0; j < n; ++j) total += a(i, j) * q(j, c);
        for (Eigen::Index f = 0; f < m; ++f) total += x(i, f) * q(n + f, c);
        pre(i, c) = total;
      }
  }
  return pre.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

TEST(AdaptiveGate, ZeroParametersGiveOneHalf) {
  std::mt19937_64 rng(3);
  const Matrix a = clipped_power(adjacency_from_graph(testing::random_graph(5, 0.5, rng)), 2);
  const Matrix x = testing::random_matrix(5, 3, rng);
  Tape t(true);
  EXPECT_TRUE((adaptive_gate(a, t.constant(x), t.constant(Matrix::Zero(3, 5)), GateVariant::prod).value().array() == 0.5).all());
  EXPECT_TRUE((adaptive_gate(a, t.constant(x), t.constant(Matrix::Zero(8, 5)), GateVariant::lin).value().array() == 0.5).all());
  EXPECT_TRUE((adaptive_gate(a, t.constant(Matrix::Zero(5, 3)), t.constant(testing::random_matrix(3, 5, rng)),
                             GateVariant::prod).value().array() == 0.5).all());
}

TEST(AdaptiveGate, MatchesStraightLineOracleAndStaysInOpenUnitInterval) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 5;
    const int m = 1 + trial % 3;
    const Matrix a = clipped_power(adjacency_from_graph(testing::random_graph(n, 0.5, rng)), 1 + trial % 3);
    const Matrix x = testing::random_matrix(n, m, rng);
    for (GateVariant variant : {GateVariant::prod, GateVariant::lin}) {
      const Matrix q = testing::random_matrix(variant == GateVariant::prod ? m : n + m, n, rng, 2.0);
      Tape t(true);
      const Matrix gate = adaptive_gate(a, t.constant(x), t.constant(q), variant).value();
      EXPECT_TRUE(gate.isApprox(gate_oracle(a, x, q, variant), 1e-13));
      EXPECT_TRUE((gate.array() > 0.0).all() && (gate.array() < 1.0).all());
    }
  }
}

TEST(AdaptiveGate, RejectsInconsistentParameterShape) {
  Tape t(true);
  const Matrix a = Matrix::Identity(4, 4);
  Var x = t.constant(Matrix::Ones(4, 2));
  EXPECT_THROW(adaptive_gate(a, x, t.constant(Matrix::Zero(6, 4)), GateVariant::prod), ShapeError);
  EXPECT_THROW(adaptive_gate(a, x, t.constant(Matrix::Zero(2, 4)), GateVariant::lin), ShapeError);
}

HaConvLayer make_layer(std::vector<int> orders, std::optional<GateVariant> gate, int n, int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return HaConvLayer::create(std::move(orders), gate, n, m, rng);
}

TEST(HaForward, SingleOrderWithoutGateIsGconv) {
  std::mt19937_64 rng(5);
  const Graph g = testing::random_graph(5, 0.5, rng);
  const Matrix x = testing::random_matrix(5, 2, rng);
  HaConvLayer layer = make_layer({1}, std::nullopt, 5, 2, 6);
  layer.biases[0].value = testing::random_matrix(5, 2, rng);
  const ClippedPowers powers(adjacency_from_graph(g), {1});
  Tape t(true);
  const Matrix out = ha_forward(layer, powers, t.constant(x)).value();
  const Matrix direct = gconv_forward(powers.get(1), t.constant(x), t.constant(layer.weights[0].value),
                                      t.constant(layer.biases[0].value)).value();
  EXPECT_EQ(out, direct);
}

TEST(HaForward, ShapeLawOverGrid) {
  std::mt19937_64 rng(7);
  for (int n = 2; n <= 6; ++n)
    for (int m = 1; m <= 4; ++m)
      for (int K = 1; K <= 3; ++K) {
        std::vector<int> orders(K);
        for (int k = 0; k < K; ++k) orders[k] = k + 1;
        HaConvLayer layer = make_layer(orders, GateVariant::lin, n, m, 8);
        const ClippedPowers powers(adjacency_from_graph(testing::random_graph(n, 0.5, rng)), orders);
        Tape t(true);
        const Matrix out = ha_forward(layer, powers, t.constant(testing::random_matrix(n, m, rng))).value();
        EXPECT_EQ(out.rows(), n);
        EXPECT_EQ(out.cols(), m * K);
        EXPECT_EQ(layer.output_width(), m * K);
      }
}

TEST(HaForward, ConcatenatesInAscendingOrder) {
  std::mt19937_64 rng(9);
  const Graph g = testing::random_graph(5, 0.4, rng);
  const Matrix x = testing::random_matrix(5, 2, rng);
  HaConvLayer layer = make_layer({3, 1, 2}, std::nullopt, 5, 2, 10);
  ASSERT_EQ(layer.orders, (std::vector<int>{1, 2, 3}));
  const ClippedPowers powers(adjacency_from_graph(g), layer.orders);
  Tape t(true);
  const Matrix out = ha_forward(layer, powers, t.constant(x)).value();
  for (int i = 0; i < 3; ++i) {
    const int k = layer.orders[i];
    const Matrix expected = layer.weights[i].value.cwiseProduct(powers.get(k)) * x + layer.biases[i].value;
    EXPECT_TRUE(out.middleCols(2 * i, 2).isApprox(expected, 1e-14));
  }
}

TEST(HaForward, PaperShapeExample) {
  HaConvLayer layer = make_layer({1, 2, 3}, std::nullopt, 5, 3, 11);
  const ClippedPowers powers(Matrix::Zero(5, 5), {1, 2, 3});
  Tape t(true);
  const Matrix out = ha_forward(layer, powers, t.constant(Matrix::Ones(5, 3))).value();
  EXPECT_EQ(out.rows(), 5);
  EXPECT_EQ(out.cols(), 9);
}

TEST(HaForward, ZeroGateHalvesWeightsBitExactly) {
  std::mt19937_64 rng(12);
  const Graph g = testing::random_graph(6, 0.5, rng);
  const Matrix x = testing::random_matrix(6, 3, rng);
  for (GateVariant variant : {GateVariant::prod, GateVariant::lin}) {
    HaConvLayer gated = make_layer({1, 2, 3}, variant, 6, 3, 13);
    for (Parameter& q : gated.gates) q.value.setZero();
    HaConvLayer plain = make_layer({1, 2, 3}, std::nullopt, 6, 3, 13);
    for (std::size_t i = 0; i < plain.weights.size(); ++i) plain.weights[i].value = gated.weights[i].value * 0.5;
    const ClippedPowers powers(adjacency_from_graph(g), {1, 2, 3});
    Tape t(true);
    const Matrix a = ha_forward(gated, powers, t.constant(x)).value();
    const Matrix b = ha_forward(plain, powers, t.constant(x)).value();
    EXPECT_TRUE((a.array() == b.array()).all());
  }
}

TEST(HaForward, MissingOrderIsReported) {
  HaConvLayer layer = make_layer({1, 2}, std::nullopt, 3, 1, 14);
  const ClippedPowers powers(adjacency_from_graph(testing::path3()), {1});
  Tape t(true);
  EXPECT_THROW(ha_forward(layer, powers, t.constant(kP3Features)), std::out_of_range);
  layer.weights.pop_back();
  const ClippedPowers both(adjacency_from_graph(testing::path3()), {1, 2});
  EXPECT_THROW(ha_forward(layer, both, t.constant(kP3Features)), std::out_of_range);
}

TEST(HaForward, RelabelingConsistency) {
  std::mt19937_64 rng(15);
  const int n = 6;
  const int m = 2;
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = adjacency_from_graph(testing::random_graph(n, 0.4, rng));
    const Matrix x = testing::random_matrix(n, m, rng);
    const Matrix p = testing::permutation_matrix(testing::random_permutation(n, rng));
    const ClippedPowers powers(a, {1, 2});
    const ClippedPowers permuted_powers(p * a * p.transpose(), {1, 2});

    for (std::optional<GateVariant> variant : {std::optional<GateVariant>{}, std::optional{GateVariant::prod},
                                               std::optional{GateVariant::lin}}) {
      HaConvLayer layer = make_layer({1, 2}, variant, n, m, 16 + trial);
      for (Parameter& b : layer.biases) b.value = testing::random_matrix(n, m, rng);
      HaConvLayer relabeled = layer;
      for (std::size_t i = 0; i < layer.orders.size(); ++i) {
        relabeled.weights[i].value = p * layer.weights[i].value * p.transpose();
        relabeled.biases[i].value = p * layer.biases[i].value;
        if (variant == GateVariant::prod) {
          // Q's columns index nodes: Q -> Q Pᵀ.
          relabeled.gates[i].value = layer.gates[i].value * p.transpose();
        } else if (variant == GateVariant::lin) {
          // Rows of Q split into an adjacency block (nodes) and a feature block.
          Matrix q = layer.gates[i].value;
          q.topRows(n) = p * q.topRows(n);
          relabeled.gates[i].value = q * p.transpose();
        }
      }
      Tape t(true);
      const Matrix out = ha_forward(layer, powers, t.constant(x)).value();
      const Matrix out_p = ha_forward(relabeled, permuted_powers, t.constant(p * x)).value();
      EXPECT_TRUE(out_p.isApprox(p * out, 1e-12));
    }
  }
}

TEST(HaForward, GateObserverSeesEveryOrder) {
  HaConvLayer layer = make_layer({1, 3}, GateVariant::lin, 3, 1, 17);
  const ClippedPowers powers(adjacency_from_graph(testing::path3()), {1, 3});
  std::vector<int> seen;
  Tape t(true);
  ha_forward(layer, powers, t.constant(kP3Features), [&](int k, const Matrix& gate) {
    seen.push_back(k);
    EXPECT_EQ(gate.rows(), 3);
    EXPECT_EQ(gate.cols(), 3);
  });
  EXPECT_EQ(seen, (std::vector<int>{1, 3}));
}

TEST(HaForward, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(18);
  const int n = 5;
  const int m = 2;
  const Graph g = testing::random_graph(n, 0.5, rng);
  const ClippedPowers powers(adjacency_from_graph(g), {1, 2, 3});
  const Matrix x = testing::random_matrix(n, m, rng);
  const Matrix target = testing::random_matrix(n, 3 * m, rng);
  const Mask mask(n, 1);
  for (std::optional<GateVariant> variant : {std::optional<GateVariant>{}, std::optional{GateVariant::prod},
                                             std::optional{GateVariant::lin}}) {
    HaConvLayer layer = make_layer({1, 2, 3}, variant, n, m, 19);
    for (Parameter& b : layer.biases) b.value = testing::random_matrix(n, m, rng);
    const auto params = layer.parameters();
    const auto report = finite_difference_check(
        [&](Tape& t) { return mse_loss(ha_forward(layer, powers, t.constant(x)), target, mask); }, params, 1e-6, 1e-4);
    EXPECT_TRUE(report.passed) << report.max_relative_error << " at " << report.worst_entry;
  }
}

TEST(DconvDecode, Properties) {
  std::mt19937_64 rng(20);
  Tape t(true);
  EXPECT_TRUE((dconv_decode(t.constant(Matrix::Zero(4, 3))).value().array() == 0.5).all());
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix out = dconv_decode(t.constant(testing::random_matrix(6, 3, rng, 2.0))).value();
    EXPECT_LT((out - out.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE((out.array() > 0.0).all() && (out.array() < 1.0).all());
  }
  const Matrix big = dconv_decode(t.constant(Matrix::Constant(3, 2, 5.0))).value();
  EXPECT_TRUE((big.array() > 0.999).all());
}

TEST(HaConvLayer, ParameterShapesAndInit) {
  HaConvLayer lin = make_layer({1, 2}, GateVariant::lin, 7, 3, 21);
  EXPECT_EQ(lin.weights[0].value.rows(), 7);
  EXPECT_EQ(lin.weights[0].value.cols(), 7);
  EXPECT_TRUE(lin.biases[1].value.isZero());
  EXPECT_EQ(lin.biases[1].value.cols(), 3);
  EXPECT_EQ(lin.gates[0].value.rows(), 10);
  EXPECT_EQ(lin.gates[0].value.cols(), 7);
  EXPECT_EQ(lin.parameters().size(), 6u);
  HaConvLayer prod = make_layer({2}, GateVariant::prod, 7, 3, 21);
  EXPECT_EQ(prod.gates[0].value.rows(), 3);
  const double limit = std::sqrt(6.0 / 14.0);
  EXPECT_LE(lin.weights[0].value.cwiseAbs().maxCoeff(), limit);
  EXPECT_THROW(make_layer({1, 1}, std::nullopt, 3, 1, 0), std::invalid_argument);
  EXPECT_THROW(make_layer({0}, std::nullopt, 3, 1, 0), std::invalid_argument);
}

}  // namespace
}  // namespace hagcn
