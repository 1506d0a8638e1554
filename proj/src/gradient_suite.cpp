#include "hagcn/gradient_suite.hpp"

#include "hagcn/pipelines.hpp"

#include <functional>
#include <random>

namespace hagcn {
namespace {

constexpr double kEpsilon = 1e-6;
constexpr double kTolerance = 1e-4;

Matrix uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Graph random_graph(int n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (coin(rng)) edges.emplace_back(i, j);
    }
  }
  return Graph(n, edges);
}

// Biases start at zero; randomizing them keeps every adjoint path exercised.
void randomize_unregularized(std::span<Parameter* const> params, std::mt19937_64& rng) {
  for (Parameter* p : params) {
    if (!p->regularized) p->value = uniform(p->value.rows(), p->value.cols(), rng, 0.5);
  }
}

struct BinaryOp {
  const char* name;
  std::function<Var(Var, Var)> build;
  Eigen::Index a_rows, a_cols, b_rows, b_cols;
};

std::vector<BinaryOp> binary_ops(std::mt19937_64& rng) {
  const Mask mask{1, 0, 1};
  const std::vector<int> labels{2, 0, 1};
  const Matrix target = uniform(3, 3, rng);
  const Matrix edges = (Matrix(3, 3) << 0, 1, 1, 1, 0, 0, 1, 0, 1).finished();
  return {
      {"op.matmul", [](Var a, Var b) { return sum(matmul(a, b)); }, 3, 4, 4, 2},
      {"op.hadamard", [](Var a, Var b) { return sum(hadamard(a, b)); }, 3, 3, 3, 3},
      {"op.add", [](Var a, Var b) { return sum_squares(add(a, b)); }, 3, 3, 3, 3},
      {"op.sub", [](Var a, Var b) { return sum_squares(sub(a, b)); }, 3, 3, 3, 3},
      {"op.scale", [](Var a, Var b) { return sum(hadamard(scale(a, -1.7), b)); }, 3, 3, 3, 3},
      {"op.add_row_bias", [](Var a, Var b) { return sum_squares(add_row_bias(a, b)); }, 3, 3, 1, 3},
      {"op.concat_cols", [](Var a, Var b) { return sum_squares(concat_cols(a, b)); }, 3, 2, 3, 4},
      {"op.slice_cols", [](Var a, Var b) { return sum(hadamard(slice_cols(a, 1, 3), b)); }, 3, 5, 3, 3},
      {"op.transpose", [](Var a, Var b) { return sum(hadamard(transpose(a), b)); }, 2, 3, 3, 2},
      {"op.reshape", [](Var a, Var b) { return sum(hadamard(reshape(a, 3, 2), b)); }, 2, 3, 3, 2},
      {"op.sigmoid", [](Var a, Var b) { return sum(hadamard(sigmoid(a), b)); }, 3, 3, 3, 3},
      {"op.relu", [](Var a, Var b) { return sum(hadamard(relu(a), b)); }, 3, 3, 3, 3},
      {"op.exp", [](Var a, Var b) { return sum(hadamard(exp(a), b)); }, 3, 3, 3, 3},
      {"op.softmax_rows", [](Var a, Var b) { return sum(hadamard(softmax_rows(a), b)); }, 3, 4, 3, 4},
      {"op.masked_mean_rows", [mask](Var a, Var b) { return sum(hadamard(masked_mean_rows(a, mask), b)); }, 3, 3, 1, 3},
      {"op.dropout", [](Var a, Var b) { return sum(hadamard(dropout(a, 0.4, 3, true), b)); }, 3, 3, 3, 3},
      {"op.dconv_decode", [](Var a, Var b) { return sum(hadamard(dconv_decode(a), b)); }, 3, 2, 3, 3},
      {"op.cross_entropy", [labels, mask](Var a, Var b) { return cross_entropy_loss(add(a, b), labels, mask); }, 3, 3, 3, 3},
      {"op.mse", [target, mask](Var a, Var b) { return mse_loss(hadamard(a, b), target, mask); }, 3, 3, 3, 3},
      {"op.bce", [edges](Var a, Var b) { return binary_cross_entropy(sigmoid(add(a, b)), edges, Matrix::Ones(3, 3)); }, 3, 3, 3, 3},
      {"op.gaussian_kl", [](Var a, Var b) { return gaussian_kl(a, b); }, 2, 3, 2, 3},
  };
}

GradCheckReport check(const ScalarProgram& program, std::span<Parameter* const> params) {
  return finite_difference_check(program, params, kEpsilon, kTolerance);
}

}  // namespace

std::vector<GradientCase> run_gradient_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradientCase> out;

  for (const BinaryOp& op : binary_ops(rng)) {
    Parameter a("a", uniform(op.a_rows, op.a_cols, rng));
    Parameter b("b", uniform(op.b_rows, op.b_cols, rng));
    Parameter* params[] = {&a, &b};
    out.push_back({op.name, check([&](Tape& t) { return op.build(t.parameter(a), t.parameter(b)); }, params)});
  }

  // HA layer in every gate mode, composed with an MSE loss.
  {
    const int n = 5, m = 3;
    const Graph g = random_graph(n, 0.4, rng);
    const Matrix x = uniform(n, m, rng);
    const Matrix target = uniform(n, 3 * m, rng);
    const ClippedPowers powers(adjacency_from_graph(g), {1, 2, 3});
    const std::pair<const char*, std::optional<GateVariant>> modes[] = {
        {"ha_layer.plain", std::nullopt}, {"ha_layer.prod", GateVariant::prod}, {"ha_layer.lin", GateVariant::lin}};
    for (const auto& [name, gate] : modes) {
      HaConvLayer layer = HaConvLayer::create({1, 2, 3}, gate, n, m, rng);
      const auto params = layer.parameters();
      randomize_unregularized(params, rng);
      out.push_back({name, check([&](Tape& t) { return mse_loss(ha_forward(layer, powers, t.constant(x)), target,
                                                                Mask(n, 1)); },
                                 params)});
    }
  }

  // Node classifier containing every layer kind.
  {
    const int n = 5;
    const Graph g = random_graph(n, 0.5, rng);
    const Matrix x = uniform(n, 2, rng);
    const std::vector<int> labels{0, 2, 1, 1, 0};
    const Mask mask{1, 1, 0, 1, 1};
    for (GateVariant variant : {GateVariant::prod, GateVariant::lin}) {
      BuildOptions options{variant, std::nullopt, seed};
      Model model =
          Model::build(parse_architecture("adp_gcn_{1,2,3}-ReLU-fc4-gcn_{1,2,3}-fc3-softmax"), n, 2, options);
      const ClippedPowers powers(adjacency_from_graph(g), model.orders());
      const auto params = model.parameters();
      randomize_unregularized(params, rng);
      out.push_back({std::string("model.classifier.") + to_string(variant),
                     check([&](Tape& t) { return cross_entropy_loss(model.forward(t, powers, t.constant(x)), labels,
                                                                    mask); },
                           params)});
    }
  }

  // Graph regressor through the masked-mean readout.
  {
    const Graph g = random_graph(4, 0.6, rng);
    const PaddedGraph padded = pad_graph(g, uniform(4, 2, rng), 6);
    Model model = Model::build(parse_architecture("adp_gcn_{1,2,3}-ReLU-fc8-ReLU-fc1"), 6, 2, {GateVariant::lin, {}, seed});
    const ClippedPowers powers(padded.adjacency, model.orders());
    const auto params = model.parameters();
    randomize_unregularized(params, rng);
    const Matrix target = Matrix::Constant(1, 1, 2.5);
    out.push_back({"model.graph_regressor",
                   check([&](Tape& t) { return mse_loss(graph_readout_forward(model, t, powers, padded), target,
                                                        Mask{1}); },
                         params)});
  }

  // VAE loss with a fixed reparameterization draw.
  {
    const Graph g = random_graph(5, 0.5, rng);
    const PaddedGraph padded = pad_graph(g, Matrix::Ones(5, 1), 6);
    VaeOptions options;
    options.encoder_arch = "gcn_{1,2,3}-ReLU-fc8-ReLU-fc4";
    options.decoder_arch = "fc4-fc8-ReLU";
    options.latent_dim = 3;
    options.embed_dim = 2;
    VaeModel vae = VaeModel::build(6, 1, options, GateVariant::lin, seed);
    const ClippedPowers powers(padded.adjacency, vae.orders());
    const Matrix eps = uniform(1, 3, rng);
    const Matrix pairs = valid_pair_mask(padded.mask);
    const auto params = vae.parameters();
    randomize_unregularized(params, rng);
    out.push_back({"model.vae_loss", check(
                                         [&](Tape& t) {
                                           const auto enc = vae.encode(t, powers, padded);
                                           const Var z = add(enc.mu, hadamard(exp(scale(enc.log_var, 0.5)),
                                                                              t.constant(eps)));
                                           return vae_loss(vae.decode(t, z), padded.adjacency, enc.mu, enc.log_var,
                                                           pairs)
                                               .total;
                                         },
                                         params)});
  }
  return out;
}

}  // namespace hagcn
