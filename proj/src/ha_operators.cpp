#include "hagcn/ha_operators.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace hagcn {

const char* to_string(GateVariant v) { return v == GateVariant::prod ? "prod" : "lin"; }

GateVariant parse_gate_variant(const std::string& s) {
  if (s == "prod") return GateVariant::prod;
  if (s == "lin") return GateVariant::lin;
  throw std::invalid_argument("unknown gate variant '" + s + "' (expected prod or lin)");
}

ClippedPowers::ClippedPowers(AdjacencyMatrix adjacency, const std::vector<int>& orders)
    : adjacency_(std::move(adjacency)) {
  for (int k : orders) {
    if (!powers_.count(k)) powers_.emplace(k, clipped_power(adjacency_, k));
  }
}

const AdjacencyMatrix& ClippedPowers::get(int k) const {
  auto it = powers_.find(k);
  if (it == powers_.end()) throw std::out_of_range("no clipped power cached for order " + std::to_string(k));
  return it->second;
}

namespace {

void require_square_match(const AdjacencyMatrix& a, Var x, const char* op) {
  if (a.rows() != a.cols() || a.cols() != x.rows()) {
    throw ShapeError(std::string(op) + ": adjacency " + shape_string(a) + " does not match features " +
                     shape_string(x.value()));
  }
}

Var activate(Var v, Activation sigma) {
  switch (sigma) {
    case Activation::relu:
      return relu(v);
    case Activation::sigmoid:
      return sigmoid(v);
    case Activation::identity:
      break;
  }
  return v;
}

}  // namespace

Var fp_forward(const AdjacencyMatrix& a, Var x) {
  require_square_match(a, x, "fp_forward");
  return matmul(x.tape().constant(a), x);
}

Var node_gcn_forward(const AdjacencyMatrix& a, Var x, Var w, Activation sigma) {
  return activate(matmul(fp_forward(a, x), w), sigma);
}

Var gconv_forward(const AdjacencyMatrix& a_tilde_k, Var x, Var w_k, Var b_k) {
  require_square_match(a_tilde_k, x, "gconv_forward");
  Tape& tape = x.tape();
  Var masked = hadamard(w_k, tape.constant(a_tilde_k));
  return add(matmul(masked, x), b_k);
}

Var adaptive_gate(const AdjacencyMatrix& a_tilde_k, Var x, Var q, GateVariant variant) {
  require_square_match(a_tilde_k, x, "adaptive_gate");
  const Eigen::Index n = a_tilde_k.rows();
  const Eigen::Index m = x.cols();
  Tape& tape = x.tape();
  Var a = tape.constant(a_tilde_k);
  if (variant == GateVariant::prod) {
    if (q.rows() != m || q.cols() != n) {
      throw ShapeError("adaptive_gate(prod): Q must be " + shape_string(m, n) + ", got " + shape_string(q.value()));
    }
    return sigmoid(matmul(matmul(a, x), q));
  }
  if (q.rows() != n + m || q.cols() != n) {
    throw ShapeError("adaptive_gate(lin): Q must be " + shape_string(n + m, n) + ", got " + shape_string(q.value()));
  }
  return sigmoid(matmul(concat_cols(a, x), q));
}

Var dconv_decode(Var h) { return sigmoid(matmul(h, transpose(h))); }

Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

HaConvLayer HaConvLayer::create(std::vector<int> orders, std::optional<GateVariant> adaptive, int n, int m_in,
                                std::mt19937_64& rng, const std::string& prefix) {
  if (orders.empty()) throw std::invalid_argument("HaConvLayer: at least one order is required");
  std::sort(orders.begin(), orders.end());
  if (std::adjacent_find(orders.begin(), orders.end()) != orders.end()) {
    throw std::invalid_argument("HaConvLayer: orders must be distinct");
  }
  if (orders.front() < 1) throw std::invalid_argument("HaConvLayer: orders must be positive");
  if (n < 1 || m_in < 1) throw std::invalid_argument("HaConvLayer: node capacity and input width must be positive");

  HaConvLayer layer;
  layer.orders = std::move(orders);
  layer.adaptive = adaptive;
  layer.n = n;
  layer.m_in = m_in;
  for (int k : layer.orders) {
    const std::string tag = prefix + ".k" + std::to_string(k);
    layer.weights.emplace_back(tag + ".W", glorot_uniform(n, n, rng), true);
    layer.biases.emplace_back(tag + ".B", Matrix::Zero(n, m_in), false);
    if (adaptive == GateVariant::prod) {
      layer.gates.emplace_back(tag + ".Q", glorot_uniform(m_in, n, rng), true);
    } else if (adaptive == GateVariant::lin) {
      layer.gates.emplace_back(tag + ".Q", glorot_uniform(n + m_in, n, rng), true);
    }
  }
  return layer;
}

std::vector<Parameter*> HaConvLayer::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    out.push_back(&weights[i]);
    out.push_back(&biases[i]);
    if (adaptive) out.push_back(&gates[i]);
  }
  return out;
}

Var ha_forward(HaConvLayer& layer, const ClippedPowers& powers, Var x, const GateObserver& observer) {
  if (powers.num_nodes() != layer.n || x.rows() != layer.n || x.cols() != layer.m_in) {
    throw ShapeError("ha_forward: layer expects " + shape_string(layer.n, layer.m_in) + " features on " +
                     std::to_string(layer.n) + " nodes, got " + shape_string(x.value()) + " on " +
                     std::to_string(powers.num_nodes()));
  }
  Tape& tape = x.tape();
  std::vector<Var> outputs;
  outputs.reserve(layer.orders.size());
  for (std::size_t i = 0; i < layer.orders.size(); ++i) {
    const int k = layer.orders[i];
    if (i >= layer.weights.size() || i >= layer.biases.size()) {
      throw std::out_of_range("ha_forward: no weights stored for order " + std::to_string(k));
    }
    const AdjacencyMatrix& a_tilde = powers.get(k);
    Var w = tape.parameter(layer.weights[i]);
    if (layer.adaptive) {
      Var gate = adaptive_gate(a_tilde, x, tape.parameter(layer.gates.at(i)), *layer.adaptive);
      if (observer) observer(k, gate.value());
      w = hadamard(gate, w);
    }
    outputs.push_back(gconv_forward(a_tilde, x, w, tape.parameter(layer.biases[i])));
  }
  return outputs.size() == 1 ? outputs.front() : concat_cols(outputs);
}

}  // namespace hagcn
