#pragma once

#include "hagcn/autodiff.hpp"
#include "hagcn/graph.hpp"

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <vector>

namespace hagcn {

enum class GateVariant { prod, lin };
enum class Activation { identity, relu, sigmoid };

const char* to_string(GateVariant v);
GateVariant parse_gate_variant(const std::string& s);

/// Clipped adjacency powers Ã^k of one graph, computed once per order.
class ClippedPowers {
 public:
  ClippedPowers() = default;
  ClippedPowers(AdjacencyMatrix adjacency, const std::vector<int>& orders);

  const AdjacencyMatrix& adjacency() const { return adjacency_; }
  Eigen::Index num_nodes() const { return adjacency_.rows(); }
  /// Throws std::out_of_range when order k was not precomputed.
  const AdjacencyMatrix& get(int k) const;
  bool contains(int k) const { return powers_.count(k) != 0; }

 private:
  AdjacencyMatrix adjacency_;
  std::map<int, AdjacencyMatrix> powers_;
};

/// L_FP = A X
Var fp_forward(const AdjacencyMatrix& a, Var x);

/// σ(A X W)
Var node_gcn_forward(const AdjacencyMatrix& a, Var x, Var w, Activation sigma);

/// (W_k ∘ Ã^k) X + B_k. No gradient flows into Ã^k.
Var gconv_forward(const AdjacencyMatrix& a_tilde_k, Var x, Var w_k, Var b_k);

/// prod: sigmoid(Ã^k X Q), Q is m×n.  lin: sigmoid([Ã^k, X] Q), Q is (n+m)×n.
Var adaptive_gate(const AdjacencyMatrix& a_tilde_k, Var x, Var q, GateVariant variant);

/// sigmoid(H Hᵀ)
Var dconv_decode(Var h);

/// One high-order adaptive convolution layer with per-order W_k, B_k and,
/// when adaptive, per-order gate parameters Q_k.
struct HaConvLayer {
  std::vector<int> orders;
  std::optional<GateVariant> adaptive;
  int n = 0;
  int m_in = 0;
  std::vector<Parameter> weights;
  std::vector<Parameter> biases;
  std::vector<Parameter> gates;

  /// Glorot-uniform W_k and Q_k, zero B_k. Orders are sorted ascending.
  static HaConvLayer create(std::vector<int> orders, std::optional<GateVariant> adaptive, int n, int m_in,
                            std::mt19937_64& rng, const std::string& prefix = "gconv");

  int output_width() const { return m_in * static_cast<int>(orders.size()); }
  std::vector<Parameter*> parameters();
};

/// Receives the n×n gate of each order during a forward pass.
using GateObserver = std::function<void(int order, const Matrix& gate)>;

/// [L̃^(k₁), ..., L̃^(k_K)] in ascending order of k.
Var ha_forward(HaConvLayer& layer, const ClippedPowers& powers, Var x, const GateObserver& observer = {});

Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng);

}  // namespace hagcn
