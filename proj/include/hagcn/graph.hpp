#pragma once

#include "hagcn/dense.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hagcn {

using Edge = std::pair<int, int>;

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Simple (unweighted) graph over nodes 0..n-1. Edges are stored with set
/// semantics; an undirected graph stores both orientations of every edge.
class Graph {
 public:
  Graph() = default;
  Graph(int num_nodes, const std::vector<Edge>& edges, bool directed = false);

  int num_nodes() const { return num_nodes_; }
  bool directed() const { return directed_; }
  const std::set<Edge>& edges() const { return edges_; }

  /// Edges with i <= j for undirected graphs, all edges otherwise.
  std::vector<Edge> canonical_edges() const;
  std::size_t num_undirected_edges() const;

  bool has_edge(int i, int j) const { return edges_.count({i, j}) != 0; }
  std::vector<int> out_neighbors(int i) const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  int num_nodes_ = 0;
  bool directed_ = false;
  std::set<Edge> edges_;
};

/// Binary adjacency, stored in a numeric type usable in matrix products.
using AdjacencyMatrix = Matrix;
/// Walk counts, A^k before clipping. Saturates at the maximum uint64 value.
using CountMatrix = DenseMatrix<std::uint64_t>;

template <typename Scalar = double>
DenseMatrix<Scalar> adjacency_from_graph(const Graph& g) {
  DenseMatrix<Scalar> a = DenseMatrix<Scalar>::Zero(g.num_nodes(), g.num_nodes());
  for (const auto& [i, j] : g.edges()) a(i, j) = Scalar(1);
  return a;
}

/// A^k by repeated product with saturating integer arithmetic.
template <typename Derived>
CountMatrix matrix_power(const Eigen::MatrixBase<Derived>& a, int k) {
  if (k < 1) throw std::invalid_argument("matrix_power: order must be >= 1, got " + std::to_string(k));
  if (a.rows() != a.cols()) throw ShapeError("matrix_power: adjacency must be square, got " + shape_string(a));
  const Eigen::Index n = a.rows();
  CountMatrix base(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) base(i, j) = static_cast<std::uint64_t>(a(i, j));

  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  CountMatrix result = base;
  for (int step = 1; step < k; ++step) {
    CountMatrix next = CountMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index l = 0; l < n; ++l) {
        const std::uint64_t lhs = result(i, l);
        if (lhs == 0) continue;
        for (Eigen::Index j = 0; j < n; ++j) {
          const std::uint64_t rhs = base(l, j);
          if (rhs == 0) continue;
          std::uint64_t prod = 0;
          std::uint64_t sum = 0;
          if (__builtin_mul_overflow(lhs, rhs, &prod) || __builtin_add_overflow(next(i, j), prod, &sum)) {
            next(i, j) = kMax;
          } else {
            next(i, j) = sum;
          }
        }
      }
    }
    result = std::move(next);
  }
  return result;
}

/// min(A^k + I, 1). The power is formed in full before clipping; only the
/// sign of each entry of A^k matters, which floating-point products preserve.
template <typename Derived>
AdjacencyMatrix clipped_power(const Eigen::MatrixBase<Derived>& a, int k) {
  if (k < 1) throw std::invalid_argument("clipped_power: order must be >= 1, got " + std::to_string(k));
  if (a.rows() != a.cols()) throw ShapeError("clipped_power: adjacency must be square, got " + shape_string(a));
  const Matrix base = a.template cast<double>();
  Matrix power = base;
  for (int step = 1; step < k; ++step) {
    power = (power * base).eval();
    if (!power.allFinite()) throw std::overflow_error("clipped_power: walk counts overflowed at order " + std::to_string(k));
  }
  power.diagonal().array() += 1.0;
  return power.cwiseMin(1.0);
}

/// Nodes i with a walk of length exactly k from i to j, plus j itself.
/// Computed by explicit walk enumeration; no matrix algebra.
std::set<int> walk_reach_oracle(const Graph& g, int j, int k);

/// Shortest-path length from i to j; nullopt when j is unreachable.
std::optional<int> bfs_distance(const Graph& g, int i, int j);

struct PaddedGraph {
  AdjacencyMatrix adjacency;
  Matrix features;
  int valid_count = 0;
  Mask mask;

  int capacity() const { return static_cast<int>(adjacency.rows()); }
};

PaddedGraph pad_graph(const Graph& g, const Matrix& features, int n_max);

}  // namespace hagcn
