#pragma once

#include "hagcn/graph.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace hagcn::testing {

inline Graph path3() { return Graph(3, {{0, 1}, {1, 2}}); }
inline Graph triangle() { return Graph(3, {{0, 1}, {1, 2}, {0, 2}}); }

inline Graph random_graph(int n, double p, std::mt19937_64& rng, bool directed = false, bool self_loops = false) {
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = directed ? 0 : i; j < n; ++j) {
      if (i == j && !self_loops) continue;
      if (coin(rng)) edges.emplace_back(i, j);
    }
  }
  return Graph(n, edges, directed);
}

/// Number of walks of exactly `length` edges from i to j, by depth-first enumeration.
inline std::uint64_t count_walks(const Graph& g, int i, int j, int length) {
  std::function<std::uint64_t(int, int)> walk = [&](int at, int remaining) -> std::uint64_t {
    if (remaining == 0) return at == j ? 1 : 0;
    std::uint64_t total = 0;
    for (int next = 0; next < g.num_nodes(); ++next) {
      if (g.has_edge(at, next)) total += walk(next, remaining - 1);
    }
    return total;
  };
  return walk(i, length);
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

inline Matrix permutation_matrix(const std::vector<int>& perm) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) p(i, perm[i]) = 1.0;
  return p;
}

inline std::vector<int> random_permutation(int n, std::mt19937_64& rng) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

}  // namespace hagcn::testing
