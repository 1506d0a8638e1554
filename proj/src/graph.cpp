#include "hagcn/graph.hpp"

#include <deque>
#include <functional>

namespace hagcn {

Graph::Graph(int num_nodes, const std::vector<Edge>& edges, bool directed)
    : num_nodes_(num_nodes), directed_(directed) {
  if (num_nodes < 0) throw GraphError("graph: node count must be non-negative, got " + std::to_string(num_nodes));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    if (i < 0 || i >= num_nodes || j < 0 || j >= num_nodes) {
      throw GraphError("graph: edge " + std::to_string(e) + " (" + std::to_string(i) + ", " + std::to_string(j) +
                       ") has an endpoint outside [0, " + std::to_string(num_nodes) + ")");
    }
    edges_.insert({i, j});
    if (!directed) edges_.insert({j, i});
  }
}

std::vector<Edge> Graph::canonical_edges() const {
  std::vector<Edge> out;
  for (const auto& e : edges_) {
    if (directed_ || e.first <= e.second) out.push_back(e);
  }
  return out;
}

std::size_t Graph::num_undirected_edges() const { return canonical_edges().size(); }

std::vector<int> Graph::out_neighbors(int i) const {
  std::vector<int> out;
  for (auto it = edges_.lower_bound({i, 0}); it != edges_.end() && it->first == i; ++it) out.push_back(it->second);
  return out;
}

namespace {

void check_node(const Graph& g, int v, const char* what) {
  if (v < 0 || v >= g.num_nodes()) {
    throw std::out_of_range(std::string(what) + ": node " + std::to_string(v) + " outside [0, " +
                            std::to_string(g.num_nodes()) + ")");
  }
}

}  // namespace

std::set<int> walk_reach_oracle(const Graph& g, int j, int k) {
  check_node(g, j, "walk_reach_oracle");
  if (k < 1) throw std::invalid_argument("walk_reach_oracle: walk length must be >= 1");

  std::vector<std::vector<int>> adjacency(g.num_nodes());
  for (int v = 0; v < g.num_nodes(); ++v) adjacency[v] = g.out_neighbors(v);

  std::set<int> reach{j};
  for (int start = 0; start < g.num_nodes(); ++start) {
    std::function<bool(int, int)> walk = [&](int at, int remaining) {
      if (remaining == 0) return at == j;
      for (int next : adjacency[at]) {
        if (walk(next, remaining - 1)) return true;
      }
      return false;
    };
    if (walk(start, k)) reach.insert(start);
  }
  return reach;
}

std::optional<int> bfs_distance(const Graph& g, int i, int j) {
  check_node(g, i, "bfs_distance");
  check_node(g, j, "bfs_distance");
  std::vector<int> dist(g.num_nodes(), -1);
  std::deque<int> frontier{i};
  dist[i] = 0;
  while (!frontier.empty()) {
    const int at = frontier.front();
    frontier.pop_front();
    if (at == j) return dist[at];
    for (int next : g.out_neighbors(at)) {
      if (dist[next] < 0) {
        dist[next] = dist[at] + 1;
        frontier.push_back(next);
      }
    }
  }
  return std::nullopt;
}

PaddedGraph pad_graph(const Graph& g, const Matrix& features, int n_max) {
  const int n = g.num_nodes();
  if (n > n_max) {
    throw ShapeError("pad_graph: graph has " + std::to_string(n) + " nodes but capacity is " + std::to_string(n_max));
  }
  if (features.rows() != n) {
    throw ShapeError("pad_graph: feature matrix has " + std::to_string(features.rows()) + " rows for " +
                     std::to_string(n) + " nodes");
  }
  PaddedGraph out;
  out.valid_count = n;
  out.adjacency = AdjacencyMatrix::Zero(n_max, n_max);
  out.adjacency.topLeftCorner(n, n) = adjacency_from_graph(g);
  out.features = Matrix::Zero(n_max, features.cols());
  out.features.topRows(n) = features;
  out.mask.assign(n_max, 0);
  for (int i = 0; i < n; ++i) out.mask[i] = 1;
  return out;
}

}  // namespace hagcn
