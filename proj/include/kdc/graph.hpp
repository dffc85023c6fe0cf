#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace kdc {

// Undirected simple graph with inclusive neighborhoods. Immutable after
// construction; safe to share across threads.
class Graph {
 public:
  Graph() = default;
  Graph(int n, const std::vector<std::pair<int, int>>& edges);

  int size() const { return n_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  bool has_edge(int i, int j) const;
  int degree(int i) const;

  // {j : adjacency[i][j] = 1} ∪ {i}, sorted ascending.
  const std::vector<int>& inclusive_neighborhood(int i) const;

  // BFS from node 0 reaches every node.
  bool connected() const;

  static Graph chain(int n);
  static Graph ring(int n);
  static Graph complete(int n);

  // G(n, p), resampled whole until connected. Deterministic given seed.
  // Throws MaxRetriesExceeded if connectivity is never reached.
  static Graph erdos_renyi(int n, double p, std::uint64_t seed,
                           int max_retries = 1000);

 private:
  int n_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> nbrs_;  // inclusive, sorted
};

}  // namespace kdc
