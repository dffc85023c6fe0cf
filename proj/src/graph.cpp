#include "kdc/graph.hpp"

#include <algorithm>
#include <queue>
#include <string>

#include "kdc/errors.hpp"
#include "kdc/rng.hpp"

namespace kdc {

Graph::Graph(int n, const std::vector<std::pair<int, int>>& edges) : n_(n) {
  if (n < 1) throw ConfigError("graph needs at least one node");
  nbrs_.assign(n, {});
  for (auto [a, b] : edges) {
    if (a < 0 || a >= n || b < 0 || b >= n)
      throw ConfigError("edge endpoint out of range");
    if (a == b) throw ConfigError("self-loops are not allowed");
    nbrs_[a].push_back(b);
    nbrs_[b].push_back(a);
  }
  edges_.clear();
  for (int i = 0; i < n; ++i) {
    nbrs_[i].push_back(i);
    std::sort(nbrs_[i].begin(), nbrs_[i].end());
    nbrs_[i].erase(std::unique(nbrs_[i].begin(), nbrs_[i].end()),
                   nbrs_[i].end());
    for (int j : nbrs_[i])
      if (j > i) edges_.emplace_back(i, j);
  }
}

bool Graph::has_edge(int i, int j) const {
  if (i == j) return false;
  const auto& nb = inclusive_neighborhood(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

int Graph::degree(int i) const {
  return static_cast<int>(inclusive_neighborhood(i).size()) - 1;
}

const std::vector<int>& Graph::inclusive_neighborhood(int i) const {
  if (i < 0 || i >= n_) throw std::out_of_range("node index out of range");
  return nbrs_[i];
}

bool Graph::connected() const {
  if (n_ == 0) return false;
  std::vector<char> seen(n_, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int visited = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : nbrs_[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++visited;
        q.push(v);
      }
    }
  }
  return visited == n_;
}

Graph Graph::chain(int n) {
  if (n < 2) throw ConfigError("chain graph needs n >= 2");
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return Graph(n, e);
}

Graph Graph::ring(int n) {
  if (n < 3) throw ConfigError("ring graph needs n >= 3");
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return Graph(n, e);
}

Graph Graph::complete(int n) {
  if (n < 1) throw ConfigError("complete graph needs n >= 1");
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return Graph(n, e);
}

Graph Graph::erdos_renyi(int n, double p, std::uint64_t seed, int max_retries) {
  if (n < 2) throw ConfigError("erdos_renyi needs n >= 2");
  if (p < 0.0 || p > 1.0) throw ConfigError("edge probability must be in [0,1]");
  Rng rng(seed);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.uniform() < p) e.emplace_back(i, j);
    Graph g(n, e);
    if (g.connected()) return g;
  }
  throw MaxRetriesExceeded("no connected G(" + std::to_string(n) + ", " +
                           std::to_string(p) + ") after " +
                           std::to_string(max_retries) +
                           " attempts; p is likely too small for n");
}

}  // namespace kdc
