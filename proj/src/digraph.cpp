#include "qcs/digraph.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <string>

#include "qcs/errors.hpp"
#include "qcs/rng.hpp"

namespace qcs {

namespace {

std::vector<int> bfs_distances(const std::vector<std::vector<NodeId>>& adj, NodeId source) {
  std::vector<int> dist(adj.size(), -1);
  std::queue<NodeId> frontier;
  dist[source] = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    const NodeId v = frontier.front();
    frontier.pop();
    for (NodeId w : adj[v]) {
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        frontier.push(w);
      }
    }
  }
  return dist;
}

bool reaches_all(const Digraph& g, bool transpose) {
  const NodeId n = g.size();
  std::vector<char> seen(n, 0);
  std::vector<NodeId> stack{0};
  seen[0] = 1;
  NodeId count = 1;
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    for (NodeId w : transpose ? g.in_neighbors(v) : g.out_neighbors(v)) {
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == n;
}

}  // namespace

Digraph Digraph::from_edges(NodeId n, std::span<const Edge> edges) {
  if (n < 1) {
    throw TopologyError("digraph needs at least one node, got n=" + std::to_string(n));
  }
  Digraph g;
  g.out_.assign(n, {});
  g.in_.assign(n, {});
  for (const auto& [src, dst] : edges) {
    if (src < 0 || src >= n || dst < 0 || dst >= n) {
      throw TopologyError("edge (" + std::to_string(src) + "," + std::to_string(dst) +
                          ") out of range for n=" + std::to_string(n));
    }
    if (src == dst) {
      throw TopologyError("self-loop at node " + std::to_string(src));
    }
    g.out_[src].push_back(dst);
    g.in_[dst].push_back(src);
  }
  for (NodeId v = 0; v < n; ++v) {
    std::sort(g.out_[v].begin(), g.out_[v].end());
    std::sort(g.in_[v].begin(), g.in_[v].end());
    if (std::adjacent_find(g.out_[v].begin(), g.out_[v].end()) != g.out_[v].end()) {
      throw TopologyError("duplicate edge out of node " + std::to_string(v));
    }
  }
  g.edge_count_ = edges.size();
  return g;
}

int Digraph::max_out_degree() const noexcept {
  std::size_t best = 0;
  for (const auto& nbrs : out_) best = std::max(best, nbrs.size());
  return static_cast<int>(best);
}

bool Digraph::has_edge(NodeId src, NodeId dst) const {
  const auto& nbrs = out_.at(src);
  return std::binary_search(nbrs.begin(), nbrs.end(), dst);
}

std::vector<Edge> Digraph::edges() const {
  std::vector<Edge> result;
  result.reserve(edge_count_);
  for (NodeId v = 0; v < size(); ++v) {
    for (NodeId w : out_[v]) result.emplace_back(v, w);
  }
  return result;
}

bool is_strongly_connected(const Digraph& g) {
  if (g.size() == 0) return false;
  return reaches_all(g, false) && reaches_all(g, true);
}

int diameter(const Digraph& g) {
  const NodeId n = g.size();
  std::vector<std::vector<NodeId>> adj(n);
  for (NodeId v = 0; v < n; ++v) {
    auto nbrs = g.out_neighbors(v);
    adj[v].assign(nbrs.begin(), nbrs.end());
  }
  int longest = 0;
  for (NodeId s = 0; s < n; ++s) {
    const auto dist = bfs_distances(adj, s);
    for (NodeId t = 0; t < n; ++t) {
      if (dist[t] < 0) {
        throw TopologyError("infinite distance from node " + std::to_string(s) + " to node " +
                            std::to_string(t) + ": graph is not strongly connected");
      }
      longest = std::max(longest, dist[t]);
    }
  }
  return longest;
}

Digraph generate_random_digraph(NodeId n, double edge_prob, std::uint64_t seed,
                                int max_retries) {
  if (n < 2) {
    throw ContractViolation("generate_random_digraph requires n >= 2, got " + std::to_string(n));
  }
  if (!(edge_prob > 0.0 && edge_prob <= 1.0)) {
    throw ContractViolation("edge_prob must lie in (0, 1], got " + std::to_string(edge_prob));
  }
  Rng rng = make_stream(seed, 0x6772617068ULL);  // "graph"
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<Edge> edges;
  for (int attempt = 0; attempt < std::max(max_retries, 1); ++attempt) {
    edges.clear();
    for (NodeId i = 0; i < n; ++i) {
      for (NodeId j = 0; j < n; ++j) {
        if (i != j && coin(rng) < edge_prob) edges.emplace_back(i, j);
      }
    }
    Digraph g = Digraph::from_edges(n, edges);
    if (is_strongly_connected(g)) return g;
  }
  std::ostringstream msg;
  msg << "no strongly connected draw for n=" << n << ", edge_prob=" << edge_prob
      << " within max_retries=" << max_retries;
  throw GenerationError(msg.str());
}

double TransmissionRow::probability(NodeId target) const {
  if (std::binary_search(support.begin(), support.end(), target)) {
    return 1.0 / static_cast<double>(support.size());
  }
  return 0.0;
}

TransmissionDistribution::TransmissionDistribution(const Digraph& g) {
  rows_.resize(g.size());
  for (NodeId v = 0; v < g.size(); ++v) {
    auto& row = rows_[v];
    row.node = v;
    auto nbrs = g.out_neighbors(v);
    row.support.assign(nbrs.begin(), nbrs.end());
    row.support.insert(std::upper_bound(row.support.begin(), row.support.end(), v), v);
  }
}

Digraph read_edge_list(std::istream& in) {
  long long n = 0;
  long long m = 0;
  if (!(in >> n >> m) || n < 1 || m < 0) {
    throw TopologyError("edge list: expected header line \"n m\"");
  }
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(m));
  for (long long i = 0; i < m; ++i) {
    long long src = 0;
    long long dst = 0;
    if (!(in >> src >> dst)) {
      throw TopologyError("edge list: expected " + std::to_string(m) + " edges, read " +
                          std::to_string(i));
    }
    edges.emplace_back(static_cast<NodeId>(src), static_cast<NodeId>(dst));
  }
  return Digraph::from_edges(static_cast<NodeId>(n), edges);
}

void write_edge_list(std::ostream& out, const Digraph& g) {
  out << g.size() << ' ' << g.edge_count() << '\n';
  for (const auto& [src, dst] : g.edges()) out << src << ' ' << dst << '\n';
}

}  // namespace qcs
