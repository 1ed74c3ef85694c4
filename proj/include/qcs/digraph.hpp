#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace qcs {

using NodeId = std::int32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Static directed communication topology over dense node ids 0..n-1.
///
/// Construction only checks well-formedness (ids in range, no self-loops, no
/// duplicate edges). Strong connectivity is a property checked separately
/// since `is_strongly_connected` must accept arbitrary candidates; the
/// generator and the engines enforce it.
class Digraph {
 public:
  Digraph() = default;

  /// Throws TopologyError on out-of-range ids, self-loops or repeated edges.
  static Digraph from_edges(NodeId n, std::span<const Edge> edges);

  NodeId size() const noexcept { return static_cast<NodeId>(out_.size()); }
  std::size_t edge_count() const noexcept { return edge_count_; }

  /// Sorted ascending.
  std::span<const NodeId> out_neighbors(NodeId v) const { return out_.at(v); }
  std::span<const NodeId> in_neighbors(NodeId v) const { return in_.at(v); }

  int out_degree(NodeId v) const { return static_cast<int>(out_.at(v).size()); }
  int max_out_degree() const noexcept;

  bool has_edge(NodeId src, NodeId dst) const;
  std::vector<Edge> edges() const;

  friend bool operator==(const Digraph&, const Digraph&) = default;

 private:
  std::vector<std::vector<NodeId>> out_;
  std::vector<std::vector<NodeId>> in_;
  std::size_t edge_count_ = 0;
};

/// Forward traversal from node 0 plus one on the transpose.
bool is_strongly_connected(const Digraph& g);

/// Longest shortest directed path over ordered pairs, by BFS from every node.
/// Throws TopologyError if some pair is unreachable.
int diameter(const Digraph& g);

/// Erdős–Rényi style digraph: every ordered pair (i, j), i != j, carries an
/// edge independently with probability `edge_prob`. Draws that are not
/// strongly connected are rejected; after `max_retries` rejections a
/// GenerationError is thrown.
Digraph generate_random_digraph(NodeId n, double edge_prob, std::uint64_t seed,
                                int max_retries = 1000);

/// One node's routing row: uniform over itself and its out-neighbors.
struct TransmissionRow {
  NodeId node = 0;
  std::vector<NodeId> support;  // ascending, includes `node`

  /// Every supported entry equals 1 / denominator().
  std::int64_t denominator() const noexcept { return static_cast<std::int64_t>(support.size()); }
  double probability(NodeId target) const;
};

class TransmissionDistribution {
 public:
  explicit TransmissionDistribution(const Digraph& g);

  const TransmissionRow& row(NodeId v) const { return rows_.at(v); }
  NodeId size() const noexcept { return static_cast<NodeId>(rows_.size()); }

 private:
  std::vector<TransmissionRow> rows_;
};

inline TransmissionDistribution transmission_distribution(const Digraph& g) {
  return TransmissionDistribution(g);
}

/// Edge-list text format: first line "n m", then m lines "src dst".
Digraph read_edge_list(std::istream& in);
void write_edge_list(std::ostream& out, const Digraph& g);

}  // namespace qcs
