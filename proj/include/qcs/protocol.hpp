#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qcs/digraph.hpp"
#include "qcs/rng.hpp"

namespace qcs {

/// An integer (mass, token-count) pair.
struct Mass {
  std::int64_t y = 0;
  std::int64_t z = 0;

  Mass& operator+=(const Mass& o) noexcept {
    y += o.y;
    z += o.z;
    return *this;
  }
  friend Mass operator+(Mass a, const Mass& b) noexcept { return a += b; }
  friend bool operator==(const Mass&, const Mass&) = default;
};

/// Protocol variables of one node.
///
/// Invariants once initialized: z >= 1, M >= m, and flag implies M - m <= 1
/// with q_s == m.
struct NodeState {
  NodeId id = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;
  std::int64_t y0_doubled = 0;
  std::int64_t M = 0;
  std::int64_t m = 0;
  std::int64_t q_s = 0;
  bool flag = false;

  Mass mass() const noexcept { return {y, z}; }
  friend bool operator==(const NodeState&, const NodeState&) = default;
};

/// A coalesced batch of pieces from `src` to one out-neighbor. c_z >= 1.
struct OutboundMessage {
  NodeId src = 0;
  NodeId dst = 0;
  std::int64_t c_y = 0;
  std::int64_t c_z = 0;

  friend bool operator==(const OutboundMessage&, const OutboundMessage&) = default;
};

struct VoteMessage {
  NodeId src = 0;
  std::int64_t M = 0;
  std::int64_t m = 0;
};

struct SplitResult {
  std::int64_t q_s = 0;  // ceil(y / z) at the moment of the split
  Mass kept;
  std::vector<OutboundMessage> outbound;  // ascending dst, self never included
  std::int64_t piece_low = 0;   // floor(y / z)
  std::int64_t piece_high = 0;  // ceil(y / z)
};

/// floor(y / z) and ceil(y / z) for y >= 0, z > 0.
std::int64_t floor_div(std::int64_t y, std::int64_t z);
std::int64_t ceil_div(std::int64_t y, std::int64_t z);

/// Doubles the initial pair. Rejects z0 < 1 and negative y0.
NodeState init_node(NodeId id, std::int64_t y0, std::int64_t z0);

/// Partitions y into z pieces of floor/ceil value (exactly y mod z large
/// ones), keeps one smallest piece, and routes every other piece to a
/// destination drawn from `row`. Pieces routed to the node itself are folded
/// into `kept`; pieces sharing a destination are coalesced.
///
/// Requires state.z > 1 and a row belonging to state.id.
SplitResult split_mass(const NodeState& state, const TransmissionRow& row, Rng& rng);

/// As split_mass but reuses `outbound` as the output buffer.
void split_mass_into(const NodeState& state, const TransmissionRow& row, Rng& rng,
                     SplitResult& result, std::vector<std::int64_t>& scratch_y,
                     std::vector<std::int64_t>& scratch_z);

/// y <- kept.y + sum c_y, z <- kept.z + sum c_z. Messages addressed
/// elsewhere raise RoutingError.
NodeState absorb(NodeState state, const Mass& kept, std::span<const OutboundMessage> received);

/// M <- ceil(y / z), m <- floor(y / z).
NodeState refresh_votes(NodeState state);

/// Max over M, min over m, including the node's own.
NodeState merge_votes(NodeState state, std::span<const VoteMessage> incoming);

/// Window-boundary check: M - m <= 1 sets q_s = m and raises the flag.
NodeState finalize_if_converged(NodeState state);

}  // namespace qcs
