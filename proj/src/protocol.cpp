#include "qcs/protocol.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "qcs/errors.hpp"

namespace qcs {

std::int64_t floor_div(std::int64_t y, std::int64_t z) {
  if (z <= 0) throw InvariantViolation("division by non-positive token count z=" + std::to_string(z));
  const std::int64_t q = y / z;
  return (y % z != 0 && y < 0) ? q - 1 : q;
}

std::int64_t ceil_div(std::int64_t y, std::int64_t z) {
  if (z <= 0) throw InvariantViolation("division by non-positive token count z=" + std::to_string(z));
  const std::int64_t q = y / z;
  return (y % z != 0 && y > 0) ? q + 1 : q;
}

NodeState init_node(NodeId id, std::int64_t y0, std::int64_t z0) {
  if (z0 < 1) {
    throw InvalidInitialization("node " + std::to_string(id) + ": z0=" + std::to_string(z0) +
                                " but every node needs at least one token");
  }
  if (y0 < 0) {
    throw InvalidInitialization("node " + std::to_string(id) + ": negative y0=" +
                                std::to_string(y0) + " is not supported");
  }
  NodeState s;
  s.id = id;
  s.y = 2 * y0;
  s.z = 2 * z0;
  s.y0_doubled = s.y;
  s.q_s = ceil_div(s.y, s.z);
  return s;
}

void split_mass_into(const NodeState& state, const TransmissionRow& row, Rng& rng,
                     SplitResult& result, std::vector<std::int64_t>& acc_y,
                     std::vector<std::int64_t>& acc_z) {
  if (state.z <= 1) {
    throw ContractViolation("split_mass called with z=" + std::to_string(state.z) +
                            " at node " + std::to_string(state.id));
  }
  if (state.y < 0) {
    throw ContractViolation("split_mass called with negative y at node " +
                            std::to_string(state.id));
  }
  if (row.node != state.id ||
      !std::binary_search(row.support.begin(), row.support.end(), state.id)) {
    throw TopologyError("transmission row for node " + std::to_string(row.node) +
                        " used at node " + std::to_string(state.id));
  }

  const std::int64_t low = state.y / state.z;
  const std::int64_t large = state.y % state.z;
  result.piece_low = low;
  result.piece_high = large > 0 ? low + 1 : low;
  result.q_s = result.piece_high;
  result.outbound.clear();

  // One small piece stays put; large < z guarantees a small piece exists.
  const std::int64_t small_routed = state.z - 1 - large;
  const std::size_t width = row.support.size();
  acc_y.assign(width, 0);
  acc_z.assign(width, 0);

  std::uniform_int_distribution<std::size_t> pick(0, width - 1);
  for (std::int64_t i = 0; i < large; ++i) {
    const std::size_t slot = pick(rng);
    acc_y[slot] += low + 1;
    acc_z[slot] += 1;
  }
  for (std::int64_t i = 0; i < small_routed; ++i) {
    const std::size_t slot = pick(rng);
    acc_y[slot] += low;
    acc_z[slot] += 1;
  }

  result.kept = {low, 1};
  for (std::size_t slot = 0; slot < width; ++slot) {
    if (acc_z[slot] == 0) continue;
    const NodeId dst = row.support[slot];
    if (dst == state.id) {
      result.kept += Mass{acc_y[slot], acc_z[slot]};
    } else {
      result.outbound.push_back({state.id, dst, acc_y[slot], acc_z[slot]});
    }
  }
}

SplitResult split_mass(const NodeState& state, const TransmissionRow& row, Rng& rng) {
  SplitResult result;
  std::vector<std::int64_t> acc_y;
  std::vector<std::int64_t> acc_z;
  split_mass_into(state, row, rng, result, acc_y, acc_z);
  return result;
}

NodeState absorb(NodeState state, const Mass& kept, std::span<const OutboundMessage> received) {
  state.y = kept.y;
  state.z = kept.z;
  for (const auto& msg : received) {
    if (msg.dst != state.id) {
      throw RoutingError("message from " + std::to_string(msg.src) + " addressed to " +
                         std::to_string(msg.dst) + " delivered to node " +
                         std::to_string(state.id));
    }
    state.y += msg.c_y;
    state.z += msg.c_z;
  }
  return state;
}

NodeState refresh_votes(NodeState state) {
  state.M = ceil_div(state.y, state.z);
  state.m = floor_div(state.y, state.z);
  return state;
}

NodeState merge_votes(NodeState state, std::span<const VoteMessage> incoming) {
  for (const auto& vote : incoming) {
    state.M = std::max(state.M, vote.M);
    state.m = std::min(state.m, vote.m);
  }
  return state;
}

NodeState finalize_if_converged(NodeState state) {
  if (state.M - state.m <= 1) {
    state.q_s = state.m;
    state.flag = true;
  }
  return state;
}

}  // namespace qcs
