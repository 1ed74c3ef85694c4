#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "qcs/digraph.hpp"
#include "qcs/protocol.hpp"

namespace qcs {

/// A node's undoubled initial pair (y_j[0], z_j[0]).
struct InitialValue {
  std::int64_t y0 = 0;
  std::int64_t z0 = 1;
};

/// Maps a terminated node to its application-level answer.
using RecoveryRule = std::function<double(const NodeState&)>;

struct SyncRunConfig {
  std::shared_ptr<const Digraph> graph;
  std::vector<InitialValue> initial;
  /// Vote window length D'. Zero means "use the exact diameter".
  int window = 0;
  std::uint64_t seed = 0;
  std::int64_t max_steps = 100000;
  bool record_trajectory = false;
  /// Per-step audits (conservation, vote windows, flag simultaneity).
  /// Failures throw InvariantViolation.
  bool check_invariants = false;
  RecoveryRule recovery;  // empty: report q_s
};

struct NodeSnapshot {
  std::int64_t y = 0;
  std::int64_t z = 0;
  std::int64_t q_s = 0;
  std::int64_t M = 0;
  std::int64_t m = 0;
  bool flag = false;
};

/// State after `step` completed iterations (step 0 is the initial state).
/// For the asynchronous engine y/z include the node's processing buffer.
struct TrajectoryRecord {
  std::int64_t step = 0;
  std::vector<NodeSnapshot> nodes;
  std::int64_t inflight_y = 0;
  std::int64_t inflight_z = 0;
  std::size_t inflight_count = 0;
};

struct RunOutcome {
  bool converged = false;
  /// Step at which every flag was set; 0 when not converged.
  std::int64_t termination_step = 0;
  std::int64_t steps_run = 0;
  int window = 0;
  int diameter = 0;
  std::vector<std::int64_t> final_q_s;
  std::vector<double> recovered;
  /// Full per-node state at the end of the run; doubles as the
  /// non-convergence report.
  std::vector<NodeState> final_states;
  /// Step at which each node raised its flag, -1 if never.
  std::vector<std::int64_t> flag_steps;
  std::int64_t messages_emitted = 0;
  std::vector<TrajectoryRecord> trajectory;
};

namespace detail {

/// Validated, fully-resolved run parameters shared by both engines.
struct PreparedRun {
  std::shared_ptr<const Digraph> graph;
  int diameter = 0;
  int window = 0;
};

PreparedRun prepare_run(const SyncRunConfig& cfg, int window_multiplier);

std::vector<NodeState> initial_states(const SyncRunConfig& cfg);

}  // namespace detail

}  // namespace qcs
