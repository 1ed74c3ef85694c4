#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qcs/protocol.hpp"
#include "qcs/run.hpp"

namespace qcs {

/// Lockstep execution of the synchronous protocol.
///
/// Each call to step() runs one iteration k: vote refresh when
/// k mod D == 1, one hop of max/min flooding, mass splitting, delivery of
/// every piece into the k+1 state, and the termination check when
/// k mod D == 0. Nodes are processed in ascending id order, each drawing from
/// its own stream derived from (seed, node id), so a run is a pure function
/// of its configuration.
class SyncEngine {
 public:
  explicit SyncEngine(const SyncRunConfig& cfg);

  /// One iteration. No-op once every node is flagged.
  void step();

  bool finished() const noexcept { return flagged_ == static_cast<NodeId>(nodes_.size()); }
  std::int64_t steps_completed() const noexcept { return k_; }
  int window() const noexcept { return prepared_.window; }
  int graph_diameter() const noexcept { return prepared_.diameter; }

  std::span<const NodeState> nodes() const noexcept { return nodes_; }
  Mass total_mass() const noexcept;
  Mass initial_total() const noexcept { return initial_total_; }
  std::int64_t messages_emitted() const noexcept { return emitted_; }

  /// Summary of the run so far.
  RunOutcome outcome() const;

 private:
  void record();
  void audit_extrema();

  SyncRunConfig cfg_;
  detail::PreparedRun prepared_;
  TransmissionDistribution dist_;
  std::vector<NodeState> nodes_;
  std::vector<Rng> rngs_;
  std::vector<std::int64_t> flag_steps_;
  std::vector<TrajectoryRecord> trajectory_;

  std::int64_t k_ = 0;
  NodeId flagged_ = 0;
  std::int64_t termination_step_ = 0;
  std::int64_t emitted_ = 0;
  Mass initial_total_;

  // Window-initial extrema, for the vote-window audit.
  std::int64_t window_max_ = 0;
  std::int64_t window_min_ = 0;
  std::int64_t token_max_ = 0;
  std::int64_t token_min_ = 0;

  // Per-step scratch.
  std::vector<std::int64_t> snap_M_, snap_m_;
  std::vector<Mass> kept_;
  std::vector<std::vector<OutboundMessage>> inbox_;
  SplitResult split_;
  std::vector<std::int64_t> scratch_y_, scratch_z_;
};

RunOutcome run_sync(const SyncRunConfig& cfg);

}  // namespace qcs
