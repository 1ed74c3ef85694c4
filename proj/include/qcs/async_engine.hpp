#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "qcs/protocol.hpp"
#include "qcs/run.hpp"

namespace qcs {

/// Bounded processing-time distribution over {1, ..., B}.
///
/// Holds either one pmf shared by every node or one pmf per node.
/// pmf[λ-1] is the probability of a λ-step processing cycle.
class DelayModel {
 public:
  DelayModel() = default;
  DelayModel(int max_delay, std::vector<std::vector<double>> pmfs);

  /// Shared uniform pmf over {1..B}.
  static DelayModel uniform(int max_delay);

  int max_delay() const noexcept { return max_delay_; }
  bool per_node() const noexcept { return pmfs_.size() > 1; }
  std::span<const double> pmf(NodeId node) const;
  double probability(NodeId node, int delay) const;

  /// Smallest probability, over nodes, of needing the full B steps.
  double min_full_delay_probability() const;

  /// Throws ContractViolation unless the model is usable on an n-node graph.
  void validate(NodeId n) const;

 private:
  int max_delay_ = 1;
  std::vector<std::vector<double>> pmfs_{{1.0}};
};

struct AsyncRunConfig {
  SyncRunConfig base;
  DelayModel delay;
};

/// Pieces from one processing cycle, held by the sender until released.
struct InFlightEntry {
  OutboundMessage message;
  std::int64_t sent_step = 0;   // step at which the split happened
  std::int64_t ready_step = 0;  // first state index that contains the piece
  std::int64_t piece_low = 0;
  std::int64_t piece_high = 0;
};

/// Asynchronous execution with bounded random processing delays.
///
/// A node that is not busy starts a processing cycle: it merges the votes
/// of its in-neighbors (its update instant), splits its stored mass, keeps
/// its own share, and draws a delay λ. The routed pieces stay in its
/// processing buffer and are released at the end of step k + λ - 1, so the
/// receiver sees them in its k + λ state. Mass that arrives while a node is
/// busy waits for its next cycle. Votes refresh every D·B steps from the
/// node's held mass (stored plus buffered) and the termination check runs
/// at k mod D·B == 0.
///
/// With B = 1 every cycle lasts one step and a run reproduces the
/// synchronous engine bit for bit.
class AsyncEngine {
 public:
  explicit AsyncEngine(const AsyncRunConfig& cfg);

  void step();

  bool finished() const noexcept { return flagged_ == static_cast<NodeId>(nodes_.size()); }
  std::int64_t steps_completed() const noexcept { return k_; }
  int window() const noexcept { return prepared_.window; }
  int graph_diameter() const noexcept { return prepared_.diameter; }

  std::span<const NodeState> nodes() const noexcept { return nodes_; }
  /// Stored plus buffered mass of one node.
  Mass held_mass(NodeId node) const;
  std::vector<InFlightEntry> in_flight() const;
  Mass total_mass() const noexcept;
  Mass initial_total() const noexcept { return initial_total_; }
  std::int64_t messages_emitted() const noexcept { return emitted_; }

  RunOutcome outcome() const;

 private:
  struct Cycle {
    std::int64_t end = 0;  // last step of the current processing cycle
    std::vector<InFlightEntry> pending;
    Mass pending_total;
  };

  void record();
  void audit_extrema();

  AsyncRunConfig cfg_;
  detail::PreparedRun prepared_;
  TransmissionDistribution dist_;
  std::vector<NodeState> nodes_;
  std::vector<Cycle> cycles_;
  std::vector<Rng> route_rngs_;
  std::vector<Rng> delay_rngs_;
  std::vector<std::discrete_distribution<int>> delay_draw_;
  std::vector<std::int64_t> flag_steps_;
  std::vector<TrajectoryRecord> trajectory_;

  std::int64_t k_ = 0;
  NodeId flagged_ = 0;
  std::int64_t termination_step_ = 0;
  std::int64_t emitted_ = 0;
  Mass initial_total_;

  std::int64_t window_max_ = 0;
  std::int64_t window_min_ = 0;
  std::int64_t token_max_ = 0;
  std::int64_t token_min_ = 0;

  std::vector<std::int64_t> snap_M_, snap_m_;
  SplitResult split_;
  std::vector<std::int64_t> scratch_y_, scratch_z_;
};

/// Merge step at a node's update instant: every vote that arrived since its
/// previous update joins the max/min.
NodeState async_vote_round(NodeState node, std::span<const VoteMessage> arrived);

RunOutcome run_async(const AsyncRunConfig& cfg);

}  // namespace qcs
