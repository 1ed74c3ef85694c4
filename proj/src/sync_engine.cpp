#include "qcs/sync_engine.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "qcs/errors.hpp"

namespace qcs {

namespace {

void check_conservation(const Mass& seen, const Mass& expected, std::int64_t k, const char* where) {
  if (seen != expected) {
    throw InvariantViolation("mass not conserved " + std::string(where) + " at step " +
                             std::to_string(k) + ": y " + std::to_string(seen.y) + " vs " +
                             std::to_string(expected.y) + ", z " + std::to_string(seen.z) +
                             " vs " + std::to_string(expected.z));
  }
}

}  // namespace

SyncEngine::SyncEngine(const SyncRunConfig& cfg)
    : cfg_(cfg),
      prepared_(detail::prepare_run(cfg, 1)),
      dist_(*cfg.graph),
      nodes_(detail::initial_states(cfg)) {
  const auto n = nodes_.size();
  rngs_.reserve(n);
  for (std::size_t j = 0; j < n; ++j) rngs_.push_back(make_stream(cfg_.seed, j, 0));
  flag_steps_.assign(n, -1);
  snap_M_.resize(n);
  snap_m_.resize(n);
  kept_.resize(n);
  inbox_.resize(n);
  initial_total_ = total_mass();
  token_max_ = std::numeric_limits<std::int64_t>::max();
  token_min_ = std::numeric_limits<std::int64_t>::min();
  if (cfg_.check_invariants) audit_extrema();
  if (cfg_.record_trajectory) record();
}

Mass SyncEngine::total_mass() const noexcept {
  Mass total;
  for (const auto& s : nodes_) total += s.mass();
  return total;
}

void SyncEngine::step() {
  if (finished()) return;
  const std::int64_t k = ++k_;
  const int window = prepared_.window;
  const Digraph& g = *prepared_.graph;
  const auto n = static_cast<NodeId>(nodes_.size());

  // 1) window-initial votes
  if ((k - 1) % window == 0) {
    window_max_ = std::numeric_limits<std::int64_t>::min();
    window_min_ = std::numeric_limits<std::int64_t>::max();
    for (auto& s : nodes_) {
      if (s.flag) continue;
      s = refresh_votes(s);
      window_max_ = std::max(window_max_, s.M);
      window_min_ = std::min(window_min_, s.m);
    }
  }

  // 2-4) one hop of max/min flooding from a snapshot of current votes
  for (NodeId j = 0; j < n; ++j) {
    snap_M_[j] = nodes_[j].M;
    snap_m_[j] = nodes_[j].m;
  }
  std::vector<VoteMessage> votes;
  for (NodeId j = 0; j < n; ++j) {
    if (nodes_[j].flag) continue;
    votes.clear();
    for (NodeId i : g.in_neighbors(j)) {
      if (!nodes_[i].flag) votes.push_back({i, snap_M_[i], snap_m_[i]});
    }
    nodes_[j] = merge_votes(nodes_[j], votes);
  }

  // 5) split and route
  for (auto& box : inbox_) box.clear();
  for (NodeId j = 0; j < n; ++j) {
    NodeState& s = nodes_[j];
    if (s.flag || s.z <= 1) {
      kept_[j] = s.mass();
      continue;
    }
    split_mass_into(s, dist_.row(j), rngs_[j], split_, scratch_y_, scratch_z_);
    s.q_s = split_.q_s;
    kept_[j] = split_.kept;
    emitted_ += static_cast<std::int64_t>(split_.outbound.size());
    for (const auto& msg : split_.outbound) inbox_[msg.dst].push_back(msg);
  }
  if (cfg_.check_invariants) {
    Mass in_transit;
    for (NodeId j = 0; j < n; ++j) {
      in_transit += kept_[j];
      for (const auto& msg : inbox_[j]) in_transit += Mass{msg.c_y, msg.c_z};
    }
    check_conservation(in_transit, initial_total_, k, "during transmission");
  }

  // 6) delivery into the k+1 state
  for (NodeId j = 0; j < n; ++j) nodes_[j] = absorb(nodes_[j], kept_[j], inbox_[j]);

  // 7) termination check
  if (k % window == 0) {
    const NodeId before = flagged_;
    for (NodeId j = 0; j < n; ++j) {
      NodeState& s = nodes_[j];
      if (s.flag) continue;
      if (cfg_.check_invariants && (s.M != window_max_ || s.m != window_min_)) {
        throw InvariantViolation("vote window too short at step " + std::to_string(k) +
                                 ": node " + std::to_string(j) + " holds (" +
                                 std::to_string(s.M) + "," + std::to_string(s.m) +
                                 "), global window extrema (" + std::to_string(window_max_) +
                                 "," + std::to_string(window_min_) + ")");
      }
      s = finalize_if_converged(s);
      if (s.flag) {
        flag_steps_[j] = k;
        ++flagged_;
      }
    }
    if (cfg_.check_invariants && flagged_ != before && flagged_ != n) {
      throw InvariantViolation("only " + std::to_string(flagged_) + " of " + std::to_string(n) +
                               " nodes terminated at step " + std::to_string(k));
    }
    if (finished()) termination_step_ = k;
  }

  if (cfg_.check_invariants) {
    check_conservation(total_mass(), initial_total_, k, "after delivery");
    audit_extrema();
  }
  if (cfg_.record_trajectory) record();
}

void SyncEngine::audit_extrema() {
  std::int64_t hi = std::numeric_limits<std::int64_t>::min();
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  for (const auto& s : nodes_) {
    if (s.z < 1) {
      throw InvariantViolation("node " + std::to_string(s.id) + " lost its last token");
    }
    if (s.M < s.m) {
      throw InvariantViolation("node " + std::to_string(s.id) + " has M < m");
    }
    hi = std::max(hi, ceil_div(s.y, s.z));
    lo = std::min(lo, floor_div(s.y, s.z));
  }
  if (hi > token_max_ || lo < token_min_) {
    throw InvariantViolation("token value range widened at step " + std::to_string(k_));
  }
  token_max_ = hi;
  token_min_ = lo;
}

void SyncEngine::record() {
  TrajectoryRecord rec;
  rec.step = k_;
  rec.nodes.reserve(nodes_.size());
  for (const auto& s : nodes_) rec.nodes.push_back({s.y, s.z, s.q_s, s.M, s.m, s.flag});
  trajectory_.push_back(std::move(rec));
}

RunOutcome SyncEngine::outcome() const {
  RunOutcome out;
  out.converged = finished();
  out.termination_step = termination_step_;
  out.steps_run = k_;
  out.window = prepared_.window;
  out.diameter = prepared_.diameter;
  out.final_states = nodes_;
  out.flag_steps = flag_steps_;
  out.messages_emitted = emitted_;
  out.trajectory = trajectory_;
  for (const auto& s : nodes_) {
    out.final_q_s.push_back(s.q_s);
    out.recovered.push_back(cfg_.recovery ? cfg_.recovery(s) : static_cast<double>(s.q_s));
  }
  return out;
}

RunOutcome run_sync(const SyncRunConfig& cfg) {
  SyncEngine engine(cfg);
  while (!engine.finished() && engine.steps_completed() < cfg.max_steps) engine.step();
  return engine.outcome();
}

}  // namespace qcs
