#include "qcs/async_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "qcs/errors.hpp"

namespace qcs {

DelayModel::DelayModel(int max_delay, std::vector<std::vector<double>> pmfs)
    : max_delay_(max_delay), pmfs_(std::move(pmfs)) {
  if (max_delay_ < 1) {
    throw ContractViolation("delay bound B must be positive, got " + std::to_string(max_delay_));
  }
  if (pmfs_.empty()) throw ContractViolation("delay model needs at least one pmf");
  for (std::size_t i = 0; i < pmfs_.size(); ++i) {
    const auto& pmf = pmfs_[i];
    if (pmf.size() != static_cast<std::size_t>(max_delay_)) {
      throw ContractViolation("pmf " + std::to_string(i) + " has " + std::to_string(pmf.size()) +
                              " entries, expected B=" + std::to_string(max_delay_));
    }
    double total = 0.0;
    for (double p : pmf) {
      if (!(p >= 0.0)) throw ContractViolation("pmf " + std::to_string(i) + " has a negative entry");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ContractViolation("pmf " + std::to_string(i) + " sums to " + std::to_string(total));
    }
  }
}

DelayModel DelayModel::uniform(int max_delay) {
  if (max_delay < 1) {
    throw ContractViolation("delay bound B must be positive, got " + std::to_string(max_delay));
  }
  return DelayModel(max_delay, {std::vector<double>(max_delay, 1.0 / max_delay)});
}

std::span<const double> DelayModel::pmf(NodeId node) const {
  return per_node() ? pmfs_.at(node) : pmfs_.front();
}

double DelayModel::probability(NodeId node, int delay) const {
  if (delay < 1 || delay > max_delay_) return 0.0;
  return pmf(node)[delay - 1];
}

double DelayModel::min_full_delay_probability() const {
  double best = 1.0;
  for (const auto& pmf : pmfs_) best = std::min(best, pmf.back());
  return best;
}

void DelayModel::validate(NodeId n) const {
  if (per_node() && pmfs_.size() != static_cast<std::size_t>(n)) {
    throw ContractViolation("delay model has " + std::to_string(pmfs_.size()) +
                            " per-node pmfs for a graph of " + std::to_string(n) + " nodes");
  }
}

NodeState async_vote_round(NodeState node, std::span<const VoteMessage> arrived) {
  return merge_votes(node, arrived);
}

AsyncEngine::AsyncEngine(const AsyncRunConfig& cfg)
    : cfg_(cfg),
      prepared_(detail::prepare_run(cfg.base, cfg.delay.max_delay())),
      dist_(*cfg.base.graph),
      nodes_(detail::initial_states(cfg.base)) {
  const auto n = static_cast<NodeId>(nodes_.size());
  cfg_.delay.validate(n);
  cycles_.resize(n);
  route_rngs_.reserve(n);
  delay_rngs_.reserve(n);
  delay_draw_.reserve(n);
  for (NodeId j = 0; j < n; ++j) {
    // Routing streams match the synchronous engine's.
    route_rngs_.push_back(make_stream(cfg_.base.seed, j, 0));
    delay_rngs_.push_back(make_stream(cfg_.base.seed, j, 1));
    const auto pmf = cfg_.delay.pmf(j);
    delay_draw_.emplace_back(pmf.begin(), pmf.end());
  }
  flag_steps_.assign(n, -1);
  snap_M_.resize(n);
  snap_m_.resize(n);
  initial_total_ = total_mass();
  token_max_ = std::numeric_limits<std::int64_t>::max();
  token_min_ = std::numeric_limits<std::int64_t>::min();
  if (cfg_.base.check_invariants) audit_extrema();
  if (cfg_.base.record_trajectory) record();
}

Mass AsyncEngine::held_mass(NodeId node) const {
  return nodes_.at(node).mass() + cycles_.at(node).pending_total;
}

std::vector<InFlightEntry> AsyncEngine::in_flight() const {
  std::vector<InFlightEntry> all;
  for (const auto& c : cycles_) all.insert(all.end(), c.pending.begin(), c.pending.end());
  return all;
}

Mass AsyncEngine::total_mass() const noexcept {
  Mass total;
  for (std::size_t j = 0; j < nodes_.size(); ++j) {
    total += nodes_[j].mass();
    total += cycles_[j].pending_total;
  }
  return total;
}

void AsyncEngine::step() {
  if (finished()) return;
  const std::int64_t k = ++k_;
  const int window = prepared_.window;
  const Digraph& g = *prepared_.graph;
  const auto n = static_cast<NodeId>(nodes_.size());
  const bool audit = cfg_.base.check_invariants;

  // 1) window-initial votes from held mass
  if ((k - 1) % window == 0) {
    window_max_ = std::numeric_limits<std::int64_t>::min();
    window_min_ = std::numeric_limits<std::int64_t>::max();
    for (NodeId j = 0; j < n; ++j) {
      NodeState& s = nodes_[j];
      if (s.flag) continue;
      NodeState held = s;
      const Mass total = held_mass(j);
      held.y = total.y;
      held.z = total.z;
      held = refresh_votes(held);
      s.M = held.M;
      s.m = held.m;
      window_max_ = std::max(window_max_, s.M);
      window_min_ = std::min(window_min_, s.m);
    }
  }

  // 2-4) update instants: idle nodes merge what their in-neighbors hold
  for (NodeId j = 0; j < n; ++j) {
    snap_M_[j] = nodes_[j].M;
    snap_m_[j] = nodes_[j].m;
  }
  std::vector<VoteMessage> votes;
  for (NodeId j = 0; j < n; ++j) {
    if (nodes_[j].flag || cycles_[j].end >= k) continue;
    votes.clear();
    for (NodeId i : g.in_neighbors(j)) {
      if (!nodes_[i].flag) votes.push_back({i, snap_M_[i], snap_m_[i]});
    }
    nodes_[j] = async_vote_round(nodes_[j], votes);
  }

  // 5) idle nodes begin a processing cycle
  for (NodeId j = 0; j < n; ++j) {
    NodeState& s = nodes_[j];
    Cycle& cycle = cycles_[j];
    if (s.flag || cycle.end >= k) continue;
    const int delay = delay_draw_[j](delay_rngs_[j]) + 1;
    cycle.end = k + delay - 1;
    if (s.z <= 1) continue;
    split_mass_into(s, dist_.row(j), route_rngs_[j], split_, scratch_y_, scratch_z_);
    s.q_s = split_.q_s;
    s.y = split_.kept.y;
    s.z = split_.kept.z;
    cycle.pending.clear();
    cycle.pending_total = {};
    for (const auto& msg : split_.outbound) {
      cycle.pending.push_back({msg, k, k + delay, split_.piece_low, split_.piece_high});
      cycle.pending_total += Mass{msg.c_y, msg.c_z};
    }
  }

  // 6) cycles ending now release their pieces into the k+1 state
  for (NodeId j = 0; j < n; ++j) {
    Cycle& cycle = cycles_[j];
    if (nodes_[j].flag || cycle.end != k || cycle.pending.empty()) continue;
    for (const auto& entry : cycle.pending) {
      NodeState& dst = nodes_[entry.message.dst];
      dst = absorb(dst, dst.mass(), std::span(&entry.message, 1));
    }
    emitted_ += static_cast<std::int64_t>(cycle.pending.size());
    cycle.pending.clear();
    cycle.pending_total = {};
  }

  // 7) termination check
  if (k % window == 0) {
    const NodeId before = flagged_;
    for (NodeId j = 0; j < n; ++j) {
      NodeState& s = nodes_[j];
      if (s.flag) continue;
      if (audit && (s.M != window_max_ || s.m != window_min_)) {
        throw InvariantViolation("asynchronous vote window too short at step " +
                                 std::to_string(k) + ": node " + std::to_string(j) +
                                 " holds (" + std::to_string(s.M) + "," + std::to_string(s.m) +
                                 "), global window extrema (" + std::to_string(window_max_) +
                                 "," + std::to_string(window_min_) + ")");
      }
      s = finalize_if_converged(s);
      if (s.flag) {
        flag_steps_[j] = k;
        ++flagged_;
      }
    }
    if (audit && flagged_ != before && flagged_ != n) {
      throw InvariantViolation("only " + std::to_string(flagged_) + " of " + std::to_string(n) +
                               " nodes terminated at step " + std::to_string(k));
    }
    if (finished()) termination_step_ = k;
  }

  if (audit) {
    const Mass total = total_mass();
    if (total != initial_total_) {
      throw InvariantViolation("mass not conserved at step " + std::to_string(k) + ": y " +
                               std::to_string(total.y) + " vs " +
                               std::to_string(initial_total_.y) + ", z " +
                               std::to_string(total.z) + " vs " +
                               std::to_string(initial_total_.z));
    }
    audit_extrema();
  }
  if (cfg_.base.record_trajectory) record();
}

void AsyncEngine::audit_extrema() {
  std::int64_t hi = std::numeric_limits<std::int64_t>::min();
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  for (std::size_t j = 0; j < nodes_.size(); ++j) {
    const NodeState& s = nodes_[j];
    if (s.z < 1) throw InvariantViolation("node " + std::to_string(j) + " lost its last token");
    if (s.M < s.m) throw InvariantViolation("node " + std::to_string(j) + " has M < m");
    hi = std::max(hi, ceil_div(s.y, s.z));
    lo = std::min(lo, floor_div(s.y, s.z));
    for (const auto& entry : cycles_[j].pending) {
      if (entry.ready_step - entry.sent_step < 1 ||
          entry.ready_step - entry.sent_step > cfg_.delay.max_delay()) {
        throw InvariantViolation("in-flight entry outside the delay bound");
      }
      hi = std::max(hi, entry.piece_high);
      lo = std::min(lo, entry.piece_low);
    }
  }
  if (hi > token_max_ || lo < token_min_) {
    throw InvariantViolation("token value range widened at step " + std::to_string(k_));
  }
  token_max_ = hi;
  token_min_ = lo;
}

void AsyncEngine::record() {
  TrajectoryRecord rec;
  rec.step = k_;
  rec.nodes.reserve(nodes_.size());
  for (std::size_t j = 0; j < nodes_.size(); ++j) {
    const NodeState& s = nodes_[j];
    const Mass held = held_mass(static_cast<NodeId>(j));
    rec.nodes.push_back({held.y, held.z, s.q_s, s.M, s.m, s.flag});
    rec.inflight_y += cycles_[j].pending_total.y;
    rec.inflight_z += cycles_[j].pending_total.z;
    rec.inflight_count += cycles_[j].pending.size();
  }
  trajectory_.push_back(std::move(rec));
}

RunOutcome AsyncEngine::outcome() const {
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
  const auto& recovery = cfg_.base.recovery;
  for (const auto& s : nodes_) {
    out.final_q_s.push_back(s.q_s);
    out.recovered.push_back(recovery ? recovery(s) : static_cast<double>(s.q_s));
  }
  return out;
}

RunOutcome run_async(const AsyncRunConfig& cfg) {
  AsyncEngine engine(cfg);
  while (!engine.finished() && engine.steps_completed() < cfg.base.max_steps) engine.step();
  return engine.outcome();
}

}  // namespace qcs
