#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qcs/bounds.hpp"
#include "qcs/rng.hpp"
#include "qcs/run.hpp"

namespace qcs {

/// Which initial mapping to use where the prose and the closed-form optimum
/// disagree. `closed_form` makes sum(y0) / sum(z0) equal the optimum exactly;
/// `literal` reproduces the text's mapping for comparison runs.
enum class InitMapping { closed_form, literal };

// ---------------------------------------------------------------------------
// Generic quadratic costs f_i(x) = a_i (x - rho_i)^2 / 2

struct QuadraticInstance {
  std::vector<std::int64_t> alpha;  // >= 1
  std::vector<std::int64_t> rho;    // >= 0
};

/// Closed form: y0 = alpha * rho, z0 = alpha. Literal: z0 = rho.
std::vector<InitialValue> generic_init(const QuadraticInstance& inst,
                                       InitMapping mapping = InitMapping::closed_form);

/// sum(alpha * rho) / sum(alpha).
Rational generic_optimum(const QuadraticInstance& inst);

// ---------------------------------------------------------------------------
// Data-center task scheduling

struct SchedulingInstance {
  std::vector<std::int64_t> load;      // l_j, task workload arriving at node j
  std::vector<std::int64_t> occupied;  // u_j
  std::vector<std::int64_t> capacity;  // pi_j^max

  std::size_t size() const noexcept { return capacity.size(); }
  std::int64_t total_demand() const;     // sum l
  std::int64_t total_available() const;  // sum (pi - u)
};

struct SchedulingInit {
  std::vector<InitialValue> initial;
  /// Nodes with l + u == 0 that were given a single token.
  std::vector<NodeId> zero_demand_nodes;
};

/// y0 = pi_max, z0 = l + u (1 for idle nodes). Throws CapacityExceeded when
/// demand exceeds available capacity.
SchedulingInit scheduling_init(const SchedulingInstance& inst);

/// Target workload for node j given the terminal quotient:
/// round(pi_j / q_s) - u_j, halves rounded down. May be negative (shed load).
std::int64_t scheduling_recover(NodeId node, std::int64_t q_s, const SchedulingInstance& inst);

/// Balanced utilization (rho + u_tot) / pi_max and the exact workloads
/// x* pi_j - u_j.
Rational scheduling_utilization(const SchedulingInstance& inst);
std::vector<Rational> scheduling_exact_workloads(const SchedulingInstance& inst);

RecoveryRule scheduling_recovery(SchedulingInstance inst);

/// Loads uniform in [load_lo, load_hi], no occupied cycles, capacities
/// alternating low (even ids) / high (odd ids).
SchedulingInstance random_scheduling_instance(NodeId n, std::int64_t load_lo,
                                              std::int64_t load_hi,
                                              std::int64_t occupied_lo, std::int64_t occupied_hi,
                                              std::int64_t capacity_even,
                                              std::int64_t capacity_odd, Rng& rng);

// ---------------------------------------------------------------------------
// Federated aggregation

struct FederatedInstance {
  std::vector<std::int64_t> dataset_size;  // |R_j| >= 1
  std::vector<std::int64_t> local_param;   // W_j, quantized

  std::size_t size() const noexcept { return dataset_size.size(); }
};

/// Closed form: y0 = |R| W, z0 = |R|. Literal: y0 = W.
std::vector<InitialValue> federated_init(const FederatedInstance& inst,
                                         InitMapping mapping = InitMapping::closed_form);

/// Dataset-size-weighted mean of the local parameters.
Rational federated_optimum(const FederatedInstance& inst);

/// The terminal quotient is the aggregate.
inline double federated_recover(std::int64_t q_s) { return static_cast<double>(q_s); }

FederatedInstance random_federated_instance(NodeId n, std::int64_t size_lo, std::int64_t size_hi,
                                            std::int64_t param_lo, std::int64_t param_hi,
                                            Rng& rng);

/// sum(y0) / sum(z0).
Rational quotient_of(std::span<const InitialValue> initial);

double to_double(const Rational& q);

}  // namespace qcs
