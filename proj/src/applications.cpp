#include "qcs/applications.hpp"

#include <random>
#include <string>

#include <spdlog/spdlog.h>

#include "qcs/errors.hpp"

namespace qcs {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvalidInitialization(std::string(what) + ": column lengths differ (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

std::int64_t uniform(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

}  // namespace

std::vector<InitialValue> generic_init(const QuadraticInstance& inst, InitMapping mapping) {
  require_same_length(inst.alpha.size(), inst.rho.size(), "quadratic instance");
  std::vector<InitialValue> out;
  for (std::size_t j = 0; j < inst.alpha.size(); ++j) {
    if (inst.alpha[j] < 1) {
      throw InvalidInitialization("alpha at node " + std::to_string(j) + " must be >= 1");
    }
    if (inst.rho[j] < 0) {
      throw InvalidInitialization("rho at node " + std::to_string(j) + " must be >= 0");
    }
    const std::int64_t y0 = inst.alpha[j] * inst.rho[j];
    out.push_back({y0, mapping == InitMapping::closed_form ? inst.alpha[j] : inst.rho[j]});
  }
  return out;
}

Rational generic_optimum(const QuadraticInstance& inst) {
  require_same_length(inst.alpha.size(), inst.rho.size(), "quadratic instance");
  Rational num = 0;
  Rational den = 0;
  for (std::size_t j = 0; j < inst.alpha.size(); ++j) {
    num += Rational(inst.alpha[j]) * inst.rho[j];
    den += inst.alpha[j];
  }
  if (den == 0) throw DegenerateInstance("sum of alpha is zero");
  return num / den;
}

std::int64_t SchedulingInstance::total_demand() const {
  std::int64_t total = 0;
  for (auto l : load) total += l;
  return total;
}

std::int64_t SchedulingInstance::total_available() const {
  std::int64_t total = 0;
  for (std::size_t j = 0; j < capacity.size(); ++j) total += capacity[j] - occupied[j];
  return total;
}

SchedulingInit scheduling_init(const SchedulingInstance& inst) {
  require_same_length(inst.load.size(), inst.capacity.size(), "scheduling instance");
  require_same_length(inst.occupied.size(), inst.capacity.size(), "scheduling instance");
  for (std::size_t j = 0; j < inst.size(); ++j) {
    if (inst.capacity[j] < 1) {
      throw InvalidInitialization("capacity at node " + std::to_string(j) + " must be positive");
    }
    if (inst.load[j] < 0 || inst.occupied[j] < 0) {
      throw InvalidInitialization("negative load or occupancy at node " + std::to_string(j));
    }
  }
  const std::int64_t demand = inst.total_demand();
  const std::int64_t available = inst.total_available();
  if (demand > available) {
    throw CapacityExceeded("total demand rho=" + std::to_string(demand) +
                           " exceeds available capacity pi_avail=" + std::to_string(available));
  }
  SchedulingInit result;
  for (std::size_t j = 0; j < inst.size(); ++j) {
    std::int64_t z0 = inst.load[j] + inst.occupied[j];
    if (z0 == 0) {
      spdlog::warn("node {} has no load and no occupancy; giving it a single token", j);
      result.zero_demand_nodes.push_back(static_cast<NodeId>(j));
      z0 = 1;
    }
    result.initial.push_back({inst.capacity[j], z0});
  }
  return result;
}

std::int64_t scheduling_recover(NodeId node, std::int64_t q_s, const SchedulingInstance& inst) {
  if (q_s <= 0) {
    throw DegenerateInstance("terminal quotient q_s=" + std::to_string(q_s) +
                             " cannot be inverted at node " + std::to_string(node));
  }
  const std::int64_t capacity = inst.capacity.at(node);
  // nearest integer to capacity / q_s, exact halves go down
  const std::int64_t whole = capacity / q_s;
  const std::int64_t rem = capacity % q_s;
  const std::int64_t rounded = 2 * rem > q_s ? whole + 1 : whole;
  return rounded - inst.occupied.at(node);
}

Rational scheduling_utilization(const SchedulingInstance& inst) {
  std::int64_t cap = 0;
  std::int64_t used = 0;
  for (std::size_t j = 0; j < inst.size(); ++j) {
    cap += inst.capacity[j];
    used += inst.load[j] + inst.occupied[j];
  }
  return Rational(used) / cap;
}

std::vector<Rational> scheduling_exact_workloads(const SchedulingInstance& inst) {
  const Rational x = scheduling_utilization(inst);
  std::vector<Rational> out;
  for (std::size_t j = 0; j < inst.size(); ++j) out.push_back(x * inst.capacity[j] - inst.occupied[j]);
  return out;
}

RecoveryRule scheduling_recovery(SchedulingInstance inst) {
  return [inst = std::move(inst)](const NodeState& s) {
    return static_cast<double>(scheduling_recover(s.id, s.q_s, inst));
  };
}

SchedulingInstance random_scheduling_instance(NodeId n, std::int64_t load_lo,
                                              std::int64_t load_hi,
                                              std::int64_t occupied_lo, std::int64_t occupied_hi,
                                              std::int64_t capacity_even,
                                              std::int64_t capacity_odd, Rng& rng) {
  SchedulingInstance inst;
  for (NodeId j = 0; j < n; ++j) {
    inst.load.push_back(uniform(rng, load_lo, load_hi));
    inst.occupied.push_back(uniform(rng, occupied_lo, occupied_hi));
    inst.capacity.push_back(j % 2 == 0 ? capacity_even : capacity_odd);
  }
  return inst;
}

std::vector<InitialValue> federated_init(const FederatedInstance& inst, InitMapping mapping) {
  require_same_length(inst.dataset_size.size(), inst.local_param.size(), "federated instance");
  std::vector<InitialValue> out;
  for (std::size_t j = 0; j < inst.size(); ++j) {
    if (inst.dataset_size[j] < 1) {
      throw InvalidInitialization("dataset size at node " + std::to_string(j) + " must be >= 1");
    }
    if (inst.local_param[j] < 0) {
      throw InvalidInitialization("negative local parameter at node " + std::to_string(j));
    }
    const std::int64_t y0 = mapping == InitMapping::closed_form
                                ? inst.dataset_size[j] * inst.local_param[j]
                                : inst.local_param[j];
    out.push_back({y0, inst.dataset_size[j]});
  }
  return out;
}

Rational federated_optimum(const FederatedInstance& inst) {
  require_same_length(inst.dataset_size.size(), inst.local_param.size(), "federated instance");
  Rational num = 0;
  Rational den = 0;
  for (std::size_t j = 0; j < inst.size(); ++j) {
    num += Rational(inst.dataset_size[j]) * inst.local_param[j];
    den += inst.dataset_size[j];
  }
  if (den == 0) throw DegenerateInstance("empty federated instance");
  return num / den;
}

FederatedInstance random_federated_instance(NodeId n, std::int64_t size_lo, std::int64_t size_hi,
                                            std::int64_t param_lo, std::int64_t param_hi,
                                            Rng& rng) {
  FederatedInstance inst;
  for (NodeId j = 0; j < n; ++j) {
    inst.dataset_size.push_back(uniform(rng, size_lo, size_hi));
    inst.local_param.push_back(uniform(rng, param_lo, param_hi));
  }
  return inst;
}

Rational quotient_of(std::span<const InitialValue> initial) {
  Rational num = 0;
  Rational den = 0;
  for (const auto& v : initial) {
    num += v.y0;
    den += v.z0;
  }
  if (den == 0) throw DegenerateInstance("no tokens in the network");
  return num / den;
}

double to_double(const Rational& q) { return q.convert_to<double>(); }

}  // namespace qcs
