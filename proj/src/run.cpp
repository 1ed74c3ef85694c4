#include "qcs/run.hpp"

#include <string>

#include "qcs/errors.hpp"

namespace qcs::detail {

PreparedRun prepare_run(const SyncRunConfig& cfg, int window_multiplier) {
  if (!cfg.graph) throw ContractViolation("run configuration has no graph");
  const Digraph& g = *cfg.graph;
  if (static_cast<std::size_t>(g.size()) != cfg.initial.size()) {
    throw ContractViolation("graph has " + std::to_string(g.size()) + " nodes but " +
                            std::to_string(cfg.initial.size()) + " initial values were given");
  }
  PreparedRun prepared;
  prepared.graph = cfg.graph;
  prepared.diameter = g.size() == 1 ? 1 : diameter(g);
  const int d_used = cfg.window == 0 ? prepared.diameter : cfg.window;
  if (d_used < prepared.diameter) {
    throw ContractViolation("window D'=" + std::to_string(d_used) +
                            " is below the graph diameter " + std::to_string(prepared.diameter));
  }
  prepared.window = d_used * window_multiplier;
  if (cfg.max_steps < prepared.window) {
    throw ContractViolation("max_steps=" + std::to_string(cfg.max_steps) +
                            " is shorter than one vote window (" +
                            std::to_string(prepared.window) + ")");
  }
  return prepared;
}

std::vector<NodeState> initial_states(const SyncRunConfig& cfg) {
  std::vector<NodeState> nodes;
  nodes.reserve(cfg.initial.size());
  for (std::size_t j = 0; j < cfg.initial.size(); ++j) {
    nodes.push_back(init_node(static_cast<NodeId>(j), cfg.initial[j].y0, cfg.initial[j].z0));
  }
  return nodes;
}

}  // namespace qcs::detail
