#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "qcs/applications.hpp"
#include "qcs/bounds.hpp"
#include "qcs/errors.hpp"
#include "qcs/experiment.hpp"
#include "qcs/logging.hpp"

using namespace qcs;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> trials;
  std::string out;
  std::string format;
  std::string graph_file;
  std::optional<unsigned> workers;
};

void add_common(CLI::App* cmd, Common& c, bool with_config) {
  if (with_config) cmd->add_option("--config", c.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "base seed; trial i uses seed + i");
  cmd->add_option("--trials", c.trials, "number of trials");
  cmd->add_option("--out", c.out, "directory for output artifacts");
  cmd->add_option("--format", c.format, "artifact format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--graph-file", c.graph_file, "edge-list file replacing the random graph")
      ->check(CLI::ExistingFile);
  cmd->add_option("--workers", c.workers, "worker threads (default: hardware concurrency)");
}

void apply_common(ExperimentConfig& cfg, const Common& c) {
  if (c.seed) cfg.seed = *c.seed;
  if (c.trials) cfg.trials = *c.trials;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (!c.format.empty()) cfg.format = c.format == "json" ? OutputFormat::json : OutputFormat::csv;
  if (!c.graph_file.empty()) {
    cfg.graph.kind = GraphSpec::Kind::file;
    cfg.graph.path = c.graph_file;
  }
  if (c.workers) cfg.workers = *c.workers;
  validate_config(cfg);
}

ExperimentConfig load(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config", "a config file is required");
  ExperimentConfig cfg = parse_config_file(c.config);
  apply_common(cfg, c);
  return cfg;
}

void print_stats(const std::string& label, const ExperimentResult& r) {
  const auto& s = r.stats;
  std::printf("%s: trials=%zu converged=%zu mean=%.2f std=%.2f min=%lld max=%lld", label.c_str(),
              s.trials, s.converged, s.mean, s.stddev, static_cast<long long>(s.min),
              static_cast<long long>(s.max));
  if (r.fraction_within_bound) std::printf(" within_bound=%.4f", *r.fraction_within_bound);
  std::printf("\n");
  if (r.trials.size() == 1) {
    const auto& t = r.trials.front();
    std::printf("  diameter=%d window=%d q_s=%lld quotient=%.6f\n", t.diameter, t.outcome.window,
                static_cast<long long>(t.outcome.final_q_s.empty() ? 0 : t.outcome.final_q_s[0]),
                t.quotient);
  }
}

void print_sweep(const std::vector<SweepCell>& cells) {
  std::printf("%6s %4s %7s %9s %9s %8s %6s %6s\n", "n", "B", "trials", "converged", "mean", "std",
              "min", "max");
  for (const auto& c : cells) {
    const auto& s = c.result.stats;
    std::printf("%6d %4d %7zu %9zu %9.2f %8.2f %6lld %6lld\n", c.n, c.max_delay, s.trials,
                s.converged, s.mean, s.stddev, static_cast<long long>(s.min),
                static_cast<long long>(s.max));
  }
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--instance", "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--instance", e.what());
  }
}

struct AppOptions {
  std::string instance;
  std::string mode = "sync";
  int max_delay = 5;
  std::optional<NodeId> n;
  double edge_prob = 0.5;
};

void add_app(CLI::App* cmd, AppOptions& a) {
  cmd->add_option("--instance", a.instance, "JSON instance file")->check(CLI::ExistingFile);
  cmd->add_option("--mode", a.mode, "engine")->check(CLI::IsMember({"sync", "async"}));
  cmd->add_option("--B", a.max_delay, "processing delay bound for async mode")->check(CLI::PositiveNumber);
  cmd->add_option("--n", a.n, "nodes of a random instance (when no --instance)");
  cmd->add_option("--edge-prob", a.edge_prob, "edge probability of the random graph");
}

ExperimentConfig app_base(const AppOptions& a, NodeId n) {
  ExperimentConfig cfg;
  cfg.mode = a.mode == "async" ? RunMode::async : RunMode::sync;
  if (cfg.mode == RunMode::async) cfg.delay = DelaySpec{a.max_delay, {}};
  cfg.graph.kind = GraphSpec::Kind::random;
  cfg.graph.n = n;
  cfg.graph.edge_prob = a.edge_prob;
  cfg.record_trajectory = false;
  return cfg;
}

int run_app_scheduling(const AppOptions& a, const Common& c) {
  SchedulingInstance inst;
  if (!a.instance.empty()) {
    const json doc = read_json(a.instance);
    inst.load = doc.at("load").get<std::vector<std::int64_t>>();
    inst.capacity = doc.at("capacity").get<std::vector<std::int64_t>>();
    inst.occupied = doc.contains("occupied") ? doc.at("occupied").get<std::vector<std::int64_t>>()
                                             : std::vector<std::int64_t>(inst.capacity.size(), 0);
  } else if (a.n) {
    Rng rng = make_stream(c.seed.value_or(0), 7);
    inst = random_scheduling_instance(*a.n, 1, 100, 0, 0, 100, 300, rng);
  } else {
    inst = SchedulingInstance{{40, 40}, {0, 0}, {100, 300}};
  }
  ExperimentConfig cfg = app_base(a, static_cast<NodeId>(inst.size()));
  cfg.init.kind = InitSpec::Kind::scheduling;
  cfg.init.scheduling = inst;
  apply_common(cfg, c);
  const auto result = run_experiment(cfg);
  print_stats("app-scheduling", result);
  const auto exact = scheduling_exact_workloads(inst);
  std::printf("utilization=%.6f\n", to_double(scheduling_utilization(inst)));
  for (const auto& t : result.trials) {
    std::printf("trial %lld:\n", static_cast<long long>(t.trial));
    std::printf("%6s %8s %8s %10s %12s\n", "node", "pi_max", "q_s", "w_star", "exact");
    for (std::size_t j = 0; j < inst.size(); ++j) {
      std::printf("%6zu %8lld %8lld %10.0f %12.4f\n", j, static_cast<long long>(inst.capacity[j]),
                  static_cast<long long>(t.outcome.final_q_s[j]), t.outcome.recovered[j],
                  to_double(exact[j]));
    }
  }
  return 0;
}

int run_app_federated(const AppOptions& a, const Common& c) {
  FederatedInstance inst;
  if (!a.instance.empty()) {
    const json doc = read_json(a.instance);
    inst.dataset_size = doc.at("dataset_size").get<std::vector<std::int64_t>>();
    inst.local_param = doc.at("local_param").get<std::vector<std::int64_t>>();
  } else if (a.n) {
    Rng rng = make_stream(c.seed.value_or(0), 8);
    inst = random_federated_instance(*a.n, 10, 100, 1000, 100000, rng);
  } else {
    inst = FederatedInstance{{10, 30}, {100, 200}};
  }
  ExperimentConfig cfg = app_base(a, static_cast<NodeId>(inst.size()));
  cfg.init.kind = InitSpec::Kind::federated;
  cfg.init.federated = inst;
  apply_common(cfg, c);
  const auto result = run_experiment(cfg);
  print_stats("app-federated", result);
  const double exact = to_double(federated_optimum(inst));
  for (const auto& t : result.trials) {
    const double agg = t.outcome.recovered.empty() ? 0.0 : t.outcome.recovered.front();
    std::printf("trial %lld: aggregate=%.0f exact=%.4f error=%.4f\n", static_cast<long long>(t.trial),
                agg, exact, std::abs(agg - exact));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging_from_env();
  CLI::App app{"Quantized consensus simulator and experiment driver"};
  app.require_subcommand(1);

  Common common;

  auto* run = app.add_subcommand("run", "run the trials described by a config");
  add_common(run, common, true);

  auto* sweep = app.add_subcommand("sweep", "run a config's n x B grid");
  add_common(sweep, common, true);

  auto* bounds = app.add_subcommand("bounds", "closed-form convergence bounds");
  double epsilon = 0.05;
  int diam = 2;
  int dmax = 2;
  int max_delay = 1;
  std::optional<double> full_prob;
  std::int64_t yinit = 0;
  std::int64_t nodes = 2;
  bounds->add_option("--epsilon", epsilon, "failure probability per window sequence");
  bounds->add_option("--diameter", diam, "graph diameter D")->check(CLI::PositiveNumber);
  bounds->add_option("--max-out-degree", dmax, "largest out-degree")->check(CLI::PositiveNumber);
  bounds->add_option("--B", max_delay, "processing delay bound (1 = synchronous)")->check(CLI::PositiveNumber);
  bounds->add_option("--full-delay-prob", full_prob, "probability of a full B-step delay (default 1/B)");
  bounds->add_option("--y-init", yinit, "total initial state error");
  bounds->add_option("--n", nodes, "number of nodes")->check(CLI::PositiveNumber);

  auto* fig1 = app.add_subcommand("fig1", "scheduling preset, synchronous, 20 nodes");
  add_common(fig1, common, false);

  auto* fig2 = app.add_subcommand("fig2-desk", "asynchronous size x B sweep");
  add_common(fig2, common, false);
  bool full_scale = false;
  fig2->add_flag("--full-scale", full_scale, "use the large grid (very slow)");

  auto* fig3 = app.add_subcommand("fig3", "federated preset, sync and async");
  add_common(fig3, common, false);
  int fig3_b = 5;
  fig3->add_option("--B", fig3_b, "delay bound for the async run")->check(CLI::PositiveNumber);

  AppOptions sched_opts;
  auto* sched = app.add_subcommand("app-scheduling", "balance task workloads");
  add_common(sched, common, false);
  add_app(sched, sched_opts);

  AppOptions fed_opts;
  auto* fed = app.add_subcommand("app-federated", "aggregate federated model parameters");
  add_common(fed, common, false);
  add_app(fed, fed_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = load(common);
      if (cfg.sweep) {
        print_sweep(run_sweep(cfg));
      } else {
        print_stats("run", run_experiment(cfg));
      }
    } else if (*sweep) {
      const auto cfg = load(common);
      if (!cfg.sweep) throw ConfigError("sweep", "config has no sweep grid");
      print_sweep(run_sweep(cfg));
    } else if (*bounds) {
      const double p1 = lemma1_bound(diam, dmax);
      std::int64_t tau = 0;
      std::int64_t bound = 0;
      if (max_delay == 1) {
        tau = tau_sync(epsilon, diam, dmax);
        bound = theorem1_step_bound(yinit, nodes, tau, diam);
        std::printf("lemma_bound=%.6g\n", p1);
      } else {
        const double pb = full_prob.value_or(1.0 / max_delay);
        tau = tau_async(epsilon, diam, dmax, pb);
        bound = theorem2_step_bound(yinit, nodes, tau, diam, max_delay);
        std::printf("lemma_bound=%.6g\n", lemma2_bound(diam, dmax, pb));
      }
      std::printf("tau=%lld\nstep_bound=%lld\nconfidence=%.6g\n", static_cast<long long>(tau),
                  static_cast<long long>(bound), step_bound_confidence(epsilon, yinit, nodes));
    } else if (*fig1) {
      ExperimentConfig cfg = preset_fig1(0, 1);
      apply_common(cfg, common);
      print_stats("fig1", run_experiment(cfg));
    } else if (*fig2) {
      ExperimentConfig cfg = preset_fig2_desk(full_scale, 0);
      apply_common(cfg, common);
      print_sweep(run_sweep(cfg));
    } else if (*fig3) {
      for (RunMode mode : {RunMode::sync, RunMode::async}) {
        ExperimentConfig cfg = preset_fig3(mode, fig3_b, 0, 1);
        apply_common(cfg, common);
        const std::string label = mode == RunMode::sync ? "sync" : "async";
        if (!cfg.out_dir.empty()) cfg.out_dir += "/" + label;
        print_stats("fig3 " + label, run_experiment(cfg));
      }
    } else if (*sched) {
      return run_app_scheduling(sched_opts, common);
    } else if (*fed) {
      return run_app_federated(fed_opts, common);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
