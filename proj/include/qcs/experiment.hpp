#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "qcs/applications.hpp"
#include "qcs/async_engine.hpp"
#include "qcs/metrics.hpp"
#include "qcs/run.hpp"

namespace qcs {

enum class RunMode { sync, async };
enum class OutputFormat { csv, json };

struct Range {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

struct GraphSpec {
  enum class Kind { random, file };
  Kind kind = Kind::random;
  NodeId n = 0;
  double edge_prob = 0.5;
  /// Fixes the graph across trials; otherwise each trial samples its own.
  std::optional<std::uint64_t> seed;
  std::string path;
};

struct InitSpec {
  enum class Kind { explicit_values, generic, scheduling, federated, uniform, scheduling_random,
                    federated_random };
  Kind kind = Kind::uniform;

  std::vector<InitialValue> values;
  QuadraticInstance generic;
  SchedulingInstance scheduling;
  FederatedInstance federated;

  // uniform
  Range y0{0, 100};
  Range z0{1, 10};
  // scheduling_random
  Range load{1, 100};
  Range occupied{0, 0};
  std::int64_t capacity_even = 100;
  std::int64_t capacity_odd = 300;
  // federated_random
  Range dataset_size{10, 100};
  Range local_param{1000, 100000};

  /// Fixes the values across trials; otherwise derived from the trial seed.
  std::optional<std::uint64_t> seed;
};

struct DelaySpec {
  int max_delay = 1;
  /// Empty: uniform over {1..B}. One row: shared. n rows: per node.
  std::vector<std::vector<double>> pmf;

  DelayModel model() const;
};

struct SweepSpec {
  std::vector<NodeId> n;
  std::vector<int> max_delay;
};

struct ExperimentConfig {
  RunMode mode = RunMode::sync;
  GraphSpec graph;
  std::optional<int> d_override;
  InitSpec init;
  InitMapping mapping = InitMapping::closed_form;
  std::optional<DelaySpec> delay;
  std::int64_t trials = 1;
  std::uint64_t seed = 0;
  /// Unset: 100 times the step bound when an epsilon is given, else 1e5.
  std::optional<std::int64_t> max_steps;
  std::optional<double> epsilon;
  /// Unset: on for single-trial runs.
  std::optional<bool> record_trajectory;
  /// Unset: reciprocal for scheduling inputs, direct otherwise.
  std::optional<ErrorMode> error_mode;
  std::string out_dir;
  OutputFormat format = OutputFormat::csv;
  /// 0 = hardware concurrency.
  unsigned workers = 0;
  std::optional<SweepSpec> sweep;
  /// Forces per-step invariant audits regardless of QCS_LOG_LEVEL.
  bool check_invariants = false;

  NodeId node_count() const;
  bool records_trajectory() const;
  ErrorMode resolved_error_mode() const;
};

/// Parses and validates a JSON config. Unknown keys, type mismatches or
/// constraint violations raise ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Checks cross-field constraints; parse_config calls it.
void validate_config(const ExperimentConfig& cfg);

nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct BoundsEntry {
  std::int64_t tau = 0;
  std::int64_t y_init = 0;
  std::int64_t step_bound = 0;
  bool within = false;
  double confidence = 0.0;
};

struct TrialRecord {
  std::int64_t trial = 0;
  std::uint64_t seed = 0;
  int diameter = 0;
  int max_out_degree = 0;
  std::int64_t max_steps = 0;
  double quotient = 0.0;  // sum(y0) / sum(z0)
  RunOutcome outcome;
  std::optional<ErrorSeries> error;
  std::optional<BoundsEntry> bounds;

  bool censored() const noexcept { return !outcome.converged; }
  std::int64_t steps() const noexcept;
  std::int64_t spread() const;
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;
  TrialStats stats;
  /// Present when an epsilon was configured.
  std::optional<double> fraction_within_bound;
  std::optional<double> min_confidence;
};

/// Runs every trial of `cfg` (trial i uses seed cfg.seed + i) across a
/// worker pool. Results are in trial order regardless of scheduling.
ExperimentResult execute(const ExperimentConfig& cfg);

/// One trial, exposed for tests and custom drivers.
TrialRecord run_trial(const ExperimentConfig& cfg, std::int64_t trial_index);

/// execute() plus artifacts under cfg.out_dir when it is non-empty:
/// outcomes.csv / error_series.csv / summary.json (csv format) or
/// outcomes.json / error_series.json / summary.json (json format).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

void write_artifacts(const ExperimentConfig& cfg, const ExperimentResult& result,
                     const std::filesystem::path& dir);

struct SweepCell {
  NodeId n = 0;
  int max_delay = 1;
  ExperimentResult result;
};

/// Runs the n x B grid of cfg.sweep. Writes sweep.csv and summary.json
/// when cfg.out_dir is set.
std::vector<SweepCell> run_sweep(const ExperimentConfig& cfg);

// Presets bundling the evaluation setups at desk scale.
ExperimentConfig preset_fig1(std::uint64_t seed, std::int64_t trials);
ExperimentConfig preset_fig3(RunMode mode, int max_delay, std::uint64_t seed, std::int64_t trials);
/// full_scale selects the large grid (sizes up to 3000, 3000 trials each).
ExperimentConfig preset_fig2_desk(bool full_scale, std::uint64_t seed);

}  // namespace qcs
