#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qcs/run.hpp"

namespace qcs {

/// reciprocal: compare 1/q_j[k] against x* (task scheduling, where q is the
/// inverse utilization). direct: compare q_j[k] itself.
enum class ErrorMode { reciprocal, direct };

struct ErrorSeries {
  std::vector<std::int64_t> steps;
  std::vector<double> e;
  /// The starting state already sat on x*, so every entry is defined as 0.
  bool degenerate = false;
};

/// e[k] = sqrt( sum_j (g(q_j[k]) - x*)^2 / sum_j (g(q_j[0]) - x*)^2 ),
/// with q_j[k] = y_j[k] / z_j[k] and g the identity or the reciprocal.
/// A zero state in reciprocal mode raises DegenerateInstance.
ErrorSeries normalized_error(std::span<const TrajectoryRecord> trajectory, double x_star,
                             ErrorMode mode);

/// Same quantity for one set of per-node estimates against a reference set.
double normalized_error_between(std::span<const double> estimates,
                                std::span<const double> initial, double x_star, ErrorMode mode);

struct TrialStats {
  std::size_t trials = 0;
  std::size_t converged = 0;
  /// Termination step per trial; censored trials enter at the step count
  /// they were stopped at.
  std::vector<std::int64_t> convergence_steps;
  std::vector<bool> censored;
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::int64_t min = 0;
  std::int64_t max = 0;
  std::optional<double> fraction_within_bound;
};

TrialStats trial_stats(std::span<const RunOutcome> outcomes,
                       std::optional<std::int64_t> bound = std::nullopt);

TrialStats trial_stats(std::span<const std::int64_t> steps, std::span<const bool> censored,
                       std::optional<std::int64_t> bound = std::nullopt);

}  // namespace qcs
