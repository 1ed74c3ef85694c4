#include "qcs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "qcs/errors.hpp"

namespace qcs {

namespace {

double transform(double q, ErrorMode mode) {
  if (mode == ErrorMode::direct) return q;
  if (q == 0.0) throw DegenerateInstance("zero state has no reciprocal");
  return 1.0 / q;
}

double squared_distance(std::span<const double> q, double x_star, ErrorMode mode) {
  double total = 0.0;
  for (double v : q) {
    const double d = transform(v, mode) - x_star;
    total += d * d;
  }
  return total;
}

std::vector<double> ratios(const TrajectoryRecord& rec) {
  std::vector<double> q;
  q.reserve(rec.nodes.size());
  for (const auto& s : rec.nodes) q.push_back(static_cast<double>(s.y) / static_cast<double>(s.z));
  return q;
}

}  // namespace

double normalized_error_between(std::span<const double> estimates,
                                std::span<const double> initial, double x_star, ErrorMode mode) {
  if (estimates.size() != initial.size()) {
    throw ContractViolation("estimate and reference vectors differ in length");
  }
  const double den = squared_distance(initial, x_star, mode);
  if (den == 0.0) return 0.0;
  return std::sqrt(squared_distance(estimates, x_star, mode) / den);
}

ErrorSeries normalized_error(std::span<const TrajectoryRecord> trajectory, double x_star,
                             ErrorMode mode) {
  if (trajectory.empty()) throw ContractViolation("normalized_error needs a non-empty trajectory");
  ErrorSeries series;
  const auto q0 = ratios(trajectory.front());
  const double den = squared_distance(q0, x_star, mode);
  series.degenerate = den == 0.0;
  for (const auto& rec : trajectory) {
    series.steps.push_back(rec.step);
    if (series.degenerate) {
      series.e.push_back(0.0);
    } else {
      series.e.push_back(std::sqrt(squared_distance(ratios(rec), x_star, mode) / den));
    }
  }
  return series;
}

TrialStats trial_stats(std::span<const std::int64_t> steps, std::span<const bool> censored,
                       std::optional<std::int64_t> bound) {
  if (steps.empty()) throw ContractViolation("trial_stats needs at least one trial");
  if (steps.size() != censored.size()) {
    throw ContractViolation("steps and censoring flags differ in length");
  }
  TrialStats stats;
  stats.trials = steps.size();
  stats.convergence_steps.assign(steps.begin(), steps.end());
  stats.censored.assign(censored.begin(), censored.end());
  stats.min = *std::min_element(steps.begin(), steps.end());
  stats.max = *std::max_element(steps.begin(), steps.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    sum += static_cast<double>(steps[i]);
    if (!censored[i]) ++stats.converged;
  }
  stats.mean = sum / static_cast<double>(steps.size());
  double sq = 0.0;
  for (auto s : steps) sq += (static_cast<double>(s) - stats.mean) * (static_cast<double>(s) - stats.mean);
  stats.stddev = std::sqrt(sq / static_cast<double>(steps.size()));
  if (bound) {
    std::size_t within = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (!censored[i] && steps[i] <= *bound) ++within;
    }
    stats.fraction_within_bound = static_cast<double>(within) / static_cast<double>(steps.size());
  }
  return stats;
}

TrialStats trial_stats(std::span<const RunOutcome> outcomes, std::optional<std::int64_t> bound) {
  std::vector<std::int64_t> steps;
  // std::vector<bool> is not contiguous, so a span cannot view it
  std::unique_ptr<bool[]> flags(new bool[outcomes.size()]);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    steps.push_back(o.converged ? o.termination_step : o.steps_run);
    flags[i] = !o.converged;
  }
  return trial_stats(steps, std::span<const bool>(flags.get(), outcomes.size()), bound);
}

}  // namespace qcs
