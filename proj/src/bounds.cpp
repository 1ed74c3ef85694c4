#include "qcs/bounds.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qcs/errors.hpp"

namespace qcs {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw Error("step bound overflows 64-bit integers");
  return out;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw Error("step bound overflows 64-bit integers");
  return out;
}

void require_positive(std::int64_t v, const char* name) {
  if (v < 1) throw ContractViolation(std::string(name) + " must be positive, got " + std::to_string(v));
}

Rational floor_of(const Rational& q) {
  Rational f = Rational(boost::multiprecision::numerator(q) / boost::multiprecision::denominator(q));
  if (f > q) f -= 1;
  return f;
}

Rational ceil_of(const Rational& q) {
  Rational f = floor_of(q);
  return f == q ? f : f + 1;
}

}  // namespace

double lemma1_bound(int diameter, int max_out_degree) {
  require_positive(diameter, "diameter");
  require_positive(max_out_degree, "max out-degree");
  return std::pow(1.0 + max_out_degree, -static_cast<double>(diameter));
}

Rational lemma1_bound_exact(int diameter, int max_out_degree) {
  require_positive(diameter, "diameter");
  require_positive(max_out_degree, "max out-degree");
  boost::multiprecision::cpp_int den = 1;
  for (int i = 0; i < diameter; ++i) den *= (1 + max_out_degree);
  return Rational(1) / Rational(den);
}

double lemma2_bound(int diameter, int max_out_degree, double full_delay_prob) {
  if (!(full_delay_prob > 0.0 && full_delay_prob <= 1.0)) {
    throw ContractViolation("full-delay probability must lie in (0, 1]");
  }
  return lemma1_bound(diameter, max_out_degree) *
         std::pow(full_delay_prob, static_cast<double>(diameter));
}

std::int64_t tau_for_probability(double epsilon, double window_prob) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ContractViolation("epsilon must lie in (0, 1), got " + std::to_string(epsilon));
  }
  if (!(window_prob > 0.0)) throw ContractViolation("window probability must be positive");
  if (window_prob >= 1.0) return 1;
  const long double miss = std::log1p(-static_cast<long double>(window_prob));
  const long double quotient = std::log(static_cast<long double>(epsilon)) / miss;
  const long double nearest = std::round(quotient);
  if (std::abs(quotient - nearest) < 1e-9L) {
    // The quotient sits on an integer up to rounding; settle it by the
    // defining inequality instead of trusting ceil().
    const long double tail = std::exp(nearest * miss);
    const auto tau = static_cast<std::int64_t>(nearest);
    return tail <= static_cast<long double>(epsilon) * (1.0L + 1e-12L) ? std::max<std::int64_t>(tau, 1)
                                                                        : tau + 1;
  }
  return std::max<std::int64_t>(static_cast<std::int64_t>(std::ceil(quotient)), 1);
}

std::int64_t tau_sync(double epsilon, int diameter, int max_out_degree) {
  return tau_for_probability(epsilon, lemma1_bound(diameter, max_out_degree));
}

std::int64_t tau_async(double epsilon, int diameter, int max_out_degree, double full_delay_prob) {
  return tau_for_probability(epsilon, lemma2_bound(diameter, max_out_degree, full_delay_prob));
}

std::int64_t y_init(std::span<const std::int64_t> y0, const Rational& q_tasks) {
  const Rational lo = floor_of(q_tasks);
  const Rational hi = ceil_of(q_tasks);
  Rational total = 0;
  for (std::int64_t v : y0) {
    const Rational value(v);
    if (value > hi) total += value - hi;
    if (value < lo) total += lo - value;
  }
  return static_cast<std::int64_t>(boost::multiprecision::numerator(total));
}

std::int64_t theorem1_step_bound(std::int64_t y_init, std::int64_t n, std::int64_t tau,
                                 std::int64_t diameter) {
  return theorem2_step_bound(y_init, n, tau, diameter, 1);
}

std::int64_t theorem2_step_bound(std::int64_t y_init, std::int64_t n, std::int64_t tau,
                                 std::int64_t diameter, std::int64_t max_delay) {
  if (y_init < 0) throw ContractViolation("y_init must be non-negative");
  require_positive(n, "n");
  require_positive(tau, "tau");
  require_positive(diameter, "diameter");
  require_positive(max_delay, "B");
  const std::int64_t window = checked_mul(diameter, max_delay);
  // (y_init + n) * tau * window / window is an integer, so the ceiling is exact.
  const std::int64_t windows = checked_mul(checked_add(y_init, n), tau);
  return checked_add(checked_mul(windows, window), window);
}

double step_bound_confidence(double epsilon, std::int64_t y_init, std::int64_t n) {
  return std::pow(1.0 - epsilon, static_cast<double>(y_init + n));
}

namespace {

template <typename T>
std::vector<T> walk(const Digraph& g, NodeId start, int steps) {
  const NodeId n = g.size();
  if (start < 0 || start >= n) throw ContractViolation("walk start out of range");
  const TransmissionDistribution dist(g);
  std::vector<T> p(n, T(0));
  std::vector<T> next(n);
  p[start] = T(1);
  for (int s = 0; s < steps; ++s) {
    std::fill(next.begin(), next.end(), T(0));
    for (NodeId j = 0; j < n; ++j) {
      if (p[j] == T(0)) continue;
      const auto& row = dist.row(j);
      const T share = p[j] / T(row.denominator());
      for (NodeId l : row.support) next[l] += share;
    }
    p.swap(next);
  }
  return p;
}

}  // namespace

Rational token_walk_oracle(const Digraph& g, NodeId start, NodeId target, int steps) {
  if (target < 0 || target >= g.size()) throw ContractViolation("walk target out of range");
  return walk<Rational>(g, start, steps)[target];
}

long double token_walk_probability(const Digraph& g, NodeId start, NodeId target, int steps) {
  if (target < 0 || target >= g.size()) throw ContractViolation("walk target out of range");
  return walk<long double>(g, start, steps)[target];
}

Rational delayed_walk_oracle(const Digraph& g, std::span<const Rational> delay_pmf, NodeId start,
                             NodeId target, int steps) {
  const NodeId n = g.size();
  const int max_delay = static_cast<int>(delay_pmf.size());
  if (max_delay < 1) throw ContractViolation("delay pmf is empty");
  if (start < 0 || start >= n || target < 0 || target >= n) {
    throw ContractViolation("delayed walk endpoints out of range");
  }
  const TransmissionDistribution dist(g);
  // state (node, r): the token is at `node` and moves after r more steps
  auto index = [max_delay](NodeId node, int r) { return node * max_delay + (r - 1); };
  std::vector<Rational> p(static_cast<std::size_t>(n) * max_delay, Rational(0));
  std::vector<Rational> next(p.size());
  for (int lambda = 1; lambda <= max_delay; ++lambda) p[index(start, lambda)] = delay_pmf[lambda - 1];
  for (int s = 0; s < steps; ++s) {
    std::fill(next.begin(), next.end(), Rational(0));
    for (NodeId j = 0; j < n; ++j) {
      for (int r = 1; r <= max_delay; ++r) {
        const Rational& mass = p[index(j, r)];
        if (mass == 0) continue;
        if (r > 1) {
          next[index(j, r - 1)] += mass;
          continue;
        }
        const auto& row = dist.row(j);
        const Rational share = mass / Rational(row.denominator());
        for (NodeId l : row.support) {
          for (int lambda = 1; lambda <= max_delay; ++lambda) {
            if (delay_pmf[lambda - 1] != 0) next[index(l, lambda)] += share * delay_pmf[lambda - 1];
          }
        }
      }
    }
    p.swap(next);
  }
  Rational total = 0;
  for (int r = 1; r <= max_delay; ++r) total += p[index(target, r)];
  return total;
}

}  // namespace qcs
