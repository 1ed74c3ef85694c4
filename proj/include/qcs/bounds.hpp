#pragma once

#include <cstdint>
#include <span>

#include <boost/multiprecision/cpp_int.hpp>

#include "qcs/digraph.hpp"

namespace qcs {

using Rational = boost::multiprecision::cpp_rational;

// Closed-form convergence quantities for both engines. All functions are
// pure. Step bounds throw qcs::Error when the result does not fit in 64 bits.

/// (1 + Dmax_plus)^(-D): lower bound on a single token reaching any node
/// within D steps of the routing walk.
double lemma1_bound(int diameter, int max_out_degree);
Rational lemma1_bound_exact(int diameter, int max_out_degree);

/// lemma1_bound * Bmin_prob^D, where Bmin_prob is the smallest per-node
/// probability of a full B-step processing delay.
double lemma2_bound(int diameter, int max_out_degree, double full_delay_prob);

/// Smallest integer tau with (1 - p)^tau <= epsilon, from the closed form
/// ceil(log epsilon / log(1 - p)). p >= 1 gives 1.
std::int64_t tau_for_probability(double epsilon, double window_prob);

std::int64_t tau_sync(double epsilon, int diameter, int max_out_degree);
std::int64_t tau_async(double epsilon, int diameter, int max_out_degree, double full_delay_prob);

/// Total initial state error: excess of y0_j over ceil(q) plus shortfall
/// below floor(q), summed over nodes. y0 values are compared as given.
std::int64_t y_init(std::span<const std::int64_t> y0, const Rational& q_tasks);

/// ceil((y_init + n) tau D / D) D + D.
std::int64_t theorem1_step_bound(std::int64_t y_init, std::int64_t n, std::int64_t tau,
                                 std::int64_t diameter);

/// ceil((y_init + n) tau (B D) / (D B)) D B + D B.
std::int64_t theorem2_step_bound(std::int64_t y_init, std::int64_t n, std::int64_t tau,
                                 std::int64_t diameter, std::int64_t max_delay);

/// (1 - epsilon)^(y_init + n): the confidence attached to the step bounds.
double step_bound_confidence(double epsilon, std::int64_t y_init, std::int64_t n);

/// Exact probability that a single token, routed by the transmission
/// distribution of `g`, sits at `target` after exactly `steps` moves when it
/// starts at `start`.
Rational token_walk_oracle(const Digraph& g, NodeId start, NodeId target, int steps);

/// Same walk in long double, for graphs too large for exact arithmetic.
long double token_walk_probability(const Digraph& g, NodeId start, NodeId target, int steps);

/// Token walk with processing delays. On arriving at a node (and at time 0)
/// the token draws a delay λ from `delay_pmf` (pmf[λ-1]); after λ steps the
/// node routes it by its transmission row and the next delay begins.
/// Returns the exact probability that `target` holds the token after
/// `steps` steps. Enumerates the (node, residual delay) product chain.
Rational delayed_walk_oracle(const Digraph& g, std::span<const Rational> delay_pmf, NodeId start,
                             NodeId target, int steps);

}  // namespace qcs
