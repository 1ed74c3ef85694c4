#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "qcs/rng.hpp"
#include "qcs/digraph.hpp"
#include "qcs/errors.hpp"

using namespace qcs;

namespace {

Digraph ring(NodeId n) {
  std::vector<Edge> e;
  for (NodeId i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return Digraph::from_edges(n, e);
}

Digraph complete(NodeId n) {
  std::vector<Edge> e;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = 0; j < n; ++j)
      if (i != j) e.emplace_back(i, j);
  return Digraph::from_edges(n, e);
}

oracle::AdjMatrix to_matrix(const Digraph& g) {
  std::vector<std::pair<int, int>> e;
  for (auto [s, d] : g.edges()) e.emplace_back(s, d);
  return oracle::adjacency(g.size(), e);
}

}  // namespace

TEST_CASE("from_edges rejects malformed edge sets") {
  const std::vector<Edge> loop{{0, 0}};
  CHECK_THROWS_AS(Digraph::from_edges(2, loop), TopologyError);
  const std::vector<Edge> range{{0, 2}};
  CHECK_THROWS_AS(Digraph::from_edges(2, range), TopologyError);
  const std::vector<Edge> dup{{0, 1}, {0, 1}};
  CHECK_THROWS_AS(Digraph::from_edges(2, dup), TopologyError);
}

TEST_CASE("in-neighbors are the transpose of out-neighbors") {
  const Digraph g = generate_random_digraph(12, 0.3, 5);
  for (NodeId v = 0; v < g.size(); ++v) {
    for (NodeId w : g.out_neighbors(v)) {
      auto in = g.in_neighbors(w);
      CHECK(std::find(in.begin(), in.end(), v) != in.end());
    }
    for (NodeId u : g.in_neighbors(v)) CHECK(g.has_edge(u, v));
    CHECK(std::is_sorted(g.out_neighbors(v).begin(), g.out_neighbors(v).end()));
  }
}

TEST_CASE("strong connectivity examples") {
  CHECK(is_strongly_connected(ring(3)));
  const std::vector<Edge> one_way{{0, 1}};
  CHECK_FALSE(is_strongly_connected(Digraph::from_edges(2, one_way)));
  const std::vector<Edge> two_cycles{{0, 1}, {1, 0}, {2, 3}, {3, 2}};
  CHECK_FALSE(is_strongly_connected(Digraph::from_edges(4, two_cycles)));
}

TEST_CASE("diameter examples") {
  for (NodeId n = 2; n <= 6; ++n) CHECK(diameter(complete(n)) == 1);
  CHECK(diameter(ring(3)) == 2);
  CHECK(diameter(ring(5)) == 4);
  CHECK(oracle::floyd_warshall_diameter(to_matrix(ring(5))) == 4);
  const std::vector<Edge> one_way{{0, 1}};
  CHECK_THROWS_AS(diameter(Digraph::from_edges(2, one_way)), TopologyError);
}

TEST_CASE("generator: complete 2-node graph at p = 1") {
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    const Digraph g = generate_random_digraph(2, 1.0, seed);
    CHECK(g.edge_count() == 2);
    CHECK(diameter(g) == 1);
  }
}

TEST_CASE("generator: diameter-2 frequency at n = 20, p = 0.5 matches direct sampling") {
  // independent sampler: raw Bernoulli adjacency, kept only if strongly connected
  std::mt19937_64 ref(12345);
  std::bernoulli_distribution coin(0.5);
  int ref_total = 0;
  int ref_twos = 0;
  while (ref_total < 2000) {
    oracle::AdjMatrix adj(20, std::vector<int>(20, 0));
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) adj[i][j] = i != j && coin(ref);
    const int d = oracle::floyd_warshall_diameter(adj);
    if (d < 0) continue;
    ++ref_total;
    ref_twos += d == 2;
  }
  int twos = 0;
  const int samples = 400;
  for (std::uint64_t seed = 0; seed < samples; ++seed) {
    const Digraph g = generate_random_digraph(20, 0.5, seed);
    CHECK(is_strongly_connected(g));
    CHECK(diameter(g) >= 2);
    if (diameter(g) == 2) ++twos;
  }
  const double p_ref = static_cast<double>(ref_twos) / ref_total;
  const double p_gen = static_cast<double>(twos) / samples;
  const double sigma = std::sqrt(p_ref * (1 - p_ref) * (1.0 / samples + 1.0 / ref_total));
  CHECK(std::abs(p_gen - p_ref) <= 4 * sigma);
}

TEST_CASE("generator: sparse draws exhaust retries") {
  const long double p = oracle::er_strong_connectivity_probability(5, 0.01L);
  const long double all_three = p * p * p;
  CHECK(p < 1e-3L);
  CHECK(all_three < 1e-9L);
  try {
    (void)generate_random_digraph(5, 0.01, 42, 3);
    FAIL("expected GenerationError");
  } catch (const GenerationError& e) {
    const std::string what = e.what();
    CHECK(what.find("n=5") != std::string::npos);
    CHECK(what.find("edge_prob=0.01") != std::string::npos);
    CHECK(what.find("max_retries=3") != std::string::npos);
  }
}

TEST_CASE("generator: strong-connectivity oracle agrees at moderate density") {
  // 3 nodes, p = 0.5: exact probability from enumeration is 18/64
  CHECK(oracle::er_strong_connectivity_probability(3, 0.5L) == doctest::Approx(18.0 / 64.0));
}

TEST_CASE("generator preconditions") {
  CHECK_THROWS_AS(generate_random_digraph(1, 0.5, 0), ContractViolation);
  CHECK_THROWS_AS(generate_random_digraph(5, 0.0, 0), ContractViolation);
  CHECK_THROWS_AS(generate_random_digraph(5, 1.5, 0), ContractViolation);
}

TEST_CASE("generator is deterministic in its arguments") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CHECK(generate_random_digraph(10, 0.4, seed) == generate_random_digraph(10, 0.4, seed));
  }
  CHECK_FALSE(generate_random_digraph(10, 0.4, 1) == generate_random_digraph(10, 0.4, 2));
}

TEST_CASE("property: generated graphs match independent reachability and distance oracles") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const NodeId n = 2 + static_cast<NodeId>(seed % 7);
    const double p = 0.25 + 0.05 * static_cast<double>(seed % 10);
    const Digraph g = generate_random_digraph(n, p, seed);
    const auto a = to_matrix(g);
    REQUIRE(oracle::matrix_power_strongly_connected(a));
    CHECK(is_strongly_connected(g));
    const int d = diameter(g);
    CHECK(d <= n - 1);
    CHECK(d == oracle::floyd_warshall_diameter(a));
    CHECK(d == oracle::matrix_power_diameter(a));
  }
}

TEST_CASE("property: connectivity test agrees with the matrix oracle on arbitrary graphs") {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const NodeId n = 2 + static_cast<NodeId>(trial % 6);
    std::vector<Edge> e;
    for (NodeId i = 0; i < n; ++i)
      for (NodeId j = 0; j < n; ++j)
        if (i != j && rng() % 3 == 0) e.emplace_back(i, j);
    const Digraph g = Digraph::from_edges(n, e);
    CHECK(is_strongly_connected(g) == oracle::matrix_power_strongly_connected(to_matrix(g)));
  }
}

TEST_CASE("transmission distribution") {
  const std::vector<Edge> e{{0, 1}, {1, 0}, {1, 2}, {1, 3}, {2, 1}, {3, 1}};
  const Digraph g = Digraph::from_edges(4, e);
  const TransmissionDistribution dist(g);
  CHECK(dist.row(0).support == std::vector<NodeId>{0, 1});
  CHECK(dist.row(0).probability(0) == 0.5);
  CHECK(dist.row(0).probability(1) == 0.5);
  CHECK(dist.row(0).probability(2) == 0.0);
  CHECK(dist.row(1).support.size() == 4);
  for (NodeId l = 0; l < 4; ++l) CHECK(dist.row(1).probability(l) == 0.25);
}

TEST_CASE("property: every row is uniform over self and out-neighbors") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Digraph g = generate_random_digraph(15, 0.3, seed);
    const auto dist = transmission_distribution(g);
    for (NodeId j = 0; j < g.size(); ++j) {
      const auto& row = dist.row(j);
      CHECK(row.denominator() == g.out_degree(j) + 1);
      CHECK(std::is_sorted(row.support.begin(), row.support.end()));
      long double total = 0;
      for (NodeId l = 0; l < g.size(); ++l) {
        const double p = row.probability(l);
        const bool supported = l == j || g.has_edge(j, l);
        CHECK((p > 0) == supported);
        total += p;
      }
      CHECK(static_cast<double>(total) == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("edge-list round trip") {
  const Digraph g = generate_random_digraph(9, 0.4, 3);
  std::stringstream buf;
  write_edge_list(buf, g);
  CHECK(read_edge_list(buf) == g);
  std::istringstream bad("3 2\n0 1\n");
  CHECK_THROWS_AS(read_edge_list(bad), TopologyError);
  std::istringstream header("x");
  CHECK_THROWS_AS(read_edge_list(header), TopologyError);
}
