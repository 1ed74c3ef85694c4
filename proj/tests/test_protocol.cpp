#include <algorithm>
#include <map>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "qcs/rng.hpp"
#include "qcs/errors.hpp"
#include "qcs/protocol.hpp"

using namespace qcs;

namespace {

NodeState state(std::int64_t y, std::int64_t z, NodeId id = 0) {
  NodeState s;
  s.id = id;
  s.y = y;
  s.z = z;
  return s;
}

NodeState votes(std::int64_t M, std::int64_t m) {
  NodeState s = state(0, 1);
  s.M = M;
  s.m = m;
  return s;
}

Digraph star_out(NodeId n) {
  std::vector<Edge> e;
  for (NodeId j = 1; j < n; ++j) {
    e.emplace_back(0, j);
    e.emplace_back(j, 0);
  }
  return Digraph::from_edges(n, e);
}

}  // namespace

TEST_CASE("init_node doubles the pair") {
  const auto a = init_node(3, 5, 1);
  CHECK(a.id == 3);
  CHECK(a.y == 10);
  CHECK(a.z == 2);
  CHECK(a.y0_doubled == 10);
  CHECK_FALSE(a.flag);
  const auto b = init_node(0, 0, 3);
  CHECK(b.y == 0);
  CHECK(b.z == 6);
  CHECK_THROWS_AS(init_node(0, 4, 0), InvalidInitialization);
  CHECK_THROWS_AS(init_node(0, -1, 2), InvalidInitialization);
}

TEST_CASE("floor and ceil division") {
  CHECK(floor_div(7, 3) == 2);
  CHECK(ceil_div(7, 3) == 3);
  CHECK(floor_div(6, 3) == 2);
  CHECK(ceil_div(6, 3) == 2);
  CHECK(ceil_div(0, 5) == 0);
  CHECK_THROWS_AS(floor_div(1, 0), InvariantViolation);
}

TEST_CASE("split_mass: even split of 10 over 2") {
  const Digraph g = star_out(2);
  const TransmissionDistribution dist(g);
  Rng rng(1);
  const auto r = split_mass(state(10, 2), dist.row(0), rng);
  CHECK(r.piece_low == 5);
  CHECK(r.piece_high == 5);
  CHECK(r.q_s == 5);
  std::int64_t out_y = 0;
  std::int64_t out_z = 0;
  for (const auto& msg : r.outbound) {
    out_y += msg.c_y;
    out_z += msg.c_z;
  }
  CHECK(r.kept.y + out_y == 10);
  CHECK(r.kept.z + out_z == 2);
  CHECK((r.kept == Mass{5, 1} || r.kept == Mass{10, 2}));
}

TEST_CASE("split_mass: 7 over 3 matches the unique balanced partition") {
  const auto parts = oracle::balanced_partitions(7, 3);
  REQUIRE(parts.size() == 1);
  CHECK(parts.front() == std::vector<std::int64_t>{2, 2, 3});
  // Route everything off-node by using a large star where self is rarely chosen,
  // and check the multiset over many seeds.
  const Digraph g = star_out(4);
  const TransmissionDistribution dist(g);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto r = split_mass(state(7, 3), dist.row(0), rng);
    CHECK(r.piece_low == 2);
    CHECK(r.piece_high == 3);
    CHECK(r.q_s == 3);
    CHECK(r.kept.y >= 2);
    std::int64_t y = r.kept.y;
    std::int64_t z = r.kept.z;
    for (const auto& msg : r.outbound) {
      y += msg.c_y;
      z += msg.c_z;
      // a coalesced batch of c pieces carries between c*low and c*high
      CHECK(msg.c_y >= 2 * msg.c_z);
      CHECK(msg.c_y <= 3 * msg.c_z);
    }
    CHECK(y == 7);
    CHECK(z == 3);
  }
}

TEST_CASE("split_mass: zero mass") {
  const Digraph g = star_out(3);
  const TransmissionDistribution dist(g);
  Rng rng(3);
  const auto r = split_mass(state(0, 4), dist.row(0), rng);
  CHECK(r.kept.y == 0);
  std::int64_t cy = 0;
  std::int64_t cz = 0;
  for (const auto& msg : r.outbound) {
    cy += msg.c_y;
    cz += msg.c_z;
  }
  CHECK(cy == 0);
  CHECK(r.kept.z + cz == 4);
}

TEST_CASE("split_mass preconditions") {
  const Digraph g = star_out(3);
  const TransmissionDistribution dist(g);
  Rng rng(0);
  CHECK_THROWS_AS(split_mass(state(5, 1), dist.row(0), rng), ContractViolation);
  CHECK_THROWS_AS(split_mass(state(-1, 3), dist.row(0), rng), ContractViolation);
  CHECK_THROWS_AS(split_mass(state(5, 3, 0), dist.row(1), rng), TopologyError);
}

TEST_CASE("property: split conserves mass and respects piece bounds") {
  Rng pick(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const NodeId n = 2 + static_cast<NodeId>(pick() % 6);
    const Digraph g = generate_random_digraph(n, 0.5, trial);
    const TransmissionDistribution dist(g);
    const NodeId j = static_cast<NodeId>(pick() % n);
    const std::int64_t z = 2 + static_cast<std::int64_t>(pick() % 30);
    const std::int64_t y = static_cast<std::int64_t>(pick() % 500);
    Rng rng(trial);
    const auto r = split_mass(state(y, z, j), dist.row(j), rng);
    const std::int64_t lo = y / z;
    const std::int64_t hi = lo + (y % z ? 1 : 0);
    CHECK(r.piece_low == lo);
    CHECK(r.piece_high == hi);
    CHECK(r.kept.z >= 1);
    Mass total = r.kept;
    NodeId prev = -1;
    for (const auto& msg : r.outbound) {
      CHECK(msg.src == j);
      CHECK(msg.dst != j);
      CHECK(g.has_edge(j, msg.dst));
      CHECK(msg.c_z >= 1);
      CHECK(msg.dst > prev);
      prev = msg.dst;
      CHECK(msg.c_y >= lo * msg.c_z);
      CHECK(msg.c_y <= hi * msg.c_z);
      total += Mass{msg.c_y, msg.c_z};
    }
    CHECK(total == Mass{y, z});
    // the kept batch contains the one retained minimum piece
    CHECK(r.kept.y >= lo * r.kept.z);
    CHECK(r.kept.y <= lo + hi * (r.kept.z - 1));
  }
}

TEST_CASE("property: destinations follow the transmission distribution") {
  const Digraph g = star_out(4);  // node 0 reaches 1, 2, 3
  const TransmissionDistribution dist(g);
  std::map<NodeId, std::int64_t> count;
  Rng rng(77);
  const int runs = 20000;
  for (int i = 0; i < runs; ++i) {
    const auto r = split_mass(state(2, 2), dist.row(0), rng);
    if (r.outbound.empty()) {
      ++count[0];
    } else {
      ++count[r.outbound.front().dst];
    }
  }
  for (NodeId l = 0; l < 4; ++l) {
    CHECK(static_cast<double>(count[l]) / runs == doctest::Approx(0.25).epsilon(0.08));
  }
}

TEST_CASE("absorb") {
  const NodeState s = state(0, 0, 2);
  const auto a = absorb(s, {5, 1}, {});
  CHECK(a.y == 5);
  CHECK(a.z == 1);
  const std::vector<OutboundMessage> one{{0, 2, 3, 1}};
  const auto b = absorb(s, {5, 1}, one);
  CHECK(b.y == 8);
  CHECK(b.z == 2);
  const std::vector<OutboundMessage> two{{0, 2, 4, 2}, {1, 2, 1, 1}};
  const auto c = absorb(s, {2, 1}, two);
  CHECK(c.y == 7);
  CHECK(c.z == 4);
  const std::vector<OutboundMessage> wrong{{0, 3, 1, 1}};
  CHECK_THROWS_AS(absorb(s, {2, 1}, wrong), RoutingError);
}

TEST_CASE("refresh_votes") {
  const auto a = refresh_votes(state(7, 3));
  CHECK(a.M == 3);
  CHECK(a.m == 2);
  const auto b = refresh_votes(state(6, 3));
  CHECK(b.M == 2);
  CHECK(b.m == 2);
  const auto c = refresh_votes(state(0, 2));
  CHECK(c.M == 0);
  CHECK(c.m == 0);
  CHECK_THROWS_AS(refresh_votes(state(3, 0)), InvariantViolation);
}

TEST_CASE("merge_votes") {
  const std::vector<VoteMessage> in1{{1, 5, 1}};
  const auto a = merge_votes(votes(3, 2), in1);
  CHECK(a.M == 5);
  CHECK(a.m == 1);
  const auto b = merge_votes(votes(3, 3), {});
  CHECK(b.M == 3);
  CHECK(b.m == 3);
  const std::vector<VoteMessage> in2{{1, 2, 2}, {2, 2, 2}};
  const auto c = merge_votes(votes(2, 2), in2);
  CHECK(c.M == 2);
  CHECK(c.m == 2);
}

TEST_CASE("property: merge is idempotent, commutative and associative") {
  Rng rng(5);
  auto random_votes = [&](std::size_t k) {
    std::vector<VoteMessage> v;
    for (std::size_t i = 0; i < k; ++i) {
      const std::int64_t m = static_cast<std::int64_t>(rng() % 100);
      v.push_back({static_cast<NodeId>(i), m + static_cast<std::int64_t>(rng() % 10), m});
    }
    return v;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const NodeState base = votes(50 + static_cast<std::int64_t>(rng() % 20), 40);
    auto a = random_votes(1 + rng() % 5);
    auto b = random_votes(1 + rng() % 5);

    const auto once = merge_votes(base, a);
    CHECK(merge_votes(once, a) == once);

    auto shuffled = a;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(merge_votes(base, shuffled) == once);

    std::vector<VoteMessage> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    CHECK(merge_votes(merge_votes(base, a), b) == merge_votes(base, ab));
    CHECK(merge_votes(merge_votes(base, b), a) == merge_votes(base, ab));

    // monotone: M never drops, m never rises
    CHECK(once.M >= base.M);
    CHECK(once.m <= base.m);
  }
}

TEST_CASE("finalize_if_converged") {
  const auto a = finalize_if_converged(votes(7, 6));
  CHECK(a.flag);
  CHECK(a.q_s == 6);
  NodeState open = votes(7, 5);
  open.q_s = 11;
  const auto b = finalize_if_converged(open);
  CHECK_FALSE(b.flag);
  CHECK(b == open);
  const auto c = finalize_if_converged(votes(4, 4));
  CHECK(c.flag);
  CHECK(c.q_s == 4);
}
