#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <thread>

#include "hoaexec/trap_analysis.hpp"
#include "support/oracles.hpp"

using namespace hoaexec;

namespace {

using Edges = std::vector<std::pair<StateId, StateId>>;

StateGraph graph(std::size_t n, const Edges& e, StateSet initial = {0}) {
  return StateGraph::from_edges(n, e, std::move(initial));
}

// q0->q1, q1->q1, q1->q2, q2->q2
StateGraph chain3() { return graph(3, {{0, 1}, {1, 1}, {1, 2}, {2, 2}}); }
// s0<->s1, s1->s1, s0->s2, s2->s2
StateGraph two_exits() { return graph(3, {{0, 1}, {1, 0}, {1, 1}, {0, 2}, {2, 2}}); }

std::vector<std::pair<std::size_t, std::size_t>> widen(const Edges& e) {
  return {e.begin(), e.end()};
}

}  // namespace

TEST_CASE("index of the first example graph") {
  const TrapIndex idx(chain3());
  REQUIRE(idx.component_count() == 3);
  CHECK(idx.components()[0] == StateSet{0});
  CHECK(idx.components()[1] == StateSet{1});
  CHECK(idx.components()[2] == StateSet{2});
  CHECK(idx.condensation()[0] == std::vector<ComponentId>{1});
  CHECK(idx.condensation()[1] == std::vector<ComponentId>{2});
  CHECK(idx.condensation()[2].empty());
}

TEST_CASE("index of the second example graph") {
  const TrapIndex idx(two_exits());
  REQUIRE(idx.component_count() == 2);
  CHECK(idx.components()[0] == StateSet{0, 1});
  CHECK(idx.components()[1] == StateSet{2});
  CHECK(idx.condensation()[0] == std::vector<ComponentId>{1});
}

TEST_CASE("single state without edges") {
  const TrapIndex idx(graph(1, {}));
  CHECK(idx.component_count() == 1);
  CHECK(idx.condensation()[0].empty());
  CHECK(idx.bsccs() == std::vector<StateSet>{{0}});
}

TEST_CASE("empty graphs are rejected") {
  CHECK_THROWS_AS(TrapIndex(graph(0, {}, {})), StructuralError);
}

TEST_CASE("minimal trap sets in the first example") {
  const TrapIndex idx(chain3());
  const auto t1 = min_trap_set_of(idx, 1);
  CHECK(t1.states == StateSet{1, 2});
  CHECK_FALSE(t1.minimal);
  CHECK_FALSE(t1.trivial);
  const auto t2 = min_trap_set_of(idx, 2);
  CHECK(t2.states == StateSet{2});
  CHECK(t2.minimal);
  CHECK_THROWS_AS(min_trap_set_of(idx, 7), StructuralError);
}

TEST_CASE("minimal trap set of the second example's initial state") {
  const auto g = two_exits();
  const TrapIndex idx(g);
  const auto t = min_trap_set_of(idx, 0);
  CHECK(t.states == StateSet{0, 1, 2});
  CHECK_FALSE(t.minimal);
  CHECK(t.trivial);
  // cross-check against brute force
  const auto fam = oracle::trap_family(oracle::adjacency(3, widen({{0, 1}, {1, 0}, {1, 1}, {0, 2}, {2, 2}})));
  CHECK(oracle::to_states(oracle::least_trap_containing(fam, 0)) == t.states);
}

TEST_CASE("transient sets") {
  const auto g = two_exits();
  CHECK(is_transient(g, {0}));
  CHECK_FALSE(is_transient(g, {1}));
  CHECK_FALSE(is_transient(g, {0, 1}));
  CHECK(is_transient(g, {}));
  CHECK(is_transient(chain3(), {0}));
}

TEST_CASE("bottom components") {
  CHECK(bsccs(TrapIndex(chain3())) == std::vector<StateSet>{{2}});
  CHECK(bsccs(TrapIndex(two_exits())) == std::vector<StateSet>{{2}});
  Edges k3;
  for (StateId u = 0; u < 3; ++u) {
    for (StateId v = 0; v < 3; ++v) k3.emplace_back(u, v);
  }
  CHECK(bsccs(TrapIndex(graph(3, k3))) == std::vector<StateSet>{{0, 1, 2}});
}

TEST_CASE("trap sets agree with brute-force enumeration") {
  std::mt19937_64 rng(21);
  for (int round = 0; round < 300; ++round) {
    const std::size_t n = 1 + rng() % 8;
    const auto edges = oracle::random_edges(rng, n, 0.1 + 0.3 * static_cast<double>(rng() % 4) / 3.0, rng() % 2 == 0);
    Edges e;
    for (auto [u, v] : edges) e.emplace_back(static_cast<StateId>(u), static_cast<StateId>(v));
    const auto g = graph(n, e);
    const TrapIndex idx(g);
    const auto fam = oracle::trap_family(oracle::adjacency(n, edges));

    std::vector<oracle::Mask> expected_bottom = oracle::minimal_traps(fam);
    std::vector<oracle::Mask> got_bottom;
    for (const auto& b : idx.bsccs()) got_bottom.push_back(oracle::to_mask(b));
    std::sort(expected_bottom.begin(), expected_bottom.end());
    std::sort(got_bottom.begin(), got_bottom.end());
    REQUIRE(got_bottom == expected_bottom);

    for (StateId q = 0; q < n; ++q) {
      const auto t = idx.min_trap_set_of(q);
      REQUIRE(oracle::to_mask(t.states) == oracle::least_trap_containing(fam, q));
      REQUIRE(oracle::is_trap(oracle::adjacency(n, edges), oracle::to_mask(t.states)));
      REQUIRE(t.minimal == (std::count(expected_bottom.begin(), expected_bottom.end(),
                                       oracle::to_mask(t.states)) == 1));
      REQUIRE(t.trivial == std::binary_search(t.states.begin(), t.states.end(), StateId{0}));
    }
  }
}

TEST_CASE("transience matches acyclicity of the induced subgraph") {
  std::mt19937_64 rng(8);
  for (int round = 0; round < 300; ++round) {
    const std::size_t n = 1 + rng() % 7;
    const auto edges = oracle::random_edges(rng, n, 0.25, false);
    Edges e;
    for (auto [u, v] : edges) e.emplace_back(static_cast<StateId>(u), static_cast<StateId>(v));
    const auto g = graph(n, e);
    const auto s = static_cast<oracle::Mask>(rng() % (oracle::Mask{1} << n));
    const auto adj = oracle::adjacency(n, edges);
    bool cyclic = false;
    for (oracle::Mask c = 1; c < (oracle::Mask{1} << n); ++c) {
      if ((c & s) == c && oracle::realizable_cycle(adj, c)) cyclic = true;
    }
    REQUIRE(is_transient(g, oracle::to_states(s)) == !cyclic);
  }
}

TEST_CASE("runs never leave the minimal trap set once entered") {
  std::mt19937_64 rng(4);
  for (int round = 0; round < 20; ++round) {
    const auto a = oracle::random_dc_automaton(rng, 8, 2);
    const auto g = StateGraph::of(a);
    const TrapIndex idx(g);
    StateId q = a.initial.front();
    std::vector<StateSet> entered;
    for (int step = 0; step < 10000; ++step) {
      const auto v = Valuation::from_bits(rng(), a.aps.size());
      q = successors(a, q, v).front();
      for (const auto& t : entered) REQUIRE(std::binary_search(t.begin(), t.end(), q));
      if (step % 500 == 0) entered.push_back(idx.min_trap_set_of(q).states);
    }
  }
}

TEST_CASE("deep chains do not exhaust the stack") {
  const std::size_t n = 200000;
  Edges e;
  for (StateId q = 0; q + 1 < n; ++q) e.emplace_back(q, q + 1);
  const TrapIndex idx(graph(n, e));
  CHECK(idx.component_count() == n);
  CHECK(idx.min_trap_set_of(0).states.size() == n);
}

TEST_CASE("concurrent queries observe the same results") {
  std::mt19937_64 rng(13);
  const auto edges = oracle::random_edges(rng, 60, 0.05, true);
  Edges e;
  for (auto [u, v] : edges) e.emplace_back(static_cast<StateId>(u), static_cast<StateId>(v));
  const auto g = graph(60, e);
  const TrapIndex shared(g);
  const TrapIndex reference(g);
  std::vector<StateSet> expected;
  for (StateId q = 0; q < 60; ++q) expected.push_back(reference.min_trap_set_of(q).states);
  std::vector<std::thread> workers;
  std::vector<int> mismatches(4, 0);
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([&, w] {
      for (int r = 0; r < 50; ++r) {
        for (StateId q = 0; q < 60; ++q) {
          const StateId p = static_cast<StateId>((q * 7 + static_cast<StateId>(w) * 13) % 60);
          if (shared.min_trap_set_of(p).states != expected[p]) ++mismatches[static_cast<std::size_t>(w)];
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  CHECK(mismatches == std::vector<int>(4, 0));
}
