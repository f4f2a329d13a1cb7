#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "hypermis/hypergraph.hpp"
#include "support.hpp"

using namespace hypermis;
using namespace testsupport;

TEST_CASE("validate accepts a clean linear instance") {
  auto h = triangle2();
  CHECK(validate(h, true).ok());
  CHECK(validate(h, false).ok());
}

TEST_CASE("validate flags structural problems") {
  SUBCASE("two edges sharing two nodes break linearity") {
    auto h = Hypergraph::dense(4, {mis_edge({0, 1, 2}), mis_edge({0, 1, 3})});
    CHECK(validate(h, false).ok());
    auto rep = validate(h, true);
    REQUIRE_FALSE(rep.ok());
    CHECK(rep.violations[0].find("shares 2 nodes") != std::string::npos);
  }
  SUBCASE("size-1 edges are rejected") {
    auto h = Hypergraph::dense(2, {Hyperedge{{0}, 1}});
    CHECK_FALSE(validate(h, false).ok());
  }
  SUBCASE("thresholds must lie in [1, size-1]") {
    auto bad_low = Hypergraph::dense(3, {make_edge({0, 1}, 0)});
    auto bad_high = Hypergraph::dense(3, {make_edge({0, 1, 2}, 3)});
    CHECK_FALSE(validate(bad_low, false).ok());
    CHECK_FALSE(validate(bad_high, false).ok());
  }
  SUBCASE("duplicate member sets are rejected regardless of threshold") {
    auto h = Hypergraph::dense(3, {make_edge({0, 1, 2}, 2), make_edge({0, 1, 2}, 1)});
    CHECK_FALSE(validate(h, false).ok());
  }
  SUBCASE("members must belong to the node set") {
    Hypergraph h;
    h.nodes = {0, 1, 2};
    h.edges = {mis_edge({0, 7})};
    CHECK_FALSE(validate(h, false).ok());
  }
}

TEST_CASE("linear edge count cap: 10 nodes carry at most 45 edges") {
  // 45 distinct pairs plus anything more must repeat a pair and bump the cap
  std::vector<Hyperedge> edges;
  for (int a = 0; a < 10; ++a)
    for (int b = a + 1; b < 10; ++b) edges.push_back(mis_edge({a, b}));
  edges.push_back(mis_edge({0, 1, 2}));
  auto h = Hypergraph::dense(10, edges);
  auto rep = validate(h, true);
  REQUIRE_FALSE(rep.ok());
  bool saw_cap = false, saw_pair = false;
  for (const auto& v : rep.violations) {
    if (v.find("exceeds linear cap") != std::string::npos) saw_cap = true;
    if (v.find("shares 2 nodes") != std::string::npos) saw_pair = true;
  }
  CHECK(saw_cap);
  CHECK(saw_pair);
}

TEST_CASE("dimension") {
  CHECK(dimension(Hypergraph::dense(4, {})) == 0);
  CHECK(dimension(triangle2()) == 2);
  CHECK(dimension(Hypergraph::dense(5, {mis_edge({0, 1}), mis_edge({0, 2, 3, 4})})) == 4);
}

TEST_CASE("degree profile by size on the full node set") {
  auto h = Hypergraph::dense(5, {mis_edge({0, 1}), mis_edge({1, 2}),
                                 mis_edge({0, 2, 3})});
  auto p = degree_profile_all(h, ProfileMode::BySize);
  CHECK(p.active_count == 5);
  CHECK(p.u_of(2) == 2);
  CHECK(p.u_of(3) == 1);
  CHECK(p.d_of(2, 1) == 2);  // node 1 sits in both 2-edges
  CHECK(p.d_of(3, 3) == 1);
  CHECK(p.d_of(3, 4) == 0);
}

TEST_CASE("degree profile respects induced semantics for size classes") {
  auto h = Hypergraph::dense(4, {mis_edge({0, 1}), mis_edge({1, 2}), mis_edge({2, 3})});
  std::set<NodeId> active = {0, 1, 2};
  auto p = degree_profile(h, [&](NodeId v) { return active.count(v) > 0; },
                          ProfileMode::BySize);
  CHECK(p.active_count == 3);
  CHECK(p.u_of(2) == 2);        // {2,3} has an inactive member
  CHECK(p.d_of(2, 2) == 1);
  CHECK(p.d_of(2, 3) == 0);
}

TEST_CASE("degree profile by threshold uses strict restriction") {
  auto h = Hypergraph::dense(5, {make_edge({0, 1, 2, 3}, 2), make_edge({0, 4}, 1)});
  std::set<NodeId> active = {0, 1, 2};
  auto p = degree_profile(h, [&](NodeId v) { return active.count(v) > 0; },
                          ProfileMode::ByThreshold);
  // {0,1,2,3} restricted to {0,1,2}: size 3 > t=2, kept in class 2
  // {0,4} restricted to {0}: size 1 <= t=1, dropped
  CHECK(p.u_of(2) == 1);
  CHECK(p.u_of(1) == 0);
  CHECK(p.d_of(2, 0) == 1);
  CHECK(p.d_of(2, 3) == 0);
}

TEST_CASE("degree identity: sum of d_i over nodes matches class counts") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto g = gen(24, 30, {2, 3, 4}, ThresholdMode::Uniform, seed);
    std::set<NodeId> active;
    NodeRng r(seed, 99, 0);
    for (NodeId v : g.h.nodes)
      if (r.bernoulli(v, 0.7)) active.insert(v);
    for (auto mode : {ProfileMode::BySize, ProfileMode::ByThreshold}) {
      auto p = degree_profile(g.h, [&](NodeId v) { return active.count(v) > 0; }, mode);
      auto slow_u = recount_u(g.h, active, mode);
      for (int cls = 0; cls <= p.max_class; ++cls) {
        long long expect_u = slow_u.count(cls) ? slow_u[cls] : 0;
        CHECK(p.u_of(cls) == expect_u);
        long long dsum = 0;
        for (int i = 0; i < g.h.n(); ++i) dsum += p.d_of(cls, i);
        if (mode == ProfileMode::BySize) {
          CHECK(dsum == static_cast<long long>(cls) * expect_u);
        } else {
          // by threshold the per-edge contribution is its restricted size
          long long expect_sum = 0;
          for (const auto& e : g.h.edges) {
            if (e.threshold != cls) continue;
            int act = 0;
            for (NodeId v : e.members) act += active.count(v) ? 1 : 0;
            if (act > e.threshold) expect_sum += act;
          }
          CHECK(dsum == expect_sum);
        }
      }
    }
  }
}

TEST_CASE("equitability") {
  SUBCASE("small active sets are always equitable") {
    auto h = Hypergraph::dense(8, {mis_edge({0, 1})});
    auto p = degree_profile_all(h, ProfileMode::BySize);
    CHECK(is_equitable(p, 16, 0.0, 3));
  }
  SUBCASE("64-node cycle of 2-edges passes with exponent 5") {
    std::vector<Hyperedge> edges;
    for (int i = 0; i < 64; ++i) edges.push_back(mis_edge({i, (i + 1) % 64}));
    auto h = Hypergraph::dense(64, edges);
    auto p = degree_profile_all(h, ProfileMode::BySize);
    // bound (2*64/64)*6^5 = 15552 dwarfs every d_2(v)=2
    CHECK(is_equitable(p, 16, 5.0, 6));
  }
  SUBCASE("star exceeds the average once the exponent is forced to 0") {
    std::vector<Hyperedge> edges;
    for (int i = 1; i <= 20; ++i) edges.push_back(mis_edge({0, i}));
    auto h = Hypergraph::dense(21, edges);
    auto p = degree_profile_all(h, ProfileMode::BySize);
    CHECK(is_equitable(p, 16, 5.0, 4));        // vacuously large bound
    CHECK_FALSE(is_equitable(p, 16, 0.0, 4));  // d_2(0)=20 > 2*20/21
  }
}

TEST_CASE("induced subhypergraph keeps only fully inside edges") {
  auto h = Hypergraph::dense(5, {mis_edge({0, 1}), mis_edge({1, 2, 3}), mis_edge({3, 4})});
  auto s = induced_subhypergraph(h, {0, 1, 2, 3});
  CHECK(s.n() == 4);
  REQUIRE(s.m() == 2);
  CHECK(s.edges[0].members == std::vector<NodeId>{0, 1});
  CHECK(s.edges[1].members == std::vector<NodeId>{1, 2, 3});
}

TEST_CASE("strict subhypergraph shrinks edges and drops satisfied ones") {
  auto h = Hypergraph::dense(5, {make_edge({0, 1, 2, 3}, 2)});
  SUBCASE("restriction larger than the threshold is kept") {
    auto s = strict_subhypergraph(h, {0, 1, 2});
    REQUIRE(s.m() == 1);
    CHECK(s.edges[0].members == std::vector<NodeId>{0, 1, 2});
    CHECK(s.edges[0].threshold == 2);
  }
  SUBCASE("restriction at or below the threshold disappears") {
    auto s = strict_subhypergraph(h, {0, 1});
    CHECK(s.m() == 0);
    CHECK(s.n() == 2);
  }
}

TEST_CASE("strict restriction composes over nested subsets") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto g = gen(16, 20, {2, 3, 4}, ThresholdMode::Uniform, seed);
    NodeRng r(seed, 7, 0);
    std::vector<NodeId> w, w2;
    for (NodeId v : g.h.nodes)
      if (r.bernoulli(v, 0.75)) w.push_back(v);
    for (NodeId v : w)
      if (r.bernoulli(100 + v, 0.75)) w2.push_back(v);
    auto a = strict_subhypergraph(strict_subhypergraph(g.h, w), w2);
    auto b = strict_subhypergraph(g.h, w2);
    CHECK(a.nodes == b.nodes);
    REQUIRE(a.m() == b.m());
    for (int i = 0; i < a.m(); ++i) {
      CHECK(a.edges[i].members == b.edges[i].members);
      CHECK(a.edges[i].threshold == b.edges[i].threshold);
    }
  }
}

TEST_CASE("independent sets transfer from subhypergraphs to the host") {
  // strict restrictions are safe for arbitrary thresholds; induced
  // subhypergraphs are only safe when every threshold is |e|-1
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    auto g = gen(11, 14, {2, 3, 4}, ThresholdMode::Uniform, seed);
    NodeRng r(seed, 13, 0);
    std::vector<NodeId> w;
    for (NodeId v : g.h.nodes)
      if (r.bernoulli(v, 0.6)) w.push_back(v);

    auto s = strict_subhypergraph(g.h, w);
    for (const auto& sol : enumerate_maximal(s)) {
      CHECK(check_valid(s, sol).ok());
      CHECK(check_valid(g.h, sol).ok());
    }

    auto gm = gen(11, 14, {2, 3, 4}, ThresholdMode::Mis, seed);
    auto ind = induced_subhypergraph(gm.h, w);
    for (const auto& sol : enumerate_maximal(ind))
      CHECK(check_valid(gm.h, sol).ok());
  }
}

TEST_CASE("induced transfer can fail below full thresholds") {
  // the counterexample that forces strict semantics for general thresholds
  auto h = Hypergraph::dense(3, {make_edge({0, 1, 2}, 1)});
  auto ind = induced_subhypergraph(h, {0, 1});
  CHECK(ind.m() == 0);
  CHECK(check_valid(ind, {0, 1}).ok());
  CHECK_FALSE(check_valid(h, {0, 1}).ok());
  auto s = strict_subhypergraph(h, {0, 1});
  REQUIRE(s.m() == 1);  // {0,1} with threshold 1 survives and protects the host
  CHECK_FALSE(check_valid(s, {0, 1}).ok());
}
