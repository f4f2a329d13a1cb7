#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "hypermis/local_ref.hpp"
#include "hypermis/oracle.hpp"
#include "hypermis/stats.hpp"
#include "solve_support.hpp"
#include "support.hpp"

using namespace hypermis;
using namespace testsupport;

// ------------------------------------------------- reference (full-knowledge)

TEST_CASE("reference mode on fixed shapes") {
  LocalRun pair = local_components(single_edge2(), 5);
  CHECK(pair.included == std::set<NodeId>{0});  // ascending greedy
  CHECK(pair.undecided == 0);
  CHECK(pair.out.windows == 1);

  LocalRun tri = local_components(triangle2(), 5);
  CHECK(tri.included == std::set<NodeId>{0});
  CHECK(check_maximal(triangle2(), tri.included).ok());

  // threshold 2 on a triple: greedy keeps the two smallest ids
  Hypergraph h = Hypergraph::dense(3, {make_edge({0, 1, 2}, 2)});
  LocalRun t2 = local_components(h, 5);
  CHECK(t2.included == std::set<NodeId>{0, 1});
}

TEST_CASE("single-cluster reference runs equal the central greedy") {
  // with one cluster per component and one color, every member reconstructs
  // its whole component with original thresholds, so the announced solution
  // must be exactly the ascending-id greedy
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    Hypergraph mis = gen(40, 60, {2, 3, 4}, ThresholdMode::Mis, seed).h;
    CHECK(local_components(mis, seed).included == greedy_solve(mis));

    Hypergraph gmis = gen(40, 55, {2, 3, 4, 5}, ThresholdMode::Uniform, seed).h;
    CHECK(local_components(gmis, seed).included == greedy_solve(gmis));
  }
}

TEST_CASE("reference mode over real decompositions: valid, maximal, agreed") {
  int audited_clusters = 0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    for (ThresholdMode tm : {ThresholdMode::Mis, ThresholdMode::Uniform}) {
      Hypergraph h = gen(72, 100, {2, 3, 4}, tm, 90 + seed).h;
      LocalRun r = local_decomposed(h, seed);
      CHECK(r.undecided == 0);
      CHECK(check_valid(h, r.included).ok());
      CHECK(check_maximal(h, r.included).ok());
      CHECK(r.out.windows == r.tr.colors_used);
      // each cluster is audited exactly once, in its own color window
      CHECK(r.out.agreement_groups == r.tr.clusters);
      audited_clusters += static_cast<int>(r.out.agreement_groups);
    }
  }
  CHECK(audited_clusters > 0);
}

TEST_CASE("reference mode is reproducible for a fixed seed") {
  Hypergraph h = gen(64, 90, {2, 3, 4}, ThresholdMode::Uniform, 17).h;
  LocalRun a = local_decomposed(h, 23);
  LocalRun b = local_decomposed(h, 23);
  CHECK(a.included == b.included);
  CHECK(a.tr.hash() == b.tr.hash());
}

TEST_CASE("reference and bandwidth solvers agree on correctness, not on sets") {
  Hypergraph h = gen(64, 90, {2, 3}, ThresholdMode::Mis, 33).h;
  SolveRun band = solve_decomposed(h, 7, ProfileMode::BySize, Params::desk());
  LocalRun ref = local_decomposed(h, 7);
  for (const std::set<NodeId>& sol : {band.included, ref.included}) {
    CHECK(check_valid(h, sol).ok());
    CHECK(check_maximal(h, sol).ok());
  }
}

TEST_CASE("full-knowledge gossip needs the unbounded capacity") {
  // the same run under the bandwidth cap must trip the budget check:
  // a gossip blob is far wider than 8*ceil(log2 n) bits
  Hypergraph h = gen(16, 20, {2, 3}, ThresholdMode::Mis, 3).h;
  BipartiteNetwork net = BipartiteNetwork::build(h);
  Params prm;  // Capacity::Congest
  Engine eng(net, prm, 3);
  ColoredPartition part = component_partition(net);
  CHECK_THROWS_AS(local_reference_solve(eng, part), BudgetViolation);
}

TEST_CASE("edges already settled by earlier colors never leak into a window") {
  // a hand-built partition: {0,1} is color 1, {2} color 2, edges {0,1,2}
  // with threshold 1 and {1,2} with threshold 1.  after color 1 decides,
  // color 2's survey sees residual constraints, not originals.
  Hypergraph h = Hypergraph::dense(3, {make_edge({0, 1, 2}, 1), make_edge({1, 2}, 1)});
  BipartiteNetwork net = BipartiteNetwork::build(h);
  Params prm;
  prm.capacity = Capacity::Local;
  Engine eng(net, prm, 1);
  ColoredPartition part;
  part.label = {0, 0, 2};
  part.color = {1, 1, 2};
  part.center = {0, 0, 2};
  part.colors_used = 2;
  part.clusters = 2;
  part.client_port_color.resize(net.n_clients);
  part.client_port_label.resize(net.n_clients);
  for (int c = 0; c < net.n_clients; ++c) {
    const NodeId cid = net.n_servers + c;
    for (int p = 0; p < net.degree(cid); ++p) {
      NodeId peer = net.ports[cid][p].peer;
      part.client_port_color[c].push_back(part.color[peer]);
      part.client_port_label[c].push_back(part.label[peer]);
    }
  }
  LocalOutcome out = local_reference_solve(eng, part);
  std::set<NodeId> in;
  for (NodeId v = 0; v < 3; ++v)
    if (out.decision[v] == Decision::Included) in.insert(v);
  // color 1: greedy on {0,1} under {0,1,2}/t=1 (restriction size 2 > 1) and
  // {1,2}/t=1 (restriction size 1 <= 1, dropped) -> {0}; color 2: node 2 is
  // blocked by the tight edge {0,1,2}
  CHECK(in == std::set<NodeId>{0});
  CHECK(check_valid(h, in).ok());
  CHECK(check_maximal(h, in).ok());
}

// ----------------------------------------------------------- run statistics

TEST_CASE("progress summaries partition the iteration stream") {
  std::vector<Transcript> runs;
  long long included_sum = 0, excluded_sum = 0;
  size_t iter_count = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Hypergraph h = gen(48, 70, {2, 3, 4}, ThresholdMode::Mis, seed).h;
    SolveRun r = solve_components(h, seed, ProfileMode::BySize, Params::desk());
    for (const IterRecord& it : r.tr.iters) {
      included_sum += it.included;
      excluded_sum += it.excluded;
    }
    iter_count += r.tr.iters.size();
    runs.push_back(r.tr);
  }

  ProgressSummary ps = progress_stats(runs);
  long iters_by_branch = 0;
  long long decided_by_branch = 0;
  for (const auto& [br, b] : ps.by_branch) {
    iters_by_branch += b.iterations;
    decided_by_branch += b.decided;
    CHECK(b.median_fraction >= 0.0);
    CHECK(b.median_fraction <= 1.0);
    for (double f : b.fractions) {
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
    }
  }
  CHECK(iters_by_branch == ps.total_iterations);
  CHECK(static_cast<size_t>(ps.total_iterations) == iter_count);
  CHECK(decided_by_branch == ps.total_decided);
  CHECK(ps.total_decided == included_sum + excluded_sum);
}

TEST_CASE("an edgeless run is one all-free iteration deciding everyone") {
  Hypergraph h = Hypergraph::dense(9, {});
  SolveRun r = solve_components(h, 2, ProfileMode::BySize);
  ProgressSummary ps = progress_stats({r.tr});
  REQUIRE(ps.by_branch.count(Branch::AllFree));
  CHECK(ps.by_branch.at(Branch::AllFree).median_fraction == doctest::Approx(1.0));
}

TEST_CASE("trend regression recovers a planted exponent") {
  std::vector<std::pair<int, long>> rows;
  for (int n = 64; n <= 4096; n *= 2) {
    double l = std::log2(static_cast<double>(n));
    rows.push_back({n, static_cast<long>(std::llround(7.0 * l * l * l))});
  }
  CHECK(round_trend_slope(rows) == doctest::Approx(3.0).epsilon(0.01));

  CHECK(fit_slope({}) == 0.0);
  CHECK(fit_slope({{1.0, 5.0}}) == 0.0);
  CHECK(fit_slope({{0.0, 1.0}, {1.0, 3.0}, {2.0, 5.0}}) == doctest::Approx(2.0));
}
