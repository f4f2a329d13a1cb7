#pragma once

// Shared test helpers, including independent re-derivations used to
// cross-check the production code (kept out of the library on purpose).

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <vector>

#include "hypermis/generator.hpp"
#include "hypermis/hypergraph.hpp"
#include "hypermis/oracle.hpp"

namespace testsupport {

using namespace hypermis;

inline Hypergraph triangle2() {
  return Hypergraph::dense(3, {mis_edge({0, 1}), mis_edge({1, 2}), mis_edge({0, 2})});
}

inline Hypergraph path2() {
  return Hypergraph::dense(3, {mis_edge({0, 1}), mis_edge({1, 2})});
}

inline Hypergraph single_edge2() {
  return Hypergraph::dense(2, {mis_edge({0, 1})});
}

inline GenResult gen(int n, int m, std::vector<int> sizes, ThresholdMode tm,
                     std::uint64_t seed) {
  GenSpec s;
  s.n = n;
  s.target_edges = m;
  s.sizes = std::move(sizes);
  s.threshold_mode = tm;
  s.seed = seed;
  return gen_random_linear(s);
}

// slow recount of a degree profile, independent of the library routine
inline std::map<int, long long> recount_u(const Hypergraph& h,
                                          const std::set<NodeId>& active,
                                          ProfileMode mode) {
  std::map<int, long long> u;
  for (const auto& e : h.edges) {
    int act = 0;
    for (NodeId v : e.members) act += active.count(v) ? 1 : 0;
    if (mode == ProfileMode::BySize) {
      if (act == static_cast<int>(e.members.size())) u[act]++;
    } else {
      if (act > e.threshold) u[e.threshold]++;
    }
  }
  return u;
}

// server graph: nodes adjacent iff they share an edge; BFS distances
inline std::vector<int> server_bfs(const Hypergraph& h, NodeId src,
                                   const std::set<NodeId>& allowed) {
  std::map<NodeId, std::vector<NodeId>> adj;
  for (const auto& e : h.edges)
    for (size_t a = 0; a < e.members.size(); ++a)
      for (size_t b = a + 1; b < e.members.size(); ++b) {
        if (!allowed.count(e.members[a]) || !allowed.count(e.members[b])) continue;
        adj[e.members[a]].push_back(e.members[b]);
        adj[e.members[b]].push_back(e.members[a]);
      }
  std::vector<int> dist(h.n(), -1);
  int si = h.index_of(src);
  if (si < 0 || !allowed.count(src)) return dist;
  dist[si] = 0;
  std::queue<NodeId> q;
  q.push(src);
  while (!q.empty()) {
    NodeId v = q.front();
    q.pop();
    for (NodeId w : adj[v]) {
      int wi = h.index_of(w);
      if (dist[wi] < 0) {
        dist[wi] = dist[h.index_of(v)] + 1;
        q.push(w);
      }
    }
  }
  return dist;
}

}  // namespace testsupport
