#pragma once

// Centralized ground truth: validity and maximality checkers, sequential
// greedy, and exhaustive enumeration of all maximal solutions for small n.
// The distributed solvers are judged exclusively against these.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "hypergraph.hpp"
#include "types.hpp"

namespace hypermis {

// |e ∩ I| <= t_e for every edge.
struct ValidityReport {
  std::vector<EdgeIdx> violated;  // edges with |e∩I| > t_e
  bool ok() const { return violated.empty(); }
};

inline ValidityReport check_valid(const Hypergraph& h,
                                  const std::set<NodeId>& included) {
  ValidityReport rep;
  for (int ei = 0; ei < h.m(); ++ei) {
    int inside = 0;
    for (NodeId v : h.edges[ei].members) inside += included.count(v) ? 1 : 0;
    if (inside > h.edges[ei].threshold) rep.violated.push_back(ei);
  }
  return rep;
}

// Maximal: every node outside I has a witness edge e with v in e and
// |e ∩ I| = t_e (adding v would overshoot).
struct MaximalityReport {
  std::vector<NodeId> free_nodes;        // could still be added
  std::map<NodeId, EdgeIdx> witnesses;   // one tight edge per excluded node
  bool ok() const { return free_nodes.empty(); }
};

inline MaximalityReport check_maximal(const Hypergraph& h,
                                      const std::set<NodeId>& included) {
  MaximalityReport rep;
  std::vector<int> inside(h.m(), 0);
  for (int ei = 0; ei < h.m(); ++ei)
    for (NodeId v : h.edges[ei].members)
      inside[ei] += included.count(v) ? 1 : 0;
  for (NodeId v : h.nodes) {
    if (included.count(v)) continue;
    EdgeIdx witness = -1;
    for (int ei = 0; ei < h.m() && witness < 0; ++ei) {
      const auto& mem = h.edges[ei].members;
      if (!std::binary_search(mem.begin(), mem.end(), v)) continue;
      if (inside[ei] == h.edges[ei].threshold) witness = ei;
    }
    if (witness >= 0) rep.witnesses[v] = witness;
    else rep.free_nodes.push_back(v);
  }
  return rep;
}

// Sequential greedy over a node order: add v unless some incident edge is
// already tight.  Always valid and maximal.
inline std::set<NodeId> greedy_solve(const Hypergraph& h,
                                     const std::vector<NodeId>& order) {
  std::vector<int> inside(h.m(), 0);
  std::vector<std::vector<int>> incident;  // node index -> edge list
  incident.assign(h.n(), {});
  for (int ei = 0; ei < h.m(); ++ei)
    for (NodeId v : h.edges[ei].members) {
      int idx = h.index_of(v);
      if (idx >= 0) incident[idx].push_back(ei);
    }
  std::set<NodeId> included;
  for (NodeId v : order) {
    int idx = h.index_of(v);
    if (idx < 0 || included.count(v)) continue;
    bool blocked = false;
    for (int ei : incident[idx])
      if (inside[ei] == h.edges[ei].threshold) { blocked = true; break; }
    if (blocked) continue;
    included.insert(v);
    for (int ei : incident[idx]) inside[ei]++;
  }
  return included;
}

inline std::set<NodeId> greedy_solve(const Hypergraph& h) {
  return greedy_solve(h, h.nodes);
}

// All maximal solutions, by depth-first search over valid partial sets.
// Intended for n <= 15.
inline std::vector<std::set<NodeId>> enumerate_maximal(const Hypergraph& h) {
  std::vector<std::vector<int>> incident(h.n());
  for (int ei = 0; ei < h.m(); ++ei)
    for (NodeId v : h.edges[ei].members) {
      int idx = h.index_of(v);
      if (idx >= 0) incident[idx].push_back(ei);
    }
  std::vector<int> inside(h.m(), 0);
  std::vector<char> in_set(h.n(), 0);
  std::vector<std::set<NodeId>> out;

  auto can_add = [&](int idx) {
    for (int ei : incident[idx])
      if (inside[ei] == h.edges[ei].threshold) return false;
    return true;
  };

  // recurse over node indices; sets are built in ascending order
  auto rec = [&](auto&& self, int pos) -> void {
    if (pos == h.n()) {
      for (int idx = 0; idx < h.n(); ++idx)
        if (!in_set[idx] && can_add(idx)) return;  // not maximal
      std::set<NodeId> s;
      for (int idx = 0; idx < h.n(); ++idx)
        if (in_set[idx]) s.insert(h.nodes[idx]);
      out.push_back(std::move(s));
      return;
    }
    self(self, pos + 1);  // skip pos
    if (can_add(pos)) {
      in_set[pos] = 1;
      for (int ei : incident[pos]) inside[ei]++;
      self(self, pos + 1);
      for (int ei : incident[pos]) inside[ei]--;
      in_set[pos] = 0;
    }
  };
  rec(rec, 0);
  return out;
}

inline bool is_enumerated_solution(const std::vector<std::set<NodeId>>& family,
                                   const std::set<NodeId>& s) {
  return std::find(family.begin(), family.end(), s) != family.end();
}

}  // namespace hypermis
