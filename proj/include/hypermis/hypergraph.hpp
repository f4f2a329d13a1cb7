#pragma once

// Linear hypergraph instances: storage, validation, degree profiles,
// equitability, induced and strict subhypergraphs.
//
// Conventions: node ids are distinct sorted integers (canonical instances use
// 0..n-1), edge members are sorted and distinct, and a threshold t_e with
// 1 <= t_e <= |e|-1 caps how many members of e an independent set may hold.
// Plain maximal-independent-set instances are the special case t_e = |e|-1.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "types.hpp"

namespace hypermis {

struct Hyperedge {
  std::vector<NodeId> members;  // sorted, distinct
  int threshold = 0;
};

struct Hypergraph {
  std::vector<NodeId> nodes;    // sorted, distinct
  std::vector<Hyperedge> edges;

  int n() const { return static_cast<int>(nodes.size()); }
  int m() const { return static_cast<int>(edges.size()); }

  bool canonical() const {
    for (int i = 0; i < n(); ++i)
      if (nodes[i] != i) return false;
    return true;
  }

  int index_of(NodeId v) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
    if (it == nodes.end() || *it != v) return -1;
    return static_cast<int>(it - nodes.begin());
  }

  static Hypergraph dense(int n, std::vector<Hyperedge> edges) {
    Hypergraph h;
    h.nodes.resize(n);
    for (int i = 0; i < n; ++i) h.nodes[i] = i;
    h.edges = std::move(edges);
    for (auto& e : h.edges) std::sort(e.members.begin(), e.members.end());
    return h;
  }
};

inline Hyperedge make_edge(std::vector<NodeId> members, int threshold) {
  Hyperedge e{std::move(members), threshold};
  std::sort(e.members.begin(), e.members.end());
  return e;
}

// mis_edge: threshold |e|-1 ("not all members may join")
inline Hyperedge mis_edge(std::vector<NodeId> members) {
  int t = static_cast<int>(members.size()) - 1;
  return make_edge(std::move(members), t);
}

// ---------------------------------------------------------------- validation

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Structural checks; with require_linear also pairwise |e∩f| <= 1 and the
// binomial edge-count cap m <= n(n-1)/2.
inline ValidationReport validate(const Hypergraph& h, bool require_linear) {
  ValidationReport rep;
  auto bad = [&rep](std::string s) { rep.violations.push_back(std::move(s)); };

  for (size_t i = 1; i < h.nodes.size(); ++i)
    if (h.nodes[i] <= h.nodes[i - 1]) {
      bad("node ids not sorted/distinct");
      break;
    }

  std::set<std::vector<NodeId>> seen_members;
  std::map<std::pair<NodeId, NodeId>, int> pair_owner;
  for (int ei = 0; ei < h.m(); ++ei) {
    const Hyperedge& e = h.edges[ei];
    const int s = static_cast<int>(e.members.size());
    std::string tag = "edge " + std::to_string(ei);
    if (s < 2) {
      bad(tag + ": size " + std::to_string(s) + " below 2");
      continue;
    }
    if (s > h.n()) bad(tag + ": size exceeds node count");
    bool sorted = true, known = true;
    for (size_t k = 0; k < e.members.size(); ++k) {
      if (k > 0 && e.members[k] <= e.members[k - 1]) sorted = false;
      if (h.index_of(e.members[k]) < 0) known = false;
    }
    if (!sorted) bad(tag + ": members not sorted/distinct");
    if (!known) bad(tag + ": member outside node set");
    if (e.threshold < 1 || e.threshold > s - 1)
      bad(tag + ": threshold " + std::to_string(e.threshold) +
          " outside [1, size-1]");
    if (!seen_members.insert(e.members).second)
      bad(tag + ": duplicate member set");
    if (require_linear && sorted && known) {
      for (int a = 0; a < s && require_linear; ++a)
        for (int b = a + 1; b < s; ++b) {
          auto key = std::make_pair(e.members[a], e.members[b]);
          auto it = pair_owner.find(key);
          if (it != pair_owner.end()) {
            bad(tag + ": shares 2 nodes with edge " + std::to_string(it->second));
            a = s;  // one report per edge is enough
            break;
          }
          pair_owner.emplace(key, ei);
        }
    }
  }
  if (require_linear) {
    long long cap = static_cast<long long>(h.n()) * (h.n() - 1) / 2;
    if (h.m() > cap)
      bad("edge count " + std::to_string(h.m()) + " exceeds linear cap " +
          std::to_string(cap));
  }
  return rep;
}

inline int dimension(const Hypergraph& h) {
  int d = 0;
  for (const auto& e : h.edges) d = std::max(d, static_cast<int>(e.members.size()));
  return d;
}

// ------------------------------------------------------------ degree profile

// Per-class degree data over a chosen active subset.
//   BySize:      classes are edge sizes; an edge counts iff every member is
//                active (induced semantics), class = |e|.
//   ByThreshold: classes are thresholds; an edge counts iff its restriction
//                to active members is larger than t_e (strict semantics),
//                class = t_e, and d_t(v) counts active members of kept edges.
struct DegreeProfile {
  ProfileMode mode = ProfileMode::BySize;
  int active_count = 0;
  int max_class = 0;
  std::vector<std::int64_t> u;          // u[class], size max_class+1
  std::vector<std::vector<std::int32_t>> d;  // d[class][node index in h]

  std::int64_t u_of(int cls) const {
    return (cls >= 0 && cls <= max_class) ? u[cls] : 0;
  }
  std::int32_t d_of(int cls, int node_index) const {
    return (cls >= 0 && cls <= max_class) ? d[cls][node_index] : 0;
  }
};

template <typename ActivePred>
DegreeProfile degree_profile(const Hypergraph& h, ActivePred active,
                             ProfileMode mode) {
  DegreeProfile p;
  p.mode = mode;
  std::vector<char> act(h.n(), 0);
  for (int i = 0; i < h.n(); ++i) {
    act[i] = active(h.nodes[i]) ? 1 : 0;
    p.active_count += act[i];
  }
  int maxc = 0;
  for (const auto& e : h.edges)
    maxc = std::max(maxc, static_cast<int>(e.members.size()));
  p.max_class = maxc;
  p.u.assign(maxc + 1, 0);
  p.d.assign(maxc + 1, std::vector<std::int32_t>(h.n(), 0));

  for (const auto& e : h.edges) {
    std::vector<int> act_idx;
    act_idx.reserve(e.members.size());
    bool all_active = true;
    for (NodeId v : e.members) {
      int idx = h.index_of(v);
      if (idx >= 0 && act[idx]) act_idx.push_back(idx);
      else all_active = false;
    }
    if (mode == ProfileMode::BySize) {
      if (!all_active) continue;
      int cls = static_cast<int>(e.members.size());
      p.u[cls]++;
      for (int idx : act_idx) p.d[cls][idx]++;
    } else {
      int cls = e.threshold;
      if (static_cast<int>(act_idx.size()) <= cls) continue;  // strict: dropped
      p.u[cls]++;
      for (int idx : act_idx) p.d[cls][idx]++;
    }
  }
  return p;
}

inline DegreeProfile degree_profile_all(const Hypergraph& h, ProfileMode mode) {
  return degree_profile(h, [](NodeId) { return true; }, mode);
}

// --------------------------------------------------------------- equitability

// True iff n <= c_eq, or for every class i in [range_lo, range_hi] and every
// node: d_i(v) <= (i*u_i/n) * (log2 n)^alpha.  range_lo is 2 for size
// profiles and 1 for threshold profiles.
inline bool is_equitable(const DegreeProfile& p, int c_eq, double alpha,
                         int range_hi) {
  const int n = p.active_count;
  if (n <= c_eq) return true;
  const int range_lo = (p.mode == ProfileMode::BySize) ? 2 : 1;
  const double logpow = log2_pow(static_cast<double>(n), alpha);
  for (int i = range_lo; i <= std::min(range_hi, p.max_class); ++i) {
    if (p.u[i] == 0) continue;
    const double bound = (static_cast<double>(i) * p.u[i] / n) * logpow;
    for (std::int32_t dv : p.d[i])
      if (static_cast<double>(dv) > bound) return false;
  }
  return true;
}

// ------------------------------------------------------------- subhypergraphs

// Keep only edges entirely inside `subset`; thresholds unchanged.
inline Hypergraph induced_subhypergraph(const Hypergraph& h,
                                        const std::vector<NodeId>& subset) {
  std::set<NodeId> keep;
  for (NodeId v : subset)
    if (h.index_of(v) >= 0) keep.insert(v);
  Hypergraph out;
  out.nodes.assign(keep.begin(), keep.end());
  for (const auto& e : h.edges) {
    bool inside = true;
    for (NodeId v : e.members)
      if (!keep.count(v)) { inside = false; break; }
    if (inside) out.edges.push_back(e);
  }
  return out;
}

// Shrink every edge to its intersection with `subset`, keep the original
// threshold, and drop edges whose restriction is not larger than t_e.  Any
// independent set of the result respects the original constraints (the
// dropped edges cannot be violated from inside `subset` alone).
inline Hypergraph strict_subhypergraph(const Hypergraph& h,
                                       const std::vector<NodeId>& subset) {
  std::set<NodeId> keep;
  for (NodeId v : subset)
    if (h.index_of(v) >= 0) keep.insert(v);
  Hypergraph out;
  out.nodes.assign(keep.begin(), keep.end());
  for (const auto& e : h.edges) {
    Hyperedge r;
    r.threshold = e.threshold;
    for (NodeId v : e.members)
      if (keep.count(v)) r.members.push_back(v);
    if (static_cast<int>(r.members.size()) > r.threshold)
      out.edges.push_back(std::move(r));
  }
  return out;
}

}  // namespace hypermis
