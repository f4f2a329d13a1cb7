#pragma once

// Random linear hypergraph generation by rejection sampling: draw an edge
// size, draw distinct members, accept iff the new edge shares at most one
// node with every existing edge.  Deterministic for a fixed seed.

#include <algorithm>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "hypergraph.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace hypermis {

struct GenSpec {
  int n = 0;
  int target_edges = 0;
  std::vector<int> sizes = {2, 3, 4, 5};  // sampled uniformly
  ThresholdMode threshold_mode = ThresholdMode::Mis;
  std::uint64_t seed = 1;
  long attempt_cap = 0;  // 0 means 200 * target_edges + 1000
};

struct GenResult {
  Hypergraph h;
  bool reached_target = true;  // false: attempt cap hit first (partial result)
  long attempts = 0;
};

inline GenResult gen_random_linear(const GenSpec& spec) {
  GenResult out;
  out.h.nodes.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) out.h.nodes[i] = i;

  std::vector<int> sizes;
  for (int s : spec.sizes)
    if (s >= 2 && s <= spec.n) sizes.push_back(s);
  if (sizes.empty() || spec.target_edges <= 0) return out;

  const long cap =
      spec.attempt_cap > 0 ? spec.attempt_cap : 200L * spec.target_edges + 1000;
  NodeRng rng(spec.seed, 0x67656e /*"gen"*/, 0);
  std::uint64_t draw = 0;
  std::set<std::pair<NodeId, NodeId>> used_pairs;
  std::set<std::vector<NodeId>> used_sets;

  while (static_cast<int>(out.h.edges.size()) < spec.target_edges &&
         out.attempts < cap) {
    ++out.attempts;
    const int s = sizes[rng.u64(draw++) % sizes.size()];
    std::set<NodeId> pick;
    while (static_cast<int>(pick.size()) < s)
      pick.insert(static_cast<NodeId>(rng.u64(draw++) % spec.n));
    std::vector<NodeId> members(pick.begin(), pick.end());

    bool fresh = !used_sets.count(members);
    for (size_t a = 0; fresh && a < members.size(); ++a)
      for (size_t b = a + 1; b < members.size(); ++b)
        if (used_pairs.count({members[a], members[b]})) { fresh = false; break; }
    if (!fresh) continue;

    for (size_t a = 0; a < members.size(); ++a)
      for (size_t b = a + 1; b < members.size(); ++b)
        used_pairs.insert({members[a], members[b]});
    used_sets.insert(members);

    int t = s - 1;
    if (spec.threshold_mode == ThresholdMode::Uniform && s > 2)
      t = 1 + static_cast<int>(rng.u64(draw++) % (s - 1));
    else if (spec.threshold_mode == ThresholdMode::Uniform)
      t = 1;
    out.h.edges.push_back(make_edge(std::move(members), t));
  }
  out.reached_target =
      static_cast<int>(out.h.edges.size()) >= spec.target_edges;
  return out;
}

}  // namespace hypermis
