#pragma once

// Reference solver in the unbounded-message (LOCAL) regime.  Windows walk
// the decomposition colors exactly like the round-efficient solver, but
// inside a window each cluster simply floods its residual edge set until
// every member knows all of it, and then every member runs the same
// deterministic ascending-id greedy.  All members of a cluster therefore
// compute the *whole* cluster solution identically; the driver audits that
// agreement and each node announces only its own decision.  Useful as an
// end-to-end cross-check of the window/residual semantics with none of the
// bandwidth machinery in the loop.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "decompose.hpp"
#include "engine.hpp"
#include "network.hpp"
#include "solve_core.hpp"
#include "types.hpp"

namespace hypermis {

// What one node has heard about its cluster's residual hypergraph.  New
// content lands in the fresh-sets as well, so flooding can rebroadcast only
// deltas instead of the whole accumulated view every hop.
struct LocalKnow {
  std::set<NodeId> members;
  std::map<int, std::pair<int, std::vector<NodeId>>> edges;  // id -> (resid, members)
  std::set<NodeId> fresh_members;  // arrived since the last drain
  std::set<int> fresh_edges;
  bool grew = false;

  void seed_self(NodeId v) {
    if (members.insert(v).second) fresh_members.insert(v);
  }

  bool has_fresh() const { return !fresh_members.empty() || !fresh_edges.empty(); }

  void drain_fresh() {
    fresh_members.clear();
    fresh_edges.clear();
  }

  std::vector<std::int64_t> pack() const {
    std::vector<std::int64_t> b;
    b.push_back(static_cast<std::int64_t>(members.size()));
    for (NodeId v : members) b.push_back(v);
    b.push_back(static_cast<std::int64_t>(edges.size()));
    for (const auto& [id, rec] : edges) {
      b.push_back(id);
      b.push_back(rec.first);
      b.push_back(static_cast<std::int64_t>(rec.second.size()));
      for (NodeId v : rec.second) b.push_back(v);
    }
    return b;
  }

  std::vector<std::int64_t> pack_fresh() const {
    std::vector<std::int64_t> b;
    b.push_back(static_cast<std::int64_t>(fresh_members.size()));
    for (NodeId v : fresh_members) b.push_back(v);
    b.push_back(static_cast<std::int64_t>(fresh_edges.size()));
    for (int id : fresh_edges) {
      const auto& rec = edges.at(id);
      b.push_back(id);
      b.push_back(rec.first);
      b.push_back(static_cast<std::int64_t>(rec.second.size()));
      for (NodeId v : rec.second) b.push_back(v);
    }
    return b;
  }

  void merge(const std::vector<std::int64_t>& b) {
    std::size_t i = 0;
    const std::int64_t nm = b[i++];
    for (std::int64_t k = 0; k < nm; ++k) {
      const NodeId v = static_cast<NodeId>(b[i++]);
      if (members.insert(v).second) {
        fresh_members.insert(v);
        grew = true;
      }
    }
    const std::int64_t ne = b[i++];
    for (std::int64_t k = 0; k < ne; ++k) {
      const int id = static_cast<int>(b[i++]);
      const int resid = static_cast<int>(b[i++]);
      const std::int64_t sz = b[i++];
      std::vector<NodeId> mem(sz);
      for (std::int64_t j = 0; j < sz; ++j) mem[j] = static_cast<NodeId>(b[i++]);
      if (edges.emplace(id, std::make_pair(resid, std::move(mem))).second) {
        fresh_edges.insert(id);
        grew = true;
      }
    }
  }
};

// Ascending-id greedy over a residual edge list; returns the included set.
inline std::set<NodeId> greedy_residual(const LocalKnow& know) {
  std::map<NodeId, std::vector<int>> incident;
  for (const auto& [id, rec] : know.edges)
    for (NodeId v : rec.second) incident[v].push_back(id);
  std::map<int, int> inside;  // edge id -> included members so far
  std::set<NodeId> sol;
  for (NodeId v : know.members) {  // std::set iterates ascending
    auto it = incident.find(v);
    bool fits = true;
    if (it != incident.end())
      for (int id : it->second)
        if (inside[id] + 1 > know.edges.at(id).first) { fits = false; break; }
    if (!fits) continue;
    sol.insert(v);
    if (it != incident.end())
      for (int id : it->second) inside[id]++;
  }
  return sol;
}

// Window start: clients survey their edge, then hand every current-color
// member one record per surviving edge; members seed their own id.
class LocalSeedProtocol : public WindowStepProtocol {
 public:
  LocalSeedProtocol(SolveCore& core, std::vector<LocalKnow>& know)
      : WindowStepProtocol(core, 2), know_(&know) {}

 private:
  void server_round(RoundContext& ctx, NodeId v, long rel) override {
    SolverServer& s = core_->srv[v];
    if (rel == 0 && s.in_window) {
      (*know_)[v] = LocalKnow{};
      (*know_)[v].seed_self(v);
    }
    if (rel == 1 && s.in_window)
      for (const Incoming& in : ctx.inbox())
        if (in.msg.type == MsgType::LocalGossip) (*know_)[v].merge(in.msg.blob);
  }

  void client_round(RoundContext& ctx, int c, long rel) override {
    if (rel != 0) return;
    SolverClient& k = core_->cli[c];
    if (!k.in_window) return;
    core_->survey(c);
    if (!k.exists) return;
    Message m;
    m.type = MsgType::LocalGossip;
    LocalKnow rec;
    const NodeId cli_id = net_->n_servers + c;
    std::vector<NodeId> mem;
    for (int p = 0; p < net_->degree(cli_id); ++p)
      if (core_->window_port(c, p)) mem.push_back(net_->ports[cli_id][p].peer);
    rec.edges[c] = {std::max(0, k.resid), mem};
    m.blob = rec.pack();
    for (int p = 0; p < net_->degree(cli_id); ++p)
      if (core_->window_port(c, p)) ctx.send(p, m);
  }

  std::vector<LocalKnow>* know_;
};

// One flood hop: members broadcast what they learned since their last send,
// clients union the blobs and relay them back across the edge, members merge.
class LocalFloodProtocol : public WindowStepProtocol {
 public:
  LocalFloodProtocol(SolveCore& core, std::vector<LocalKnow>& know)
      : WindowStepProtocol(core, 3), know_(&know) {}

 private:
  void server_round(RoundContext& ctx, NodeId v, long rel) override {
    SolverServer& s = core_->srv[v];
    if (rel == 0) {
      if (!s.in_window) return;
      LocalKnow& kn = (*know_)[v];
      kn.grew = false;
      if (!kn.has_fresh()) return;
      Message m;
      m.type = MsgType::LocalGossip;
      m.blob = kn.pack_fresh();
      kn.drain_fresh();
      send_all(ctx, v, m);
      return;
    }
    if (rel == 2 && s.in_window)
      for (const Incoming& in : ctx.inbox())
        if (in.msg.type == MsgType::LocalGossip) (*know_)[v].merge(in.msg.blob);
  }

  void client_round(RoundContext& ctx, int c, long rel) override {
    if (rel != 1) return;
    SolverClient& k = core_->cli[c];
    if (!k.in_window) return;
    LocalKnow acc;
    for (const Incoming& in : ctx.inbox())
      if (in.msg.type == MsgType::LocalGossip) acc.merge(in.msg.blob);
    if (acc.members.empty() && acc.edges.empty()) return;
    Message m;
    m.type = MsgType::LocalGossip;
    m.blob = acc.pack();
    const NodeId cli_id = net_->n_servers + c;
    for (int p = 0; p < net_->degree(cli_id); ++p)
      if (core_->window_port(c, p)) ctx.send(p, m);
  }

  std::vector<LocalKnow>* know_;
};

// Every member solves its copy of the cluster and announces its own fate.
class LocalDecideProtocol : public WindowStepProtocol {
 public:
  LocalDecideProtocol(SolveCore& core, std::vector<LocalKnow>& know)
      : WindowStepProtocol(core, 2), know_(&know) {}

 private:
  void server_round(RoundContext& ctx, NodeId v, long rel) override {
    if (rel != 0) return;
    SolverServer& s = core_->srv[v];
    if (!s.in_window || s.decision != Decision::Undecided) return;
    const std::set<NodeId> sol = greedy_residual((*know_)[v]);
    s.decision = sol.count(v) ? Decision::Included : Decision::Excluded;
    Message m;
    m.type = MsgType::StateAnnounce;
    m.a = static_cast<std::int64_t>(s.decision == Decision::Included
                                        ? WireState::Joined
                                        : WireState::Out);
    send_all(ctx, v, m);
  }

  void client_round(RoundContext& ctx, int c, long rel) override {
    if (rel != 1) return;
    for (const Incoming& in : ctx.inbox())
      if (in.msg.type == MsgType::StateAnnounce)
        core_->ingest_state(c, in.port, static_cast<WireState>(in.msg.a));
  }

  std::vector<LocalKnow>* know_;
};

struct LocalOutcome {
  std::vector<Decision> decision;
  int windows = 0;
  long agreement_groups = 0;  // clusters whose members were compared
};

// Full-knowledge members of one cluster must agree exactly: same member
// list, same edge view.  Returns each cluster's shared greedy solution so the
// post-decide audit can hold every member to it.
inline std::map<NodeId, std::set<NodeId>> audit_local_views(
    const SolveCore& core, const std::vector<LocalKnow>& know) {
  std::map<NodeId, std::vector<NodeId>> groups;
  for (NodeId v = 0; v < core.net->n_servers; ++v)
    if (core.srv[v].in_window) groups[core.srv[v].label].push_back(v);
  std::map<NodeId, std::set<NodeId>> sols;
  for (const auto& [L, vs] : groups) {
    const LocalKnow& first = know[vs.front()];
    for (NodeId v : vs)
      if (know[v].members != first.members || know[v].edges != first.edges)
        throw SimulationBug("cluster " + std::to_string(L) +
                            " flooded views diverge at server " + std::to_string(v));
    sols[L] = greedy_residual(first);
  }
  return sols;
}

// After members announce, each decision must match the cluster solution.
inline void audit_local_agreement(const SolveCore& core,
                                  const std::map<NodeId, std::set<NodeId>>& sols,
                                  LocalOutcome& out) {
  for (const auto& [L, sol] : sols) {
    for (NodeId v = 0; v < core.net->n_servers; ++v) {
      if (!core.srv[v].in_window || core.srv[v].label != L) continue;
      const bool joined = core.srv[v].decision == Decision::Included;
      if (joined != (sol.count(v) > 0))
        throw SimulationBug("cluster " + std::to_string(L) + " member " +
                            std::to_string(v) +
                            " decided against the agreed solution");
    }
    out.agreement_groups++;
  }
}

// Reference driver: flood-to-fixpoint per color window, then decide.
inline LocalOutcome local_reference_solve(Engine& eng, const ColoredPartition& part) {
  const BipartiteNetwork& net = eng.net();
  int dim = 2;
  for (int c = 0; c < net.n_clients; ++c) dim = std::max(dim, net.client_size[c]);
  SolveCore core(net, part, eng.params(), ProfileMode::ByThreshold,
                 eng.transcript().seed, dim);
  std::vector<LocalKnow> know(net.n_servers);

  LocalOutcome out;
  std::set<int> colors(part.color.begin(), part.color.end());
  for (int color : colors) {
    core.begin_window(color);
    out.windows++;
    LocalSeedProtocol seed(core, know);
    eng.run(seed, 8);
    const long hop_cap = 2L * net.n_servers + 8;
    long hops = 0;
    while (true) {
      if (++hops > hop_cap)
        throw SimulationBug("flooding failed to reach a fixpoint");
      LocalFloodProtocol flood(core, know);
      eng.run(flood, 8);
      bool grew = false;
      for (NodeId v = 0; v < net.n_servers && !grew; ++v)
        grew = core.srv[v].in_window && know[v].grew;
      if (!grew) break;
    }
    std::map<NodeId, std::set<NodeId>> sols;
    if (eng.params().audit) sols = audit_local_views(core, know);
    LocalDecideProtocol decide(core, know);
    eng.run(decide, 8);
    if (eng.params().audit) {
      audit_local_agreement(core, sols, out);
      audit_validity(core);
      audit_caches(core);
    }
  }

  out.decision.resize(net.n_servers);
  for (NodeId v = 0; v < net.n_servers; ++v) out.decision[v] = core.srv[v].decision;
  eng.transcript().final_state.assign(net.n_servers, 0);
  for (NodeId v = 0; v < net.n_servers; ++v)
    eng.transcript().final_state[v] = static_cast<std::uint8_t>(out.decision[v]);
  return out;
}

}  // namespace hypermis
