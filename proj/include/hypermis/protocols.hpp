#pragma once

// Tree infrastructure over clustered networks.
//
// Given a labeling of servers into clusters, these protocols build one
// spanning tree per cluster and run aggregate/broadcast waves over it:
//
//   1. leader election by event-driven max-id gossip (the leader roots the
//      tree),
//   2. synchronous BFS from the root (parent = first announcer, ties to the
//      lowest port),
//   3. child claiming,
//   4. height convergecast + broadcast, so every member learns its depth and
//      the tree height.
//
// Clients take part in a cluster's tree only when they join at least two
// servers of that cluster; they act as interior relay nodes and may serve
// several clusters at once (on disjoint ports).  Distances are counted in
// link hops, so a tree of server-radius r has height at most 2r.
//
// Aggregations are pipelined indexed waves: the node at depth d sends index
// j at relative round (H - d) + j, the root finalizes at H + j and starts the
// down wave, which reaches depth d at H + j + d.  A task with R indices
// completes in 2H + R + 2 rounds.  Every participant keeps the value it
// received from the broadcast; audits compare those copies against the
// root's.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "engine.hpp"
#include "message.hpp"
#include "network.hpp"
#include "types.hpp"

namespace hypermis {

struct ClusterView {
  std::vector<NodeId> server_label;                    // per server, -1 = none
  std::vector<std::vector<NodeId>> client_port_label;  // per client, per port

  static ClusterView from_labels(const BipartiteNetwork& net,
                                 const std::vector<NodeId>& labels) {
    ClusterView v;
    v.server_label = labels;
    v.client_port_label.assign(net.n_clients, {});
    for (int c = 0; c < net.n_clients; ++c) {
      NodeId cli = net.n_servers + c;
      for (const Port& p : net.ports[cli])
        v.client_port_label[c].push_back(labels[p.peer]);
    }
    return v;
  }
};

struct TreeNode {
  NodeId label = -1;
  bool in_tree = false;
  int parent_port = -1;
  int dist = -1;        // link hops from the root
  int height = -1;      // link hops to the deepest descendant
  int tree_height = -1; // root height, learned from the broadcast
  NodeId root = -1;
  std::vector<int> child_ports;
  // build bookkeeping
  int pending = 0;
  bool height_sent = false;
};

struct TreeSet {
  std::vector<TreeNode> server;               // per server
  std::vector<std::vector<TreeNode>> client;  // per client, one per served label

  TreeNode* client_node(NodeId cli_index, NodeId label) {
    for (TreeNode& t : client[cli_index])
      if (t.label == label) return &t;
    return nullptr;
  }

  int max_height(const std::set<NodeId>& labels) const {
    int h = 0;
    for (const TreeNode& t : server)
      if (t.in_tree && t.tree_height > h &&
          (labels.empty() || labels.count(t.label)))
        h = t.tree_height;
    return h;
  }
};

// ---------------------------------------------------------------- tree build

class TreeBuildProtocol : public Protocol {
 public:
  TreeBuildProtocol(Engine& eng, const ClusterView& view, bool elect_only = false)
      : net_(&eng.net()), view_(&view), elect_only_(elect_only) {
    int D = eng.params().d_cap(std::max(2, net_->n_servers));
    phase_a_ = D + 2;
    phase_b_ = D + 2;
    phase_d_ = 2 * D + 4;
    total_ = elect_only_ ? phase_a_ : phase_a_ + phase_b_ + 2 + phase_d_;

    trees_.server.assign(net_->n_servers, {});
    trees_.client.assign(net_->n_clients, {});
    smax_.assign(net_->n_servers, -1);
    sdirty_.assign(net_->n_servers, 0);
    for (NodeId v = 0; v < net_->n_servers; ++v) {
      trees_.server[v].label = view.server_label[v];
      if (view.server_label[v] >= 0) {
        smax_[v] = v;
        sdirty_[v] = 1;
      }
    }
    cmax_.assign(net_->n_clients, {});
    cdirty_.assign(net_->n_clients, {});
    for (int c = 0; c < net_->n_clients; ++c) {
      // a client serves the labels it can bridge (two or more ports)
      std::map<NodeId, int> freq;
      for (NodeId lb : view.client_port_label[c])
        if (lb >= 0) freq[lb]++;
      for (auto [lb, k] : freq) {
        if (k < 2) continue;
        TreeNode t;
        t.label = lb;
        trees_.client[c].push_back(t);
        cmax_[c].push_back(-1);
        cdirty_[c].push_back(0);
      }
    }
  }

  TreeSet& trees() { return trees_; }
  const TreeSet& trees() const { return trees_; }

  // elected leader of one cluster; insists all members agree
  NodeId leader(NodeId label) const {
    NodeId lead = -1;
    for (NodeId v = 0; v < net_->n_servers; ++v) {
      if (view_->server_label[v] != label) continue;
      if (lead == -1) lead = smax_[v];
      else if (lead != smax_[v])
        throw SimulationBug("leader disagreement in cluster " + std::to_string(label));
    }
    return lead;
  }

  void on_round(RoundContext& ctx) override {
    if (base_ < 0) base_ = ctx.round();
    long rel = ctx.round() - base_;
    NodeId v = ctx.node();
    if (v == net_->total_nodes() - 1) last_rel_ = rel;
    if (net_->is_server(v)) server_round(ctx, v, rel);
    else client_round(ctx, v - net_->n_servers, rel);
  }

  bool finished() const override { return base_ >= 0 && last_rel_ + 1 >= total_; }

 private:
  void server_round(RoundContext& ctx, NodeId v, long rel) {
    TreeNode& t = trees_.server[v];
    if (t.label < 0) return;
    int deg = net_->degree(v);

    if (rel < phase_a_) {
      for (const Incoming& in : ctx.inbox())
        if (in.msg.type == MsgType::Elect && in.msg.a > smax_[v]) {
          smax_[v] = static_cast<NodeId>(in.msg.a);
          sdirty_[v] = 1;
        }
      if (sdirty_[v]) {
        Message m;
        m.type = MsgType::Elect;
        m.a = smax_[v];
        for (int p = 0; p < deg; ++p) ctx.send(p, m);
        sdirty_[v] = 0;
      }
      return;
    }
    if (rel == phase_a_) {
      t.root = smax_[v];
      t.in_tree = true;
      if (t.root == v) {
        t.dist = 0;
        Message m;
        m.type = MsgType::BfsDist;
        m.a = 0;
        for (int p = 0; p < deg; ++p) ctx.send(p, m);
      }
    }
    if (rel < phase_a_ + phase_b_) {
      if (t.dist < 0) {
        int best_port = -1;
        std::int64_t d = 0;
        for (const Incoming& in : ctx.inbox())
          if (in.msg.type == MsgType::BfsDist &&
              (best_port < 0 || in.port < best_port)) {
            best_port = in.port;
            d = in.msg.a;
          }
        if (best_port >= 0) {
          t.dist = static_cast<int>(d) + 1;
          t.parent_port = best_port;
          Message m;
          m.type = MsgType::BfsDist;
          m.a = t.dist;
          for (int p = 0; p < deg; ++p)
            if (p != best_port) ctx.send(p, m);
        }
      }
      return;
    }
    claim_and_height(ctx, t, rel, deg);
  }

  void client_round(RoundContext& ctx, int c, long rel) {
    NodeId cli = net_->n_servers + c;
    auto& nodes = trees_.client[c];
    if (nodes.empty()) return;
    const auto& plabel = view_->client_port_label[c];
    int deg = net_->degree(cli);

    auto slot = [&](NodeId label) -> int {
      for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
        if (nodes[i].label == label) return i;
      return -1;
    };

    if (rel < phase_a_) {
      for (const Incoming& in : ctx.inbox()) {
        if (in.msg.type != MsgType::Elect) continue;
        int s = slot(plabel[in.port]);
        if (s >= 0 && in.msg.a > cmax_[c][s]) {
          cmax_[c][s] = static_cast<NodeId>(in.msg.a);
          cdirty_[c][s] = 1;
        }
      }
      for (int s = 0; s < static_cast<int>(nodes.size()); ++s) {
        if (!cdirty_[c][s]) continue;
        Message m;
        m.type = MsgType::Elect;
        m.a = cmax_[c][s];
        for (int p = 0; p < deg; ++p)
          if (plabel[p] == nodes[s].label) ctx.send(p, m);
        cdirty_[c][s] = 0;
      }
      return;
    }
    if (rel == phase_a_)
      for (int s = 0; s < static_cast<int>(nodes.size()); ++s) {
        nodes[s].in_tree = true;
        nodes[s].root = cmax_[c][s];
      }
    if (rel < phase_a_ + phase_b_) {
      std::vector<int> best(nodes.size(), -1);
      std::vector<std::int64_t> bdist(nodes.size(), 0);
      for (const Incoming& in : ctx.inbox()) {
        if (in.msg.type != MsgType::BfsDist) continue;
        int s = slot(plabel[in.port]);
        if (s < 0 || nodes[s].dist >= 0) continue;
        if (best[s] < 0 || in.port < best[s]) {
          best[s] = in.port;
          bdist[s] = in.msg.a;
        }
      }
      for (int s = 0; s < static_cast<int>(nodes.size()); ++s) {
        if (best[s] < 0) continue;
        nodes[s].dist = static_cast<int>(bdist[s]) + 1;
        nodes[s].parent_port = best[s];
        Message m;
        m.type = MsgType::BfsDist;
        m.a = nodes[s].dist;
        for (int p = 0; p < deg; ++p)
          if (plabel[p] == nodes[s].label && p != best[s]) ctx.send(p, m);
      }
      return;
    }
    for (TreeNode& t : nodes) claim_and_height(ctx, t, rel, deg);
  }

  // phases C and D share their logic between servers and clients; `t` owns
  // a disjoint port set, so sends never collide across a client's labels
  void claim_and_height(RoundContext& ctx, TreeNode& t, long rel, int deg) {
    (void)deg;
    if (!t.in_tree || t.dist < 0) return;
    long rc = rel - (phase_a_ + phase_b_);
    if (rc == 0) {
      if (t.parent_port >= 0) {
        Message m;
        m.type = MsgType::ChildClaim;
        ctx.send(t.parent_port, m);
      }
      return;
    }
    if (rc == 1) {
      for (const Incoming& in : ctx.inbox())
        if (in.msg.type == MsgType::ChildClaim && owns_port(ctx, t, in.port))
          t.child_ports.push_back(in.port);
      std::sort(t.child_ports.begin(), t.child_ports.end());
      t.pending = static_cast<int>(t.child_ports.size());
      return;
    }

    // height convergecast, then root broadcast
    for (const Incoming& in : ctx.inbox()) {
      if (in.msg.type == MsgType::HeightUp && owns_port(ctx, t, in.port)) {
        t.height = std::max(t.height, static_cast<int>(in.msg.a) + 1);
        t.pending--;
      }
      if (in.msg.type == MsgType::HeightDown && in.port == t.parent_port) {
        t.tree_height = static_cast<int>(in.msg.a);
        Message m;
        m.type = MsgType::HeightDown;
        m.a = in.msg.a;
        for (int p : t.child_ports) ctx.send(p, m);
      }
    }
    if (t.pending == 0 && !t.height_sent) {
      if (t.height < 0) t.height = 0;
      t.height_sent = true;
      if (t.parent_port >= 0) {
        Message m;
        m.type = MsgType::HeightUp;
        m.a = t.height;
        ctx.send(t.parent_port, m);
      } else {
        t.tree_height = t.height;
        Message m;
        m.type = MsgType::HeightDown;
        m.a = t.height;
        for (int p : t.child_ports) ctx.send(p, m);
      }
    }
  }

  bool owns_port(RoundContext& ctx, const TreeNode& t, int port) const {
    NodeId v = ctx.node();
    if (net_->is_server(v)) return true;
    return view_->client_port_label[v - net_->n_servers][port] == t.label;
  }

  const BipartiteNetwork* net_;
  const ClusterView* view_;
  bool elect_only_;
  int phase_a_ = 0, phase_b_ = 0, phase_d_ = 0;
  long total_ = 0;
  long base_ = -1;
  long last_rel_ = -1;

  TreeSet trees_;
  std::vector<NodeId> smax_;
  std::vector<std::uint8_t> sdirty_;
  std::vector<std::vector<NodeId>> cmax_;
  std::vector<std::vector<std::uint8_t>> cdirty_;

 public:
  long total_rounds() const { return total_; }
};

// --------------------------------------------------------------- aggregation

enum class AggKind { Sum, Or, MaxId };

struct AggTask {
  MsgType up = MsgType::NhatUp;
  MsgType down = MsgType::NhatDown;
  AggKind kind = AggKind::Sum;
  int indices = 1;
  std::function<std::int64_t(NodeId, int)> value;  // per server, per index
  std::function<std::pair<std::int64_t, NodeId>(NodeId)> value_id;  // MaxId
};

struct AggResult {
  int indices = 1;
  std::vector<std::vector<std::int64_t>> received;      // [server][index]
  std::vector<std::vector<std::uint8_t>> got;           // delivery audit bits
  std::vector<NodeId> received_id;                      // MaxId only
  std::map<NodeId, std::vector<std::int64_t>> root_value;  // per label
  std::map<NodeId, NodeId> root_id;                        // MaxId only
};

class TreeAggProtocol : public Protocol {
 public:
  TreeAggProtocol(Engine& eng, TreeSet& trees, AggTask task,
                  std::set<NodeId> labels, int schedule_height)
      : net_(&eng.net()), trees_(&trees), task_(std::move(task)),
        labels_(std::move(labels)), H_(schedule_height) {
    total_ = 2L * H_ + task_.indices + 2;
    res_.indices = task_.indices;
    res_.received.assign(net_->n_servers,
                         std::vector<std::int64_t>(task_.indices, -1));
    res_.got.assign(net_->n_servers,
                    std::vector<std::uint8_t>(task_.indices, 0));
    res_.received_id.assign(net_->n_servers, -1);
  }

  AggResult& result() { return res_; }
  long total_rounds() const { return total_; }

  void on_round(RoundContext& ctx) override {
    if (base_ < 0) base_ = ctx.round();
    long rel = ctx.round() - base_;
    NodeId v = ctx.node();
    if (v == net_->total_nodes() - 1) last_rel_ = rel;
    if (net_->is_server(v)) {
      step(ctx, trees_->server[v], rel, v);
    } else {
      for (TreeNode& t : trees_->client[v - net_->n_servers])
        step(ctx, t, rel, -1);
    }
  }

  bool finished() const override { return base_ >= 0 && last_rel_ + 1 >= total_; }

 private:
  bool participating(const TreeNode& t) const {
    return t.in_tree && t.dist >= 0 &&
           (labels_.empty() || labels_.count(t.label) > 0);
  }

  void step(RoundContext& ctx, TreeNode& t, long rel, NodeId server) {
    if (!participating(t)) return;
    int R = task_.indices;
    long up_j = rel - (H_ - t.dist);
    if (up_j >= 0 && up_j < R) {
      std::int64_t acc = 0;
      NodeId acc_id = std::numeric_limits<NodeId>::max();
      if (task_.kind == AggKind::MaxId) acc = -1;
      int seen = 0;
      for (const Incoming& in : ctx.inbox()) {
        if (in.msg.type != task_.up) continue;
        if (!std::binary_search(t.child_ports.begin(), t.child_ports.end(),
                                in.port))
          continue;
        if (in.msg.a != up_j)
          throw SimulationBug("aggregation wave out of schedule");
        seen++;
        combine(acc, acc_id, in.msg.b, static_cast<NodeId>(in.msg.c));
      }
      if (seen != static_cast<int>(t.child_ports.size()))
        throw SimulationBug("aggregation wave missed a child contribution");
      if (server >= 0) {
        if (task_.kind == AggKind::MaxId) {
          auto [val, id] = task_.value_id(server);
          combine(acc, acc_id, val, id);
        } else {
          combine(acc, acc_id, task_.value(server, static_cast<int>(up_j)),
                  std::numeric_limits<NodeId>::max());
        }
      }
      Message m;
      m.type = task_.up;
      m.a = up_j;
      m.b = acc;
      m.c = acc_id;
      if (t.parent_port >= 0) {
        ctx.send(t.parent_port, m);
      } else {
        auto& rv = res_.root_value[t.label];
        rv.resize(R, -1);
        rv[up_j] = acc;
        if (task_.kind == AggKind::MaxId) res_.root_id[t.label] = acc_id;
        deliver(server, static_cast<int>(up_j), acc, acc_id);
        m.type = task_.down;
        for (int p : t.child_ports) ctx.send(p, m);
      }
      down_step(ctx, t, rel, server);
      return;
    }
    down_step(ctx, t, rel, server);
  }

  void down_step(RoundContext& ctx, TreeNode& t, long rel,
                           NodeId server) {
    int R = task_.indices;
    long down_j = rel - H_ - t.dist;
    if (down_j < 0 || down_j >= R || t.parent_port < 0) return;
    bool found = false;
    Message fwd;
    for (const Incoming& in : ctx.inbox()) {
      if (in.msg.type != task_.down || in.port != t.parent_port) continue;
      if (in.msg.a != down_j)
        throw SimulationBug("broadcast wave out of schedule");
      found = true;
      fwd = in.msg;
    }
    if (!found)
      throw SimulationBug("broadcast wave missed the parent message");
    if (server >= 0)
      deliver(server, static_cast<int>(down_j), fwd.b,
              static_cast<NodeId>(fwd.c));
    for (int p : t.child_ports) ctx.send(p, fwd);
  }

  void deliver(NodeId server, int idx, std::int64_t val, NodeId id) {
    res_.received[server][idx] = val;
    res_.got[server][idx] = 1;
    if (task_.kind == AggKind::MaxId) res_.received_id[server] = id;
  }

  void combine(std::int64_t& acc, NodeId& acc_id, std::int64_t val,
               NodeId id) const {
    switch (task_.kind) {
      case AggKind::Sum: acc += val; break;
      case AggKind::Or: acc = (acc || val) ? 1 : 0; break;
      case AggKind::MaxId:
        if (val > acc || (val == acc && id < acc_id)) {
          acc = val;
          acc_id = id;
        }
        break;
    }
  }

  const BipartiteNetwork* net_;
  TreeSet* trees_;
  AggTask task_;
  std::set<NodeId> labels_;
  int H_ = 0;
  long total_ = 0;
  long base_ = -1;
  long last_rel_ = -1;
  AggResult res_;
};

// Confirms that what each participating server kept from the broadcast is
// exactly what its cluster root computed.
inline void audit_broadcast(const TreeSet& trees, const AggResult& res,
                            const std::set<NodeId>& labels = {}) {
  for (NodeId v = 0; v < static_cast<NodeId>(trees.server.size()); ++v) {
    const TreeNode& t = trees.server[v];
    if (!t.in_tree || (!labels.empty() && labels.count(t.label) == 0)) continue;
    auto it = res.root_value.find(t.label);
    if (it == res.root_value.end())
      throw SimulationBug("no root result for cluster " + std::to_string(t.label));
    for (int j = 0; j < res.indices; ++j) {
      if (!res.got[v][j])
        throw SimulationBug("server " + std::to_string(v) +
                            " missed broadcast index " + std::to_string(j));
      if (res.received[v][j] != it->second[j])
        throw SimulationBug("server " + std::to_string(v) +
                            " kept a wrong broadcast value");
    }
    auto rid = res.root_id.find(t.label);
    if (rid != res.root_id.end() && res.received_id[v] != rid->second)
      throw SimulationBug("server " + std::to_string(v) +
                          " kept a wrong broadcast id");
  }
}

// ------------------------------------------------------------------ wrappers

inline TreeSet build_bfs_tree(Engine& eng, const ClusterView& view) {
  TreeBuildProtocol p(eng, view);
  eng.run(p, p.total_rounds() + 2);
  return std::move(p.trees());
}

inline std::map<NodeId, NodeId> elect_leader(Engine& eng,
                                             const ClusterView& view) {
  TreeBuildProtocol p(eng, view, true);
  eng.run(p, p.total_rounds() + 2);
  std::map<NodeId, NodeId> out;
  for (NodeId lb : view.server_label)
    if (lb >= 0 && !out.count(lb)) out[lb] = p.leader(lb);
  return out;
}

inline AggResult converge_broadcast(Engine& eng, TreeSet& trees,
                                    const AggTask& task,
                                    const std::set<NodeId>& labels = {}) {
  int H = trees.max_height(labels);
  TreeAggProtocol p(eng, trees, task, labels, H);
  eng.run(p, p.total_rounds() + 2);
  AggResult out = std::move(p.result());
  audit_broadcast(trees, out, labels);
  return out;
}

inline AggResult count_ui(Engine& eng, TreeSet& trees, int indices,
                          std::function<std::int64_t(NodeId, int)> owned_count,
                          const std::set<NodeId>& labels = {}) {
  AggTask t;
  t.up = MsgType::UiUp;
  t.down = MsgType::UiDown;
  t.kind = AggKind::Sum;
  t.indices = indices;
  t.value = std::move(owned_count);
  return converge_broadcast(eng, trees, t, labels);
}

}  // namespace hypermis
