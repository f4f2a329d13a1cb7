#pragma once

// Randomized clustering of the server graph into low-diameter clusters,
// colored so that no hyperedge touches two clusters of the same color.
//
// The schedule runs ceil(ln n) stages; stage i holds ceil(2*(cn/e^i)^(1/m))
// phases with rate beta_i = (ln(cn) - i)/m, m = ceil(ln(cn)).  In each phase
// every still-unclustered server draws an exponential radius r (capped at
// r_cap_factor * ln n; cap hits are counted), and the value g = r - dist
// spreads through the unclustered part of the graph.  Each node tracks its
// two best values from distinct origins; it joins a cluster this phase iff
// its best value is nonnegative and beats the runner-up by more than 1.
//
// Values are relayed while nonnegative but stay *receivable* one step below
// zero: a node records anything down to -1.  That one extra step is load
// bearing - a node that carves has a nonnegative winner, so the winner's
// remnant (>= -1) reaches every neighbor's runner-up slot, which forces
// nodes carved in the same phase that share a hyperedge to pick the same
// origin.  The phase index therefore works as the cluster color.  Anything
// below -1 can never sit within 1 of a nonnegative winner, so deeper
// remnants are irrelevant and the cutoff loses nothing.
//
// The relay realizes the spread under the message budget: one (g, origin)
// pair per message, alternating best and runner-up slots, so one server hop
// costs four rounds.  g travels in fixed point (Q fraction bits from the bit
// layout); quantization ties lose the carve test, which only delays a node,
// never misclusters it.
//
// Cluster identities come from a min-id flood among same-phase neighbors
// (clients relay one minimum per phase), which also leaves each client
// knowing the phase and label of every port - state the later protocols rely
// on.  Instances with n <= 3 skip the sampling entirely: each connected
// component becomes one cluster of color 1, which the budget always affords.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "engine.hpp"
#include "hypergraph.hpp"
#include "message.hpp"
#include "network.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace hypermis {

struct ColoredPartition {
  std::vector<NodeId> label;   // per server; cluster id = least member id
  std::vector<int> color;      // per server; carve phase, 1-based
  std::vector<NodeId> center;  // per server; carve origin (for audits)
  int colors_used = 0;
  int clusters = 0;
  long radius_truncations = 0;
  bool tiny_bypass = false;
  // what the clients learned, port by port
  std::vector<std::vector<int>> client_port_color;
  std::vector<std::vector<NodeId>> client_port_label;
};

class DecomposeProtocol : public Protocol {
 public:
  DecomposeProtocol(Engine& eng, int attempt)
      : net_(&eng.net()), prm_(eng.params()), seed_(eng.transcript().seed),
        attempt_(attempt), one_(eng.layout().g_one()) {
    int n = net_->n_servers;
    bypass_ = n <= 3;
    if (!bypass_) {
      int stages = static_cast<int>(std::ceil(std::log(n)));
      double cn = prm_.decomp_c * n;
      int m = prm_.decomp_m > 0 ? prm_.decomp_m
                                : static_cast<int>(std::ceil(std::log(cn)));
      for (int i = 1; i <= stages; ++i) {
        int phases = static_cast<int>(
            std::ceil(2.0 * std::pow(cn / std::exp(i), 1.0 / m)));
        double beta = (std::log(cn) - i) / m;
        if (beta <= 0)
          throw SimulationBug("nonpositive sampling rate in stage " +
                              std::to_string(i));
        for (int p = 0; p < phases; ++p) betas_.push_back(beta);
      }
      r_max_ = prm_.r_cap_factor * std::log(n);
      j_cap_ = static_cast<int>(std::ceil(r_max_)) + 2;
      relay_len_ = 4 * j_cap_;
    } else {
      r_max_ = 2.0;
    }
    flood_len_ = 2 * (2 * static_cast<int>(std::ceil(r_max_)) + 4) + 6;

    int n_srv = net_->n_servers;
    carved_phase_.assign(n_srv, bypass_ ? 1 : -1);
    center_.assign(n_srv, -1);
    label_.assign(n_srv, -1);
    stop1_.assign(n_srv, Cand{});
    stop2_.assign(n_srv, Cand{});
    sdirty1_.assign(n_srv, 0);
    sdirty2_.assign(n_srv, 0);
    if (bypass_)
      for (NodeId v = 0; v < n_srv; ++v) center_[v] = v;
    uncarved_ = bypass_ ? 0 : n_srv;

    int n_cli = net_->n_clients;
    ctop1_.assign(n_cli, Cand{});
    ctop2_.assign(n_cli, Cand{});
    cdirty1_.assign(n_cli, 0);
    cdirty2_.assign(n_cli, 0);
    port_phase_.assign(n_cli, {});
    for (int c = 0; c < n_cli; ++c)
      port_phase_[c].assign(net_->degree(net_->n_servers + c), -1);
    phase_min_.assign(n_cli, {});

    seg_ = bypass_ ? Seg::Flood : Seg::Sample;
  }

  void on_round(RoundContext& ctx) override {
    if (base_ < 0) base_ = ctx.round();
    NodeId v = ctx.node();
    if (v == 0 && ctx.round() > base_) tick();
    switch (seg_) {
      case Seg::Sample:
        if (net_->is_server(v)) {
          sample(v);
        } else {
          int c = v - net_->n_servers;  // clients drop the previous phase
          ctop1_[c] = {};
          ctop2_[c] = {};
          cdirty1_[c] = 0;
          cdirty2_[c] = 0;
        }
        break;
      case Seg::Relay:
        if (net_->is_server(v)) relay_server(ctx, v);
        else relay_client(ctx, v - net_->n_servers);
        break;
      case Seg::Flood:
        if (net_->is_server(v)) flood_server(ctx, v);
        else flood_client(ctx, v - net_->n_servers);
        break;
      case Seg::Done: break;
    }
  }

  bool finished() const override { return seg_ == Seg::Done; }

  bool complete() const {
    for (NodeId v = 0; v < net_->n_servers; ++v)
      if (carved_phase_[v] < 1 || label_[v] < 0) return false;
    return true;
  }

  long total_cap() const {
    long per_phase = relay_len_ + 2;
    return 2 + static_cast<long>(betas_.size()) * per_phase + flood_len_ + 4;
  }

  long radius_truncations() const { return truncations_; }
  int phases_run() const { return phase_ + 1; }

  ColoredPartition result() const {
    ColoredPartition out;
    out.label = label_;
    out.color = carved_phase_;
    out.center = center_;
    out.radius_truncations = truncations_;
    out.tiny_bypass = bypass_;
    std::set<NodeId> labels;
    for (NodeId v = 0; v < net_->n_servers; ++v) {
      labels.insert(label_[v]);
      out.colors_used = std::max(out.colors_used, carved_phase_[v]);
    }
    out.clusters = static_cast<int>(labels.size());
    out.client_port_color.assign(net_->n_clients, {});
    out.client_port_label.assign(net_->n_clients, {});
    for (int c = 0; c < net_->n_clients; ++c) {
      int deg = net_->degree(net_->n_servers + c);
      out.client_port_color[c].assign(deg, -1);
      out.client_port_label[c].assign(deg, -1);
      for (int p = 0; p < deg; ++p) {
        int ph = port_phase_[c][p];
        if (ph < 0) continue;
        out.client_port_color[c][p] = ph;
        auto it = phase_min_[c].find(ph);
        if (it != phase_min_[c].end()) out.client_port_label[c][p] = it->second;
      }
    }
    return out;
  }

 private:
  struct Cand {
    std::int64_t g = -1;
    NodeId origin = -1;
  };
  enum class Seg { Sample, Relay, Flood, Done };

  // segment clock, advanced once per round
  void tick() {
    seg_round_++;
    if (seg_ == Seg::Sample) {
      seg_ = Seg::Relay;
      seg_round_ = 0;
      return;
    }
    if (seg_ == Seg::Relay && seg_round_ > relay_len_) {
      // the relay tail round ran the carve test; move on
      phase_++;
      if (phase_ < static_cast<int>(betas_.size()) && uncarved_ > 0) {
        seg_ = Seg::Sample;
      } else {
        // either everyone is clustered or the phases ran out; the flood
        // runs regardless and complete() reports any leftover servers
        seg_ = Seg::Flood;
      }
      seg_round_ = -1;  // flood/sample starts next round at 0
      return;
    }
    if (seg_ == Seg::Flood && seg_round_ >= flood_len_) {
      if (last_flood_send_ >= flood_len_ - 2)
        throw SimulationBug("label flood did not settle inside its window");
      seg_ = Seg::Done;
    }
  }

  void sample(NodeId v) {
    if (carved_phase_[v] >= 1) return;
    NodeRng rng(seed_, v, 0x64656300u + static_cast<std::uint32_t>(attempt_));
    double r = rng.exponential(static_cast<std::uint64_t>(phase_),
                               betas_[phase_]);
    if (r > r_max_) {
      r = r_max_;
      truncations_++;
    }
    stop1_[v] = {static_cast<std::int64_t>(std::floor(r * one_)), v};
    stop2_[v] = {};
    sdirty1_[v] = 1;
    sdirty2_[v] = 0;
  }

  // distinct-origin top-2 with a deterministic tie rule (greater g first,
  // then smaller origin)
  static bool better(std::int64_t g, NodeId o, const Cand& c) {
    return c.origin < 0 || g > c.g || (g == c.g && o < c.origin);
  }
  void merge(Cand& c1, Cand& c2, std::uint8_t& d1, std::uint8_t& d2,
             std::int64_t g, NodeId o) const {
    if (g < -one_) return;  // too dead to influence any carve decision
    if (o == c1.origin) {
      if (g > c1.g) { c1.g = g; d1 = 1; }
      return;
    }
    if (o == c2.origin) {
      if (g > c2.g) {
        c2.g = g;
        d2 = 1;
        if (better(c2.g, c2.origin, c1)) { std::swap(c1, c2); d1 = 1; }
      }
      return;
    }
    if (better(g, o, c1)) {
      c2 = c1;
      c1 = {g, o};
      d1 = 1;
      d2 = 1;
    } else if (better(g, o, c2)) {
      c2 = {g, o};
      d2 = 1;
    }
  }

  void relay_server(RoundContext& ctx, NodeId v) {
    if (carved_phase_[v] >= 1) return;  // clustered servers left the pool
    for (const Incoming& in : ctx.inbox())
      if (in.msg.type == MsgType::DecompG)
        merge(stop1_[v], stop2_[v], sdirty1_[v], sdirty2_[v], in.msg.a,
              static_cast<NodeId>(in.msg.b));
    if (seg_round_ == relay_len_) {  // carve test on the tail round
      const Cand& c1 = stop1_[v];
      const Cand& c2 = stop2_[v];
      if (c1.origin >= 0 && c1.g >= 0 &&
          (c2.origin < 0 || c1.g - c2.g > one_)) {
        carved_phase_[v] = phase_ + 1;
        center_[v] = c1.origin;
        uncarved_--;
      }
      return;
    }
    int parity = seg_round_ % 4;
    if (parity == 0 && sdirty1_[v] && stop1_[v].g >= 0) {
      Message m;
      m.type = MsgType::DecompG;
      m.a = stop1_[v].g;
      m.b = stop1_[v].origin;
      for (int p = 0; p < net_->degree(v); ++p) ctx.send(p, m);
      sdirty1_[v] = 0;
    }
    if (parity == 2 && sdirty2_[v] && stop2_[v].g >= 0) {
      Message m;
      m.type = MsgType::DecompG;
      m.a = stop2_[v].g;
      m.b = stop2_[v].origin;
      for (int p = 0; p < net_->degree(v); ++p) ctx.send(p, m);
      sdirty2_[v] = 0;
    }
  }

  void relay_client(RoundContext& ctx, int c) {
    for (const Incoming& in : ctx.inbox())
      if (in.msg.type == MsgType::DecompG)
        merge(ctop1_[c], ctop2_[c], cdirty1_[c], cdirty2_[c], in.msg.a,
              static_cast<NodeId>(in.msg.b));
    if (seg_round_ == relay_len_) return;
    int parity = seg_round_ % 4;
    NodeId cli = net_->n_servers + c;
    if (parity == 1 && cdirty1_[c] && ctop1_[c].g >= 0) {
      Message m;
      m.type = MsgType::DecompG;
      m.a = ctop1_[c].g - one_;  // one server hop consumed; may land at -1
      m.b = ctop1_[c].origin;
      for (int p = 0; p < net_->degree(cli); ++p) ctx.send(p, m);
      cdirty1_[c] = 0;
    }
    if (parity == 3 && cdirty2_[c] && ctop2_[c].g >= 0) {
      Message m;
      m.type = MsgType::DecompG;
      m.a = ctop2_[c].g - one_;
      m.b = ctop2_[c].origin;
      for (int p = 0; p < net_->degree(cli); ++p) ctx.send(p, m);
      cdirty2_[c] = 0;
    }
  }

  void flood_server(RoundContext& ctx, NodeId v) {
    if (carved_phase_[v] < 1) return;
    if (seg_round_ == 0) label_[v] = v;
    bool dirty = seg_round_ == 0;
    for (const Incoming& in : ctx.inbox()) {
      if (in.msg.type != MsgType::LabelMin) continue;
      if (static_cast<int>(in.msg.a) != carved_phase_[v]) continue;
      if (in.msg.b < label_[v]) {
        label_[v] = static_cast<NodeId>(in.msg.b);
        dirty = true;
      }
    }
    if (dirty) {
      Message m;
      m.type = MsgType::LabelMin;
      m.a = carved_phase_[v];
      m.b = label_[v];
      for (int p = 0; p < net_->degree(v); ++p) ctx.send(p, m);
      last_flood_send_ = seg_round_;
    }
  }

  void flood_client(RoundContext& ctx, int c) {
    NodeId cli = net_->n_servers + c;
    std::set<int> dirty;
    for (const Incoming& in : ctx.inbox()) {
      if (in.msg.type != MsgType::LabelMin) continue;
      int ph = static_cast<int>(in.msg.a);
      port_phase_[c][in.port] = ph;
      auto it = phase_min_[c].find(ph);
      if (it == phase_min_[c].end()) {
        phase_min_[c][ph] = static_cast<NodeId>(in.msg.b);
        dirty.insert(ph);
      } else if (in.msg.b < it->second) {
        it->second = static_cast<NodeId>(in.msg.b);
        dirty.insert(ph);
      }
    }
    if (dirty.empty()) return;
    for (int p = 0; p < net_->degree(cli); ++p) {
      int ph = port_phase_[c][p];
      if (ph < 0 || dirty.count(ph) == 0) continue;
      Message m;
      m.type = MsgType::LabelMin;
      m.a = ph;
      m.b = phase_min_[c][ph];
      ctx.send(p, m);
      last_flood_send_ = seg_round_;
    }
  }

  const BipartiteNetwork* net_;
  Params prm_;
  std::uint64_t seed_;
  int attempt_;
  std::int64_t one_;

  bool bypass_ = false;
  std::vector<double> betas_;
  double r_max_ = 0;
  int j_cap_ = 0, relay_len_ = 0, flood_len_ = 0;

  Seg seg_ = Seg::Sample;
  long base_ = -1;
  int seg_round_ = 0;
  int phase_ = 0;
  int uncarved_ = 0;  // bookkeeping for skipping spent phases, not node input
  long truncations_ = 0;
  int last_flood_send_ = -1;

  std::vector<int> carved_phase_;
  std::vector<NodeId> center_, label_;
  std::vector<Cand> stop1_, stop2_;
  std::vector<std::uint8_t> sdirty1_, sdirty2_;
  std::vector<Cand> ctop1_, ctop2_;
  std::vector<std::uint8_t> cdirty1_, cdirty2_;
  std::vector<std::vector<int>> port_phase_;
  std::vector<std::map<int, NodeId>> phase_min_;
};

// Runs the clustering, retrying with fresh randomness the (rare) executions
// where some server ends every phase untied.  Rounds of failed attempts stay
// in the transcript; they were really spent.
inline ColoredPartition decompose(Engine& eng) {
  const Params& prm = eng.params();
  for (int attempt = 1; attempt <= std::max(1, prm.decomp_retries); ++attempt) {
    DecomposeProtocol p(eng, attempt);
    eng.run(p, p.total_cap());
    eng.transcript().decomp_attempts = attempt;
    eng.transcript().radius_truncations += p.radius_truncations();
    if (!p.complete()) continue;
    ColoredPartition part = p.result();
    eng.transcript().colors_used = part.colors_used;
    eng.transcript().clusters = part.clusters;
    eng.transcript().tiny_bypass = part.tiny_bypass;
    return part;
  }
  throw CapExceeded("clustering failed in every attempt");
}

// ---------------------------------------------------------------- validation

struct PartitionReport {
  bool ok = true;
  std::vector<std::string> issues;
  int colors_used = 0;
  int clusters = 0;
  int max_diameter = 0;  // server hops, within the cluster
  std::map<NodeId, int> cluster_diameter;
  std::map<NodeId, int> cluster_size;

  void fail(std::string why) {
    ok = false;
    if (issues.size() < 50) issues.push_back(std::move(why));
  }
};

// Independent check of the three clustering guarantees: the clusters
// partition the servers, same-color clusters never share a hyperedge, and
// each cluster is connected with small diameter on its own vertices.
inline PartitionReport verify_partition(const Hypergraph& h,
                                        const ColoredPartition& part,
                                        const Params& prm) {
  PartitionReport rep;
  int n = h.n();
  double logn = std::max(1.0, std::log2(std::max(2, n)));

  if (static_cast<int>(part.label.size()) != n ||
      static_cast<int>(part.color.size()) != n) {
    rep.fail("label/color arrays do not cover the servers");
    return rep;
  }
  std::map<NodeId, std::vector<NodeId>> members;
  for (NodeId v = 0; v < n; ++v) {
    if (part.label[v] < 0 || part.label[v] >= n)
      rep.fail("server " + std::to_string(v) + " has no cluster");
    else
      members[part.label[v]].push_back(v);
    if (part.color[v] < 1) rep.fail("server " + std::to_string(v) + " has no color");
    rep.colors_used = std::max(rep.colors_used, part.color[v]);
  }
  rep.clusters = static_cast<int>(members.size());

  for (auto& [lb, mem] : members) {
    if (lb != *std::min_element(mem.begin(), mem.end()))
      rep.fail("cluster " + std::to_string(lb) + " is not named by its least member");
    for (NodeId v : mem)
      if (part.color[v] != part.color[mem[0]])
        rep.fail("cluster " + std::to_string(lb) + " mixes colors");
  }

  // same-color clusters must not share an edge
  for (int ei = 0; ei < h.m(); ++ei) {
    const auto& e = h.edges[ei].members;
    for (std::size_t a = 0; a < e.size(); ++a)
      for (std::size_t b = a + 1; b < e.size(); ++b)
        if (part.label[e[a]] != part.label[e[b]] &&
            part.color[e[a]] == part.color[e[b]])
          rep.fail("edge " + std::to_string(ei) +
                   " bridges two clusters of color " +
                   std::to_string(part.color[e[a]]));
  }

  // connectivity and strong diameter, measured inside the cluster
  std::vector<std::vector<NodeId>> adj(n);
  for (const auto& e : h.edges)
    for (std::size_t a = 0; a < e.members.size(); ++a)
      for (std::size_t b = a + 1; b < e.members.size(); ++b)
        if (part.label[e.members[a]] == part.label[e.members[b]]) {
          adj[e.members[a]].push_back(e.members[b]);
          adj[e.members[b]].push_back(e.members[a]);
        }
  for (auto& [lb, mem] : members) {
    rep.cluster_size[lb] = static_cast<int>(mem.size());
    std::map<NodeId, int> dist;
    std::vector<NodeId> frontier{lb};
    dist[lb] = 0;
    int diam = 0;
    while (!frontier.empty()) {
      std::vector<NodeId> next;
      for (NodeId u : frontier)
        for (NodeId w : adj[u])
          if (!dist.count(w)) {
            dist[w] = dist[u] + 1;
            diam = std::max(diam, dist[w]);
            next.push_back(w);
          }
      frontier = std::move(next);
    }
    if (static_cast<int>(dist.size()) != static_cast<int>(mem.size()))
      rep.fail("cluster " + std::to_string(lb) + " is disconnected");
    rep.cluster_diameter[lb] = diam;
    rep.max_diameter = std::max(rep.max_diameter, diam);
  }

  if (rep.colors_used > prm.c_col * logn)
    rep.fail("too many colors: " + std::to_string(rep.colors_used));
  if (rep.max_diameter > prm.c_diam * logn)
    rep.fail("cluster diameter too large: " + std::to_string(rep.max_diameter));

  // when the run captured client-side knowledge, it must match the servers
  if (!part.client_port_label.empty()) {
    int ci = 0;
    for (const auto& e : h.edges) {
      for (std::size_t p = 0; p < e.members.size(); ++p) {
        NodeId v = e.members[p];
        if (part.client_port_label[ci][p] != part.label[v])
          rep.fail("client " + std::to_string(ci) + " cached a wrong label");
        if (part.client_port_color[ci][p] != part.color[v])
          rep.fail("client " + std::to_string(ci) + " cached a wrong color");
      }
      ci++;
    }
  }
  return rep;
}

}  // namespace hypermis
