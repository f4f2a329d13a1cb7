#pragma once

// Clustered threshold solver over the server-client network.
//
// The driver walks the decomposition colors in order.  Within one color
// window every cluster of that color runs the same iteration schedule in
// lockstep; same-colored clusters share no hyperedge, so their protocols
// never interact.  One iteration:
//
//   start      undecided members announce themselves active; at the first
//              iteration of a window each client answers with the residual
//              survey (does its edge still bind this window, and with what
//              remaining threshold)
//   part one   repeat: clients announce each live edge's class to its
//              members, and once more to the member that owns the edge so
//              cluster sums count each edge exactly once; the cluster
//              aggregates its active count, live-edge total and class
//              profile; every member checks the equitability bound locally,
//              an OR wave merges the verdicts, and overloaded members of
//              non-equitable clusters sit the iteration out
//   part two   members derive the marking probability from the aggregated
//              profile (bisection against the polynomial band), mark
//              themselves -- or run a max-degree election when the
//              probability degenerates -- and clients veto marks that would
//              overshoot a threshold; unvetoed marks join the solution
//   part three clients whose edge has exhausted its threshold tell the
//              remaining undecided members to exclude themselves
//
// included/excluded are absorbing; idle and elected last one iteration.
// Decisions are announced on every incident link, so each client keeps an
// exact mirror of its members' states and all edge rules are evaluated
// client-side.  Aggregation reuses the cluster trees built once after
// decomposition; servers outside the current color stay silent, decided
// servers keep relaying, and drained clusters drop out of the waves.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "decompose.hpp"
#include "engine.hpp"
#include "hypergraph.hpp"
#include "message.hpp"
#include "network.hpp"
#include "protocols.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace hypermis {

// 2-bit state code carried by StateAnnounce.
enum class WireState : std::uint8_t { Active = 0, Idle = 1, Joined = 2, Out = 3 };

constexpr std::uint64_t kMarkPhase = 0x6d61726bULL;

// ------------------------------------------------------------- a-hat banding

struct AHatResult {
  double a_hat = 1.0;
  double achieved_sum = 0.0;
  bool clamped = false;
};

// Band polynomial over the class profile: size classes contribute
// i*u_i*a^(i-1), threshold classes u_i*a^i.  Strictly increasing in a as
// soon as any counted class is nonempty.
inline double band_sum(ProfileMode mode, const std::vector<std::int64_t>& u,
                       int class_lo, int class_hi, double a) {
  double s = 0.0;
  for (int i = class_lo; i <= class_hi && i < static_cast<int>(u.size()); ++i) {
    if (u[i] <= 0) continue;
    if (mode == ProfileMode::BySize)
      s += static_cast<double>(i) * static_cast<double>(u[i]) * std::pow(a, i - 1);
    else
      s += static_cast<double>(u[i]) * std::pow(a, i);
  }
  return s;
}

// Deterministic bisection of S(a) = 1.5 * n' / log2^band_exp(n') over
// a in (0,1], 64 halvings.  When even S(1) sits below the band the profile
// is too sparse to calibrate and the result clamps to 1 (marking everything
// is safe in that regime).  Identical inputs give bit-identical outputs, so
// every member of a cluster lands on the same value without exchanging it.
inline AHatResult compute_a_hat(ProfileMode mode, std::int64_t n_act,
                                const std::vector<std::int64_t>& u,
                                int class_lo, int class_hi, double band_exp) {
  AHatResult r;
  const double band_lo =
      static_cast<double>(n_act) / log2_pow(static_cast<double>(n_act), band_exp);
  const double s1 = band_sum(mode, u, class_lo, class_hi, 1.0);
  if (s1 < band_lo) {
    r.a_hat = 1.0;
    r.achieved_sum = s1;
    r.clamped = true;
    return r;
  }
  const double target = 1.5 * band_lo;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 64; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (band_sum(mode, u, class_lo, class_hi, mid) < target) lo = mid;
    else hi = mid;
  }
  r.a_hat = hi;  // the side that meets the target; lo==0 edge stays positive
  r.achieved_sum = band_sum(mode, u, class_lo, class_hi, r.a_hat);
  if (!(r.achieved_sum >= band_lo - 1e-9 && r.achieved_sum <= 2.0 * band_lo + 1e-9))
    throw SimulationBug("a-hat bisection left the band: S=" +
                        std::to_string(r.achieved_sum));
  return r;
}

// --------------------------------------------------------------- node memory

struct SolverServer {
  // static (from the decomposition)
  int color = 0;
  NodeId label = -1;
  // persistent
  Decision decision = Decision::Undecided;
  std::uint64_t draws = 0;  // marking stream position, monotone for life
  // window / iteration local
  bool in_window = false;
  bool active = false;
  bool elected = false;
  bool conflicted = false;
  int live_edges = 0;  // residual survey tally
  // part-one caches
  std::vector<std::int32_t> d_cls;   // my class profile, indexed by class
  std::int64_t own_live = 0;         // owned-edge tallies for the sum wave
  std::vector<std::int64_t> own_cls;
  // received broadcast copies
  std::int64_t nhat = 0, nact = 0, alive = 0;
  std::vector<std::int64_t> u;  // indexed by class
  std::int64_t maxd_val = -1;
  NodeId maxd_id = -1;
  std::uint8_t eq_violation = 0;
};

struct SolverClient {
  bool in_window = false;  // has at least one current-color port
  // cached mirror of member states
  std::vector<Decision> state;       // per port, absorbing decisions
  std::vector<std::uint8_t> active;  // per port, this iteration
  std::vector<std::uint8_t> elected;
  // residual survey, frozen at window start
  bool exists = false;
  int resid = 0;
};

// What one client derives about its edge from the cached member states.
struct EdgeStat {
  int sz = 0, t0 = 0;
  int und = 0;    // undecided current-color members
  int act = 0;    // of those, active this iteration
  int elect = 0;  // of those, elected
  int incg = 0;   // included members, any color
  int excg = 0;   // excluded members, any color
  int r_now = 0;  // t0 - incg
  bool live = false;
  int cls = 0;  // 0 = not counted
};

struct SolveCore {
  const BipartiteNetwork* net = nullptr;
  const ColoredPartition* part = nullptr;
  Params prm;
  ProfileMode mode = ProfileMode::BySize;
  std::uint64_t seed = 0;

  int class_lo = 2, class_hi = 2;  // sum-wave class range
  int color = 0;                   // current window

  std::vector<SolverServer> srv;
  std::vector<SolverClient> cli;

  SolveCore(const BipartiteNetwork& n, const ColoredPartition& p,
            const Params& pr, ProfileMode md, std::uint64_t sd, int dim)
      : net(&n), part(&p), prm(pr), mode(md), seed(sd) {
    if (mode == ProfileMode::BySize) {
      class_lo = 2;
      class_hi = std::max(2, ceil_log2(std::max(2, n.n_servers)));
    } else {
      class_lo = 1;
      class_hi = std::max(1, std::min(prm.gmis_d, std::max(2, dim)) - 1);
    }
    srv.assign(n.n_servers, {});
    for (NodeId v = 0; v < n.n_servers; ++v) {
      srv[v].color = p.color[v];
      srv[v].label = p.label[v];
      srv[v].d_cls.assign(class_hi + 1, 0);
      srv[v].own_cls.assign(class_hi + 1, 0);
      srv[v].u.assign(class_hi + 1, 0);
    }
    cli.assign(n.n_clients, {});
    for (int c = 0; c < n.n_clients; ++c) {
      int deg = n.degree(n.n_servers + c);
      cli[c].state.assign(deg, Decision::Undecided);
      cli[c].active.assign(deg, 0);
      cli[c].elected.assign(deg, 0);
    }
  }

  int n_classes() const { return class_hi - class_lo + 1; }

  bool window_port(int c, int p) const {
    return part->client_port_color[c][p] == color;
  }

  void begin_window(int clr) {
    color = clr;
    for (auto& s : srv) s.in_window = (s.color == clr && s.decision == Decision::Undecided);
    for (int c = 0; c < net->n_clients; ++c) {
      SolverClient& k = cli[c];
      k.exists = false;
      k.resid = 0;
      k.in_window = false;
      for (int p = 0; p < static_cast<int>(k.state.size()); ++p)
        if (window_port(c, p)) { k.in_window = true; break; }
    }
  }

  // Residual survey, run by a client at the first iteration of a window:
  // members in later colors or already excluded keep the edge from binding
  // now; when fewer than |e|-t_e of them exist the window inherits the edge
  // with its remaining threshold.
  void survey(int c) {
    SolverClient& k = cli[c];
    const int sz = net->client_size[c];
    const int t0 = net->client_threshold[c];
    int blockers = 0, incg = 0, here = 0;
    for (int p = 0; p < sz; ++p) {
      const int pc = part->client_port_color[c][p];
      const Decision st = k.state[p];
      if (st == Decision::Excluded || (pc > color && st == Decision::Undecided))
        blockers++;
      if (st == Decision::Included) incg++;
      if (pc == color) here++;
    }
    k.exists = (here > 0) && (blockers < sz - t0);
    k.resid = t0 - incg;
  }

  EdgeStat edge_stat(int c) const {
    const SolverClient& k = cli[c];
    EdgeStat s;
    s.sz = net->client_size[c];
    s.t0 = net->client_threshold[c];
    for (int p = 0; p < s.sz; ++p) {
      const Decision st = k.state[p];
      if (st == Decision::Included) s.incg++;
      if (st == Decision::Excluded) s.excg++;
      if (window_port(c, p) && st == Decision::Undecided) {
        s.und++;
        if (k.active[p]) s.act++;
        if (k.elected[p]) s.elect++;
      }
    }
    s.r_now = s.t0 - s.incg;
    if (!k.exists || s.und == 0) return s;
    if (mode == ProfileMode::BySize) {
      s.live = (s.excg == 0);
      if (s.live && s.act == s.und && s.und >= 2 && s.und <= class_hi)
        s.cls = s.und;
    } else {
      s.live = (s.und > s.r_now);
      if (s.live && s.act > s.r_now && s.r_now >= 1 && s.r_now <= class_hi)
        s.cls = s.r_now;
    }
    return s;
  }

  bool conflicted_edge(const EdgeStat& s) const {
    if (!s.live) return false;
    if (mode == ProfileMode::BySize) return s.act >= 1 && s.elect == s.act;
    return s.elect > s.r_now;
  }

  bool tight_edge(int c, const EdgeStat& s) const {
    return cli[c].exists && s.und >= 1 && s.incg == s.t0;
  }

  void ingest_state(int c, int p, WireState w) {
    SolverClient& k = cli[c];
    switch (w) {
      case WireState::Active: k.active[p] = 1; break;
      case WireState::Idle: k.active[p] = 0; break;
      case WireState::Joined:
        k.state[p] = Decision::Included;
        k.active[p] = 0;
        break;
      case WireState::Out:
        k.state[p] = Decision::Excluded;
        k.active[p] = 0;
        break;
    }
  }

  // Size classes above log2(n') never enter the checks; threshold classes
  // are capped by the dimension bound from the start.
  int truncated_hi(std::int64_t n_act) const {
    if (mode == ProfileMode::ByThreshold) return class_hi;
    const int lim =
        static_cast<int>(std::floor(log2_of(static_cast<double>(std::max<std::int64_t>(2, n_act)))));
    return std::min(class_hi, lim);
  }

  // Local equitability verdict from the received profile; true = this member
  // is over the bound somewhere, so the cluster is not equitable.
  bool checkeq_violation(NodeId v) const {
    const SolverServer& s = srv[v];
    if (!s.in_window || !s.active) return false;
    if (s.nact <= prm.c_eq) return false;
    const double lp = log2_pow(static_cast<double>(s.nact), prm.eq_exp);
    const int hi = truncated_hi(s.nact);
    for (int i = class_lo; i <= hi; ++i) {
      if (s.u[i] <= 0) continue;
      const double bound =
          static_cast<double>(i) * static_cast<double>(s.u[i]) / static_cast<double>(s.nact) * lp;
      if (static_cast<double>(s.d_cls[i]) > bound) return true;
    }
    return false;
  }

  AHatResult a_hat_of(const SolverServer& s) const {
    return compute_a_hat(mode, std::max<std::int64_t>(1, s.nact), s.u, class_lo,
                         truncated_hi(s.nact), prm.band_exp);
  }

  double mark_probability(const SolverServer& s) const {
    return std::min(a_hat_of(s).a_hat, prm.mark_cap);
  }

  // Branch decision from the received (n', u, live-total) copies.  Every
  // member of a cluster holds identical copies, so they all pick the same
  // branch without coordination.
  Branch pick_branch(const SolverServer& s) const {
    if (s.alive == 0) return Branch::AllFree;
    if (s.nact < 4) return Branch::DegenerateSmall;
    const AHatResult ah = a_hat_of(s);
    const double p0 = std::min(ah.a_hat, prm.mark_cap);
    const double nact = static_cast<double>(s.nact);
    if (p0 <= log2_pow(nact, prm.band_exp) / nact) return Branch::MaxSelect;
    return ah.a_hat <= prm.mark_cap ? Branch::BernoulliAhat : Branch::BernoulliCapped;
  }

  // Max-degree election key: class-2 degree for size profiles, class-1 for
  // threshold profiles.  Inactive members never win (their key is -1).
  std::pair<std::int64_t, NodeId> maxd_key(NodeId v) const {
    const SolverServer& s = srv[v];
    const int cls = (mode == ProfileMode::BySize) ? 2 : 1;
    const std::int64_t val =
        (s.in_window && s.active) ? static_cast<std::int64_t>(s.d_cls[cls]) : -1;
    return {val, v};
  }
};

// --------------------------------------------------------- window subprotocols

// Fixed-length schedule over the bipartite network; subclasses implement
// server_round / client_round against the relative round index.  Every
// schedule ends quiet (all sends happen strictly before the last round).
class WindowStepProtocol : public Protocol {
 public:
  WindowStepProtocol(SolveCore& core, long total)
      : core_(&core), net_(core.net), total_(total) {}

  void on_round(RoundContext& ctx) override {
    if (base_ < 0) base_ = ctx.round();
    const long rel = ctx.round() - base_;
    const NodeId v = ctx.node();
    if (v == net_->total_nodes() - 1) last_rel_ = rel;
    if (net_->is_server(v)) server_round(ctx, v, rel);
    else client_round(ctx, v - net_->n_servers, rel);
  }

  bool finished() const override { return base_ >= 0 && last_rel_ + 1 >= total_; }

 protected:
  virtual void server_round(RoundContext&, NodeId, long) = 0;
  virtual void client_round(RoundContext&, int, long) = 0;

  void send_all(RoundContext& ctx, NodeId v, const Message& m) {
    for (int p = 0; p < net_->degree(v); ++p) ctx.send(p, m);
  }

  SolveCore* core_;
  const BipartiteNetwork* net_;
  long total_ = 0;
  long base_ = -1;
  long last_rel_ = -1;
};

// Iteration start: undecided window members reset to active and announce it;
// clients rebuild their per-iteration views.  The first iteration of a
// window appends the residual survey exchange.
class IterStartProtocol : public WindowStepProtocol {
 public:
  IterStartProtocol(SolveCore& core, bool with_survey)
      : WindowStepProtocol(core, with_survey ? 3 : 2), survey_(with_survey) {}

 private:
  void server_round(RoundContext& ctx, NodeId v, long rel) override {
    SolverServer& s = core_->srv[v];
    if (rel == 0) {
      s.live_edges = 0;
      if (!s.in_window || s.decision != Decision::Undecided) return;
      s.active = true;
      s.elected = false;
      s.conflicted = false;
      Message m;
      m.type = MsgType::StateAnnounce;
      m.a = static_cast<std::int64_t>(WireState::Active);
      send_all(ctx, v, m);
      return;
    }
    if (survey_ && rel == 2)
      for (const Incoming& in : ctx.inbox())
        if (in.msg.type == MsgType::CombineReply && in.msg.a) s.live_edges++;
  }

  void client_round(RoundContext& ctx, int c, long rel) override {
    SolverClient& k = core_->cli[c];
    if (rel != 1) return;
    std::fill(k.active.begin(), k.active.end(), 0);
    std::fill(k.elected.begin(), k.elected.end(), 0);
    for (const Incoming& in : ctx.inbox())
      if (in.msg.type == MsgType::StateAnnounce)
        core_->ingest_state(c, in.port, static_cast<WireState>(in.msg.a));
    if (!survey_ || !k.in_window) return;
    core_->survey(c);
    Message m;
    m.type = MsgType::CombineReply;
    m.a = k.exists ? 1 : 0;
    m.b = std::max(0, k.resid);
    NodeId cli_id = net_->n_servers + c;
    for (int p = 0; p < net_->degree(cli_id); ++p)
      if (core_->window_port(c, p)) ctx.send(p, m);
  }

  bool survey_;
};

// Class exchange: clients tell every current-color member their edge's
// liveness and class, then repeat it on the owner link alone.  The owner --
// the least current-color member -- is the one server whose sum-wave
// contribution counts this edge, so cluster totals count it exactly once.
class ClassExchangeProtocol : public WindowStepProtocol {
 public:
  explicit ClassExchangeProtocol(SolveCore& core) : WindowStepProtocol(core, 3) {}

 private:
  void server_round(RoundContext& ctx, NodeId v, long rel) override {
    SolverServer& s = core_->srv[v];
    if (rel == 0) {
      std::fill(s.d_cls.begin(), s.d_cls.end(), 0);
      std::fill(s.own_cls.begin(), s.own_cls.end(), 0);
      s.own_live = 0;
      return;
    }
    for (const Incoming& in : ctx.inbox()) {
      if (in.msg.type == MsgType::ClassAnnounce) {
        const int cls = static_cast<int>(in.msg.b);
        if (in.msg.a && cls >= core_->class_lo && cls <= core_->class_hi)
          s.d_cls[cls]++;
      } else if (in.msg.type == MsgType::ClassAnnounceOwn) {
        if (in.msg.a) s.own_live++;
        const int cls = static_cast<int>(in.msg.b);
        if (cls >= core_->class_lo && cls <= core_->class_hi) s.own_cls[cls]++;
      }
    }
  }

  void client_round(RoundContext& ctx, int c, long rel) override {
    SolverClient& k = core_->cli[c];
    if (!k.in_window || !k.exists) return;
    if (rel >= 2) return;
    const EdgeStat s = core_->edge_stat(c);
    if (!s.live) return;
    Message m;
    m.type = (rel == 0) ? MsgType::ClassAnnounce : MsgType::ClassAnnounceOwn;
    m.a = 1;
    m.b = s.cls;
    NodeId cli_id = net_->n_servers + c;
    for (int p = 0; p < net_->degree(cli_id); ++p) {
      if (!core_->window_port(c, p)) continue;
      ctx.send(p, m);
      if (rel == 1) break;  // owner = first current-color port (least id)
    }
  }
};

// Idle step of a non-equitable inner iteration: members over the idle bound
// sit out the rest of this iteration and say so.
class IdleStepProtocol : public WindowStepProtocol {
 public:
  explicit IdleStepProtocol(SolveCore& core) : WindowStepProtocol(core, 2) {}

 private:
  void server_round(RoundContext& ctx, NodeId v, long rel) override {
    if (rel != 0) return;
    SolverServer& s = core_->srv[v];
    if (!s.in_window || !s.active || !s.eq_violation) return;
    if (s.nact <= core_->prm.c_eq) return;
    const double lp = log2_pow(static_cast<double>(s.nact), core_->prm.eq_exp - 1.0);
    const int hi = core_->truncated_hi(s.nact);
    bool over = false;
    for (int i = core_->class_lo; i <= hi && !over; ++i) {
      if (s.u[i] <= 0) continue;
      const double bound =
          static_cast<double>(i) * static_cast<double>(s.u[i]) / static_cast<double>(s.nact) * lp;
      if (static_cast<double>(s.d_cls[i]) > bound) over = true;
    }
    if (!over) return;
    s.active = false;
    Message m;
    m.type = MsgType::StateAnnounce;
    m.a = static_cast<std::int64_t>(WireState::Idle);
    send_all(ctx, v, m);
  }

  void client_round(RoundContext& ctx, int c, long rel) override {
    if (rel != 1) return;
    for (const Incoming& in : ctx.inbox())
      if (in.msg.type == MsgType::StateAnnounce)
        core_->ingest_state(c, in.port, static_cast<WireState>(in.msg.a));
  }
};

// Part two: every member derives the branch from its received profile, marks
// itself (or defers to the max-degree winner), clients veto overshooting
// marks, and unvetoed marks join.
class ElectResolveProtocol : public WindowStepProtocol {
 public:
  explicit ElectResolveProtocol(SolveCore& core) : WindowStepProtocol(core, 4) {}

 private:
  void server_round(RoundContext& ctx, NodeId v, long rel) override {
    SolverServer& s = core_->srv[v];
    if (rel == 0) {
      if (!s.in_window || s.decision != Decision::Undecided || !s.active) return;
      const Branch br = core_->pick_branch(s);
      bool mark = false;
      switch (br) {
        case Branch::AllFree: mark = true; break;
        case Branch::DegenerateSmall:
        case Branch::MaxSelect: mark = (s.maxd_id == v); break;
        case Branch::BernoulliAhat:
        case Branch::BernoulliCapped: {
          const double p0 = core_->mark_probability(s);
          mark = NodeRng(core_->seed, static_cast<std::uint64_t>(v), kMarkPhase)
                     .bernoulli(s.draws++, p0);
          break;
        }
      }
      if (!mark) return;
      s.elected = true;
      s.conflicted = false;
      Message m;
      m.type = MsgType::Elected;
      m.a = 1;
      send_all(ctx, v, m);
      return;
    }
    if (rel == 2) {
      if (!s.elected || s.decision != Decision::Undecided) return;
      for (const Incoming& in : ctx.inbox())
        if (in.msg.type == MsgType::Conflict) s.conflicted = true;
      if (s.conflicted) return;
      s.decision = Decision::Included;
      s.active = false;
      Message m;
      m.type = MsgType::StateAnnounce;
      m.a = static_cast<std::int64_t>(WireState::Joined);
      send_all(ctx, v, m);
    }
  }

  void client_round(RoundContext& ctx, int c, long rel) override {
    SolverClient& k = core_->cli[c];
    if (rel == 1) {
      std::fill(k.elected.begin(), k.elected.end(), 0);
      for (const Incoming& in : ctx.inbox())
        if (in.msg.type == MsgType::Elected) k.elected[in.port] = 1;
      if (!k.in_window || !k.exists) return;
      const EdgeStat s = core_->edge_stat(c);
      if (!core_->conflicted_edge(s)) return;
      Message m;
      m.type = MsgType::Conflict;
      m.a = 1;
      NodeId cli_id = net_->n_servers + c;
      for (int p = 0; p < net_->degree(cli_id); ++p)
        if (core_->window_port(c, p) && k.elected[p]) ctx.send(p, m);
      return;
    }
    if (rel == 3)
      for (const Incoming& in : ctx.inbox())
        if (in.msg.type == MsgType::StateAnnounce)
          core_->ingest_state(c, in.port, static_cast<WireState>(in.msg.a));
  }
};

// Part three: a client whose edge has spent its whole threshold orders every
// remaining undecided current-color member out.
class TightResolveProtocol : public WindowStepProtocol {
 public:
  explicit TightResolveProtocol(SolveCore& core) : WindowStepProtocol(core, 3) {}

 private:
  void server_round(RoundContext& ctx, NodeId v, long rel) override {
    if (rel != 1) return;
    SolverServer& s = core_->srv[v];
    bool hit = false;
    for (const Incoming& in : ctx.inbox())
      if (in.msg.type == MsgType::Tight) hit = true;
    if (!hit || s.decision != Decision::Undecided) return;
    s.decision = Decision::Excluded;
    s.active = false;
    Message m;
    m.type = MsgType::StateAnnounce;
    m.a = static_cast<std::int64_t>(WireState::Out);
    send_all(ctx, v, m);
  }

  void client_round(RoundContext& ctx, int c, long rel) override {
    SolverClient& k = core_->cli[c];
    if (rel == 0) {
      if (!k.in_window || !k.exists) return;
      const EdgeStat s = core_->edge_stat(c);
      if (!core_->tight_edge(c, s)) return;
      Message m;
      m.type = MsgType::Tight;
      m.a = 1;
      NodeId cli_id = net_->n_servers + c;
      for (int p = 0; p < net_->degree(cli_id); ++p)
        if (core_->window_port(c, p) && k.state[p] == Decision::Undecided)
          ctx.send(p, m);
      return;
    }
    if (rel == 2)
      for (const Incoming& in : ctx.inbox())
        if (in.msg.type == MsgType::StateAnnounce)
          core_->ingest_state(c, in.port, static_cast<WireState>(in.msg.a));
  }
};

// ------------------------------------------------------------ central audits

// Sequential recount of one window from the servers' own states, kept
// textually independent of the client-side rules it cross-checks.
struct ClusterRecount {
  std::int64_t nhat = 0, nact = 0, alive = 0;
  std::vector<std::int64_t> u;
  std::map<NodeId, std::vector<std::int32_t>> d;  // per member, by class
};

inline std::map<NodeId, ClusterRecount> recount_window(
    const SolveCore& core, const std::set<NodeId>& labels) {
  const BipartiteNetwork& net = *core.net;
  std::map<NodeId, ClusterRecount> out;
  for (NodeId v = 0; v < net.n_servers; ++v) {
    const SolverServer& s = core.srv[v];
    if (!s.in_window || !labels.count(s.label)) continue;
    ClusterRecount& t = out[s.label];
    if (t.u.empty()) t.u.assign(core.class_hi + 1, 0);
    t.d.emplace(v, std::vector<std::int32_t>(core.class_hi + 1, 0));
    if (s.decision != Decision::Undecided) continue;
    t.nhat++;
    if (s.active) t.nact++;
  }
  for (int c = 0; c < net.n_clients; ++c) {
    const NodeId cli_id = net.n_servers + c;
    const int sz = net.client_size[c];
    const int t0 = net.client_threshold[c];
    int blockers = 0, incg = 0, excg = 0, und = 0, act = 0;
    NodeId lab = -1;
    std::vector<NodeId> here;
    for (int p = 0; p < sz; ++p) {
      const NodeId peer = net.ports[cli_id][p].peer;
      const int pc = core.part->client_port_color[c][p];
      const Decision dec = core.srv[peer].decision;
      if (dec == Decision::Included) incg++;
      if (dec == Decision::Excluded) { excg++; blockers++; }
      else if (pc > core.color && dec == Decision::Undecided) blockers++;
      if (pc == core.color) {
        here.push_back(peer);
        if (lab < 0) lab = core.srv[peer].label;
        if (dec == Decision::Undecided) {
          und++;
          if (core.srv[peer].active) act++;
        }
      }
    }
    if (here.empty() || blockers >= sz - t0 || und == 0) continue;
    auto it = out.find(lab);
    if (it == out.end()) continue;
    ClusterRecount& t = it->second;
    bool live;
    int cls = 0;
    if (core.mode == ProfileMode::BySize) {
      live = (excg == 0);
      if (live && act == und && und >= 2) cls = und;
    } else {
      const int r_now = t0 - incg;
      live = (und > r_now);
      if (live && act > r_now && r_now >= 1 && r_now <= core.class_hi) cls = r_now;
    }
    if (!live) continue;
    t.alive++;
    if (cls >= core.class_lo && cls <= core.class_hi) {
      t.u[cls]++;
      for (NodeId v : here) {
        auto dv = t.d.find(v);
        if (dv != t.d.end()) dv->second[cls]++;
      }
    }
  }
  return out;
}

// Client caches must mirror the announced server states exactly.
inline void audit_caches(const SolveCore& core) {
  const BipartiteNetwork& net = *core.net;
  for (int c = 0; c < net.n_clients; ++c) {
    const NodeId cli_id = net.n_servers + c;
    for (int p = 0; p < net.degree(cli_id); ++p) {
      const NodeId peer = net.ports[cli_id][p].peer;
      const SolverServer& s = core.srv[peer];
      if (core.cli[c].state[p] != s.decision)
        throw SimulationBug("client cache out of sync with server " +
                            std::to_string(peer));
      const bool act = s.in_window && s.decision == Decision::Undecided && s.active;
      if (core.window_port(c, p) && (core.cli[c].active[p] != 0) != act)
        throw SimulationBug("client activity cache out of sync with server " +
                            std::to_string(peer));
    }
  }
}

// Every received broadcast copy must match the sequential recount, the
// surviving active set must hold at least half the undecided members, and
// the final profile must be equitable.
inline void audit_part1(const SolveCore& core, const std::set<NodeId>& labels) {
  auto tally = recount_window(core, labels);
  for (NodeId L : labels) {
    const ClusterRecount& t = tally[L];
    for (const auto& [v, dv] : t.d) {
      const SolverServer& s = core.srv[v];
      if (s.nhat != t.nhat || s.nact != t.nact || s.alive != t.alive)
        throw SimulationBug("aggregated counts disagree with recount at server " +
                            std::to_string(v));
      for (int i = core.class_lo; i <= core.class_hi; ++i) {
        if (s.u[i] != t.u[i])
          throw SimulationBug("class profile disagrees with recount at server " +
                              std::to_string(v));
        if (s.decision == Decision::Undecided && s.d_cls[i] != dv[i])
          throw SimulationBug("member degree disagrees with recount at server " +
                              std::to_string(v));
      }
    }
    if (2 * t.nact < t.nhat)
      throw SimulationBug("active set fell below half the undecided members in cluster " +
                          std::to_string(L));
    if (t.nact > core.prm.c_eq) {
      const double lp = log2_pow(static_cast<double>(t.nact), core.prm.eq_exp);
      const int hi = core.truncated_hi(t.nact);
      for (const auto& [v, dv] : t.d) {
        const SolverServer& s = core.srv[v];
        if (s.decision != Decision::Undecided || !s.active) continue;
        for (int i = core.class_lo; i <= hi; ++i) {
          if (t.u[i] <= 0) continue;
          const double bound = static_cast<double>(i) * static_cast<double>(t.u[i]) /
                               static_cast<double>(t.nact) * lp;
          if (static_cast<double>(dv[i]) > bound)
            throw SimulationBug("inner loop exited without an equitable profile in cluster " +
                                std::to_string(L));
        }
      }
    }
  }
}

// No edge may ever hold more members than its threshold allows.
inline void audit_validity(const SolveCore& core) {
  const BipartiteNetwork& net = *core.net;
  for (int c = 0; c < net.n_clients; ++c) {
    const NodeId cli_id = net.n_servers + c;
    int incg = 0;
    for (int p = 0; p < net.degree(cli_id); ++p)
      if (core.srv[net.ports[cli_id][p].peer].decision == Decision::Included) incg++;
    if (incg > net.client_threshold[c])
      throw SimulationBug("edge " + std::to_string(c) + " exceeded its threshold");
  }
}

// Every exclusion must be justified by an edge whose threshold is spent.
inline void audit_witnesses(const SolveCore& core, const std::vector<NodeId>& fresh) {
  const BipartiteNetwork& net = *core.net;
  for (NodeId v : fresh) {
    bool found = false;
    for (const Port& pt : net.ports[v]) {
      const int c = net.edge_of_client(pt.peer);
      const NodeId cli_id = pt.peer;
      int incg = 0;
      for (int p = 0; p < net.degree(cli_id); ++p)
        if (core.srv[net.ports[cli_id][p].peer].decision == Decision::Included) incg++;
      if (incg == net.client_threshold[c]) { found = true; break; }
    }
    if (!found)
      throw SimulationBug("server " + std::to_string(v) +
                          " excluded itself without a spent edge");
  }
}

// -------------------------------------------------------------------- driver

struct SolveOutcome {
  std::vector<Decision> decision;  // per server
  bool cap_hit = false;
  int windows = 0;
};

// Count the undecided members of each participating cluster and broadcast
// the counts; returns the largest cluster count (drives the inner-loop cap).
inline std::int64_t window_census(Engine& eng, TreeSet& trees, SolveCore& core,
                                  const std::set<NodeId>& labels) {
  AggTask tn;
  tn.up = MsgType::NhatUp;
  tn.down = MsgType::NhatDown;
  tn.kind = AggKind::Sum;
  tn.indices = 1;
  tn.value = [&core](NodeId v, int) -> std::int64_t {
    const SolverServer& s = core.srv[v];
    return (s.in_window && s.decision == Decision::Undecided) ? 1 : 0;
  };
  AggResult rn = converge_broadcast(eng, trees, tn, labels);
  std::int64_t nhat_max = 0;
  for (NodeId v = 0; v < core.net->n_servers; ++v)
    if (rn.got[v][0]) core.srv[v].nhat = rn.received[v][0];
  for (const auto& [L, vals] : rn.root_value) nhat_max = std::max(nhat_max, vals[0]);
  return nhat_max;
}

// Part one: class exchanges and count waves until every participating
// cluster is equitable, idling overloaded members along the way.
inline void balance_classes(Engine& eng, TreeSet& trees, SolveCore& core,
                            const std::set<NodeId>& labels, std::int64_t nhat_max) {
  const BipartiteNetwork& net = *core.net;
  const int lg = ceil_log2(std::max<std::int64_t>(2, nhat_max));
  const long base = (core.mode == ProfileMode::BySize)
                        ? static_cast<long>(lg) * lg
                        : static_cast<long>(core.class_hi + 1) * lg;
  const long l2_cap =
      core.prm.inner_cap_factor * std::max<long>(1, base) + core.prm.inner_cap_slack;
  long l2 = 0;
  while (true) {
    if (++l2 > l2_cap)
      throw SimulationBug("class balancing failed to settle within its bound");
    ClassExchangeProtocol cx(core);
    eng.run(cx, 8);

    AggTask ta;
    ta.up = MsgType::NactUp;
    ta.down = MsgType::NactDown;
    ta.kind = AggKind::Sum;
    ta.indices = 1;
    ta.value = [&core](NodeId v, int) -> std::int64_t {
      const SolverServer& s = core.srv[v];
      return (s.in_window && s.decision == Decision::Undecided && s.active) ? 1 : 0;
    };
    AggResult ra = converge_broadcast(eng, trees, ta, labels);
    for (NodeId v = 0; v < net.n_servers; ++v)
      if (ra.got[v][0]) core.srv[v].nact = ra.received[v][0];

    AggTask tu;
    tu.up = MsgType::UiUp;
    tu.down = MsgType::UiDown;
    tu.kind = AggKind::Sum;
    tu.indices = 1 + core.n_classes();
    tu.value = [&core](NodeId v, int j) -> std::int64_t {
      const SolverServer& s = core.srv[v];
      return j == 0 ? s.own_live : s.own_cls[core.class_lo + j - 1];
    };
    AggResult ru = converge_broadcast(eng, trees, tu, labels);
    for (NodeId v = 0; v < net.n_servers; ++v) {
      if (!ru.got[v][0]) continue;
      core.srv[v].alive = ru.received[v][0];
      for (int j = 1; j < tu.indices; ++j)
        core.srv[v].u[core.class_lo + j - 1] = ru.received[v][j];
    }

    AggTask te;
    te.up = MsgType::EqUp;
    te.down = MsgType::EqDown;
    te.kind = AggKind::Or;
    te.indices = 1;
    te.value = [&core](NodeId v, int) -> std::int64_t {
      return core.checkeq_violation(v) ? 1 : 0;
    };
    AggResult re = converge_broadcast(eng, trees, te, labels);
    bool all_eq = true;
    for (NodeId v = 0; v < net.n_servers; ++v)
      if (re.got[v][0])
        core.srv[v].eq_violation = static_cast<std::uint8_t>(re.received[v][0]);
    for (const auto& [L, vals] : re.root_value)
      if (vals[0]) all_eq = false;
    if (all_eq) break;
    IdleStepProtocol idle(core);
    eng.run(idle, 8);
  }
}

// Runs the window schedule over an existing partition.  Trees are built once
// and reused; transcript().iters records one row per cluster per iteration.
inline SolveOutcome solve_clustered(Engine& eng, const ColoredPartition& part,
                                    ProfileMode mode) {
  const BipartiteNetwork& net = eng.net();
  const Params& prm = eng.params();
  int dim = 2;
  for (int c = 0; c < net.n_clients; ++c) dim = std::max(dim, net.client_size[c]);
  SolveCore core(net, part, prm, mode, eng.transcript().seed, dim);

  ClusterView view;
  view.server_label = part.label;
  view.client_port_label = part.client_port_label;
  TreeSet trees = build_bfs_tree(eng, view);

  std::set<int> colors(part.color.begin(), part.color.end());
  std::map<NodeId, std::vector<NodeId>> members;
  for (NodeId v = 0; v < net.n_servers; ++v) members[part.label[v]].push_back(v);

  SolveOutcome out;
  for (int color : colors) {
    core.begin_window(color);
    out.windows++;
    long iter = 0;
    while (true) {
      std::set<NodeId> labels;
      for (NodeId v = 0; v < net.n_servers; ++v)
        if (core.srv[v].in_window && core.srv[v].decision == Decision::Undecided)
          labels.insert(core.srv[v].label);
      if (labels.empty()) break;
      if (++iter > prm.outer_cap) { out.cap_hit = true; break; }

      IterStartProtocol start(core, iter == 1);
      eng.run(start, 8);
      const std::int64_t nhat_max = window_census(eng, trees, core, labels);
      balance_classes(eng, trees, core, labels, nhat_max);
      if (prm.audit) {
        audit_caches(core);
        audit_part1(core, labels);
      }

      // part two
      std::map<NodeId, Branch> branch;
      std::set<NodeId> want_maxd;
      for (NodeId L : labels) {
        NodeId probe = -1;
        for (NodeId v : members[L])
          if (core.srv[v].in_window) { probe = v; break; }
        branch[L] = core.pick_branch(core.srv[probe]);
        if (branch[L] == Branch::MaxSelect || branch[L] == Branch::DegenerateSmall)
          want_maxd.insert(L);
      }
      if (!want_maxd.empty()) {
        AggTask tm;
        tm.up = MsgType::MaxdUp;
        tm.down = MsgType::MaxdDown;
        tm.kind = AggKind::MaxId;
        tm.indices = 1;
        tm.value_id = [&core](NodeId v) { return core.maxd_key(v); };
        AggResult rm = converge_broadcast(eng, trees, tm, want_maxd);
        for (NodeId v = 0; v < net.n_servers; ++v)
          if (rm.got[v][0]) {
            core.srv[v].maxd_val = rm.received[v][0];
            core.srv[v].maxd_id = rm.received_id[v];
          }
      }

      std::map<NodeId, std::pair<std::int64_t, std::int64_t>> before;
      for (NodeId L : labels) {
        auto& b = before[L];
        for (NodeId v : members[L]) {
          if (core.srv[v].decision == Decision::Included) b.first++;
          if (core.srv[v].decision == Decision::Excluded) b.second++;
        }
      }

      ElectResolveProtocol elect(core);
      eng.run(elect, 12);
      if (prm.audit) audit_validity(core);

      // part three
      std::vector<Decision> snap(net.n_servers);
      for (NodeId v = 0; v < net.n_servers; ++v) snap[v] = core.srv[v].decision;
      TightResolveProtocol tight(core);
      eng.run(tight, 8);
      if (prm.audit) {
        std::vector<NodeId> fresh;
        for (NodeId v = 0; v < net.n_servers; ++v)
          if (snap[v] != core.srv[v].decision &&
              core.srv[v].decision == Decision::Excluded)
            fresh.push_back(v);
        audit_validity(core);
        audit_witnesses(core, fresh);
        audit_caches(core);
      }

      for (NodeId L : labels) {
        IterRecord rec;
        rec.cluster = L;
        rec.color = color;
        rec.outer_iter = static_cast<int>(iter);
        rec.branch = branch[L];
        std::int64_t inc = 0, exc = 0;
        for (NodeId v : members[L]) {
          if (core.srv[v].decision == Decision::Included) inc++;
          if (core.srv[v].decision == Decision::Excluded) exc++;
        }
        rec.included = inc - before[L].first;
        rec.excluded = exc - before[L].second;
        NodeId probe = -1;
        for (NodeId v : members[L])
          if (core.srv[v].in_window) { probe = v; break; }
        rec.n_hat = core.srv[probe].nhat;
        rec.n_active = core.srv[probe].nact;
        eng.transcript().iters.push_back(rec);
      }
    }
    if (out.cap_hit) break;
  }

  out.decision.resize(net.n_servers);
  for (NodeId v = 0; v < net.n_servers; ++v) out.decision[v] = core.srv[v].decision;
  eng.transcript().final_state.assign(net.n_servers, 0);
  for (NodeId v = 0; v < net.n_servers; ++v)
    eng.transcript().final_state[v] = static_cast<std::uint8_t>(out.decision[v]);
  return out;
}

// One cluster per connected component, all in one color: the smallest valid
// partition, handy for exercising the core without a decomposition.
inline ColoredPartition component_partition(const BipartiteNetwork& net) {
  ColoredPartition p;
  const int n = net.n_servers;
  p.label.assign(n, -1);
  p.color.assign(n, 1);
  p.center.assign(n, -1);
  for (NodeId v = 0; v < n; ++v) {
    if (p.label[v] >= 0) continue;
    std::vector<NodeId> frontier{v};
    p.label[v] = v;  // v is the least id of its component
    while (!frontier.empty()) {
      std::vector<NodeId> next;
      for (NodeId u : frontier)
        for (const Port& pu : net.ports[u]) {
          const NodeId cli_id = pu.peer;
          for (const Port& pc : net.ports[cli_id]) {
            if (p.label[pc.peer] >= 0) continue;
            p.label[pc.peer] = v;
            next.push_back(pc.peer);
          }
        }
      frontier = std::move(next);
    }
  }
  for (NodeId v = 0; v < n; ++v) p.center[v] = p.label[v];
  std::set<NodeId> labs(p.label.begin(), p.label.end());
  p.clusters = static_cast<int>(labs.size());
  p.colors_used = 1;
  p.client_port_color.assign(net.n_clients, {});
  p.client_port_label.assign(net.n_clients, {});
  for (int c = 0; c < net.n_clients; ++c) {
    const NodeId cli_id = net.n_servers + c;
    for (const Port& pt : net.ports[cli_id]) {
      p.client_port_color[c].push_back(1);
      p.client_port_label[c].push_back(p.label[pt.peer]);
    }
  }
  return p;
}

}  // namespace hypermis
