#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "hypermis/engine.hpp"
#include "hypermis/generator.hpp"
#include "hypermis/message.hpp"
#include "hypermis/network.hpp"
#include "hypermis/rng.hpp"
#include "support.hpp"

using namespace hypermis;
using namespace testsupport;

namespace {

// Server 0 pings every incident client; clients reply on the arrival round.
struct PingPong : Protocol {
  const BipartiteNetwork* net;
  int replies_needed = 0;
  int replies_got = 0;
  long ping_round = -1;
  std::vector<long> client_recv_round;
  long reply_recv_round = -1;

  explicit PingPong(const BipartiteNetwork& n) : net(&n) {
    replies_needed = net->degree(0);
    client_recv_round.assign(net->n_clients, -1);
  }
  void on_round(RoundContext& ctx) override {
    NodeId v = ctx.node();
    if (v == 0 && ctx.round() == 0) {
      ping_round = 0;
      for (int p = 0; p < net->degree(0); ++p) {
        Message m;
        m.type = MsgType::Elect;
        m.a = 0;
        ctx.send(p, m);
      }
      return;
    }
    if (!net->is_server(v)) {
      for (const Incoming& in : ctx.inbox()) {
        if (in.msg.type != MsgType::Elect) continue;
        client_recv_round[net->edge_of_client(v)] = ctx.round();
        Message r;
        r.type = MsgType::ChildClaim;
        ctx.send(in.port, r);
      }
      return;
    }
    if (v == 0) {
      for (const Incoming& in : ctx.inbox())
        if (in.msg.type == MsgType::ChildClaim) {
          replies_got++;
          reply_recv_round = ctx.round();
        }
    }
  }
  bool finished() const override { return replies_got == replies_needed; }
};

// Random per-round sends driven by the shared seed; never finishes by itself.
struct Chatter : Protocol {
  const BipartiteNetwork* net;
  long horizon;
  long last_round = -1;

  Chatter(const BipartiteNetwork& n, long rounds) : net(&n), horizon(rounds) {}
  void on_round(RoundContext& ctx) override {
    last_round = ctx.round();
    NodeId v = ctx.node();
    int deg = net->degree(v);
    if (deg == 0) return;
    NodeRng rng(ctx.seed(), v, 0x63686174);
    std::uint64_t draw = static_cast<std::uint64_t>(ctx.round());
    if (rng.bernoulli(2 * draw, 0.6)) {
      Message m;
      m.type = MsgType::StateAnnounce;
      m.a = static_cast<std::int64_t>(rng.u64(2 * draw + 1) % 4);
      ctx.send(static_cast<int>(rng.u64(2 * draw + 1) % deg), m);
    }
  }
  bool finished() const override { return last_round + 1 >= horizon; }
};

struct DoubleSend : Protocol {
  void on_round(RoundContext& ctx) override {
    if (ctx.node() != 0) return;
    Message m;
    m.type = MsgType::ChildClaim;
    ctx.send(0, m);
    ctx.send(0, m);
  }
  bool finished() const override { return false; }
};

struct BlobSend : Protocol {
  bool sent = false;
  void on_round(RoundContext& ctx) override {
    if (ctx.node() != 0 || sent) return;
    Message m;
    m.type = MsgType::LocalGossip;
    m.blob = {1, 2, 3, 4};
    ctx.send(0, m);
    sent = true;
  }
  bool finished() const override { return sent; }
};

struct NeverDone : Protocol {
  void on_round(RoundContext&) override {}
  bool finished() const override { return false; }
};

}  // namespace

TEST_CASE("network build lays out ports and client metadata") {
  Hypergraph h = triangle2();  // edges {0,1}, {1,2}, {0,2}
  h.edges[2].threshold = 1;
  BipartiteNetwork net = BipartiteNetwork::build(h);
  CHECK(net.n_servers == 3);
  CHECK(net.n_clients == 3);
  CHECK(net.total_nodes() == 6);
  CHECK(net.links.size() == 6);

  // server 0 is in edges 0 ({0,1}) and 2 ({0,2})
  REQUIRE(net.degree(0) == 2);
  CHECK(net.ports[0][0].peer == net.client_of_edge(0));
  CHECK(net.ports[0][1].peer == net.client_of_edge(2));

  // client ports follow member order
  NodeId c2 = net.client_of_edge(2);
  REQUIRE(net.degree(c2) == 2);
  CHECK(net.ports[c2][0].peer == 0);
  CHECK(net.ports[c2][1].peer == 2);
  CHECK(net.client_size[2] == 2);
  CHECK(net.client_threshold[2] == 1);

  for (const Link& lk : net.links) {
    CHECK(net.ports[lk.server][lk.server_port].link ==
          net.ports[lk.client][lk.client_port].link);
    CHECK(net.ports[lk.server][lk.server_port].peer == lk.client);
    CHECK(net.ports[lk.client][lk.client_port].peer == lk.server);
  }
  CHECK(net.port_to(c2, 2) == 1);
  CHECK(net.port_to(c2, 1) == -1);
}

TEST_CASE("messages are delivered exactly one round after sending") {
  Hypergraph h = triangle2();
  BipartiteNetwork net = BipartiteNetwork::build(h);
  Params prm;
  Engine eng(net, prm, 7);
  PingPong proto(net);
  long used = eng.run(proto, 100);

  // send in round 0, client sees it in round 1, reply lands in round 2
  CHECK(proto.client_recv_round[0] == 1);
  CHECK(proto.client_recv_round[2] == 1);
  CHECK(proto.client_recv_round[1] == -1);  // edge {1,2} never pinged
  CHECK(proto.reply_recv_round == 2);
  CHECK(proto.replies_got == 2);
  CHECK(used == 3);
  CHECK(eng.transcript().rounds == 3);
  CHECK(eng.transcript().total_messages == 4);
  CHECK(eng.transcript().round_messages == std::vector<std::int32_t>{2, 2, 0});
}

TEST_CASE("same-round arrivals are ordered by sender activation") {
  Hypergraph h = single_edge2();  // edge {0,1}, client id 2
  BipartiteNetwork net = BipartiteNetwork::build(h);

  struct BothSend : Protocol {
    std::vector<int> arrival_ports;
    bool done = false;
    void on_round(RoundContext& ctx) override {
      if (ctx.round() == 0 && (ctx.node() == 0 || ctx.node() == 1)) {
        Message m;
        m.type = MsgType::Elect;
        m.a = ctx.node();
        ctx.send(0, m);
      }
      if (ctx.node() == 2 && !ctx.inbox().empty()) {
        for (const Incoming& in : ctx.inbox()) arrival_ports.push_back(in.port);
        done = true;
      }
    }
    bool finished() const override { return done; }
  } proto;

  Params prm;
  Engine eng(net, prm, 1);
  eng.run(proto, 10);
  CHECK(proto.arrival_ports == std::vector<int>{0, 1});
}

TEST_CASE("duplicate send on one link in one round is a simulation bug") {
  Hypergraph h = single_edge2();
  BipartiteNetwork net = BipartiteNetwork::build(h);
  Params prm;
  Engine eng(net, prm, 1);
  DoubleSend proto;
  CHECK_THROWS_AS(eng.run(proto, 10), SimulationBug);
}

TEST_CASE("oversized messages violate the bounded budget but pass unbounded") {
  Hypergraph h = single_edge2();
  BipartiteNetwork net = BipartiteNetwork::build(h);

  Params congest;
  Engine eng1(net, congest, 1);
  BlobSend p1;
  CHECK_THROWS_AS(eng1.run(p1, 10), BudgetViolation);

  Params local;
  local.capacity = Capacity::Local;
  Engine eng2(net, local, 1);
  BlobSend p2;
  CHECK(eng2.run(p2, 10) == 1);
  CHECK(eng2.transcript().max_bits > local.message_budget(2));
}

TEST_CASE("round cap stops a stuck protocol") {
  Hypergraph h = single_edge2();
  BipartiteNetwork net = BipartiteNetwork::build(h);
  Params prm;
  Engine eng(net, prm, 1);
  NeverDone proto;
  CHECK_THROWS_AS(eng.run(proto, 5), CapExceeded);
  CHECK(eng.transcript().rounds == 5);
}

TEST_CASE("runs are reproducible and seed-sensitive") {
  GenResult g = gen(12, 18, {2, 3}, ThresholdMode::Mis, 11);
  BipartiteNetwork net = BipartiteNetwork::build(g.h);
  Params prm;

  auto run_once = [&](std::uint64_t seed) {
    Engine eng(net, prm, seed);
    Chatter proto(net, 25);
    eng.run(proto, 100);
    return eng.transcript().hash();
  };

  std::uint64_t h1 = run_once(5);
  std::uint64_t h2 = run_once(5);
  std::uint64_t h3 = run_once(6);
  CHECK(h1 == h2);
  CHECK(h1 != h3);
}

TEST_CASE("every message type fits the budget at every size") {
  Params prm;
  for (int n : {2, 3, 4, 5, 6, 8, 13, 16, 64, 257, 1024, 4096}) {
    BitLayout L = BitLayout::make(n, prm);
    CAPTURE(n);
    CHECK(L.budget == 8 * ceil_log2(n));
    for (int ti = 0; ti < static_cast<int>(MsgType::MsgTypeCount); ++ti) {
      MsgType ty = static_cast<MsgType>(ti);
      if (ty == MsgType::LocalGossip) continue;  // unbounded mode only
      if (ty == MsgType::DecompG && n <= 3) continue;  // never sent that small
      Message m;
      m.type = ty;
      CAPTURE(ti);
      CHECK(L.cost(m) <= L.budget);
    }
  }
}

TEST_CASE("sampled-radius fixed point keeps usable precision") {
  Params prm;
  for (int n : {4, 8, 16, 64, 1024, 4096}) {
    BitLayout L = BitLayout::make(n, prm);
    CAPTURE(n);
    CHECK(L.g_frac_bits >= 3);
    // the format must hold the largest magnitude the relay can produce
    double r_max = prm.r_cap_factor * std::log(n);
    CHECK((std::int64_t{1} << L.g_range_bits) >= static_cast<std::int64_t>(r_max) + 2);
  }
}

TEST_CASE("transcript hash reflects every recorded field") {
  Transcript t;
  t.n = 4;
  t.m = 2;
  t.seed = 9;
  t.rounds = 3;
  t.round_messages = {1, 2, 0};
  t.round_max_bits = {7, 8, 0};
  std::uint64_t base = t.hash();

  Transcript t2 = t;
  t2.round_messages[1] = 3;
  CHECK(t2.hash() != base);

  Transcript t3 = t;
  t3.iters.push_back({0, 1, 0, Branch::MaxSelect, 4, 4, 1, 0});
  CHECK(t3.hash() != base);

  Transcript t4 = t;
  t4.final_state = {0, 1, 2, 1};
  CHECK(t4.hash() != base);
}
