#pragma once

// Synchronous message-passing engine.
//
// Execution proceeds in lockstep rounds.  In every round each node is
// activated once (in id order), reads the messages delivered this round, and
// may send at most one message per incident link per direction.  Messages
// sent in round r are delivered at the start of round r+1.  Under bounded
// capacity every message must fit the per-link bit budget; oversized sends
// throw immediately.  All activation and delivery orders are fixed functions
// of the instance and seed, so a run is reproducible bit for bit.

#include <cstdint>
#include <string>
#include <vector>

#include "message.hpp"
#include "network.hpp"
#include "types.hpp"

namespace hypermis {

struct Incoming {
  int port = -1;  // receiver's local port
  Message msg;
};

enum class Branch : std::uint8_t {
  MaxSelect = 0,
  BernoulliAhat,
  BernoulliCapped,
  AllFree,
  DegenerateSmall
};

inline const char* branch_name(Branch b) {
  switch (b) {
    case Branch::MaxSelect: return "max-select";
    case Branch::BernoulliAhat: return "bernoulli-ahat";
    case Branch::BernoulliCapped: return "bernoulli-capped";
    case Branch::AllFree: return "all-free";
    case Branch::DegenerateSmall: return "degenerate-small";
  }
  return "?";
}

struct IterRecord {
  NodeId cluster = -1;
  int color = 0;
  int outer_iter = 0;
  Branch branch = Branch::MaxSelect;
  std::int64_t n_hat = 0;     // undecided members at iteration start
  std::int64_t n_active = 0;  // active members after the inner loop
  std::int64_t included = 0;  // decisions made this iteration
  std::int64_t excluded = 0;
};

struct Transcript {
  int n = 0, m = 0;
  std::uint64_t seed = 0;
  int budget = 0;
  Capacity capacity = Capacity::Congest;

  long rounds = 0;
  long long total_messages = 0;
  std::vector<std::int32_t> round_messages;
  std::vector<std::int32_t> round_max_bits;
  int max_bits = 0;

  // decomposition summary
  int colors_used = 0;
  int clusters = 0;
  int decomp_attempts = 0;
  long radius_truncations = 0;
  bool tiny_bypass = false;

  std::vector<IterRecord> iters;
  std::vector<std::uint8_t> final_state;  // per server, Decision values

  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t x) {
      for (int i = 0; i < 8; ++i) {
        h ^= (x >> (8 * i)) & 0xffu;
        h *= 1099511628211ull;
      }
    };
    mix(static_cast<std::uint64_t>(n));
    mix(static_cast<std::uint64_t>(m));
    mix(seed);
    mix(static_cast<std::uint64_t>(budget));
    mix(static_cast<std::uint64_t>(rounds));
    mix(static_cast<std::uint64_t>(total_messages));
    for (auto v : round_messages) mix(static_cast<std::uint64_t>(v));
    for (auto v : round_max_bits) mix(static_cast<std::uint64_t>(v));
    mix(static_cast<std::uint64_t>(colors_used));
    mix(static_cast<std::uint64_t>(clusters));
    mix(static_cast<std::uint64_t>(decomp_attempts));
    for (const IterRecord& r : iters) {
      mix(static_cast<std::uint64_t>(r.cluster));
      mix(static_cast<std::uint64_t>(r.color));
      mix(static_cast<std::uint64_t>(r.outer_iter));
      mix(static_cast<std::uint64_t>(r.branch));
      mix(static_cast<std::uint64_t>(r.n_hat));
      mix(static_cast<std::uint64_t>(r.n_active));
      mix(static_cast<std::uint64_t>(r.included));
      mix(static_cast<std::uint64_t>(r.excluded));
    }
    for (auto v : final_state) mix(v);
    return h;
  }
};

class Engine;

class RoundContext {
 public:
  NodeId node() const { return node_; }
  long round() const { return round_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<Incoming>& inbox() const { return *inbox_; }
  void send(int port, const Message& msg);

 private:
  friend class Engine;
  Engine* eng_ = nullptr;
  NodeId node_ = -1;
  long round_ = 0;
  std::uint64_t seed_ = 0;
  const std::vector<Incoming>* inbox_ = nullptr;
};

class Protocol {
 public:
  virtual ~Protocol() = default;
  virtual void on_round(RoundContext& ctx) = 0;
  virtual bool finished() const = 0;
};

class Engine {
 public:
  Engine(const BipartiteNetwork& net, const Params& prm, std::uint64_t seed)
      : net_(&net), prm_(prm), layout_(BitLayout::make(std::max(2, net.n_servers), prm)) {
    t_.n = net.n_servers;
    t_.m = net.n_clients;
    t_.seed = seed;
    t_.budget = layout_.budget;
    t_.capacity = prm.capacity;
    cur_.assign(net.total_nodes(), {});
    nxt_.assign(net.total_nodes(), {});
    link_stamp_.assign(net.links.size() * 2, -1);
  }

  const BitLayout& layout() const { return layout_; }
  const BipartiteNetwork& net() const { return *net_; }
  const Params& params() const { return prm_; }
  Transcript& transcript() { return t_; }
  const Transcript& transcript() const { return t_; }
  long round() const { return t_.rounds; }

  // Runs `proto` until it reports completion.  Returns rounds consumed.
  // Protocol schedules must end quiet: leftover in-flight messages from a
  // previous protocol would leak into this one's first round.
  long run(Protocol& proto, long max_rounds) {
    for (const auto& box : cur_)
      if (!box.empty())
        throw SimulationBug("messages in flight across a protocol boundary");
    long start = t_.rounds;
    RoundContext ctx;
    ctx.eng_ = this;
    ctx.seed_ = t_.seed;
    while (!proto.finished()) {
      if (t_.rounds - start >= max_rounds)
        throw CapExceeded("round cap exceeded after " + std::to_string(max_rounds) +
                          " rounds (protocol stuck or cap too small)");
      round_msgs_ = 0;
      round_bits_ = 0;
      const int total = net_->total_nodes();
      for (NodeId v = 0; v < total; ++v) {
        ctx.node_ = v;
        ctx.round_ = t_.rounds;
        ctx.inbox_ = &cur_[v];
        proto.on_round(ctx);
      }
      std::swap(cur_, nxt_);
      for (auto& box : nxt_) box.clear();
      t_.rounds++;
      t_.total_messages += round_msgs_;
      t_.round_messages.push_back(round_msgs_);
      t_.round_max_bits.push_back(round_bits_);
      if (round_bits_ > t_.max_bits) t_.max_bits = round_bits_;
    }
    return t_.rounds - start;
  }

 private:
  friend class RoundContext;

  void stage(NodeId from, int port, const Message& msg) {
    const auto& ps = net_->ports[from];
    if (port < 0 || port >= static_cast<int>(ps.size()))
      throw SimulationBug("send on invalid port " + std::to_string(port) +
                          " from node " + std::to_string(from));
    int link = ps[port].link;
    int dir = net_->is_server(from) ? 0 : 1;
    long& stamp = link_stamp_[static_cast<std::size_t>(link) * 2 + dir];
    if (stamp == t_.rounds)
      throw SimulationBug("node " + std::to_string(from) +
                          " sent twice on one link in round " +
                          std::to_string(t_.rounds));
    stamp = t_.rounds;
    int bits = layout_.cost(msg);
    if (prm_.capacity == Capacity::Congest && bits > layout_.budget)
      throw BudgetViolation("message type " +
                            std::to_string(static_cast<int>(msg.type)) + " needs " +
                            std::to_string(bits) + " bits, budget " +
                            std::to_string(layout_.budget));
    const Link& lk = net_->links[link];
    NodeId to = ps[port].peer;
    int peer_port = net_->is_server(from) ? lk.client_port : lk.server_port;
    nxt_[to].push_back({peer_port, msg});
    round_msgs_++;
    if (bits > round_bits_) round_bits_ = bits;
  }

  const BipartiteNetwork* net_;
  Params prm_;
  BitLayout layout_;
  Transcript t_;
  std::vector<std::vector<Incoming>> cur_, nxt_;
  std::vector<long> link_stamp_;
  std::int32_t round_msgs_ = 0;
  std::int32_t round_bits_ = 0;
};

inline void RoundContext::send(int port, const Message& msg) {
  eng_->stage(node_, port, msg);
}

}  // namespace hypermis
