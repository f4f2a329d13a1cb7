#pragma once

// Bipartite communication network derived from a hypergraph instance.
//
// Servers are the hypergraph nodes (ids 0..n-1), clients are the hyperedges
// (ids n..n+m-1).  A link joins a server to every client whose edge contains
// it.  Each endpoint addresses the link through a local port; ports carry the
// peer's id (endpoints know who their neighbors are from the start, so no
// identification round is needed).

#include <cstdint>
#include <utility>
#include <vector>

#include "hypergraph.hpp"
#include "types.hpp"

namespace hypermis {

struct Port {
  int link = -1;      // global link index
  NodeId peer = -1;   // node on the other end
};

struct Link {
  NodeId server = -1, client = -1;
  int server_port = -1, client_port = -1;  // local port index at each end
};

struct BipartiteNetwork {
  int n_servers = 0;
  int n_clients = 0;
  std::vector<std::vector<Port>> ports;  // per node, local port order
  std::vector<Link> links;
  std::vector<int> client_size;                  // per client: |e|
  std::vector<int> client_threshold;             // per client: t_e

  int total_nodes() const { return n_servers + n_clients; }
  bool is_server(NodeId v) const { return v < n_servers; }
  NodeId client_of_edge(int edge_idx) const { return n_servers + edge_idx; }
  int edge_of_client(NodeId c) const { return c - n_servers; }

  // Builds the network for a canonical instance (node ids 0..n-1).
  static BipartiteNetwork build(const Hypergraph& h) {
    BipartiteNetwork net;
    net.n_servers = h.n();
    net.n_clients = h.m();
    net.ports.assign(net.total_nodes(), {});
    net.client_size.reserve(h.m());
    net.client_threshold.reserve(h.m());
    for (int ei = 0; ei < h.m(); ++ei) {
      const Hyperedge& e = h.edges[ei];
      NodeId cli = net.client_of_edge(ei);
      net.client_size.push_back(static_cast<int>(e.members.size()));
      net.client_threshold.push_back(e.threshold);
      for (NodeId v : e.members) {
        int link = static_cast<int>(net.links.size());
        int sp = static_cast<int>(net.ports[v].size());
        int cp = static_cast<int>(net.ports[cli].size());
        net.links.push_back({v, cli, sp, cp});
        net.ports[v].push_back({link, cli});
        net.ports[cli].push_back({link, v});
      }
    }
    return net;
  }

  // Port of `from` that leads to `to`, or -1.
  int port_to(NodeId from, NodeId to) const {
    const auto& ps = ports[from];
    for (int i = 0; i < static_cast<int>(ps.size()); ++i)
      if (ps[i].peer == to) return i;
    return -1;
  }

  int degree(NodeId v) const { return static_cast<int>(ports[v].size()); }
};

}  // namespace hypermis
