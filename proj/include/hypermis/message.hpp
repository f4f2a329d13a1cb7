#pragma once

// Message catalogue and bit accounting.
//
// Every message carries a 5-bit type tag plus typed fields.  Field widths are
// semantic functions of the instance size n (server count):
//
//   server id            ceil(log2 n)
//   counter(max)         ceil(log2(max+1)), at least 1
//   node count           counter(n)
//   edge-scale value     counter(min(n(n-1)/2, n^2))   (u_i, d_i, sums)
//   tree distance        counter(D_cap)
//   carve phase / color  counter(6*ceil(ln n) + 2)
//   class (size/thresh)  counter(n)
//   sampled radius g     1 sign bit + range bits + Q(n) fraction bits,
//                        Q(n) = min(16, max(1, B - 6 - range_bits - id_bits))
//
// The budget is B = c_msg * ceil(log2 n) bits per link per direction per
// round.  Per-type layouts below; every type fits B for all n >= 2 except
// DecompG, which is only used for n >= 4 (instances with n <= 3 skip the
// sampling decomposition and become single-cluster components).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "types.hpp"

namespace hypermis {

enum class MsgType : std::uint8_t {
  // decomposition
  DecompG = 0,     // a = g (fixed point), b = origin server id
  LabelMin,        // a = carve phase, b = candidate cluster label (server id)
  ColorAnnounce,   // a = color (carve phase), b = cluster label  (srv -> cli)
  // per-cluster tree construction
  Elect,           // a = max server id seen
  BfsDist,         // a = distance from cluster root
  ChildClaim,      // no payload (sender port identifies the child)
  HeightUp,        // a = max subtree depth
  HeightDown,      // a = tree height
  // aggregation waves over the cluster tree (one type per task)
  NhatUp, NhatDown,        // a = undecided-server count
  NactUp, NactDown,        // a = active-server count
  UiUp, UiDown,            // a = vector index (0 = live-edge total), b = count
  EqUp, EqDown,            // a = violation flag (OR)
  MaxdUp, MaxdDown,        // a = best degree, b = its server id
  // solve-core exchange
  StateAnnounce,   // a = server state (active/idle/included/excluded)
  ClassAnnounce,   // a = live flag, b = current class of the client's edge
  ClassAnnounceOwn,  // same, sent to the one member that counts this edge
  CombineReply,    // a = residual edge exists, b = residual threshold
  Elected,         // a = flag
  Conflict,        // a = flag
  Tight,           // a = flag (receiver must exclude itself)
  // reference mode only: unbounded edge-record gossip
  LocalGossip,     // blob of packed records
  MsgTypeCount
};

struct Message {
  MsgType type = MsgType::DecompG;
  std::int64_t a = 0, b = 0, c = 0;
  std::vector<std::int64_t> blob;  // LocalGossip only
};

// Precomputed field widths for one instance size.
struct BitLayout {
  int n = 0;
  int budget = 0;
  int type_bits = 5;
  int sid_bits = 1;
  int count_bits = 1;   // values up to n
  int edge_bits = 1;    // values up to min(n(n-1)/2, n^2)
  int dist_bits = 1;    // values up to D_cap
  int phase_bits = 1;   // carve phases / colors
  int class_bits = 1;   // edge sizes and thresholds
  int ui_idx_bits = 1;
  int g_range_bits = 1;
  int g_frac_bits = 1;

  static BitLayout make(int n, const Params& prm) {
    BitLayout L;
    L.n = n;
    L.budget = prm.message_budget(n);
    L.sid_bits = std::max(1, ceil_log2(n));
    L.count_bits = counter_bits(n);
    long long edge_cap = std::min<long long>(
        static_cast<long long>(n) * (n - 1) / 2, static_cast<long long>(n) * n);
    L.edge_bits = counter_bits(std::max<long long>(1, edge_cap));
    L.dist_bits = counter_bits(prm.d_cap(n));
    int phase_cap = (n <= 3) ? 1
                             : 6 * static_cast<int>(std::ceil(std::log(std::max(2, n)))) + 2;
    L.phase_bits = counter_bits(phase_cap);
    L.class_bits = counter_bits(n);
    int max_idx = std::max(1, std::min(n, std::max(ceil_log2(n), prm.gmis_d)) - 1);
    L.ui_idx_bits = counter_bits(max_idx);
    double r_max = prm.r_cap_factor * std::log(std::max(2, n));
    double g_mag = r_max + std::ceil(r_max) + 4;  // radius + relay hops + slack
    L.g_range_bits = counter_bits(static_cast<std::int64_t>(std::ceil(g_mag)));
    L.g_frac_bits = std::min(
        16, std::max(1, L.budget - L.type_bits - 1 - L.g_range_bits - L.sid_bits));
    return L;
  }

  int g_bits() const { return 1 + g_range_bits + g_frac_bits; }
  std::int64_t g_one() const { return std::int64_t{1} << g_frac_bits; }

  int cost(const Message& msg) const {
    const int t = type_bits;
    switch (msg.type) {
      case MsgType::DecompG: return t + g_bits() + sid_bits;
      case MsgType::LabelMin: return t + phase_bits + sid_bits;
      case MsgType::ColorAnnounce: return t + phase_bits + sid_bits;
      case MsgType::Elect: return t + sid_bits;
      case MsgType::BfsDist: return t + dist_bits;
      case MsgType::ChildClaim: return t;
      case MsgType::HeightUp:
      case MsgType::HeightDown: return t + dist_bits;
      case MsgType::NhatUp:
      case MsgType::NhatDown:
      case MsgType::NactUp:
      case MsgType::NactDown: return t + count_bits;
      case MsgType::UiUp:
      case MsgType::UiDown: return t + ui_idx_bits + edge_bits;
      case MsgType::EqUp:
      case MsgType::EqDown: return t + 1;
      case MsgType::MaxdUp:
      case MsgType::MaxdDown: return t + edge_bits + sid_bits;
      case MsgType::StateAnnounce: return t + 2;
      case MsgType::ClassAnnounce:
      case MsgType::ClassAnnounceOwn: return t + 1 + class_bits;
      case MsgType::CombineReply: return t + 1 + class_bits;
      case MsgType::Elected:
      case MsgType::Conflict:
      case MsgType::Tight: return t + 1;
      case MsgType::LocalGossip:
        return t + 64 * static_cast<int>(msg.blob.size());
      default: return t;
    }
  }
};

}  // namespace hypermis
