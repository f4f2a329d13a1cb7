#pragma once

// Deterministic per-node randomness.  Every draw is a pure function of
// (global seed, node id, phase tag, draw counter), so adding instrumentation
// or reordering unrelated nodes never perturbs outcomes.

#include <cmath>
#include <cstdint>

namespace hypermis {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix3(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix64(splitmix64(splitmix64(a) ^ b) ^ c);
}

// One logical stream per (seed, node, phase).  Stateless: the caller advances
// the draw counter.
class NodeRng {
 public:
  NodeRng(std::uint64_t seed, std::uint64_t node, std::uint64_t phase)
      : base_(mix3(seed, node, phase)) {}

  std::uint64_t u64(std::uint64_t draw) const { return splitmix64(base_ ^ (draw * 0xd1342543de82ef95ULL + 1)); }

  // uniform in (0,1]; never returns 0 so log() is safe
  double unit(std::uint64_t draw) const {
    std::uint64_t v = u64(draw);
    return (static_cast<double>(v >> 11) + 1.0) * 0x1.0p-53;
  }

  bool bernoulli(std::uint64_t draw, double p) const { return unit(draw) <= p; }

  // exponential with rate beta (mean 1/beta)
  double exponential(std::uint64_t draw, double beta) const {
    return -std::log(unit(draw)) / beta;
  }

 private:
  std::uint64_t base_;
};

}  // namespace hypermis
