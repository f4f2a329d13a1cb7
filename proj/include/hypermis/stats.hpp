#pragma once

// Post-run statistics over transcripts: how much each marking branch
// decided per iteration, and how the total round count trends against
// instance size.  Pure functions over recorded data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "engine.hpp"

namespace hypermis {

struct BranchSummary {
  long iterations = 0;
  long long decided = 0;              // included + excluded across iterations
  std::vector<double> fractions;      // per-iteration decided / n_hat
  double median_fraction = 0.0;
};

struct ProgressSummary {
  std::map<Branch, BranchSummary> by_branch;
  long total_iterations = 0;
  long long total_decided = 0;
};

inline ProgressSummary progress_stats(const std::vector<Transcript>& runs) {
  ProgressSummary out;
  for (const Transcript& t : runs) {
    for (const IterRecord& it : t.iters) {
      BranchSummary& b = out.by_branch[it.branch];
      b.iterations++;
      const long long dec = it.included + it.excluded;
      b.decided += dec;
      if (it.n_hat > 0)
        b.fractions.push_back(static_cast<double>(dec) /
                              static_cast<double>(it.n_hat));
      out.total_iterations++;
      out.total_decided += dec;
    }
  }
  for (auto& [br, b] : out.by_branch) {
    if (b.fractions.empty()) continue;
    std::vector<double> f = b.fractions;
    std::nth_element(f.begin(), f.begin() + f.size() / 2, f.end());
    b.median_fraction = f[f.size() / 2];
  }
  return out;
}

// Least-squares slope of y against x.
inline double fit_slope(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(pts.size());
  const double den = n * sxx - sx * sx;
  if (std::abs(den) < 1e-12) return 0.0;
  return (n * sxy - sx * sy) / den;
}

// Slope of log2(rounds) against log2(log2 n): a value of s means rounds
// grew like (log2 n)^s over the sweep.
inline double round_trend_slope(const std::vector<std::pair<int, long>>& n_rounds) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& [n, rounds] : n_rounds) {
    if (n < 4 || rounds < 1) continue;
    pts.push_back({std::log2(std::log2(static_cast<double>(n))),
                   std::log2(static_cast<double>(rounds))});
  }
  return fit_slope(pts);
}

}  // namespace hypermis
