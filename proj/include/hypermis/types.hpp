#pragma once

// Core ids, enums, run parameters and error types shared by every module.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace hypermis {

using NodeId = std::int32_t;
using EdgeIdx = std::int32_t;

enum class Decision : std::uint8_t { Undecided = 0, Included = 1, Excluded = 2 };

enum class ThresholdMode : std::uint8_t { Mis, Uniform };

// Degree/count profiles come in two flavors: by edge size (maximal independent
// set core) and by edge threshold (generalized core, see strict restrictions).
enum class ProfileMode : std::uint8_t { BySize, ByThreshold };

enum class Capacity : std::uint8_t { Congest, Local };

enum class Algorithm : std::uint8_t { Mis, Gmis, LocalRef, Greedy };

// Fatal inconsistencies inside the simulator (broken invariants, audits).
struct SimulationBug : std::runtime_error {
  explicit SimulationBug(const std::string& what) : std::runtime_error(what) {}
};

// Message exceeded the per-link bit budget while running with Congest capacity.
struct BudgetViolation : std::runtime_error {
  explicit BudgetViolation(const std::string& what) : std::runtime_error(what) {}
};

// A configured iteration/round cap was exhausted before termination.
struct CapExceeded : std::runtime_error {
  explicit CapExceeded(const std::string& what) : std::runtime_error(what) {}
};

inline int ceil_log2(std::int64_t x) {
  if (x <= 1) return 0;
  int b = 0;
  std::int64_t v = 1;
  while (v < x) { v <<= 1; ++b; }
  return b;
}

// Bits needed for a counter with inclusive maximum value `max_value`.
inline int counter_bits(std::int64_t max_value) {
  if (max_value < 0) return 1;
  return ceil_log2(max_value + 1) > 0 ? ceil_log2(max_value + 1) : 1;
}

inline double log2_of(double x) { return std::log2(x); }

// (log2 n)^e with a floor so tiny n never divides by zero.
inline double log2_pow(double n, double e) {
  double l = std::log2(std::max(n, 2.0));
  return std::pow(l, e);
}

// All tunables in one place.  Defaults mirror the published constants; the
// desk() profile rescales the two knobs that only separate asymptotically so
// behavior is measurable at experimental sizes (see README).
struct Params {
  // message budget: B = c_msg * ceil(log2 n) bits per link per direction
  int c_msg = 8;
  Capacity capacity = Capacity::Congest;

  // decomposition (exponential-shift clustering)
  double decomp_c = 4.0;       // oversampling constant c
  int decomp_m = 0;            // 0 means ceil(ln(c*n))
  double r_cap_factor = 4.0;   // radius cap r_max = factor * ln n
  int decomp_retries = 5;      // reruns with fresh seed if someone is never carved

  // tree construction budget D_cap = min(f*ceil(log2 n) + slack, 2n + 2)
  int dcap_log_factor = 8;
  int dcap_slack = 8;

  // equitability
  int c_eq = 16;               // clusters at or below this size are equitable
  double eq_exp = 5.0;         // CheckEq exponent; idle rule uses eq_exp - 1

  // marking probability
  double band_exp = 8.0;       // a-hat band and branch-predicate exponent
  double mark_cap = std::exp(-6.0);

  // iteration/round caps
  long outer_cap = 10000;
  int inner_cap_factor = 4;
  int inner_cap_slack = 8;
  long round_cap = 20'000'000;

  // generalized solver dimension bound
  int gmis_d = 6;

  // centralized audit hooks (aggregation cross-checks, per-iteration validity)
  bool audit = true;

  // frozen decomposition calibration (colors <= c_col*log2 n etc.)
  double c_col = 8.0;
  double c_diam = 8.0;

  static Params desk() {
    Params p;
    p.band_exp = 1.0;
    p.mark_cap = std::exp(-1.0);
    return p;
  }

  int message_budget(int n) const { return c_msg * std::max(1, ceil_log2(n)); }

  int d_cap(int n) const {
    return std::min(dcap_log_factor * std::max(1, ceil_log2(n)) + dcap_slack,
                    2 * n + 2);
  }
};

}  // namespace hypermis
