// Operator surface: generate instances, solve them over the simulated
// network, validate solutions, inspect decompositions, and run benchmark
// sweeps that emit one metrics record per run.
//
// Exit codes: 0 success, 2 validation failure, 3 iteration/round cap
// exceeded, 4 message budget violation, 5 I/O or format error, 6 internal
// invariant failure.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hypermis/decompose.hpp"
#include "hypermis/engine.hpp"
#include "hypermis/generator.hpp"
#include "hypermis/hypergraph.hpp"
#include "hypermis/io.hpp"
#include "hypermis/local_ref.hpp"
#include "hypermis/network.hpp"
#include "hypermis/oracle.hpp"
#include "hypermis/solve_core.hpp"
#include "hypermis/stats.hpp"

using namespace hypermis;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitCap = 3;
constexpr int kExitBudget = 4;
constexpr int kExitIo = 5;
constexpr int kExitInternal = 6;

// -------- shared run-parameter flags (profile plus explicit overrides)

struct ParamOpts {
  std::string profile = "default";
  double band_exp = -1, eq_exp = -1, mark_cap = -1, decomp_c = -1;
  double outer_cap = -1, round_cap = -1;
  int c_msg = -1, c_eq = -1, decomp_retries = -1, gmis_d = -1;
  bool no_audit = false;
};

void add_param_opts(CLI::App* sub, ParamOpts& o) {
  sub->add_option("--profile", o.profile,
                  "constant profile: 'default' (asymptotic constants) or "
                  "'desk' (rescaled so branch behavior shows at small n)")
      ->check(CLI::IsMember({"default", "desk"}));
  sub->add_option("--band-exp", o.band_exp, "marking-band exponent override");
  sub->add_option("--eq-exp", o.eq_exp, "equitability exponent override");
  sub->add_option("--mark-cap", o.mark_cap, "marking probability cap override");
  sub->add_option("--c-msg", o.c_msg, "per-message budget multiplier");
  sub->add_option("--c-eq", o.c_eq, "small-cluster equitability floor");
  sub->add_option("--outer-cap", o.outer_cap, "outer iteration cap");
  sub->add_option("--round-cap", o.round_cap, "simulated round cap");
  sub->add_option("--decomp-c", o.decomp_c, "decomposition oversampling constant");
  sub->add_option("--decomp-retries", o.decomp_retries, "decomposition retry limit");
  sub->add_option("--gmis-d", o.gmis_d, "dimension bound for threshold solving");
  sub->add_flag("--no-audit", o.no_audit, "disable centralized audit hooks");
}

Params make_params(const ParamOpts& o) {
  Params p = (o.profile == "desk") ? Params::desk() : Params{};
  if (o.band_exp >= 0) p.band_exp = o.band_exp;
  if (o.eq_exp >= 0) p.eq_exp = o.eq_exp;
  if (o.mark_cap >= 0) p.mark_cap = o.mark_cap;
  if (o.decomp_c >= 0) p.decomp_c = o.decomp_c;
  if (o.outer_cap >= 0) p.outer_cap = static_cast<long>(o.outer_cap);
  if (o.round_cap >= 0) p.round_cap = static_cast<long>(o.round_cap);
  if (o.c_msg >= 0) p.c_msg = o.c_msg;
  if (o.c_eq >= 0) p.c_eq = o.c_eq;
  if (o.decomp_retries >= 0) p.decomp_retries = o.decomp_retries;
  if (o.gmis_d >= 0) p.gmis_d = o.gmis_d;
  if (o.no_audit) p.audit = false;
  return p;
}

void append_line(const std::string& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open for appending: " + path);
  out << line << "\n";
  if (!out) throw IoError("append failed: " + path);
}

bool is_mis_instance(const Hypergraph& h) {
  for (const Hyperedge& e : h.edges)
    if (e.threshold != static_cast<int>(e.members.size()) - 1) return false;
  return true;
}

std::set<NodeId> included_of(const std::vector<Decision>& dec) {
  std::set<NodeId> s;
  for (NodeId v = 0; v < static_cast<NodeId>(dec.size()); ++v)
    if (dec[v] == Decision::Included) s.insert(v);
  return s;
}

// -------- gen

struct GenArgs {
  int n = 64;
  int edges = -1;  // default 2n
  int d = 0;       // 0: keep generator default sizes
  std::string mode = "mis";
  std::uint64_t seed = 1;
  long attempt_cap = 0;
  std::string out = "instance.json";
  bool strict = false;
};

int run_gen(const GenArgs& a) {
  GenSpec spec;
  spec.n = a.n;
  spec.target_edges = a.edges >= 0 ? a.edges : 2 * a.n;
  if (a.d >= 2) {
    spec.sizes.clear();
    for (int s = 2; s <= a.d; ++s) spec.sizes.push_back(s);
  }
  spec.threshold_mode =
      (a.mode == "gmis") ? ThresholdMode::Uniform : ThresholdMode::Mis;
  spec.seed = a.seed;
  spec.attempt_cap = a.attempt_cap;

  GenResult res = gen_random_linear(spec);
  ValidationReport rep = validate(res.h, true);
  if (!rep.ok()) {
    std::cerr << "generated instance failed linearity validation\n";
    return kExitInternal;
  }
  save_hypergraph(a.out, res.h);
  std::printf("wrote %s: n=%d m=%d (target %d, attempts %ld)\n", a.out.c_str(),
              res.h.n(), res.h.m(), spec.target_edges, res.attempts);
  std::printf("linear: ok\n");
  if (!res.reached_target) {
    std::printf("warning: attempt cap hit before reaching the edge target\n");
    if (a.strict) return 1;
  }
  return kExitOk;
}

// -------- solve

struct SolveArgs {
  std::string instance;
  std::string algorithm = "mis";
  std::uint64_t seed = 1;
  std::string out;      // solution file
  std::string metrics;  // append one record
  bool component_clusters = false;
  ParamOpts popts;
};

int run_solve(const SolveArgs& a) {
  Hypergraph h = load_hypergraph(a.instance);
  Algorithm algo = algorithm_from_name(a.algorithm);
  Params prm = make_params(a.popts);
  if (algo == Algorithm::LocalRef) prm.capacity = Capacity::Local;
  if (algo == Algorithm::Mis && !is_mis_instance(h)) {
    std::cerr << "algorithm 'mis' requires thresholds |e|-1 on every edge; "
                 "use 'gmis' for general thresholds\n";
    return kExitValidation;
  }

  std::set<NodeId> included;
  bool have_transcript = false;
  Transcript tr;
  bool cap_hit = false;

  if (algo == Algorithm::Greedy) {
    included = greedy_solve(h);
  } else {
    BipartiteNetwork net = BipartiteNetwork::build(h);
    Engine eng(net, prm, a.seed);
    ColoredPartition part =
        a.component_clusters ? component_partition(net) : decompose(eng);
    if (algo == Algorithm::LocalRef) {
      LocalOutcome out = local_reference_solve(eng, part);
      included = included_of(out.decision);
      std::printf("windows: %d, agreement groups: %ld\n", out.windows,
                  out.agreement_groups);
    } else {
      ProfileMode mode = (algo == Algorithm::Mis) ? ProfileMode::BySize
                                                  : ProfileMode::ByThreshold;
      SolveOutcome out = solve_clustered(eng, part, mode);
      included = included_of(out.decision);
      cap_hit = out.cap_hit;
    }
    tr = eng.transcript();
    have_transcript = true;
    if (tr.capacity == Capacity::Congest)
      std::printf("rounds: %ld, max message bits: %d (budget %d)\n", tr.rounds,
                  tr.max_bits, tr.budget);
    else
      std::printf("rounds: %ld, max message bits: %d (unbounded capacity)\n",
                  tr.rounds, tr.max_bits);
  }

  if (cap_hit) {
    std::cerr << "iteration cap exceeded before every node decided\n";
    return kExitCap;
  }

  ValidityReport val = check_valid(h, included);
  MaximalityReport mx = check_maximal(h, included);
  std::printf("included: %d of %d\n", static_cast<int>(included.size()), h.n());
  std::printf("valid: %s, maximal: %s\n", val.ok() ? "true" : "false",
              mx.ok() ? "true" : "false");

  if (!a.out.empty()) {
    SolutionDoc doc = make_solution_doc(h, included, algo, a.seed, prm);
    save_solution(a.out, doc);
    // round-trip fidelity: what we wrote must re-validate from disk
    SolutionDoc back = load_solution(a.out);
    if (back.included != included ||
        !check_valid(h, back.included).ok())
      throw SimulationBug("solution file failed to re-validate from disk");
    std::printf("wrote %s\n", a.out.c_str());
  }
  if (!a.metrics.empty() && have_transcript)
    append_line(a.metrics, metrics_row(tr, a.algorithm, prm).dump());

  return (val.ok() && mx.ok()) ? kExitOk : kExitValidation;
}

// -------- validate

struct ValidateArgs {
  std::string instance;
  std::string solution;
};

int run_validate(const ValidateArgs& a) {
  Hypergraph h = load_hypergraph(a.instance);  // strict load re-validates
  std::printf("instance: n=%d m=%d, structure ok\n", h.n(), h.m());
  if (a.solution.empty()) return kExitOk;

  SolutionDoc doc = load_solution(a.solution);
  if (doc.n != h.n()) {
    std::cerr << "solution is for n=" << doc.n << ", instance has n=" << h.n()
              << "\n";
    return kExitValidation;
  }
  ValidityReport val = check_valid(h, doc.included);
  MaximalityReport mx = check_maximal(h, doc.included);
  std::printf("valid: %s, maximal: %s\n", val.ok() ? "true" : "false",
              mx.ok() ? "true" : "false");
  const size_t show = 10;
  for (size_t i = 0; i < val.violated.size() && i < show; ++i)
    std::printf("  violated edge %d (threshold %d)\n", val.violated[i],
                h.edges[val.violated[i]].threshold);
  if (val.violated.size() > show)
    std::printf("  ... and %zu more violated edges\n", val.violated.size() - show);
  for (size_t i = 0; i < mx.free_nodes.size() && i < show; ++i)
    std::printf("  node %d could still be added\n", mx.free_nodes[i]);
  if (mx.free_nodes.size() > show)
    std::printf("  ... and %zu more free nodes\n", mx.free_nodes.size() - show);
  return (val.ok() && mx.ok()) ? kExitOk : kExitValidation;
}

// -------- decompose

struct DecompArgs {
  std::string instance;
  std::uint64_t seed = 1;
  ParamOpts popts;
};

int run_decompose(const DecompArgs& a) {
  Hypergraph h = load_hypergraph(a.instance);
  Params prm = make_params(a.popts);
  BipartiteNetwork net = BipartiteNetwork::build(h);
  Engine eng(net, prm, a.seed);
  ColoredPartition part = decompose(eng);
  PartitionReport rep = verify_partition(h, part, prm);

  std::printf("colors: %d, clusters: %d, max diameter: %d\n", rep.colors_used,
              rep.clusters, rep.max_diameter);
  std::printf("rounds: %ld, attempts: %d\n", eng.transcript().rounds,
              eng.transcript().decomp_attempts);
  const double logn = std::max(1.0, std::log2(std::max(2, h.n())));
  const bool col_ok = rep.colors_used <= prm.c_col * logn;
  const bool diam_ok = rep.max_diameter <= prm.c_diam * logn;
  std::printf("partition: %s, color bound: %s, diameter bound: %s\n",
              rep.ok ? "ok" : "FAILED", col_ok ? "ok" : "exceeded",
              diam_ok ? "ok" : "exceeded");
  for (const std::string& s : rep.issues) std::printf("  issue: %s\n", s.c_str());
  return (rep.ok && col_ok && diam_ok) ? kExitOk : kExitValidation;
}

// -------- bench

struct BenchArgs {
  int n_min = 64;
  int n_max = 1024;
  int seeds = 20;
  std::string algorithm = "mis";
  int d = 0;
  double edges_factor = 1.5;
  std::uint64_t seed0 = 1;
  std::string out = "bench.jsonl";
  ParamOpts popts;
};

int run_bench(const BenchArgs& a) {
  Algorithm algo = algorithm_from_name(a.algorithm);
  if (algo == Algorithm::Greedy) {
    std::cerr << "bench drives the simulated solvers; greedy has no rounds\n";
    return kExitValidation;
  }
  Params prm = make_params(a.popts);
  if (algo == Algorithm::LocalRef) prm.capacity = Capacity::Local;

  std::vector<std::pair<int, long>> n_rounds;
  int runs = 0, invalid = 0, over_budget = 0;
  for (int n = a.n_min; n <= a.n_max; n *= 2) {
    for (int s = 0; s < a.seeds; ++s) {
      const std::uint64_t seed = a.seed0 + 1000003ull * runs + s;
      GenSpec gspec;
      gspec.n = n;
      gspec.target_edges = static_cast<int>(a.edges_factor * n);
      if (a.d >= 2) {
        gspec.sizes.clear();
        for (int sz = 2; sz <= a.d; ++sz) gspec.sizes.push_back(sz);
      }
      gspec.threshold_mode = (algo == Algorithm::Mis) ? ThresholdMode::Mis
                                                      : ThresholdMode::Uniform;
      gspec.seed = seed;
      Hypergraph h = gen_random_linear(gspec).h;

      BipartiteNetwork net = BipartiteNetwork::build(h);
      Engine eng(net, prm, seed);
      ColoredPartition part = decompose(eng);
      std::set<NodeId> included;
      if (algo == Algorithm::LocalRef) {
        included = included_of(local_reference_solve(eng, part).decision);
      } else {
        ProfileMode mode = (algo == Algorithm::Mis) ? ProfileMode::BySize
                                                    : ProfileMode::ByThreshold;
        SolveOutcome out = solve_clustered(eng, part, mode);
        if (out.cap_hit) {
          std::cerr << "cap exceeded at n=" << n << " seed=" << seed << "\n";
          return kExitCap;
        }
        included = included_of(out.decision);
      }
      const Transcript& tr = eng.transcript();
      if (!check_valid(h, included).ok() || !check_maximal(h, included).ok())
        invalid++;
      if (tr.max_bits > tr.budget && tr.capacity == Capacity::Congest)
        over_budget++;
      n_rounds.push_back({n, tr.rounds});
      append_line(a.out, metrics_row(tr, a.algorithm, prm).dump());
      runs++;
    }
  }

  const double slope = round_trend_slope(n_rounds);
  std::printf("runs: %d, invalid: %d, over budget: %d\n", runs, invalid,
              over_budget);
  std::printf("round trend: rounds ~ (log2 n)^%.2f\n", slope);
  std::printf("wrote %s (%d records)\n", a.out.c_str(), runs);
  return (invalid == 0 && over_budget == 0) ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linear hypergraph independent-set workbench"};
  app.require_subcommand(1);

  GenArgs ga;
  CLI::App* gen = app.add_subcommand("gen", "generate a random linear instance");
  gen->add_option("--n", ga.n, "node count")->required();
  gen->add_option("--edges", ga.edges, "edge target (default 2n)");
  gen->add_option("--d", ga.d, "max edge size (sizes 2..d)");
  gen->add_option("--mode", ga.mode, "threshold mode")
      ->check(CLI::IsMember({"mis", "gmis"}));
  gen->add_option("--seed", ga.seed, "generator seed");
  gen->add_option("--attempt-cap", ga.attempt_cap, "rejection sampling cap");
  gen->add_option("--out", ga.out, "output path");
  gen->add_flag("--strict", ga.strict, "nonzero exit if the edge target is missed");

  SolveArgs sa;
  CLI::App* solve = app.add_subcommand("solve", "solve an instance end to end");
  solve->add_option("instance", sa.instance, "instance file")->required();
  solve->add_option("--algorithm", sa.algorithm, "mis|gmis|local-ref|greedy")
      ->check(CLI::IsMember({"mis", "gmis", "local-ref", "greedy"}));
  solve->add_option("--seed", sa.seed, "run seed");
  solve->add_option("--out", sa.out, "solution output path");
  solve->add_option("--metrics", sa.metrics, "append a metrics record here");
  solve->add_flag("--component-clusters", sa.component_clusters,
                  "skip decomposition; one cluster per connected component");
  add_param_opts(solve, sa.popts);

  ValidateArgs va;
  CLI::App* val = app.add_subcommand("validate", "check instance/solution files");
  val->add_option("instance", va.instance, "instance file")->required();
  val->add_option("--solution", va.solution, "solution file to check");

  DecompArgs da;
  CLI::App* dec = app.add_subcommand("decompose", "run and audit a decomposition");
  dec->add_option("instance", da.instance, "instance file")->required();
  dec->add_option("--seed", da.seed, "run seed");
  add_param_opts(dec, da.popts);

  BenchArgs ba;
  CLI::App* bench = app.add_subcommand("bench", "sweep sizes and emit metrics");
  bench->add_option("--n-min", ba.n_min, "smallest n (doubled up to n-max)");
  bench->add_option("--n-max", ba.n_max, "largest n");
  bench->add_option("--seeds", ba.seeds, "seeds per size");
  bench->add_option("--algorithm", ba.algorithm, "mis|gmis|local-ref")
      ->check(CLI::IsMember({"mis", "gmis", "local-ref"}));
  bench->add_option("--d", ba.d, "max edge size (sizes 2..d)");
  bench->add_option("--edges-factor", ba.edges_factor, "edge target = factor*n");
  bench->add_option("--seed", ba.seed0, "base seed");
  bench->add_option("--out", ba.out, "metrics file (append)");
  add_param_opts(bench, ba.popts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen(ga);
    if (solve->parsed()) return run_solve(sa);
    if (val->parsed()) return run_validate(va);
    if (dec->parsed()) return run_decompose(da);
    if (bench->parsed()) return run_bench(ba);
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const BudgetViolation& e) {
    std::cerr << "budget violation: " << e.what() << "\n";
    return kExitBudget;
  } catch (const CapExceeded& e) {
    std::cerr << "cap exceeded: " << e.what() << "\n";
    return kExitCap;
  } catch (const SimulationBug& e) {
    std::cerr << "internal invariant failure: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
