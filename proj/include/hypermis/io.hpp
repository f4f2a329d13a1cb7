#pragma once

// File formats.  Everything is JSON: instance documents, solution documents
// (with a full config snapshot so any output is reproducible from its own
// metadata), and one-line metrics records for benchmark sweeps.  Loaders are
// strict: unknown fields are rejected, and instances are re-validated on read.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "engine.hpp"
#include "hypergraph.hpp"
#include "oracle.hpp"
#include "types.hpp"

namespace hypermis {

using njson = nlohmann::json;

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// ------------------------------------------------------------------- helpers

inline void require_object(const njson& j, const char* what) {
  if (!j.is_object()) throw IoError(std::string(what) + ": expected an object");
}

// Every listed key present, no extras.
inline void require_keys(const njson& j, std::initializer_list<const char*> keys,
                         const char* what) {
  require_object(j, what);
  for (const char* k : keys)
    if (!j.contains(k))
      throw IoError(std::string(what) + ": missing field '" + k + "'");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) { known = true; break; }
    if (!known)
      throw IoError(std::string(what) + ": unknown field '" + it.key() + "'");
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

inline njson parse_json(const std::string& text, const char* what) {
  njson j = njson::parse(text, nullptr, false);
  if (j.is_discarded()) throw IoError(std::string(what) + ": malformed JSON");
  return j;
}

// ----------------------------------------------------------------- instances
//
// {"n": <int>, "linear": <bool>, "edges": [{"members": [ids], "threshold": t}]}
// Nodes are implicit 0..n-1.  On load the structural validator runs with the
// declared linearity, so a file claiming "linear": true with two edges sharing
// a pair of nodes is rejected.

inline njson hypergraph_to_json(const Hypergraph& h) {
  if (!h.canonical())
    throw IoError("instance files require canonical node ids 0..n-1");
  bool linear = validate(h, true).ok();
  njson edges = njson::array();
  for (const Hyperedge& e : h.edges)
    edges.push_back({{"members", e.members}, {"threshold", e.threshold}});
  return njson{{"n", h.n()}, {"linear", linear}, {"edges", edges}};
}

inline Hypergraph hypergraph_from_json(const njson& j) {
  require_keys(j, {"n", "linear", "edges"}, "instance");
  if (!j["n"].is_number_integer() || j["n"].get<std::int64_t>() < 0)
    throw IoError("instance: 'n' must be a non-negative integer");
  if (!j["linear"].is_boolean())
    throw IoError("instance: 'linear' must be a boolean");
  if (!j["edges"].is_array())
    throw IoError("instance: 'edges' must be an array");

  const int n = j["n"].get<int>();
  std::vector<Hyperedge> edges;
  int ei = 0;
  for (const njson& je : j["edges"]) {
    std::string tag = "instance edge " + std::to_string(ei++);
    require_keys(je, {"members", "threshold"}, tag.c_str());
    if (!je["members"].is_array() || !je["threshold"].is_number_integer())
      throw IoError(tag + ": members must be an id array, threshold an integer");
    Hyperedge e;
    for (const njson& jm : je["members"]) {
      if (!jm.is_number_integer())
        throw IoError(tag + ": member ids must be integers");
      e.members.push_back(jm.get<NodeId>());
    }
    e.threshold = je["threshold"].get<int>();
    edges.push_back(std::move(e));
  }

  Hypergraph h;
  h.nodes.resize(n);
  for (int i = 0; i < n; ++i) h.nodes[i] = i;
  h.edges = std::move(edges);

  ValidationReport rep = validate(h, j["linear"].get<bool>());
  if (!rep.ok()) {
    std::string msg = "instance failed validation:";
    for (size_t i = 0; i < rep.violations.size() && i < 4; ++i)
      msg += " [" + rep.violations[i] + "]";
    throw IoError(msg);
  }
  return h;
}

inline void save_hypergraph(const std::string& path, const Hypergraph& h) {
  write_text_file(path, hypergraph_to_json(h).dump(2) + "\n");
}

inline Hypergraph load_hypergraph(const std::string& path) {
  return hypergraph_from_json(parse_json(read_text_file(path), path.c_str()));
}

// -------------------------------------------------------------- run configs

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Mis: return "mis";
    case Algorithm::Gmis: return "gmis";
    case Algorithm::LocalRef: return "local-ref";
    case Algorithm::Greedy: return "greedy";
  }
  return "?";
}

inline Algorithm algorithm_from_name(const std::string& s) {
  if (s == "mis") return Algorithm::Mis;
  if (s == "gmis") return Algorithm::Gmis;
  if (s == "local-ref") return Algorithm::LocalRef;
  if (s == "greedy") return Algorithm::Greedy;
  throw IoError("unknown algorithm '" + s + "'");
}

inline njson params_to_json(const Params& p) {
  return njson{{"c_msg", p.c_msg},
               {"capacity", p.capacity == Capacity::Local ? "local" : "congest"},
               {"decomp_c", p.decomp_c},
               {"decomp_m", p.decomp_m},
               {"r_cap_factor", p.r_cap_factor},
               {"decomp_retries", p.decomp_retries},
               {"dcap_log_factor", p.dcap_log_factor},
               {"dcap_slack", p.dcap_slack},
               {"c_eq", p.c_eq},
               {"eq_exp", p.eq_exp},
               {"band_exp", p.band_exp},
               {"mark_cap", p.mark_cap},
               {"outer_cap", p.outer_cap},
               {"inner_cap_factor", p.inner_cap_factor},
               {"inner_cap_slack", p.inner_cap_slack},
               {"round_cap", p.round_cap},
               {"gmis_d", p.gmis_d},
               {"audit", p.audit},
               {"c_col", p.c_col},
               {"c_diam", p.c_diam}};
}

inline Params params_from_json(const njson& j) {
  require_keys(j,
               {"c_msg", "capacity", "decomp_c", "decomp_m", "r_cap_factor",
                "decomp_retries", "dcap_log_factor", "dcap_slack", "c_eq",
                "eq_exp", "band_exp", "mark_cap", "outer_cap",
                "inner_cap_factor", "inner_cap_slack", "round_cap", "gmis_d",
                "audit", "c_col", "c_diam"},
               "config");
  Params p;
  p.c_msg = j["c_msg"].get<int>();
  const std::string cap = j["capacity"].get<std::string>();
  if (cap == "local") p.capacity = Capacity::Local;
  else if (cap == "congest") p.capacity = Capacity::Congest;
  else throw IoError("config: capacity must be 'congest' or 'local'");
  p.decomp_c = j["decomp_c"].get<double>();
  p.decomp_m = j["decomp_m"].get<int>();
  p.r_cap_factor = j["r_cap_factor"].get<double>();
  p.decomp_retries = j["decomp_retries"].get<int>();
  p.dcap_log_factor = j["dcap_log_factor"].get<int>();
  p.dcap_slack = j["dcap_slack"].get<int>();
  p.c_eq = j["c_eq"].get<int>();
  p.eq_exp = j["eq_exp"].get<double>();
  p.band_exp = j["band_exp"].get<double>();
  p.mark_cap = j["mark_cap"].get<double>();
  p.outer_cap = j["outer_cap"].get<long>();
  p.inner_cap_factor = j["inner_cap_factor"].get<int>();
  p.inner_cap_slack = j["inner_cap_slack"].get<int>();
  p.round_cap = j["round_cap"].get<long>();
  p.gmis_d = j["gmis_d"].get<int>();
  p.audit = j["audit"].get<bool>();
  p.c_col = j["c_col"].get<double>();
  p.c_diam = j["c_diam"].get<double>();
  return p;
}

// ----------------------------------------------------------------- solutions
//
// Per-node decisions plus one tight witness edge per excluded node, and the
// full config under which the run happened.

struct SolutionDoc {
  std::string algorithm;
  std::uint64_t seed = 0;
  int n = 0;
  std::set<NodeId> included;
  std::map<NodeId, EdgeIdx> witnesses;  // excluded node -> tight edge index
  Params config;
};

inline njson solution_to_json(const SolutionDoc& s) {
  njson wit = njson::object();
  for (const auto& [v, e] : s.witnesses) wit[std::to_string(v)] = e;
  return njson{{"algorithm", s.algorithm},
               {"seed", s.seed},
               {"n", s.n},
               {"included", std::vector<NodeId>(s.included.begin(), s.included.end())},
               {"witnesses", wit},
               {"config", params_to_json(s.config)}};
}

inline SolutionDoc solution_from_json(const njson& j) {
  require_keys(j, {"algorithm", "seed", "n", "included", "witnesses", "config"},
               "solution");
  SolutionDoc s;
  s.algorithm = j["algorithm"].get<std::string>();
  algorithm_from_name(s.algorithm);  // reject unknown names
  s.seed = j["seed"].get<std::uint64_t>();
  s.n = j["n"].get<int>();
  for (const njson& jv : j["included"]) {
    NodeId v = jv.get<NodeId>();
    if (v < 0 || v >= s.n)
      throw IoError("solution: included id " + std::to_string(v) +
                    " outside 0.." + std::to_string(s.n - 1));
    if (!s.included.insert(v).second)
      throw IoError("solution: duplicate included id " + std::to_string(v));
  }
  for (auto it = j["witnesses"].begin(); it != j["witnesses"].end(); ++it) {
    NodeId v = static_cast<NodeId>(std::stol(it.key()));
    if (s.included.count(v))
      throw IoError("solution: witness recorded for an included node");
    s.witnesses[v] = it.value().get<EdgeIdx>();
  }
  s.config = params_from_json(j["config"]);
  return s;
}

inline void save_solution(const std::string& path, const SolutionDoc& s) {
  write_text_file(path, solution_to_json(s).dump(2) + "\n");
}

inline SolutionDoc load_solution(const std::string& path) {
  return solution_from_json(parse_json(read_text_file(path), path.c_str()));
}

// Assemble a document from oracle reports so emitted files always carry the
// checked witnesses.
inline SolutionDoc make_solution_doc(const Hypergraph& h,
                                     const std::set<NodeId>& included,
                                     Algorithm algo, std::uint64_t seed,
                                     const Params& prm) {
  SolutionDoc s;
  s.algorithm = algorithm_name(algo);
  s.seed = seed;
  s.n = h.n();
  s.included = included;
  s.witnesses = check_maximal(h, included).witnesses;
  s.config = prm;
  return s;
}

// ------------------------------------------------------------- metrics rows
//
// One JSON object per run, dumped on a single line (append-only streams).

inline njson metrics_row(const Transcript& tr, const std::string& algorithm,
                         const Params& prm) {
  njson iters = njson::array();
  for (const IterRecord& r : tr.iters)
    iters.push_back({{"cluster", r.cluster},
                     {"color", r.color},
                     {"iter", r.outer_iter},
                     {"branch", branch_name(r.branch)},
                     {"n_hat", r.n_hat},
                     {"n_active", r.n_active},
                     {"included", r.included},
                     {"excluded", r.excluded}});
  char hash_hex[24];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                static_cast<unsigned long long>(tr.hash()));
  return njson{{"algorithm", algorithm},
               {"n", tr.n},
               {"m", tr.m},
               {"seed", tr.seed},
               {"budget", tr.budget},
               {"rounds", tr.rounds},
               {"total_messages", tr.total_messages},
               {"max_bits", tr.max_bits},
               {"colors_used", tr.colors_used},
               {"clusters", tr.clusters},
               {"decomp_attempts", tr.decomp_attempts},
               {"decided", iters},
               {"transcript_hash", hash_hex},
               {"config", params_to_json(prm)}};
}

}  // namespace hypermis
