#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>

#include "hypermis/io.hpp"
#include "hypermis/oracle.hpp"
#include "solve_support.hpp"
#include "support.hpp"

using namespace hypermis;
using namespace testsupport;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name)
      : path((std::filesystem::temp_directory_path() / name).string()) {}
  ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

// ------------------------------------------------------------------ instances

TEST_CASE("instance files round-trip exactly") {
  Hypergraph h = gen(24, 30, {2, 3, 4}, ThresholdMode::Uniform, 11).h;
  TempFile f("hm_io_instance.json");
  save_hypergraph(f.path, h);
  Hypergraph back = load_hypergraph(f.path);
  CHECK(back.n() == h.n());
  REQUIRE(back.m() == h.m());
  for (int e = 0; e < h.m(); ++e) {
    CHECK(back.edges[e].members == h.edges[e].members);
    CHECK(back.edges[e].threshold == h.edges[e].threshold);
  }
}

TEST_CASE("saving twice produces identical bytes") {
  Hypergraph h = gen(16, 20, {2, 3}, ThresholdMode::Mis, 4).h;
  TempFile a("hm_io_dup_a.json"), b("hm_io_dup_b.json");
  save_hypergraph(a.path, h);
  save_hypergraph(b.path, h);
  CHECK(read_text_file(a.path) == read_text_file(b.path));
}

TEST_CASE("instance loader is strict") {
  const char* ok = R"({"n":3,"linear":true,
      "edges":[{"members":[0,1],"threshold":1}]})";
  CHECK(hypergraph_from_json(parse_json(ok, "t")).m() == 1);

  auto rejects = [](const std::string& text) {
    CHECK_THROWS_AS(hypergraph_from_json(parse_json(text, "t")), IoError);
  };
  // unknown fields, at both levels
  rejects(R"({"n":3,"linear":true,"edges":[],"comment":"hi"})");
  rejects(R"({"n":3,"linear":true,
      "edges":[{"members":[0,1],"threshold":1,"weight":2}]})");
  // missing fields
  rejects(R"({"n":3,"edges":[]})");
  rejects(R"({"n":3,"linear":true,"edges":[{"members":[0,1]}]})");
  // bad values
  rejects(R"({"n":-1,"linear":true,"edges":[]})");
  rejects(R"({"n":3,"linear":"yes","edges":[]})");
  rejects(R"({"n":3,"linear":true,"edges":[{"members":[0,5],"threshold":1}]})");
  rejects(R"({"n":3,"linear":true,"edges":[{"members":[0,1],"threshold":2}]})");
  rejects(R"({"n":3,"linear":true,"edges":[{"members":[0,0],"threshold":1}]})");
  // malformed document
  CHECK_THROWS_AS(parse_json("{не json", "t"), IoError);
}

TEST_CASE("the linear flag is honored on load") {
  // two triples sharing a pair: structurally fine, not linear
  const char* doc = R"({"n":4,"linear":%F%,"edges":[
      {"members":[0,1,2],"threshold":2},
      {"members":[0,1,3],"threshold":2}]})";
  std::string as_false(doc), as_true(doc);
  as_false.replace(as_false.find("%F%"), 3, "false");
  as_true.replace(as_true.find("%F%"), 3, "true");
  CHECK(hypergraph_from_json(parse_json(as_false, "t")).m() == 2);
  CHECK_THROWS_AS(hypergraph_from_json(parse_json(as_true, "t")), IoError);
}

TEST_CASE("only canonical instances are saveable") {
  Hypergraph h;
  h.nodes = {1, 3};
  h.edges = {make_edge({1, 3}, 1)};
  CHECK_THROWS_AS(hypergraph_to_json(h), IoError);
}

TEST_CASE("missing files surface as io errors") {
  CHECK_THROWS_AS(load_hypergraph("/nonexistent/dir/x.json"), IoError);
  CHECK_THROWS_AS(write_text_file("/nonexistent/dir/x.json", "y"), IoError);
}

// ------------------------------------------------------------------ solutions

TEST_CASE("solution files round-trip and re-validate from disk") {
  Hypergraph h = gen(20, 26, {2, 3}, ThresholdMode::Uniform, 9).h;
  std::set<NodeId> inc = greedy_solve(h);
  SolutionDoc doc = make_solution_doc(h, inc, Algorithm::Greedy, 9, Params::desk());

  TempFile f("hm_io_solution.json");
  save_solution(f.path, doc);
  SolutionDoc back = load_solution(f.path);

  CHECK(back.algorithm == "greedy");
  CHECK(back.seed == 9);
  CHECK(back.n == h.n());
  CHECK(back.included == inc);
  CHECK(back.witnesses == check_maximal(h, inc).witnesses);
  CHECK(back.config.band_exp == doctest::Approx(Params::desk().band_exp));
  CHECK(back.config.mark_cap == doctest::Approx(Params::desk().mark_cap));

  CHECK(check_valid(h, back.included).ok());
  CHECK(check_maximal(h, back.included).ok());
}

TEST_CASE("solution loader is strict") {
  Hypergraph h = single_edge2();
  SolutionDoc doc = make_solution_doc(h, {0}, Algorithm::Mis, 1, Params{});
  njson j = solution_to_json(doc);

  auto rejects = [](njson bad) {
    CHECK_THROWS_AS(solution_from_json(bad), IoError);
  };
  njson extra = j;
  extra["note"] = "x";
  rejects(extra);

  njson dup = j;
  dup["included"] = {0, 0};
  rejects(dup);

  njson range = j;
  range["included"] = {5};
  rejects(range);

  njson alg = j;
  alg["algorithm"] = "quantum";
  rejects(alg);

  njson wit = j;
  wit["witnesses"] = {{"0", 0}};  // witness for an included node
  rejects(wit);

  njson cfg = j;
  cfg["config"]["speed"] = 11;
  rejects(cfg);
}

TEST_CASE("config snapshots round-trip every knob") {
  Params p = Params::desk();
  p.c_msg = 9;
  p.capacity = Capacity::Local;
  p.eq_exp = 3.5;
  p.outer_cap = 77;
  p.gmis_d = 4;
  p.audit = false;
  p.c_col = 5.25;
  Params q = params_from_json(params_to_json(p));
  CHECK(q.c_msg == 9);
  CHECK(q.capacity == Capacity::Local);
  CHECK(q.eq_exp == doctest::Approx(3.5));
  CHECK(q.band_exp == doctest::Approx(p.band_exp));
  CHECK(q.mark_cap == doctest::Approx(p.mark_cap));
  CHECK(q.outer_cap == 77);
  CHECK(q.gmis_d == 4);
  CHECK(q.audit == false);
  CHECK(q.c_col == doctest::Approx(5.25));
  CHECK(q.c_diam == doctest::Approx(p.c_diam));
}

// -------------------------------------------------------------- metrics rows

TEST_CASE("metrics rows capture the run and stay on one line") {
  Hypergraph h = gen(32, 44, {2, 3}, ThresholdMode::Mis, 6).h;
  SolveRun r = solve_components(h, 6, ProfileMode::BySize, Params::desk());
  njson row = metrics_row(r.tr, "mis", Params::desk());

  CHECK(row["n"] == 32);
  CHECK(row["rounds"].get<long>() == r.tr.rounds);
  CHECK(row["max_bits"].get<int>() == r.tr.max_bits);
  CHECK(row["budget"].get<int>() == r.tr.budget);
  CHECK(row["decided"].size() == r.tr.iters.size());
  CHECK(row["config"]["band_exp"].get<double>() == doctest::Approx(1.0));

  const std::string line = row.dump();
  CHECK(line.find('\n') == std::string::npos);
  njson parsed = njson::parse(line);
  CHECK(parsed["transcript_hash"] == row["transcript_hash"]);

  long long decided = 0;
  for (const njson& it : row["decided"])
    decided += it["included"].get<long long>() + it["excluded"].get<long long>();
  CHECK(decided == 32);
}
