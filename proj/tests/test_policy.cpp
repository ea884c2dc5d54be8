#include <unistd.h>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "gma/data.hpp"
#include "gma/model.hpp"
#include "gma/policy.hpp"

using namespace gma;

namespace {

ModelConfig tiny_config(int vocab) {
  ModelConfig cfg;
  cfg.src_vocab = vocab;
  cfg.tgt_vocab = vocab;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.max_positions = 64;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("wait-k traces read k words then alternate") {
  PolicyTrace t = wait_k_trace(3, 5, 4);
  CHECK(t.g == std::vector<int>{3, 4, 5, 5});
  CHECK(t.actions == "RRRWRWRWW");
  CHECK(t.source_len == 5);
  CHECK(validate_trace(t).ok);
  // k beyond the source reads everything first
  PolicyTrace all = wait_k_trace(9, 3, 2);
  CHECK(all.g == std::vector<int>{3, 3});
  CHECK(all.actions == "RRRWW");
  CHECK_THROWS_AS(wait_k_trace(0, 5, 4), std::invalid_argument);
  CHECK_THROWS_AS(wait_k_trace(1, 0, 4), std::invalid_argument);
}

TEST_CASE("action strings are rebuilt from schedules") {
  PolicyTrace t = trace_from_g({2, 2, 3}, 3);
  CHECK(t.actions == "RRWWRW");
  CHECK(t.source_len == 3);
  CHECK(validate_trace(t).ok);
  CHECK_THROWS_AS(trace_from_g({}, 3), std::invalid_argument);
  CHECK_THROWS_AS(trace_from_g({1, 2}, 0), std::invalid_argument);
  CHECK_THROWS_AS(trace_from_g({0, 1}, 3), std::invalid_argument);
  CHECK_THROWS_AS(trace_from_g({4}, 3), std::invalid_argument);
  CHECK_THROWS_AS(trace_from_g({2, 1}, 3), std::invalid_argument);
}

TEST_CASE("trace validation names each violation") {
  PolicyTrace ok = trace_from_g({1, 2}, 2);
  CHECK(validate_trace(ok).ok);
  CHECK(validate_trace(ok).violation.empty());

  PolicyTrace t;
  CHECK(validate_trace(t).violation == "empty trace");

  t = ok;
  t.source_len = 0;
  CHECK(validate_trace(t).violation == "source length must be >= 1");

  t = ok;
  t.actions = "RXWW";
  CHECK(validate_trace(t).violation == "unknown action 'X'");

  t = ok;
  t.actions = "RW";
  CHECK(validate_trace(t).violation ==
        "action string has 1 writes for 2 schedule entries");

  t = ok;
  t.actions = "RWWR";
  CHECK(validate_trace(t).violation == "trailing reads after the last write");

  t = ok;
  t.actions = "RRRWW";
  CHECK(validate_trace(t).violation == "reads past the end of the source");

  t.actions = "WW";
  t.g = {0, 1};
  t.source_len = 2;
  CHECK(validate_trace(t).violation == "g(1)=0 outside [1, 2]");

  t.actions = "RRWW";
  t.g = {2, 1};
  CHECK(validate_trace(t).violation == "schedule decreases at step 2");

  t.actions = "RWRW";
  t.g = {1, 1};
  CHECK(validate_trace(t).violation ==
        "token 2 written after 2 reads but g(2)=1");
}

TEST_CASE("trace records survive a format and parse round trip") {
  std::vector<TraceRecord> recs(2);
  recs[0].hypothesis = {"w01", "w02"};
  recs[0].trace = trace_from_g({1, 2, 2}, 2);
  recs[1].hypothesis = {};  // a sentence may decode straight to <eos>
  recs[1].trace = trace_from_g({3}, 4);

  std::string text = format_traces(recs);
  CHECK(text == "w01 w02\t1,2,2\tRWRWW\t2\n\t3\tRRRW\t4\n");
  std::vector<TraceRecord> back = parse_traces(text, "mem");
  REQUIRE(back.size() == 2);
  CHECK(back[0].hypothesis == recs[0].hypothesis);
  CHECK(back[0].trace.g == recs[0].trace.g);
  CHECK(back[0].trace.actions == recs[0].trace.actions);
  CHECK(back[0].trace.source_len == 2);
  CHECK(back[1].hypothesis.empty());
  CHECK(back[1].trace.g == std::vector<int>{3});
}

TEST_CASE("trace parsing reports the offending line") {
  CHECK_THROWS_WITH_AS(parse_traces("a\t1\tRW\n", "f"),
                       "f: line 1: expected 4 tab-separated fields, got 3",
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_traces("a\t1\tRW\t2\nb\t1x\tRW\t2\n", "f"),
                       "f: line 2: bad integer '1x'", std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_traces("a\t1\tRW\tzz\n", "f"),
                       "f: line 1: bad integer 'zz'", std::runtime_error);
  // structurally sound but inconsistent traces are rejected too
  CHECK_THROWS_WITH_AS(parse_traces("a\t2\tRW\t2\n", "f"),
                       "f: line 1: token 1 written after 1 reads but g(1)=2",
                       std::runtime_error);
  // blank lines separate nothing
  CHECK(parse_traces("\na\t1\tRW\t2\n\n", "f").size() == 1);
}

TEST_CASE("trace files round-trip on disk") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() /
                 ("gma_policy_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::vector<TraceRecord> recs(1);
  recs[0].hypothesis = {"x"};
  recs[0].trace = trace_from_g({2, 2}, 3);
  std::string path = (dir / "t.tsv").string();
  save_traces(path, recs);
  std::vector<TraceRecord> back = load_traces(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].trace.actions == recs[0].trace.actions);
  CHECK_THROWS_AS(load_traces((dir / "missing.tsv").string()),
                  std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("streaming an untrained model yields a valid trace") {
  Vocabulary v = synthetic_vocabulary(12);
  Model model = Model::init(tiny_config(v.size()));
  std::vector<int> src = v.encode({"w0", "w3", "w5", "w2"});
  src.push_back(Vocabulary::kEos);

  StreamResult res = simulate_streaming(model, src, 1.0);
  TraceCheck check = validate_trace(res.trace);
  INFO(check.violation);
  CHECK(check.ok);
  CHECK(res.trace.source_len == static_cast<int>(src.size()));
  if (res.trace.truncated) {
    CHECK(res.hypothesis.size() == res.trace.g.size());
  } else {
    // the final write is <eos>, which the hypothesis strips
    CHECK(res.hypothesis.size() + 1 == res.trace.g.size());
  }
  for (int id : res.hypothesis) {
    CHECK(id >= 0);
    CHECK(id < v.size());
    CHECK(id != Vocabulary::kEos);
  }

  // decoding is a pure function of the model and source
  StreamResult again = simulate_streaming(model, src, 1.0);
  CHECK(again.hypothesis == res.hypothesis);
  CHECK(again.trace.g == res.trace.g);
  CHECK(again.trace.actions == res.trace.actions);

  CHECK_THROWS_AS(simulate_streaming(model, {}, 1.0), std::invalid_argument);
}

TEST_CASE("a tight write cap truncates the stream") {
  Vocabulary v = synthetic_vocabulary(12);
  Model model = Model::init(tiny_config(v.size()));
  std::vector<int> src = v.encode({"w1", "w4", "w2"});
  src.push_back(Vocabulary::kEos);
  StreamResult res = simulate_streaming(model, src, 1.0, 1);
  if (res.trace.truncated) {
    CHECK(res.hypothesis.size() == 1);
  } else {
    CHECK(res.hypothesis.empty());  // <eos> arrived within the cap
  }
  CHECK(validate_trace(res.trace).ok);
}

TEST_CASE("a larger delta never tightens the schedule") {
  Vocabulary v = synthetic_vocabulary(12);
  Model model = Model::init(tiny_config(v.size()));
  std::vector<int> src = v.encode({"w0", "w1", "w2", "w3", "w4", "w5"});
  src.push_back(Vocabulary::kEos);
  StreamResult lo = simulate_streaming(model, src, 0.0);
  StreamResult hi = simulate_streaming(model, src, 2.0);
  std::size_t shared = std::min(lo.trace.g.size(), hi.trace.g.size());
  // schedules may diverge once tokens differ, but the very first write
  // bound can only grow with delta
  REQUIRE(shared >= 1);
  CHECK(hi.trace.g[0] >= lo.trace.g[0]);
}
