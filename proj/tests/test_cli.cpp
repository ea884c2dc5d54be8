#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "gma/data.hpp"
#include "gma/policy.hpp"

using namespace gma;
namespace fs = std::filesystem;

namespace {

// Workspace shared by the whole binary-driving suite; populated once by the
// training smoke test and reused by the later stages.
struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("gma_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string file(const std::string& name) const { return (dir / name).string(); }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

int run(const std::string& args, const std::string& log_name) {
  std::string cmd = std::string(GMA_BIN) + " " + args + " >" +
                    ws().file(log_name + ".out") + " 2>" +
                    ws().file(log_name + ".err");
  int rc = std::system(cmd.c_str());
  return rc;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

const char* kConfig = R"({
  "model": {"d_model": 8, "d_ff": 16, "layers": 1, "heads": 2, "seed": 3,
            "gma": {"delta": 1.0}},
  "train": {"epochs": 1, "batch_size": 8, "lr": 0.003, "dev_eval_size": 0,
            "seed": 1},
  "data": {"task": "copy", "vocab": 12, "min_len": 3, "max_len": 5,
           "train": 32, "dev": 6, "test": 6, "seed": 7}
})";

}  // namespace

TEST_CASE("train writes a checkpoint and its companions") {
  std::ofstream(ws().file("run.json")) << kConfig;
  fs::create_directories(ws().dir / "run_a");
  int rc = run("train --config " + ws().file("run.json") + " --out " +
                   ws().file("run_a"),
               "train_a");
  INFO(slurp(ws().file("train_a.err")));
  REQUIRE(rc == 0);
  for (const char* name : {"model.ckpt", "learning_curve.csv", "config.json",
                           "dev.src", "dev.ref", "test.src", "test.ref",
                           "test.align"})
    CHECK(fs::exists(ws().dir / "run_a" / name));
  std::string curve = slurp(ws().file("run_a/learning_curve.csv"));
  CHECK(curve.rfind("step,loss,dev_bleu,dev_al\n", 0) == 0);
  CHECK(count_lines(curve) == 2);  // header + one epoch
  CHECK(slurp(ws().file("train_a.out")).find("model.ckpt") != std::string::npos);
}

TEST_CASE("the same seed trains to identical bytes") {
  fs::create_directories(ws().dir / "run_b");
  int rc = run("train --config " + ws().file("run.json") + " --out " +
                   ws().file("run_b"),
               "train_b");
  REQUIRE(rc == 0);
  CHECK(slurp(ws().file("run_a/model.ckpt")) ==
        slurp(ws().file("run_b/model.ckpt")));
}

TEST_CASE("translate emits aligned hypotheses and valid traces") {
  fs::create_directories(ws().dir / "dec");
  int rc = run("translate --ckpt " + ws().file("run_a/model.ckpt") + " --src " +
                   ws().file("run_a/test.src") + " --out " + ws().file("dec"),
               "translate");
  INFO(slurp(ws().file("translate.err")));
  REQUIRE(rc == 0);
  int n_src = count_lines(slurp(ws().file("run_a/test.src")));
  CHECK(count_lines(slurp(ws().file("dec/hyp.txt"))) == n_src);
  // load_traces re-validates every record
  std::vector<TraceRecord> traces = load_traces(ws().file("dec/traces.tsv"));
  CHECK(static_cast<int>(traces.size()) == n_src);
}

TEST_CASE("teacher forcing aligns traces to the reference") {
  fs::create_directories(ws().dir / "tf");
  int rc = run("translate --ckpt " + ws().file("run_a/model.ckpt") + " --src " +
                   ws().file("run_a/test.src") + " --ref " +
                   ws().file("run_a/test.ref") + " --teacher-forced --out " +
                   ws().file("tf"),
               "teacher");
  INFO(slurp(ws().file("teacher.err")));
  REQUIRE(rc == 0);
  std::vector<TraceRecord> traces = load_traces(ws().file("tf/traces.tsv"));
  std::vector<Sentence> refs = load_sentences(ws().file("run_a/test.ref"));
  REQUIRE(traces.size() == refs.size());
  // one write per reference token plus the closing <eos>
  for (std::size_t i = 0; i < refs.size(); ++i)
    CHECK(traces[i].trace.g.size() == refs[i].size() + 1);
}

TEST_CASE("evaluate scores quality, latency and alignment") {
  int rc = run("evaluate --hyp " + ws().file("dec/hyp.txt") + " --ref " +
                   ws().file("run_a/test.ref") + " --traces " +
                   ws().file("dec/traces.tsv") + " --out " +
                   ws().file("report.json"),
               "eval");
  INFO(slurp(ws().file("eval.err")));
  REQUIRE(rc == 0);
  std::string report = slurp(ws().file("report.json"));
  CHECK(report.find("\"bleu\"") != std::string::npos);
  CHECK(report.find("\"al\"") != std::string::npos);
  CHECK(report.find("\"step_size\"") != std::string::npos);
  std::string console = slurp(ws().file("eval.out"));
  CHECK(console.find("bleu ") != std::string::npos);

  // alignment metrics need the teacher-forced traces plus gold links
  rc = run("evaluate --hyp " + ws().file("run_a/test.ref") + " --ref " +
               ws().file("run_a/test.ref") + " --traces " +
               ws().file("tf/traces.tsv") + " --gold " +
               ws().file("run_a/test.align") + " --ckpt " +
               ws().file("run_a/model.ckpt") + " --src " +
               ws().file("run_a/test.src") + " --out " +
               ws().file("report_gold.json"),
           "eval_gold");
  INFO(slurp(ws().file("eval_gold.err")));
  REQUIRE(rc == 0);
  std::string gold_report = slurp(ws().file("report_gold.json"));
  CHECK(gold_report.find("\"within_g\"") != std::string::npos);
  CHECK(gold_report.find("\"aer\"") != std::string::npos);
  CHECK(gold_report.find("\"bleu\": 100") != std::string::npos);
}

TEST_CASE("sweep tabulates the latency-quality curve") {
  int rc = run("sweep --ckpt " + ws().file("run_a/model.ckpt") + " --src " +
                   ws().file("run_a/test.src") + " --ref " +
                   ws().file("run_a/test.ref") +
                   " --delta 0 --delta 1 --delta 2 --teacher-forced --out " +
                   ws().file("sweep.csv"),
               "sweep");
  INFO(slurp(ws().file("sweep.err")));
  REQUIRE(rc == 0);
  std::string csv = slurp(ws().file("sweep.csv"));
  CHECK(csv.rfind("delta,cw,ap,al,dal,bleu\n", 0) == 0);
  REQUIRE(count_lines(csv) == 4);
  // teacher-forced schedules only loosen as the threshold grows
  std::vector<double> al;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::size_t p = 0;
    for (int f = 0; f < 3; ++f) p = line.find(',', p) + 1;
    al.push_back(std::stod(line.substr(p)));
  }
  CHECK(al[0] <= al[1]);
  CHECK(al[1] <= al[2]);
}

TEST_CASE("stats exports histograms as csv") {
  int rc = run("stats --traces " + ws().file("dec/traces.tsv") + " --gold " +
                   ws().file("run_a/test.align") + " --out " +
                   ws().file("stats.csv"),
               "stats");
  INFO(slurp(ws().file("stats.err")));
  REQUIRE(rc == 0);
  std::string csv = slurp(ws().file("stats.csv"));
  CHECK(csv.rfind("histogram,bucket,count,proportion\n", 0) == 0);
  CHECK(csv.find("step_size,") != std::string::npos);
  CHECK(csv.find("distance_monotonic,") != std::string::npos);
  CHECK(csv.find("distance_non_monotonic,") != std::string::npos);
}

TEST_CASE("bad inputs exit nonzero with a reason") {
  std::ofstream(ws().file("bad.json")) << R"({"modle": {}})";
  int rc = run("train --config " + ws().file("bad.json"), "bad_cfg");
  CHECK(rc != 0);
  CHECK(slurp(ws().file("bad_cfg.err")).find("unknown key") != std::string::npos);

  // tokens outside the checkpoint vocabulary are refused, not mapped away
  std::ofstream(ws().file("oov.txt")) << "w00 mystery w01\n";
  rc = run("translate --ckpt " + ws().file("run_a/model.ckpt") + " --src " +
               ws().file("oov.txt") + " --out " + ws().file("dec"),
           "oov");
  CHECK(rc != 0);
  CHECK(slurp(ws().file("oov.err")).find("vocabulary") != std::string::npos);

  rc = run("evaluate --hyp " + ws().file("dec/hyp.txt") + " --ref " +
               ws().file("run_a/test.ref") + " --traces " +
               ws().file("missing.tsv"),
           "missing");
  CHECK(rc != 0);
}
