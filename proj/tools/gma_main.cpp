// Command-line front end: train, translate, evaluate, sweep, stats.
// Data goes to files or stdout, diagnostics to stderr; exit code 0 iff no
// error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gma/checkpoint.hpp"
#include "gma/config.hpp"
#include "gma/metrics.hpp"
#include "gma/model.hpp"
#include "gma/policy.hpp"

namespace fs = std::filesystem;

namespace {

constexpr double kUnsetDelta = -1.0;

std::vector<int> encode_strict(const gma::Vocabulary& vocab, const gma::Sentence& s,
                               std::size_t line, const char* what) {
  std::vector<int> ids;
  ids.reserve(s.size());
  for (const auto& tok : s) {
    int id = vocab.id(tok);
    if (id == gma::Vocabulary::kUnk && tok != vocab.token(gma::Vocabulary::kUnk))
      throw std::runtime_error(std::string(what) + " line " + std::to_string(line) +
                               ": token '" + tok + "' not in checkpoint vocabulary");
    ids.push_back(id);
  }
  return ids;
}

std::vector<int> encode_source(const gma::Vocabulary& vocab, const gma::Sentence& s,
                               std::size_t line) {
  std::vector<int> ids = encode_strict(vocab, s, line, "source");
  ids.push_back(gma::Vocabulary::kEos);
  return ids;
}

// Hypothesis files may contain empty lines (flagged empty hypotheses), so
// they bypass the strict corpus loader.
std::vector<gma::Sentence> load_hypotheses(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<gma::Sentence> out;
  std::string line;
  while (std::getline(in, line)) {
    gma::Sentence s;
    std::istringstream toks(line);
    std::string tok;
    while (toks >> tok) s.push_back(std::move(tok));
    out.push_back(std::move(s));
  }
  return out;
}

void write_lines(const std::string& path, const std::vector<gma::Sentence>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& s : lines) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out << ' ';
      out << s[i];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

struct DecodedCorpus {
  std::vector<gma::Sentence> hypotheses;
  std::vector<gma::TraceRecord> records;
  int empty_hypotheses = 0;
  int truncated = 0;
};

DecodedCorpus decode_corpus(const gma::Model& model, const gma::Vocabulary& src_vocab,
                            const gma::Vocabulary& tgt_vocab,
                            const std::vector<gma::Sentence>& sources, double delta,
                            int max_len, const std::vector<gma::Sentence>* forced_refs) {
  DecodedCorpus out;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    std::vector<int> src = encode_source(src_vocab, sources[s], s + 1);
    gma::Sentence hyp;
    gma::PolicyTrace trace;
    if (forced_refs) {
      std::vector<int> tgt =
          encode_strict(tgt_vocab, (*forced_refs)[s], s + 1, "reference");
      gma::NoGradGuard guard;
      gma::TrainForward fwd = model.decode_train(src, tgt, /*capture_attn=*/false,
                                                 nullptr, delta);
      trace = gma::trace_from_g(fwd.alignment.g, static_cast<int>(src.size()));
      int v = fwd.logits.dim(1);
      const auto& lv = fwd.logits.values();
      std::vector<int> ids;
      for (std::size_t i = 0; i < tgt.size(); ++i) {
        const double* row = lv.data() + static_cast<std::ptrdiff_t>(i) * v;
        int best = 0;
        for (int j = 1; j < v; ++j)
          if (row[j] > row[best]) best = j;
        ids.push_back(best);
      }
      hyp = tgt_vocab.decode(ids);
    } else {
      gma::StreamResult res = gma::simulate_streaming(model, src, delta, max_len);
      hyp = tgt_vocab.decode(res.hypothesis);
      trace = std::move(res.trace);
      if (trace.truncated) ++out.truncated;
    }
    gma::TraceCheck check = gma::validate_trace(trace);
    if (!check.ok)
      throw std::runtime_error("internal: invalid trace for line " +
                               std::to_string(s + 1) + ": " + check.violation);
    if (hyp.empty()) {
      ++out.empty_hypotheses;
      std::cerr << "warning: line " << (s + 1) << ": empty hypothesis\n";
    }
    out.hypotheses.push_back(hyp);
    out.records.push_back({std::move(hyp), std::move(trace)});
  }
  return out;
}

std::vector<gma::PolicyTrace> traces_of(const std::vector<gma::TraceRecord>& records) {
  std::vector<gma::PolicyTrace> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.trace);
  return out;
}

// ---- train ----

struct TrainArgs {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  double delta = kUnsetDelta;
};

int cmd_train(const TrainArgs& args) {
  gma::RunConfig cfg = gma::load_run_config(args.config_path);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.seed >= 0) {
    cfg.model.seed = static_cast<std::uint64_t>(args.seed);
    cfg.train.seed = static_cast<std::uint64_t>(args.seed);
    cfg.data.seed = static_cast<std::uint64_t>(args.seed);
  }
  if (args.delta != kUnsetDelta) cfg.model.gma.delta = args.delta;

  gma::ParallelCorpus train, dev, test;
  gma::Vocabulary src_vocab, tgt_vocab;
  if (cfg.data.synthetic) {
    train = gma::make_synthetic(cfg.data.task, cfg.data.param, cfg.data.vocab,
                                cfg.data.min_len, cfg.data.max_len, cfg.data.train_count,
                                cfg.data.seed);
    if (cfg.data.dev_count > 0)
      dev = gma::make_synthetic(cfg.data.task, cfg.data.param, cfg.data.vocab,
                                cfg.data.min_len, cfg.data.max_len, cfg.data.dev_count,
                                cfg.data.seed + 1);
    if (cfg.data.test_count > 0)
      test = gma::make_synthetic(cfg.data.task, cfg.data.param, cfg.data.vocab,
                                 cfg.data.min_len, cfg.data.max_len, cfg.data.test_count,
                                 cfg.data.seed + 2);
    src_vocab = gma::synthetic_vocabulary(cfg.data.vocab);
    tgt_vocab = src_vocab;
  } else {
    train = gma::load_parallel(cfg.data.train_src, cfg.data.train_tgt);
    if (!cfg.data.dev_src.empty())
      dev = gma::load_parallel(cfg.data.dev_src, cfg.data.dev_tgt);
    src_vocab = gma::build_vocab(train.source, cfg.data.min_freq);
    tgt_vocab = gma::build_vocab(train.target, cfg.data.min_freq);
  }
  cfg.model.src_vocab = src_vocab.size();
  cfg.model.tgt_vocab = tgt_vocab.size();

  gma::Model model = gma::Model::init(cfg.model);
  gma::TrainResult result =
      gma::train_model(model, train, dev, src_vocab, tgt_vocab, cfg.train, &std::cerr);

  fs::create_directories(cfg.out_dir);
  std::string ckpt_path = (fs::path(cfg.out_dir) / "model.ckpt").string();
  gma::save_checkpoint(ckpt_path, model, src_vocab, tgt_vocab);

  std::ostringstream curve;
  curve << "step,loss,dev_bleu,dev_al\n";
  for (const auto& e : result.log)
    curve << e.step << ',' << csv_number(e.loss) << ',' << csv_number(e.dev_bleu) << ','
          << csv_number(e.dev_al) << '\n';
  std::string curve_path = (fs::path(cfg.out_dir) / "learning_curve.csv").string();
  write_text(curve_path, curve.str());
  write_text((fs::path(cfg.out_dir) / "config.json").string(),
             gma::run_config_to_json_string(cfg) + "\n");

  if (cfg.data.synthetic) {
    if (dev.size() > 0) {
      gma::save_sentences((fs::path(cfg.out_dir) / "dev.src").string(), dev.source);
      gma::save_sentences((fs::path(cfg.out_dir) / "dev.ref").string(), dev.target);
    }
    if (test.size() > 0) {
      gma::save_sentences((fs::path(cfg.out_dir) / "test.src").string(), test.source);
      gma::save_sentences((fs::path(cfg.out_dir) / "test.ref").string(), test.target);
      gma::save_alignments((fs::path(cfg.out_dir) / "test.align").string(), test.gold);
    }
  }
  std::cout << "checkpoint " << ckpt_path << "\n";
  std::cout << "learning_curve " << curve_path << "\n";
  std::cout << "final_loss " << result.final_loss << "\n";
  return 0;
}

// ---- translate ----

struct TranslateArgs {
  std::string ckpt, src_path, ref_path, out_dir = ".";
  double delta = kUnsetDelta;
  int max_len = 0;
  bool teacher_forced = false;
};

int cmd_translate(const TranslateArgs& args) {
  gma::Checkpoint ck = gma::load_checkpoint(args.ckpt);
  gma::Vocabulary src_vocab = ck.src_vocab, tgt_vocab = ck.tgt_vocab;
  gma::Model model = std::move(ck).to_model();
  double delta = args.delta == kUnsetDelta ? model.config().gma.delta : args.delta;

  std::vector<gma::Sentence> sources = gma::load_sentences(args.src_path);
  std::optional<std::vector<gma::Sentence>> refs;
  if (args.teacher_forced) {
    if (args.ref_path.empty())
      throw std::runtime_error("translate: --teacher-forced needs --ref");
    refs = gma::load_sentences(args.ref_path);
    if (refs->size() != sources.size())
      throw std::runtime_error("translate: source and reference line counts differ");
  }
  DecodedCorpus decoded =
      decode_corpus(model, src_vocab, tgt_vocab, sources, delta, args.max_len,
                    refs ? &*refs : nullptr);

  fs::create_directories(args.out_dir);
  std::string hyp_path = (fs::path(args.out_dir) / "hyp.txt").string();
  std::string trace_path = (fs::path(args.out_dir) / "traces.tsv").string();
  write_lines(hyp_path, decoded.hypotheses);
  gma::save_traces(trace_path, decoded.records);
  std::cout << "hypotheses " << hyp_path << "\n";
  std::cout << "traces " << trace_path << "\n";
  std::cout << "empty_hypotheses " << decoded.empty_hypotheses << "\n";
  std::cout << "truncated " << decoded.truncated << "\n";
  return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string hyp_path, ref_path, traces_path, gold_path, ckpt, src_path;
  std::string out_path = "report.json";
  int layer = 0;
};

int cmd_evaluate(const EvaluateArgs& args) {
  std::vector<gma::Sentence> hyps = load_hypotheses(args.hyp_path);
  std::vector<gma::Sentence> refs = gma::load_sentences(args.ref_path);
  std::vector<gma::TraceRecord> records = gma::load_traces(args.traces_path);
  if (hyps.size() != refs.size() || hyps.size() != records.size())
    throw std::runtime_error("evaluate: line counts differ (hyp " +
                             std::to_string(hyps.size()) + ", ref " +
                             std::to_string(refs.size()) + ", traces " +
                             std::to_string(records.size()) + ")");
  std::vector<gma::PolicyTrace> traces = traces_of(records);

  gma::MetricsReport report;
  report.sentences = static_cast<int>(hyps.size());
  for (const auto& t : traces)
    if (t.truncated) ++report.truncated;
  report.bleu = gma::corpus_bleu(hyps, refs);
  gma::LatencyScores lat = gma::mean_latency(traces);
  report.al = lat.al;
  report.ap = lat.ap;
  report.cw = lat.cw;
  report.dal = lat.dal;
  report.histograms["step_size"] = gma::step_size_histogram(traces);

  if (!args.gold_path.empty()) {
    gma::AlignmentSet gold = gma::load_alignments(args.gold_path);
    if (gold.size() != hyps.size())
      throw std::runtime_error("evaluate: gold alignment line count differs");
    report.within_g = gma::within_g_fraction(gold, traces);
    gma::DistanceHistograms dist = gma::monotonic_distance_histogram(gold);
    report.histograms["distance_non_monotonic"] = dist.non_monotonic;
    report.histograms["distance_monotonic"] = dist.monotonic;
    if (dist.skipped_targets > 0)
      std::cerr << "note: " << dist.skipped_targets
                << " unlinked target tokens skipped in distance histograms\n";

    if (!args.ckpt.empty()) {
      if (args.src_path.empty())
        throw std::runtime_error("evaluate: alignment scoring needs --src");
      gma::Checkpoint ck = gma::load_checkpoint(args.ckpt);
      gma::Vocabulary src_vocab = ck.src_vocab, tgt_vocab = ck.tgt_vocab;
      gma::Model model = std::move(ck).to_model();
      if (args.layer < 0 || args.layer >= model.config().layers)
        throw std::runtime_error("evaluate: --layer out of range");
      std::vector<gma::Sentence> sources = gma::load_sentences(args.src_path);
      if (sources.size() != refs.size())
        throw std::runtime_error("evaluate: source line count differs");
      gma::AlignmentSet predicted;
      gma::NoGradGuard guard;
      for (std::size_t s = 0; s < sources.size(); ++s) {
        std::vector<int> src = encode_source(src_vocab, sources[s], s + 1);
        std::vector<int> tgt = encode_strict(tgt_vocab, refs[s], s + 1, "reference");
        gma::TrainForward fwd = model.decode_train(src, tgt);
        const gma::AlignmentTrack& track =
            fwd.alignment.track_for_layer(args.layer);
        predicted.push_back(gma::alignment_from_positions(
            track.p, static_cast<int>(tgt.size()), static_cast<int>(src.size())));
      }
      report.aer = gma::alignment_error_rate(predicted, gold);
    }
  }

  std::cout << report.to_flat_text();
  write_text(args.out_path, report.to_json_string() + "\n");
  std::cerr << "report written to " << args.out_path << "\n";
  return 0;
}

// ---- sweep ----

struct SweepArgs {
  std::string ckpt, src_path, ref_path;
  std::string out_path = "sweep.csv";
  std::vector<double> deltas;
  int max_len = 0;
  bool teacher_forced = false;
};

int cmd_sweep(const SweepArgs& args) {
  if (args.deltas.empty()) throw std::runtime_error("sweep: need at least one --delta");
  gma::Checkpoint ck = gma::load_checkpoint(args.ckpt);
  gma::Vocabulary src_vocab = ck.src_vocab, tgt_vocab = ck.tgt_vocab;
  gma::Model model = std::move(ck).to_model();
  std::vector<gma::Sentence> sources = gma::load_sentences(args.src_path);
  std::vector<gma::Sentence> refs = gma::load_sentences(args.ref_path);
  if (sources.size() != refs.size())
    throw std::runtime_error("sweep: source and reference line counts differ");

  std::ostringstream csv;
  csv << "delta,cw,ap,al,dal,bleu\n";
  for (double delta : args.deltas) {
    if (!(delta >= 0.0)) throw std::runtime_error("sweep: delta must be >= 0");
    DecodedCorpus decoded =
        decode_corpus(model, src_vocab, tgt_vocab, sources, delta, args.max_len,
                      args.teacher_forced ? &refs : nullptr);
    gma::LatencyScores lat = gma::mean_latency(traces_of(decoded.records));
    double bleu = gma::corpus_bleu(decoded.hypotheses, refs);
    csv << csv_number(delta) << ',' << csv_number(lat.cw) << ',' << csv_number(lat.ap)
        << ',' << csv_number(lat.al) << ',' << csv_number(lat.dal) << ','
        << csv_number(bleu) << '\n';
  }
  write_text(args.out_path, csv.str());
  std::cout << csv.str();
  std::cerr << "sweep written to " << args.out_path << "\n";
  return 0;
}

// ---- stats ----

struct StatsArgs {
  std::string traces_path, gold_path;
  std::string out_path = "stats.csv";
};

void append_histogram(std::ostringstream& csv, const std::string& name,
                      const gma::Histogram& h) {
  for (const auto& [bucket, count] : h.counts)
    csv << name << ',' << bucket << ',' << count << ',' << h.proportion(bucket) << '\n';
}

int cmd_stats(const StatsArgs& args) {
  if (args.traces_path.empty() && args.gold_path.empty())
    throw std::runtime_error("stats: need --traces and/or --gold");
  std::ostringstream csv;
  csv << "histogram,bucket,count,proportion\n";
  if (!args.traces_path.empty()) {
    std::vector<gma::TraceRecord> records = gma::load_traces(args.traces_path);
    append_histogram(csv, "step_size", gma::step_size_histogram(traces_of(records)));
  }
  if (!args.gold_path.empty()) {
    gma::AlignmentSet gold = gma::load_alignments(args.gold_path);
    gma::DistanceHistograms dist = gma::monotonic_distance_histogram(gold);
    append_histogram(csv, "distance_non_monotonic", dist.non_monotonic);
    append_histogram(csv, "distance_monotonic", dist.monotonic);
    if (dist.skipped_targets > 0)
      std::cerr << "note: " << dist.skipped_targets
                << " unlinked target tokens skipped\n";
  }
  write_text(args.out_path, csv.str());
  std::cout << csv.str();
  std::cerr << "stats written to " << args.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simultaneous translation with predicted source positions"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model from a JSON config");
  train->add_option("--config", train_args.config_path, "run configuration (JSON)")
      ->required();
  train->add_option("--out", train_args.out_dir, "output directory (overrides config)");
  train->add_option("--seed", train_args.seed, "override all seeds");
  train->add_option("--delta", train_args.delta, "override the write threshold");

  TranslateArgs tr_args;
  CLI::App* translate = app.add_subcommand("translate", "decode a source file");
  translate->add_option("--ckpt", tr_args.ckpt, "checkpoint file")->required();
  translate->add_option("--src", tr_args.src_path, "source sentences")->required();
  translate->add_option("--out", tr_args.out_dir, "output directory");
  translate->add_option("--delta", tr_args.delta, "override the write threshold");
  translate->add_option("--max-len", tr_args.max_len, "write cap (default 2J+10)");
  translate->add_flag("--teacher-forced", tr_args.teacher_forced,
                      "feed the reference instead of streaming greedily");
  translate->add_option("--ref", tr_args.ref_path, "reference (teacher-forced mode)");

  EvaluateArgs ev_args;
  CLI::App* evaluate = app.add_subcommand("evaluate", "score hypotheses and traces");
  evaluate->add_option("--hyp", ev_args.hyp_path, "hypothesis file")->required();
  evaluate->add_option("--ref", ev_args.ref_path, "reference file")->required();
  evaluate->add_option("--traces", ev_args.traces_path, "trace file")->required();
  evaluate->add_option("--gold", ev_args.gold_path, "gold alignments (Pharaoh)");
  evaluate->add_option("--ckpt", ev_args.ckpt, "checkpoint for alignment scoring");
  evaluate->add_option("--src", ev_args.src_path, "source file for alignment scoring");
  evaluate->add_option("--layer", ev_args.layer, "decoder layer whose track is scored");
  evaluate->add_option("--out", ev_args.out_path, "JSON report path");

  SweepArgs sw_args;
  CLI::App* sweep = app.add_subcommand("sweep", "latency-quality curve over deltas");
  sweep->add_option("--ckpt", sw_args.ckpt, "checkpoint file")->required();
  sweep->add_option("--src", sw_args.src_path, "source sentences")->required();
  sweep->add_option("--ref", sw_args.ref_path, "reference sentences")->required();
  sweep->add_option("--delta", sw_args.deltas, "write thresholds (repeatable)")
      ->required();
  sweep->add_option("--max-len", sw_args.max_len, "write cap (default 2J+10)");
  sweep->add_flag("--teacher-forced", sw_args.teacher_forced,
                  "trace the reference instead of streaming");
  sweep->add_option("--out", sw_args.out_path, "CSV path");

  StatsArgs st_args;
  CLI::App* stats = app.add_subcommand("stats", "histogram exports");
  stats->add_option("--traces", st_args.traces_path, "trace file");
  stats->add_option("--gold", st_args.gold_path, "gold alignments (Pharaoh)");
  stats->add_option("--out", st_args.out_path, "CSV path");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(train_args);
    if (*translate) return cmd_translate(tr_args);
    if (*evaluate) return cmd_evaluate(ev_args);
    if (*sweep) return cmd_sweep(sw_args);
    if (*stats) return cmd_stats(st_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
