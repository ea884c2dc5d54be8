#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "gma/data.hpp"

using namespace gma;

namespace {

// Scratch directory removed when the test ends.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("gma_data_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("vocabulary orders content by frequency then spelling") {
  std::vector<Sentence> sents = {{"b", "a", "a"}, {"c", "b", "a"}};
  Vocabulary v = build_vocab(sents, 1);
  CHECK(v.size() == 7);
  CHECK(v.token(Vocabulary::kPad) == "<pad>");
  CHECK(v.token(Vocabulary::kUnk) == "<unk>");
  CHECK(v.token(Vocabulary::kBos) == "<bos>");
  CHECK(v.token(Vocabulary::kEos) == "<eos>");
  // a:3, b:2, c:1
  CHECK(v.id("a") == 4);
  CHECK(v.id("b") == 5);
  CHECK(v.id("c") == 6);
  CHECK(v.id("zzz") == Vocabulary::kUnk);
  CHECK_THROWS_AS(v.token(7), std::out_of_range);
  CHECK_THROWS_AS(v.token(-1), std::out_of_range);

  // ties settle alphabetically
  Vocabulary tied = build_vocab({{"z", "m", "z", "m"}}, 1);
  CHECK(tied.id("m") == 4);
  CHECK(tied.id("z") == 5);

  Vocabulary cut = build_vocab(sents, 2);
  CHECK(cut.size() == 6);
  CHECK(cut.id("c") == Vocabulary::kUnk);

  CHECK_THROWS_AS(build_vocab(sents, 0), std::invalid_argument);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"x", "x"}), std::invalid_argument);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"<pad>"}), std::invalid_argument);
}

TEST_CASE("encode and decode round-trip through the table") {
  Vocabulary v = Vocabulary::from_tokens({"hi", "there"});
  std::vector<int> ids = v.encode({"hi", "there", "hi"});
  CHECK(ids == std::vector<int>{4, 5, 4});
  CHECK(v.decode(ids) == Sentence{"hi", "there", "hi"});
  CHECK(v.encode({"nope"}) == std::vector<int>{Vocabulary::kUnk});
}

TEST_CASE("generator vocabulary is fixed-width and complete") {
  Vocabulary v = synthetic_vocabulary(20);
  CHECK(v.size() == 20);
  CHECK(v.token(4) == "w00");
  CHECK(v.token(19) == "w15");
  Vocabulary small = synthetic_vocabulary(14);
  CHECK(small.token(4) == "w0");
  CHECK(small.token(13) == "w9");
  CHECK_THROWS_AS(synthetic_vocabulary(4), std::invalid_argument);
}

TEST_CASE("copy task repeats the source with diagonal gold links") {
  ParallelCorpus c = make_synthetic(SyntheticTask::copy, 0, 20, 5, 15, 40, 7);
  REQUIRE(c.size() == 40);
  REQUIRE(c.has_gold);
  REQUIRE(c.gold.size() == 40);
  Vocabulary v = synthetic_vocabulary(20);
  for (std::size_t n = 0; n < c.size(); ++n) {
    int len = static_cast<int>(c.source[n].size());
    CHECK(len >= 5);
    CHECK(len <= 15);
    CHECK(c.target[n] == c.source[n]);
    REQUIRE(c.gold[n].links.size() == static_cast<std::size_t>(len));
    for (int i = 1; i <= len; ++i) {
      CHECK(c.gold[n].links[i - 1] == AlignmentLink{i, i, true});
    }
    // every generated token must encode without unknowns
    for (int id : v.encode(c.source[n])) CHECK(id != Vocabulary::kUnk);
  }
}

TEST_CASE("shifted copy links each target to a source d ahead") {
  const int d = 3, vocab = 20;
  ParallelCorpus c =
      make_synthetic(SyntheticTask::shifted_copy, d, vocab, 5, 12, 30, 9);
  for (std::size_t n = 0; n < c.size(); ++n) {
    int len = static_cast<int>(c.source[n].size());
    REQUIRE(c.target[n].size() == static_cast<std::size_t>(len));
    for (int i = 1; i <= len; ++i) {
      int j = std::min(i + d, len);
      CHECK(c.gold[n].links[i - 1].tgt == i);
      CHECK(c.gold[n].links[i - 1].src == j);
      // the emitted word is the one d ahead, so it cannot be produced
      // before source j arrives
      CHECK(c.target[n][i - 1] == c.source[n][j - 1]);
    }
  }
  CHECK_THROWS_AS(make_synthetic(SyntheticTask::shifted_copy, 0, 20, 5, 12, 3, 1),
                  std::invalid_argument);
}

TEST_CASE("local reorder reverses full windows and keeps the tail") {
  const int w = 2;
  ParallelCorpus c =
      make_synthetic(SyntheticTask::local_reorder, w, 20, 5, 11, 30, 13);
  for (std::size_t n = 0; n < c.size(); ++n) {
    int len = static_cast<int>(c.source[n].size());
    for (int start = 0; start + w <= len; start += w)
      for (int k = 0; k < w; ++k)
        CHECK(c.target[n][start + k] == c.source[n][start + w - 1 - k]);
    if (len % w != 0) CHECK(c.target[n].back() == c.source[n].back());
    // each link pairs equal words across the permutation
    REQUIRE(c.gold[n].links.size() == static_cast<std::size_t>(len));
    for (const auto& link : c.gold[n].links)
      CHECK(c.target[n][link.tgt - 1] == c.source[n][link.src - 1]);
  }
  CHECK_THROWS_AS(make_synthetic(SyntheticTask::local_reorder, 1, 20, 5, 11, 3, 1),
                  std::invalid_argument);
}

TEST_CASE("synthetic generation is reproducible by seed") {
  ParallelCorpus a = make_synthetic(SyntheticTask::copy, 0, 20, 5, 15, 10, 42);
  ParallelCorpus b = make_synthetic(SyntheticTask::copy, 0, 20, 5, 15, 10, 42);
  ParallelCorpus c = make_synthetic(SyntheticTask::copy, 0, 20, 5, 15, 10, 43);
  CHECK(a.source == b.source);
  CHECK(a.source != c.source);
}

TEST_CASE("task names round-trip and reject strangers") {
  for (auto t : {SyntheticTask::copy, SyntheticTask::shifted_copy,
                 SyntheticTask::local_reorder})
    CHECK(synthetic_task_from_string(to_string(t)) == t);
  CHECK_THROWS_AS(synthetic_task_from_string("sort"), std::invalid_argument);
}

TEST_CASE("batches frame rows with bos, eos and padding") {
  ParallelCorpus c;
  c.source = {{"a", "b"}, {"a", "b", "c"}};
  c.target = {{"b", "a"}, {"c"}};
  Vocabulary v = build_vocab({{"a", "b", "c"}}, 1);
  BatchPlan plan = make_batches(c, v, v, 2, 64, 5);
  CHECK(plan.skipped_too_long == 0);
  REQUIRE(plan.batches.size() == 1);
  const Batch& b = plan.batches[0];
  REQUIRE(b.rows == 2);
  for (int r = 0; r < b.rows; ++r) {
    // source ends with <eos>, then pad
    CHECK(b.src[r * b.src_cols + b.src_len[r] - 1] == Vocabulary::kEos);
    for (int j = b.src_len[r]; j < b.src_cols; ++j)
      CHECK(b.src[r * b.src_cols + j] == Vocabulary::kPad);
    // teacher forcing: input starts at <bos>, labels end at <eos>,
    // and the label row is the input row shifted left by one
    CHECK(b.tgt_in[r * b.tgt_cols] == Vocabulary::kBos);
    CHECK(b.tgt_out[r * b.tgt_cols + b.tgt_len[r] - 1] == Vocabulary::kEos);
    for (int j = 1; j < b.tgt_len[r]; ++j)
      CHECK(b.tgt_in[r * b.tgt_cols + j] == b.tgt_out[r * b.tgt_cols + j - 1]);
    for (int j = b.tgt_len[r]; j < b.tgt_cols; ++j) {
      CHECK(b.tgt_in[r * b.tgt_cols + j] == Vocabulary::kPad);
      CHECK(b.tgt_out[r * b.tgt_cols + j] == Vocabulary::kPad);
    }
    // row accessors recover the unpadded ids
    std::vector<int> src_ids = b.source_row(r);
    REQUIRE(static_cast<int>(src_ids.size()) == b.src_len[r]);
    CHECK(src_ids.back() == Vocabulary::kEos);
    std::vector<int> tgt_ids = b.target_row(r);
    CHECK(static_cast<int>(tgt_ids.size()) == b.tgt_len[r] - 1);
    for (int id : tgt_ids) CHECK(id >= Vocabulary::kSpecials);
  }
}

TEST_CASE("overlong sentences are skipped and counted") {
  ParallelCorpus c;
  c.source = {{"a"}, {"a", "a", "a", "a", "a", "a"}};
  c.target = {{"a"}, {"a"}};
  Vocabulary v = build_vocab({{"a"}}, 1);
  BatchPlan plan = make_batches(c, v, v, 4, 5, 1);
  CHECK(plan.skipped_too_long == 1);
  REQUIRE(plan.batches.size() == 1);
  CHECK(plan.batches[0].rows == 1);
  CHECK_THROWS_AS(make_batches(c, v, v, 0, 5, 1), std::invalid_argument);
}

TEST_CASE("batch order is a deterministic function of the seed") {
  ParallelCorpus c = make_synthetic(SyntheticTask::copy, 0, 20, 5, 10, 64, 3);
  Vocabulary v = synthetic_vocabulary(20);
  BatchPlan p1 = make_batches(c, v, v, 8, 64, 21);
  BatchPlan p2 = make_batches(c, v, v, 8, 64, 21);
  BatchPlan p3 = make_batches(c, v, v, 8, 64, 22);
  REQUIRE(p1.batches.size() == p2.batches.size());
  CHECK(p1.batches[0].src == p2.batches[0].src);
  bool any_diff = false;
  for (std::size_t i = 0; i < p1.batches.size() && !any_diff; ++i)
    any_diff = p1.batches[i].src != p3.batches[i].src;
  CHECK(any_diff);
}

TEST_CASE("sentence files round-trip and reject empty lines") {
  TempDir tmp;
  std::vector<Sentence> sents = {{"a", "b"}, {"c"}};
  save_sentences(tmp.file("x.txt"), sents);
  CHECK(load_sentences(tmp.file("x.txt")) == sents);
  CHECK_THROWS_WITH_AS(parse_sentences("a b\n\nc\n", "f"),
                       "f: line 2: empty sentence", std::runtime_error);
  CHECK_THROWS_AS(load_sentences(tmp.file("missing.txt")), std::runtime_error);
}

TEST_CASE("parallel loading demands matching line counts") {
  TempDir tmp;
  save_sentences(tmp.file("s.txt"), {{"a"}, {"b"}});
  save_sentences(tmp.file("t.txt"), {{"x"}});
  CHECK_THROWS_AS(load_parallel(tmp.file("s.txt"), tmp.file("t.txt")),
                  std::runtime_error);
  save_sentences(tmp.file("t2.txt"), {{"x"}, {"y"}});
  ParallelCorpus c = load_parallel(tmp.file("s.txt"), tmp.file("t2.txt"));
  CHECK(c.size() == 2);
  CHECK_FALSE(c.has_gold);
}

TEST_CASE("alignment files use zero-based pairs on disk") {
  AlignmentSet set = parse_alignments("0-0 1-2\n2-1\n\n");
  REQUIRE(set.size() == 3);
  CHECK(set[0].links ==
        std::vector<AlignmentLink>{{1, 1, true}, {2, 3, true}});
  CHECK(set[1].links == std::vector<AlignmentLink>{{3, 2, true}});
  CHECK(set[2].links.empty());
  CHECK(format_alignments(set) == "0-0 1-2\n2-1\n\n");

  CHECK_THROWS_WITH_AS(parse_alignments("0-0\nx-1\n"),
                       "alignments: line 2: malformed pair 'x-1'",
                       std::runtime_error);
  CHECK_THROWS_AS(parse_alignments("1-\n"), std::runtime_error);
  CHECK_THROWS_AS(parse_alignments("-1-2\n"), std::runtime_error);
  CHECK_THROWS_AS(parse_alignments("12\n"), std::runtime_error);

  TempDir tmp;
  save_alignments(tmp.file("a.txt"), set);
  AlignmentSet back = load_alignments(tmp.file("a.txt"));
  REQUIRE(back.size() == set.size());
  CHECK(back[0].links == set[0].links);
  CHECK_THROWS_AS(load_alignments(tmp.file("none.txt")), std::runtime_error);
}
