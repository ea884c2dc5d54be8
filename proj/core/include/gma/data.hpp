#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gma/alignment.hpp"

namespace gma {

using Sentence = std::vector<std::string>;

// Token ids. The four specials occupy fixed slots; content tokens follow,
// ordered by descending frequency with lexicographic tie-break, so the same
// corpus always yields the same table.
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kSpecials = 4;

  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int> token_to_id;

  int size() const { return static_cast<int>(id_to_token.size()); }
  int id(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const;  // throws on bad id
  std::vector<int> encode(const Sentence& tokens) const;
  Sentence decode(const std::vector<int>& ids) const;

  static Vocabulary from_tokens(std::vector<std::string> content_tokens);
};

// Tokens seen fewer than min_freq times map to the unknown id.
Vocabulary build_vocab(const std::vector<Sentence>& sentences, int min_freq);

struct ParallelCorpus {
  std::vector<Sentence> source;
  std::vector<Sentence> target;
  AlignmentSet gold;  // may be empty
  bool has_gold = false;

  std::size_t size() const { return source.size(); }
};

// Whitespace tokenization, one sentence per line. Empty lines and length
// mismatches between the two sides are errors naming the line.
std::vector<Sentence> load_sentences(const std::string& path);
std::vector<Sentence> parse_sentences(const std::string& text, const std::string& name);
void save_sentences(const std::string& path, const std::vector<Sentence>& sents);
ParallelCorpus load_parallel(const std::string& src_path, const std::string& tgt_path);

// Synthetic corpora with exact gold alignments:
//   copy            target = source, gold (i, i)
//   shifted_copy(d) target_i mixes source_i with source_{min(i+d, J)};
//                   gold links target i to min(i+d, J), so a correct policy
//                   must lag d positions behind
//   local_reorder(w) source windows of w reversed to form the target; gold
//                   follows the permutation
enum class SyntheticTask { copy, shifted_copy, local_reorder };
SyntheticTask synthetic_task_from_string(const std::string& s);
std::string to_string(SyntheticTask t);

ParallelCorpus make_synthetic(SyntheticTask task, int param, int vocab_size,
                              int min_len, int max_len, int count,
                              std::uint64_t seed);

// The full vocabulary the generator draws from (independent of sampling), so
// every split encodes without unknowns.
Vocabulary synthetic_vocabulary(int vocab_size);

// Padded id matrices for one batch. Source rows end with <eos>; target rows
// are teacher-forcing pairs (<bos> y ... / y ... <eos>) padded with <pad>.
struct Batch {
  int rows = 0;
  int src_cols = 0;
  int tgt_cols = 0;
  std::vector<int> src;      // rows x src_cols
  std::vector<int> tgt_in;   // rows x tgt_cols
  std::vector<int> tgt_out;  // rows x tgt_cols
  std::vector<int> src_len;  // true lengths incl. <eos>
  std::vector<int> tgt_len;  // true lengths incl. the final <eos> label

  std::vector<int> source_row(int r) const;
  std::vector<int> target_row(int r) const;  // content ids, no specials
};

struct BatchPlan {
  std::vector<Batch> batches;
  int skipped_too_long = 0;
};

// Deterministic shuffle given the seed; sentences whose framed length would
// exceed max_positions are skipped and counted.
BatchPlan make_batches(const ParallelCorpus& corpus, const Vocabulary& src_vocab,
                       const Vocabulary& tgt_vocab, int batch_size,
                       int max_positions, std::uint64_t seed);

}  // namespace gma
