#include "gma/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "gma/rng.hpp"

namespace gma {

namespace {
const char* kSpecialNames[] = {"<pad>", "<unk>", "<bos>", "<eos>"};
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("vocab: id " + std::to_string(id) + " out of range");
  return id_to_token[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const Sentence& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

Sentence Vocabulary::decode(const std::vector<int>& ids) const {
  Sentence out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> content_tokens) {
  Vocabulary v;
  v.id_to_token.reserve(content_tokens.size() + kSpecials);
  for (const char* s : kSpecialNames) v.id_to_token.emplace_back(s);
  for (auto& t : content_tokens) v.id_to_token.push_back(std::move(t));
  for (int i = 0; i < v.size(); ++i) {
    if (!v.token_to_id.emplace(v.id_to_token[static_cast<std::size_t>(i)], i).second)
      throw std::invalid_argument("vocab: duplicate token '" +
                                  v.id_to_token[static_cast<std::size_t>(i)] + "'");
  }
  return v;
}

Vocabulary build_vocab(const std::vector<Sentence>& sentences, int min_freq) {
  if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");
  // std::map keeps tokens sorted, which settles frequency ties lexicographically
  std::map<std::string, std::size_t> freq;
  for (const auto& s : sentences)
    for (const auto& t : s) ++freq[t];
  std::vector<std::pair<std::string, std::size_t>> items;
  items.reserve(freq.size());
  for (const auto& [tok, n] : freq)
    if (n >= static_cast<std::size_t>(min_freq)) items.emplace_back(tok, n);
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> content;
  content.reserve(items.size());
  for (auto& [tok, n] : items) {
    (void)n;
    content.push_back(tok);
  }
  return Vocabulary::from_tokens(std::move(content));
}

std::vector<Sentence> parse_sentences(const std::string& text, const std::string& name) {
  std::vector<Sentence> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    Sentence s;
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) s.push_back(tok);
    if (s.empty())
      throw std::runtime_error(name + ": line " + std::to_string(line_no) +
                               ": empty sentence");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sentence> load_sentences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("corpus: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_sentences(buf.str(), path);
}

void save_sentences(const std::string& path, const std::vector<Sentence>& sents) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("corpus: cannot write " + path);
  for (const auto& s : sents) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out << ' ';
      out << s[i];
    }
    out << '\n';
  }
}

ParallelCorpus load_parallel(const std::string& src_path, const std::string& tgt_path) {
  ParallelCorpus c;
  c.source = load_sentences(src_path);
  c.target = load_sentences(tgt_path);
  if (c.source.size() != c.target.size())
    throw std::runtime_error("corpus: " + src_path + " has " +
                             std::to_string(c.source.size()) + " lines but " +
                             tgt_path + " has " + std::to_string(c.target.size()));
  return c;
}

SyntheticTask synthetic_task_from_string(const std::string& s) {
  if (s == "copy") return SyntheticTask::copy;
  if (s == "shifted_copy") return SyntheticTask::shifted_copy;
  if (s == "local_reorder") return SyntheticTask::local_reorder;
  throw std::invalid_argument("unknown synthetic task: " + s);
}

std::string to_string(SyntheticTask t) {
  switch (t) {
    case SyntheticTask::copy: return "copy";
    case SyntheticTask::shifted_copy: return "shifted_copy";
    case SyntheticTask::local_reorder: return "local_reorder";
  }
  return "?";
}

ParallelCorpus make_synthetic(SyntheticTask task, int param, int vocab_size,
                              int min_len, int max_len, int count,
                              std::uint64_t seed) {
  if (vocab_size <= Vocabulary::kSpecials)
    throw std::invalid_argument("make_synthetic: vocab_size must exceed specials");
  if (min_len < 1 || max_len < min_len)
    throw std::invalid_argument("make_synthetic: bad length range");
  if (count < 1) throw std::invalid_argument("make_synthetic: count must be >= 1");
  int content = vocab_size - Vocabulary::kSpecials;
  if (task == SyntheticTask::shifted_copy && param < 1)
    throw std::invalid_argument("make_synthetic: shifted_copy needs shift >= 1");
  if (task == SyntheticTask::local_reorder && param < 2)
    throw std::invalid_argument("make_synthetic: local_reorder needs window >= 2");

  int width = 1;
  for (int c = content - 1; c >= 10; c /= 10) ++width;
  auto name = [&](int i) {
    std::string d = std::to_string(i);
    return "w" + std::string(static_cast<std::size_t>(width) - d.size(), '0') + d;
  };

  Rng rng(seed);
  ParallelCorpus corpus;
  corpus.has_gold = true;
  for (int n = 0; n < count; ++n) {
    int len = min_len + rng.uniform_int(max_len - min_len + 1);
    std::vector<int> src_idx(static_cast<std::size_t>(len));
    for (int& x : src_idx) x = rng.uniform_int(content);

    Sentence src(static_cast<std::size_t>(len));
    for (int j = 0; j < len; ++j) src[static_cast<std::size_t>(j)] = name(src_idx[j]);

    Sentence tgt;
    SentenceAlignment gold;
    switch (task) {
      case SyntheticTask::copy: {
        tgt = src;
        for (int i = 1; i <= len; ++i) gold.links.push_back({i, i, true});
        break;
      }
      case SyntheticTask::shifted_copy: {
        // Target i copies source min(i+d, len): unpredictable until the
        // aligned word arrives, so a sound policy must lag by d.
        tgt.resize(static_cast<std::size_t>(len));
        for (int i = 1; i <= len; ++i) {
          int j = std::min(i + param, len);
          tgt[static_cast<std::size_t>(i - 1)] = name(src_idx[j - 1]);
          gold.links.push_back({j, i, true});
        }
        break;
      }
      case SyntheticTask::local_reorder: {
        tgt = src;
        std::vector<int> pos(static_cast<std::size_t>(len));  // source j -> target pos
        for (int j = 0; j < len; ++j) pos[static_cast<std::size_t>(j)] = j;
        for (int start = 0; start + param <= len; start += param) {
          for (int k = 0; k < param; ++k) {
            tgt[static_cast<std::size_t>(start + k)] =
                src[static_cast<std::size_t>(start + param - 1 - k)];
            pos[static_cast<std::size_t>(start + k)] = start + param - 1 - k;
          }
        }
        for (int j = 1; j <= len; ++j)
          gold.links.push_back({j, pos[static_cast<std::size_t>(j - 1)] + 1, true});
        break;
      }
    }
    std::sort(gold.links.begin(), gold.links.end(),
              [](const AlignmentLink& a, const AlignmentLink& b) {
                return a.tgt != b.tgt ? a.tgt < b.tgt : a.src < b.src;
              });
    corpus.source.push_back(std::move(src));
    corpus.target.push_back(std::move(tgt));
    corpus.gold.push_back(std::move(gold));
  }
  return corpus;
}

Vocabulary synthetic_vocabulary(int vocab_size) {
  if (vocab_size <= Vocabulary::kSpecials)
    throw std::invalid_argument("synthetic_vocabulary: vocab_size must exceed specials");
  int content = vocab_size - Vocabulary::kSpecials;
  int width = 1;
  for (int c = content - 1; c >= 10; c /= 10) ++width;
  std::vector<std::string> tokens;
  tokens.reserve(static_cast<std::size_t>(content));
  for (int i = 0; i < content; ++i) {
    std::string d = std::to_string(i);
    tokens.push_back("w" + std::string(static_cast<std::size_t>(width) - d.size(), '0') + d);
  }
  return Vocabulary::from_tokens(std::move(tokens));
}

std::vector<int> Batch::source_row(int r) const {
  auto begin = src.begin() + static_cast<std::size_t>(r) * src_cols;
  return std::vector<int>(begin, begin + src_len[static_cast<std::size_t>(r)]);
}

std::vector<int> Batch::target_row(int r) const {
  auto begin = tgt_in.begin() + static_cast<std::size_t>(r) * tgt_cols;
  // tgt_in row = <bos> y_1 .. y_n <pad>...; content is y_1 .. y_n
  return std::vector<int>(begin + 1, begin + tgt_len[static_cast<std::size_t>(r)]);
}

BatchPlan make_batches(const ParallelCorpus& corpus, const Vocabulary& src_vocab,
                       const Vocabulary& tgt_vocab, int batch_size,
                       int max_positions, std::uint64_t seed) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  BatchPlan plan;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < corpus.size(); ++i) order.push_back(i);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::pair<std::vector<int>, std::vector<int>>> kept;
  for (std::size_t i : order) {
    std::vector<int> s = src_vocab.encode(corpus.source[i]);
    s.push_back(Vocabulary::kEos);
    std::vector<int> t = tgt_vocab.encode(corpus.target[i]);
    if (static_cast<int>(s.size()) > max_positions ||
        static_cast<int>(t.size()) + 1 > max_positions) {
      ++plan.skipped_too_long;
      continue;
    }
    kept.emplace_back(std::move(s), std::move(t));
  }

  for (std::size_t at = 0; at < kept.size(); at += static_cast<std::size_t>(batch_size)) {
    std::size_t end = std::min(kept.size(), at + static_cast<std::size_t>(batch_size));
    Batch b;
    b.rows = static_cast<int>(end - at);
    for (std::size_t i = at; i < end; ++i) {
      b.src_cols = std::max(b.src_cols, static_cast<int>(kept[i].first.size()));
      b.tgt_cols = std::max(b.tgt_cols, static_cast<int>(kept[i].second.size()) + 1);
    }
    b.src.assign(static_cast<std::size_t>(b.rows) * b.src_cols, Vocabulary::kPad);
    b.tgt_in.assign(static_cast<std::size_t>(b.rows) * b.tgt_cols, Vocabulary::kPad);
    b.tgt_out.assign(static_cast<std::size_t>(b.rows) * b.tgt_cols, Vocabulary::kPad);
    for (std::size_t i = at; i < end; ++i) {
      int r = static_cast<int>(i - at);
      const auto& [s, t] = kept[i];
      b.src_len.push_back(static_cast<int>(s.size()));
      b.tgt_len.push_back(static_cast<int>(t.size()) + 1);
      std::copy(s.begin(), s.end(),
                b.src.begin() + static_cast<std::size_t>(r) * b.src_cols);
      auto in_row = b.tgt_in.begin() + static_cast<std::size_t>(r) * b.tgt_cols;
      auto out_row = b.tgt_out.begin() + static_cast<std::size_t>(r) * b.tgt_cols;
      *in_row = Vocabulary::kBos;
      std::copy(t.begin(), t.end(), in_row + 1);
      std::copy(t.begin(), t.end(), out_row);
      *(out_row + t.size()) = Vocabulary::kEos;
    }
    plan.batches.push_back(std::move(b));
  }
  return plan;
}

}  // namespace gma
