#pragma once

#include <string>
#include <vector>

namespace gma {

// Word alignment links, 1-based on both sides. Links default to "sure";
// possible-only links participate in error-rate scoring but carry no recall
// obligation.
struct AlignmentLink {
  int src = 0;
  int tgt = 0;
  bool sure = true;

  friend bool operator==(const AlignmentLink& a, const AlignmentLink& b) {
    return a.src == b.src && a.tgt == b.tgt && a.sure == b.sure;
  }
};

struct SentenceAlignment {
  std::vector<AlignmentLink> links;
};

using AlignmentSet = std::vector<SentenceAlignment>;

// Pharaoh text format: one sentence per line, space-separated "s-t" pairs,
// 0-based in the file, converted to 1-based in memory. Parse errors carry
// the 1-based line number.
AlignmentSet parse_alignments(const std::string& text);
AlignmentSet load_alignments(const std::string& path);
std::string format_alignments(const AlignmentSet& set);
void save_alignments(const std::string& path, const AlignmentSet& set);

}  // namespace gma
