#include "gma/alignment.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gma {

namespace {

AlignmentLink parse_link(const std::string& tok, std::size_t line_no) {
  std::size_t dash = tok.find('-');
  if (dash == std::string::npos || dash == 0 || dash + 1 >= tok.size())
    throw std::runtime_error("alignments: line " + std::to_string(line_no) +
                             ": malformed pair '" + tok + "'");
  int s, t;
  try {
    std::size_t used = 0;
    s = std::stoi(tok.substr(0, dash), &used);
    if (used != dash) throw std::invalid_argument("");
    std::string rhs = tok.substr(dash + 1);
    t = std::stoi(rhs, &used);
    if (used != rhs.size()) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw std::runtime_error("alignments: line " + std::to_string(line_no) +
                             ": malformed pair '" + tok + "'");
  }
  if (s < 0 || t < 0)
    throw std::runtime_error("alignments: line " + std::to_string(line_no) +
                             ": negative index in '" + tok + "'");
  return AlignmentLink{s + 1, t + 1, true};
}

}  // namespace

AlignmentSet parse_alignments(const std::string& text) {
  AlignmentSet set;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    SentenceAlignment sent;
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) sent.links.push_back(parse_link(tok, line_no));
    set.push_back(std::move(sent));
  }
  return set;
}

AlignmentSet load_alignments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("alignments: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_alignments(buf.str());
}

std::string format_alignments(const AlignmentSet& set) {
  std::ostringstream out;
  for (const auto& sent : set) {
    bool first = true;
    for (const auto& link : sent.links) {
      if (!first) out << ' ';
      out << (link.src - 1) << '-' << (link.tgt - 1);
      first = false;
    }
    out << '\n';
  }
  return out.str();
}

void save_alignments(const std::string& path, const AlignmentSet& set) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("alignments: cannot write " + path);
  out << format_alignments(set);
}

}  // namespace gma
