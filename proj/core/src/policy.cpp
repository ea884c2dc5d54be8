#include "gma/policy.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gma {

namespace {

int greedy_pick(const std::vector<double>& logits) {
  if (logits.empty()) throw std::logic_error("policy: empty logits");
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.size()); ++i)
    if (logits[static_cast<std::size_t>(i)] > logits[static_cast<std::size_t>(best)]) best = i;
  return best;  // ties keep the lowest id
}

}  // namespace

StreamResult simulate_streaming(const Model& model, const std::vector<int>& src_ids,
                                double delta, int max_len) {
  if (src_ids.empty()) throw std::invalid_argument("policy: empty source");
  int J = static_cast<int>(src_ids.size());
  if (max_len <= 0) max_len = 2 * J + 10;

  IncrementalDecoder dec(model, delta);
  StreamResult res;
  res.trace.source_len = J;
  int next_read = 0;
  for (;;) {
    StepOutcome step = dec.propose();
    if (step.wait) {
      if (next_read < J) {
        dec.push_source(src_ids[static_cast<std::size_t>(next_read++)]);
        res.trace.actions.push_back('R');
      } else {
        dec.mark_source_complete();
      }
      continue;
    }
    int token = greedy_pick(step.logits);
    dec.commit(token, step);
    res.trace.actions.push_back('W');
    res.trace.g.push_back(step.write_g);
    if (token == Vocabulary::kEos) break;
    res.hypothesis.push_back(token);
    if (static_cast<int>(dec.written().size()) >= max_len) {
      res.trace.truncated = true;
      break;
    }
  }
  return res;
}

PolicyTrace trace_from_g(const std::vector<int>& g, int J) {
  if (J < 1) throw std::invalid_argument("trace: J must be >= 1");
  if (g.empty()) throw std::invalid_argument("trace: empty schedule");
  PolicyTrace t;
  t.g = g;
  t.source_len = J;
  int reads = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    int gi = g[i];
    if (gi < 1 || gi > J)
      throw std::invalid_argument("trace: g out of range at step " + std::to_string(i + 1));
    if (gi < reads)
      throw std::invalid_argument("trace: g decreases at step " + std::to_string(i + 1));
    while (reads < gi) {
      t.actions.push_back('R');
      ++reads;
    }
    t.actions.push_back('W');
  }
  return t;
}

PolicyTrace wait_k_trace(int k, int J, int I) {
  if (k < 1) throw std::invalid_argument("wait_k: k must be >= 1");
  if (J < 1 || I < 1) throw std::invalid_argument("wait_k: J and I must be >= 1");
  std::vector<int> g(static_cast<std::size_t>(I));
  for (int i = 1; i <= I; ++i)
    g[static_cast<std::size_t>(i - 1)] = std::min(k + i - 1, J);
  return trace_from_g(g, J);
}

TraceCheck validate_trace(const PolicyTrace& trace) {
  TraceCheck res;
  auto fail = [&res](std::string why) {
    res.ok = false;
    res.violation = std::move(why);
    return res;
  };
  if (trace.g.empty() || trace.actions.empty()) return fail("empty trace");
  if (trace.source_len < 1) return fail("source length must be >= 1");
  std::size_t writes = 0;
  for (char c : trace.actions)
    if (c != 'R' && c != 'W') return fail(std::string("unknown action '") + c + "'");
    else if (c == 'W') ++writes;
  if (writes != trace.g.size())
    return fail("action string has " + std::to_string(writes) + " writes for " +
                std::to_string(trace.g.size()) + " schedule entries");
  if (trace.actions.back() != 'W') return fail("trailing reads after the last write");

  int reads = 0;
  std::size_t next_write = 0;
  for (char c : trace.actions) {
    if (c == 'R') {
      if (++reads > trace.source_len) return fail("reads past the end of the source");
      continue;
    }
    int expect = trace.g[next_write];
    ++next_write;
    if (expect < 1 || expect > trace.source_len)
      return fail("g(" + std::to_string(next_write) + ")=" + std::to_string(expect) +
                  " outside [1, " + std::to_string(trace.source_len) + "]");
    if (next_write > 1 && expect < trace.g[next_write - 2])
      return fail("schedule decreases at step " + std::to_string(next_write));
    if (reads != expect)
      return fail("token " + std::to_string(next_write) + " written after " +
                  std::to_string(reads) + " reads but g(" + std::to_string(next_write) +
                  ")=" + std::to_string(expect));
  }
  return res;
}

std::string format_traces(const std::vector<TraceRecord>& records) {
  std::ostringstream out;
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.hypothesis.size(); ++i) {
      if (i) out << ' ';
      out << r.hypothesis[i];
    }
    out << '\t';
    for (std::size_t i = 0; i < r.trace.g.size(); ++i) {
      if (i) out << ',';
      out << r.trace.g[i];
    }
    out << '\t' << r.trace.actions << '\t' << r.trace.source_len << '\n';
  }
  return out.str();
}

namespace {

int parse_int_field(const std::string& s, std::size_t line, const std::string& name) {
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(name + ": line " + std::to_string(line) +
                             ": bad integer '" + s + "'");
  }
}

}  // namespace

std::vector<TraceRecord> parse_traces(const std::string& text, const std::string& name) {
  std::vector<TraceRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4)
      throw std::runtime_error(name + ": line " + std::to_string(lineno) +
                               ": expected 4 tab-separated fields, got " +
                               std::to_string(fields.size()));
    TraceRecord rec;
    std::istringstream toks(fields[0]);
    std::string tok;
    while (toks >> tok) rec.hypothesis.push_back(tok);
    if (!fields[1].empty()) {
      std::size_t pos = 0;
      while (pos <= fields[1].size()) {
        std::size_t comma = fields[1].find(',', pos);
        std::string piece = fields[1].substr(
            pos, comma == std::string::npos ? comma : comma - pos);
        rec.trace.g.push_back(parse_int_field(piece, lineno, name));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
    }
    rec.trace.actions = fields[2];
    rec.trace.source_len = parse_int_field(fields[3], lineno, name);
    TraceCheck check = validate_trace(rec.trace);
    if (!check.ok)
      throw std::runtime_error(name + ": line " + std::to_string(lineno) + ": " +
                               check.violation);
    out.push_back(std::move(rec));
  }
  return out;
}

void save_traces(const std::string& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << format_traces(records);
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<TraceRecord> load_traces(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_traces(buf.str(), path);
}

}  // namespace gma
