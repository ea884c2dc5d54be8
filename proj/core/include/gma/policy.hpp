#pragma once

#include <string>
#include <vector>

#include "gma/data.hpp"
#include "gma/model.hpp"

namespace gma {

// Read/write schedule of one decoded sentence. g[i] is how many source
// tokens had been read when target token i+1 was written; actions is the
// chronological R/W string; source_len is the full source length J
// (including <eos>).
struct PolicyTrace {
  std::vector<int> g;
  std::string actions;
  int source_len = 0;
  bool truncated = false;  // hit the write cap before emitting <eos>
};

struct StreamResult {
  std::vector<int> hypothesis;  // content ids, <eos> stripped
  PolicyTrace trace;            // g includes the final <eos> write
};

// Feed the source one token at a time; write greedily whenever every
// position track is satisfied, read otherwise. max_len 0 means 2*J + 10.
StreamResult simulate_streaming(const Model& model, const std::vector<int>& src_ids,
                                double delta, int max_len = 0);

// Rebuild the action string for a known schedule; g must be non-decreasing
// within [1, J].
PolicyTrace trace_from_g(const std::vector<int>& g, int J);

// Reference schedule g(i) = min(k + i - 1, J) for I writes.
PolicyTrace wait_k_trace(int k, int J, int I);

struct TraceCheck {
  bool ok = true;
  std::string violation;
};

// Replays the action string and confirms it reproduces g: every write must
// follow exactly g[i] reads, g must be non-decreasing in [1, source_len],
// and reads may not exceed the source.
TraceCheck validate_trace(const PolicyTrace& trace);

// Tab-separated trace records: tokens, comma-joined g, actions, source_len.
struct TraceRecord {
  Sentence hypothesis;
  PolicyTrace trace;
};

std::string format_traces(const std::vector<TraceRecord>& records);
std::vector<TraceRecord> parse_traces(const std::string& text, const std::string& name);
void save_traces(const std::string& path, const std::vector<TraceRecord>& records);
std::vector<TraceRecord> load_traces(const std::string& path);

}  // namespace gma
