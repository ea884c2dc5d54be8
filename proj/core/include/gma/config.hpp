#pragma once

#include <cstdint>
#include <string>

#include "gma/data.hpp"
#include "gma/model.hpp"

namespace gma {

// Where training data comes from: a synthetic generator (task set) or
// parallel text files (paths set). Exactly one of the two.
struct DataSpec {
  bool synthetic = true;
  SyntheticTask task = SyntheticTask::copy;
  int param = 0;
  int vocab = 20;  // generated vocabulary size including the specials
  int min_len = 5;
  int max_len = 15;
  int train_count = 2000;
  int dev_count = 200;
  int test_count = 200;
  std::uint64_t seed = 7;

  std::string train_src, train_tgt, dev_src, dev_tgt;
  int min_freq = 1;

  void validate() const;
};

struct RunConfig {
  ModelConfig model;  // vocab sizes stay 0 until the data is loaded
  TrainOptions train;
  DataSpec data;
  std::string out_dir = ".";
};

// Strict single-document JSON: unknown keys and wrong types are errors
// naming the offending key. `name` labels error messages (usually the path).
RunConfig parse_run_config(const std::string& json_text, const std::string& name);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json_string(const RunConfig& cfg);

}  // namespace gma
