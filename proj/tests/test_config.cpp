#include <stdexcept>
#include <string>

#include <doctest.h>

#include "gma/config.hpp"

using namespace gma;

TEST_CASE("an empty document yields the defaults") {
  RunConfig cfg = parse_run_config("{}", "cfg");
  CHECK(cfg.model.d_model == 32);
  CHECK(cfg.model.layers == 2);
  CHECK(cfg.model.encoder_causal);
  CHECK(cfg.model.gma.prior_variant == PriorVariant::gaussian);
  CHECK(cfg.model.gma.delta == 1.0);
  CHECK(cfg.train.epochs == 10);
  CHECK(cfg.data.synthetic);
  CHECK(cfg.data.task == SyntheticTask::copy);
  CHECK(cfg.out_dir == ".");
}

TEST_CASE("every section parses its own keys") {
  const char* text = R"({
    "model": {
      "d_model": 16, "layers": 3, "heads": 4, "d_ff": 32,
      "encoder_causal": false,
      "gma": {"delta": 0.5, "prior": "laplace", "sigma": "predicted",
              "sharing": "share_all", "position": "absolute"}
    },
    "train": {"epochs": 4, "batch_size": 32, "lr": 0.001, "seed": 9},
    "data": {"task": "shifted_copy", "param": 3, "vocab": 24,
             "min_len": 4, "max_len": 9, "train": 100, "dev": 10,
             "test": 10, "seed": 2},
    "out_dir": "runs/x"
  })";
  RunConfig cfg = parse_run_config(text, "cfg");
  CHECK(cfg.model.d_model == 16);
  CHECK(cfg.model.layers == 3);
  CHECK(cfg.model.heads == 4);
  CHECK_FALSE(cfg.model.encoder_causal);
  CHECK(cfg.model.gma.delta == 0.5);
  CHECK(cfg.model.gma.prior_variant == PriorVariant::laplace);
  CHECK(cfg.model.gma.sigma_mode == SigmaMode::predicted);
  CHECK(cfg.model.gma.sharing_mode == SharingMode::share_all);
  CHECK(cfg.model.gma.position_mode == PositionMode::absolute);
  CHECK(cfg.train.epochs == 4);
  CHECK(cfg.train.batch_size == 32);
  CHECK(cfg.train.lr == 0.001);
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.data.task == SyntheticTask::shifted_copy);
  CHECK(cfg.data.param == 3);
  CHECK(cfg.data.vocab == 24);
  CHECK(cfg.data.train_count == 100);
  CHECK(cfg.out_dir == "runs/x");
}

TEST_CASE("unknown and mistyped keys are named in the error") {
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"modle": {}})", "cfg"),
                       "cfg: unknown key 'modle'", std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"model": {"width": 4}})", "cfg"),
                       "cfg.model: unknown key 'width'", std::runtime_error);
  CHECK_THROWS_WITH_AS(
      parse_run_config(R"({"model": {"gma": {"spread": 1}}})", "cfg"),
      "cfg.model.gma: unknown key 'spread'", std::runtime_error);
  CHECK_THROWS_WITH_AS(
      parse_run_config(R"({"train": {"epochs": "ten"}})", "cfg"),
      "cfg.train: key 'epochs' must be an integer", std::runtime_error);
  CHECK_THROWS_WITH_AS(
      parse_run_config(R"({"model": {"gma": {"prior": "cauchy"}}})", "cfg"),
      "cfg.model.gma: unknown prior_variant: cauchy", std::runtime_error);
  CHECK_THROWS_AS(parse_run_config("{", "cfg"), std::runtime_error);
  CHECK_THROWS_AS(parse_run_config("[]", "cfg"), std::runtime_error);
}

TEST_CASE("data accepts a task or files but not both") {
  CHECK_THROWS_WITH_AS(
      parse_run_config(
          R"({"data": {"task": "copy", "train_src": "a", "train_tgt": "b"}})",
          "cfg"),
      "cfg.data: choose a synthetic task or corpus files, not both",
      std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"data": {"vocab": 8}})", "cfg"),
                       "cfg.data: needs a synthetic 'task' or corpus files",
                       std::runtime_error);
  RunConfig files = parse_run_config(
      R"({"data": {"train_src": "s.txt", "train_tgt": "t.txt", "min_freq": 2}})",
      "cfg");
  CHECK_FALSE(files.data.synthetic);
  CHECK(files.data.train_src == "s.txt");
  CHECK(files.data.min_freq == 2);
  CHECK_THROWS_AS(
      parse_run_config(R"({"data": {"train_src": "only_one_side"}})", "cfg"),
      std::invalid_argument);
  CHECK_THROWS_AS(
      parse_run_config(R"({"data": {"task": "copy", "min_len": 0}})", "cfg"),
      std::invalid_argument);
}

TEST_CASE("configs survive a serialize and reparse cycle") {
  RunConfig cfg = parse_run_config(
      R"({"model": {"layers": 3, "gma": {"prior": "linear", "delta": 2.0}},
          "train": {"epochs": 7},
          "data": {"task": "local_reorder", "param": 2},
          "out_dir": "out"})",
      "cfg");
  std::string text = run_config_to_json_string(cfg);
  RunConfig back = parse_run_config(text, "round");
  CHECK(back.model.layers == 3);
  CHECK(back.model.gma.prior_variant == PriorVariant::linear);
  CHECK(back.model.gma.delta == 2.0);
  CHECK(back.train.epochs == 7);
  CHECK(back.data.task == SyntheticTask::local_reorder);
  CHECK(back.data.param == 2);
  CHECK(back.out_dir == "out");
}
