#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cdl/config.hpp"
#include "cdl/error.hpp"

using namespace cdl;

TEST_CASE("full-size defaults") {
  const RunConfig c;
  CHECK(c.trainer.pretrain_lr == 0.05);
  CHECK(c.trainer.cdl_lr == 1e-5);
  CHECK(c.trainer.batch_size == 64);
  CHECK(c.trainer.pretrain_epochs == 10);
  CHECK(c.curriculum.length == 100000);
  CHECK(c.curriculum.c0_squared == 0.01);
  CHECK_FALSE(c.curriculum.balance_emotions);
  CHECK(c.rewards.lambda == 0.5);
  CHECK(c.rewards.gamma == 1.0);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("desk preset") {
  const RunConfig d = RunConfig::desk_scale();
  CHECK(d.curriculum.length == 2000);
  CHECK(d.curriculum.balance_emotions);
  CHECK(d.data.synthetic_pairs == 600);
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("JSON round trip and partial overrides") {
  const RunConfig d = RunConfig::desk_scale();
  CHECK(run_config_from_json(to_json(d)) == d);
  const RunConfig p = run_config_from_json(nlohmann::json::parse(R"({"rewards": {"lambda": 0.25}})"), d);
  CHECK(p.rewards.lambda == 0.25);
  CHECK(p.curriculum == d.curriculum);
}

TEST_CASE("unknown keys are all reported") {
  const auto j = nlohmann::json::parse(R"({"extra": 1, "trainer": {"bogus": 2, "max_step": 3}})");
  try {
    run_config_from_json(j);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("extra") != std::string::npos);
    CHECK(msg.find("trainer.bogus") != std::string::npos);
    CHECK(msg.find("trainer.max_step") != std::string::npos);
  }
}

TEST_CASE("invalid values are rejected") {
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"rewards": {"lambda": -1}})")), ValidationError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"data": {"split": [0.5, 0.5, 0.0]}})")),
                  ValidationError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"data": {"synthetic_pairs": 10}})")),
                  ValidationError);
}

TEST_CASE("config and dataset files") {
  const auto dir = std::filesystem::temp_directory_path() / "cdl_test_config";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "run.json") << R"({"trainer": {"seed": 9}})";
  CHECK(load_run_config(dir / "run.json").trainer.seed == 9);
  CHECK_THROWS_AS(load_run_config(dir / "missing.json"), Error);

  DataConfig dc;
  dc.synthetic_pairs = 100;
  dc.synthetic_vocab = 60;
  const Dataset data = make_synthetic_dataset(dc);
  CHECK(data.train.size() + data.valid.size() + data.test.size() == 100);
  save_dataset(data, dir / "data");
  const Dataset back = load_dataset(dir / "data");
  CHECK(back.vocab == data.vocab);
  CHECK(back.train.size() == data.train.size());
  CHECK(back.lexicon.hash() == data.lexicon.hash());
  std::filesystem::remove(dir / "data" / "test.tsv");
  try {
    load_dataset(dir / "data");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("test.tsv") != std::string::npos);
  }

  RunConfig rc;
  bind_vocabulary(rc, data.vocab);
  CHECK(rc.model.vocab_size == static_cast<int>(data.vocab.size()));
  CHECK(rc.classifier.vocab_size == static_cast<int>(data.vocab.size()));
  write_meta(dir, "test", rc, {{"note", 1}});
  std::ifstream in(dir / "meta.json");
  const auto meta = nlohmann::json::parse(in);
  CHECK(meta["command"] == "test");
  CHECK(meta["note"] == 1);
  CHECK(meta.contains("seeds"));
  std::filesystem::remove_all(dir);
}
