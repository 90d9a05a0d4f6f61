#include "cdl/config.hpp"

#include <functional>

#include "cdl/checkpoint.hpp"
#include "cdl/error.hpp"

namespace cdl {

void to_json(nlohmann::json& j, const DataConfig& c) {
  j = nlohmann::json{{"synthetic_pairs", c.synthetic_pairs}, {"synthetic_vocab", c.synthetic_vocab},
                     {"split", c.split},                     {"max_vocab", c.max_vocab},
                     {"vectors", c.vectors},                 {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, DataConfig& c) {
  c.synthetic_pairs = j.value("synthetic_pairs", c.synthetic_pairs);
  c.synthetic_vocab = j.value("synthetic_vocab", c.synthetic_vocab);
  c.split = j.value("split", c.split);
  c.max_vocab = j.value("max_vocab", c.max_vocab);
  c.vectors = j.value("vectors", c.vectors);
  c.seed = j.value("seed", c.seed);
}

nlohmann::json to_json(const RunConfig& c) {
  return nlohmann::json{{"data", c.data},       {"model", c.model},           {"classifier", c.classifier},
                        {"rewards", c.rewards}, {"curriculum", c.curriculum}, {"trainer", c.trainer}};
}

void RunConfig::validate() const {
  std::vector<std::string> problems;
  auto check = [&](const char* section, const std::function<void()>& f) {
    try {
      f();
    } catch (const ValidationError& e) {
      problems.push_back(std::string(section) + ": " + e.what());
    }
  };
  check("data", [&] {
    double sum = 0.0;
    for (double r : data.split) {
      if (!(r > 0.0)) throw ValidationError("split ratios must be positive");
      sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");
    if (data.synthetic_pairs < 60) throw ValidationError("synthetic_pairs must be >= 60");
    if (data.synthetic_vocab < 60) throw ValidationError("synthetic_vocab must be >= 60");
    if (data.max_vocab < 1) throw ValidationError("max_vocab must be >= 1");
  });
  check("model", [&] {
    ModelConfig m = model;
    if (m.vocab_size == 0) m.vocab_size = static_cast<int>(Vocabulary::kNumSpecial) + 1;
    m.validate();
  });
  check("classifier", [&] {
    ClassifierConfig c = classifier;
    if (c.vocab_size == 0) c.vocab_size = static_cast<int>(Vocabulary::kNumSpecial) + 1;
    c.validate();
  });
  check("rewards", [&] { rewards.validate(); });
  check("curriculum", [&] { curriculum.validate(); });
  check("trainer", [&] { trainer.validate(); });
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
}

RunConfig RunConfig::desk_scale() {
  RunConfig c;
  c.model.encoder_layers = c.model.decoder_layers = 1;
  c.model.hidden = 32;
  c.model.word_dim = 16;
  c.model.emotion_dim = 8;
  c.classifier.filters = 16;
  c.classifier.word_dim = 16;
  c.classifier.lr = 0.01;
  c.trainer.pretrain_epochs = 12;
  c.trainer.pretrain_lr = 0.01;
  c.trainer.cdl_lr = 1e-3;
  c.trainer.batch_size = 16;
  c.trainer.max_steps = 2000;
  c.trainer.validation_interval = 100;
  c.trainer.patience = 1000;
  c.curriculum.length = 2000;
  c.curriculum.balance_emotions = true;
  return c;
}

namespace {

void collect_unknown(const nlohmann::json& given, const nlohmann::json& reference, const std::string& prefix,
                     std::vector<std::string>& out) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!reference.contains(it.key())) {
      out.push_back(key);
    } else if (it.value().is_object() && reference.at(it.key()).is_object()) {
      collect_unknown(it.value(), reference.at(it.key()), key, out);
    }
  }
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j, const RunConfig& defaults) {
  if (!j.is_object()) throw ValidationError("configuration must be a JSON object");
  const nlohmann::json reference = to_json(defaults);
  std::vector<std::string> unknown;
  collect_unknown(j, reference, "", unknown);
  if (!unknown.empty()) {
    std::string msg = "unknown configuration keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ValidationError(msg);
  }
  nlohmann::json merged = reference;
  merged.merge_patch(j);
  RunConfig c;
  try {
    c.data = merged.at("data").get<DataConfig>();
    c.model = merged.at("model").get<ModelConfig>();
    c.classifier = merged.at("classifier").get<ClassifierConfig>();
    c.rewards = merged.at("rewards").get<RewardConfig>();
    c.curriculum = merged.at("curriculum").get<CurriculumConfig>();
    c.trainer = merged.at("trainer").get<TrainerConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("configuration has a value of the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& defaults) {
  if (!std::filesystem::exists(path)) throw Error("config file not found: " + path.string());
  return run_config_from_json(read_json_file(path), defaults);
}

// ---------------------------------------------------------------------------

Dataset make_synthetic_dataset(const DataConfig& config) {
  SyntheticCorpus syn = generate_synthetic_corpus(config.synthetic_pairs, config.synthetic_vocab, config.seed);
  auto parts = split_corpus(syn.corpus, config.split, config.seed);
  Dataset d;
  d.train = std::move(parts[0]);
  d.valid = std::move(parts[1]);
  d.test = std::move(parts[2]);
  d.lexicon = std::move(syn.lexicon);
  d.vocab = std::move(syn.vocab);
  return d;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_corpus(data.train, dir / "train.tsv");
  save_corpus(data.valid, dir / "valid.tsv");
  save_corpus(data.test, dir / "test.tsv");
  data.lexicon.save(dir / "lexicon.json");
  data.vocab.save(dir / "vocab.txt");
}

Dataset load_dataset(const std::filesystem::path& dir, std::size_t max_vocab) {
  for (const char* f : {"train.tsv", "valid.tsv", "test.tsv", "lexicon.json"})
    if (!std::filesystem::exists(dir / f)) throw Error("dataset file not found: " + (dir / f).string());
  Dataset d;
  d.lexicon = EmotionLexicon::load(dir / "lexicon.json");
  d.train = load_corpus(dir / "train.tsv");
  d.vocab = std::filesystem::exists(dir / "vocab.txt") ? Vocabulary::load(dir / "vocab.txt")
                                                       : build_vocabulary(d.train, max_vocab);
  encode_corpus(d.train, d.vocab);
  d.valid = load_corpus(dir / "valid.tsv", &d.vocab);
  d.test = load_corpus(dir / "test.tsv", &d.vocab);
  d.train.split = Split::Train;
  d.valid.split = Split::Valid;
  d.test.split = Split::Test;
  return d;
}

void bind_vocabulary(RunConfig& config, const Vocabulary& vocab) {
  config.model.vocab_size = static_cast<int>(vocab.size());
  config.classifier.vocab_size = static_cast<int>(vocab.size());
}

void write_meta(const std::filesystem::path& dir, const std::string& command, const RunConfig& config,
                const nlohmann::json& extra) {
  std::filesystem::create_directories(dir);
  nlohmann::json j{{"command", command},
                   {"config", to_json(config)},
                   {"seeds", {{"data", config.data.seed}, {"trainer", config.trainer.seed}}}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  write_json_file(dir / "meta.json", j);
}

}  // namespace cdl
