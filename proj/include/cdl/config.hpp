#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdl/classifier.hpp"
#include "cdl/corpus.hpp"
#include "cdl/curriculum.hpp"
#include "cdl/ecm_model.hpp"
#include "cdl/rewards.hpp"
#include "cdl/trainer.hpp"

namespace cdl {

struct DataConfig {
  std::size_t synthetic_pairs = 600;
  std::size_t synthetic_vocab = 120;
  std::array<double, 3> split = {0.8, 0.1, 0.1};
  std::size_t max_vocab = Vocabulary::kDefaultMaxSize;
  std::string vectors;  // optional external word vectors for evaluation
  std::uint64_t seed = 7;

  bool operator==(const DataConfig&) const = default;
};

void to_json(nlohmann::json& j, const DataConfig& c);
void from_json(const nlohmann::json& j, DataConfig& c);

/// Everything a run needs. Model / classifier vocab_size of 0 means "take
/// it from the vocabulary".
struct RunConfig {
  DataConfig data;
  ModelConfig model;
  ClassifierConfig classifier;
  RewardConfig rewards;
  CurriculumConfig curriculum;
  TrainerConfig trainer;

  /// Throws ValidationError listing every offending key.
  void validate() const;
  bool operator==(const RunConfig&) const = default;

  /// Scaled-down settings for laptop runs on the synthetic corpus.
  static RunConfig desk_scale();
};

nlohmann::json to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected (all of
/// them are listed in the error).
RunConfig run_config_from_json(const nlohmann::json& j, const RunConfig& defaults = {});
RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& defaults = {});

/// Train / valid / test splits with their lexicon and vocabulary.
struct Dataset {
  Corpus train, valid, test;
  EmotionLexicon lexicon;
  Vocabulary vocab;
};

Dataset make_synthetic_dataset(const DataConfig& config);
/// Writes corpus splits (TSV), lexicon.json and vocab.txt.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
/// Reads {train,valid,test}.tsv and lexicon.json; vocab.txt is used when
/// present, otherwise the vocabulary is built from the training split.
Dataset load_dataset(const std::filesystem::path& dir, std::size_t max_vocab = Vocabulary::kDefaultMaxSize);

/// Fills vocab-dependent sizes.
void bind_vocabulary(RunConfig& config, const Vocabulary& vocab);

/// meta.json: command, resolved config, seeds, extra fields.
void write_meta(const std::filesystem::path& dir, const std::string& command, const RunConfig& config,
                const nlohmann::json& extra = nlohmann::json::object());

}  // namespace cdl
