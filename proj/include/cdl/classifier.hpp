#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "cdl/autograd.hpp"
#include "cdl/corpus.hpp"
#include "cdl/random.hpp"

namespace cdl {

struct ClassifierConfig {
  int vocab_size = 0;
  std::vector<int> filter_widths = {2, 3, 4};
  int filters = 64;
  int word_dim = 100;
  int num_classes = kNumEmotions;
  double dropout = 0.5;
  int epochs = 10;
  int patience = 3;
  int batch_size = 32;
  double lr = 1e-3;
  double holdout_fraction = 0.1;

  void validate() const;
  bool operator==(const ClassifierConfig&) const = default;
};

void to_json(nlohmann::json& j, const ClassifierConfig& c);
void from_json(const nlohmann::json& j, ClassifierConfig& c);

using ClassProbabilities = std::array<double, kNumEmotions>;

/// TextCNN sentence-emotion classifier: word embeddings, one bank of
/// ReLU convolutions per filter width with max-over-time pooling, dropout
/// and a softmax output layer.
class EmotionClassifier {
 public:
  EmotionClassifier() = default;
  EmotionClassifier(const ClassifierConfig& config, std::uint64_t seed);

  const ClassifierConfig& config() const { return config_; }
  ag::ParameterStore& params() { return params_; }
  const ag::ParameterStore& params() const { return params_; }
  std::uint64_t hash() const { return params_.hash(); }

  /// Throws ValidationError on an empty sentence. Inference never applies dropout.
  ClassProbabilities predict_proba(std::span<const TokenId> sentence) const;
  Emotion predict(std::span<const TokenId> sentence) const;

  /// Adds the gradient of the cross-entropy for one sentence, scaled by
  /// `weight`; dropout masks are drawn from `rng`. Returns the loss.
  double accumulate_gradient(std::span<const TokenId> sentence, Emotion label, double weight, Rng& rng);

 private:
  ag::Var logits(ag::Graph& g, std::span<const TokenId> sentence, ag::ParameterStore* trainable, Rng* dropout) const;

  ClassifierConfig config_;
  ag::ParameterStore params_;
  std::size_t embedding_ = 0;
  std::vector<std::size_t> conv_w_, conv_b_;
  std::size_t out_w_ = 0, out_b_ = 0;
};

struct LabeledSentence {
  std::span<const TokenId> ids;
  Emotion label;
};

/// Every query with e_q and every response with e_r.
std::vector<LabeledSentence> labeled_sentences(const Corpus& corpus);

struct ClassifierTrainingReport {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_holdout_accuracy = 0.0;
  std::vector<double> holdout_accuracy;  // per epoch
};

/// Trains on the labeled sentences of `corpus`, holding out a seeded
/// fraction for early stopping; returns the best-by-holdout parameters.
/// Throws ValidationError when the corpus has fewer than two classes.
EmotionClassifier train_classifier(const Corpus& corpus, const ClassifierConfig& config, std::uint64_t seed,
                                   ClassifierTrainingReport* report = nullptr);

struct AccuracyReport {
  double overall = 0.0;
  std::array<double, kNumEmotions> per_category{};  // NaN when a category is absent
  std::array<std::size_t, kNumEmotions> support{};
};

/// Fraction of argmax matches over the labeled sentences of the corpus.
/// Throws ValidationError on an empty corpus.
double accuracy(const EmotionClassifier& cls, const Corpus& corpus);
AccuracyReport accuracy_report(const EmotionClassifier& cls, std::span<const LabeledSentence> sentences);

/// Probability the classifier assigns to the gold category.
double confidence(const EmotionClassifier& cls, std::span<const TokenId> sentence, Emotion gold);

void save_classifier(const EmotionClassifier& cls, const Vocabulary& vocab, const std::filesystem::path& dir);
EmotionClassifier load_classifier(const std::filesystem::path& dir, const Vocabulary& vocab);

}  // namespace cdl
