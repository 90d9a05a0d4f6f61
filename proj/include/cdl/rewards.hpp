#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdl/classifier.hpp"
#include "cdl/corpus.hpp"
#include "cdl/ecm_model.hpp"

namespace cdl {

struct RewardConfig {
  double lambda = 0.5;  // weight of the explicit (lexicon) emotion reward
  double gamma = 1.0;   // weight of the emotion reward against content
  bool emo_only = false;  // drop r_c: reward = gamma * r_e
  bool con_only = false;  // drop r_e: reward = r_c

  void validate() const;
  bool operator==(const RewardConfig&) const = default;
};

void to_json(nlohmann::json& j, const RewardConfig& c);
void from_json(const nlohmann::json& j, RewardConfig& c);

struct RewardBreakdown {
  double r_e1 = 0.0;
  double r_e2 = 0.0;
  double r_e = 0.0;
  double r_c = 0.0;
  double total = 0.0;
  double baseline = 0.0;
  double advantage = 0.0;
};

void to_json(nlohmann::json& j, const RewardBreakdown& r);

/// Classifier probability of `e` for the sentence; 0 (with a warning) when empty.
double implicit_emotion_reward(const EmotionClassifier& cls, std::span<const TokenId> sentence, Emotion e);

/// Occurrences of lexicon(e) tokens over the number of content tokens.
/// Special symbols are not counted; Neutral and empty sentences give 0.
double explicit_emotion_reward(const LexiconIndex& lexicon, std::span<const TokenId> sentence, Emotion e);
double explicit_emotion_reward(const EmotionLexicon& lexicon, std::span<const std::string> sentence, Emotion e);

double emotion_reward(double r_e1, double r_e2, const RewardConfig& config);

/// Per-token geometric-mean probability of reconstructing `original`
/// (plus its EOS) from `generated` under the dual model.
double content_reward(const SeqModel& dual_model, std::span<const TokenId> original, Emotion original_emotion,
                      std::span<const TokenId> generated);

double total_reward(double r_c, double r_e, const RewardConfig& config);
double advantage(double total_sampled, double total_greedy);

/// Everything needed to score one generated sentence. `original` is the
/// source the generator conditioned on; the dual model reconstructs it
/// under `original_emotion`.
struct RewardContext {
  const EmotionClassifier* classifier = nullptr;
  const SeqModel* dual_model = nullptr;
  std::span<const TokenId> original;
  Emotion original_emotion = Emotion::Neutral;
  Emotion target_emotion = Emotion::Neutral;
};

/// Reward of one generated sentence (baseline 0, advantage = total).
RewardBreakdown score_generation(const RewardContext& ctx, std::span<const TokenId> generated,
                                 const RewardConfig& config);

/// Reward of the sampled sentence with the greedy sentence's total as baseline.
RewardBreakdown score_with_baseline(const RewardContext& ctx, std::span<const TokenId> sampled,
                                    std::span<const TokenId> greedy, const RewardConfig& config);

}  // namespace cdl
