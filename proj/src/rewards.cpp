#include "cdl/rewards.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "cdl/error.hpp"

namespace cdl {

void RewardConfig::validate() const {
  if (!(lambda >= 0.0) || !(gamma >= 0.0)) throw ValidationError("reward config: lambda and gamma must be >= 0");
  if (emo_only && con_only) throw ValidationError("reward config: emo_only and con_only are exclusive");
}

void to_json(nlohmann::json& j, const RewardConfig& c) {
  j = nlohmann::json{{"lambda", c.lambda}, {"gamma", c.gamma}, {"emo_only", c.emo_only}, {"con_only", c.con_only}};
}

void from_json(const nlohmann::json& j, RewardConfig& c) {
  c.lambda = j.value("lambda", c.lambda);
  c.gamma = j.value("gamma", c.gamma);
  c.emo_only = j.value("emo_only", c.emo_only);
  c.con_only = j.value("con_only", c.con_only);
}

void to_json(nlohmann::json& j, const RewardBreakdown& r) {
  j = nlohmann::json{{"r_e1", r.r_e1}, {"r_e2", r.r_e2},         {"r_e", r.r_e},
                     {"r_c", r.r_c},   {"total", r.total}, {"baseline", r.baseline},
                     {"advantage", r.advantage}};
}

double implicit_emotion_reward(const EmotionClassifier& cls, std::span<const TokenId> sentence, Emotion e) {
  if (sentence.empty()) {
    spdlog::warn("implicit emotion reward of an empty sentence is 0");
    return 0.0;
  }
  return confidence(cls, sentence, e);
}

double explicit_emotion_reward(const LexiconIndex& lexicon, std::span<const TokenId> sentence, Emotion e) {
  std::size_t content = 0, hits = 0;
  for (TokenId id : sentence) {
    if (Vocabulary::is_special(id) && id != Vocabulary::kUnk) continue;
    ++content;
    if (e != Emotion::Neutral && lexicon.is_emotion_word(id, e)) ++hits;
  }
  return content ? static_cast<double>(hits) / static_cast<double>(content) : 0.0;
}

double explicit_emotion_reward(const EmotionLexicon& lexicon, std::span<const std::string> sentence, Emotion e) {
  if (sentence.empty() || e == Emotion::Neutral) return 0.0;
  std::size_t hits = 0;
  for (const auto& w : sentence)
    if (lexicon.category_of(w) == e) ++hits;
  return static_cast<double>(hits) / static_cast<double>(sentence.size());
}

double emotion_reward(double r_e1, double r_e2, const RewardConfig& config) { return r_e1 + config.lambda * r_e2; }

double content_reward(const SeqModel& dual_model, std::span<const TokenId> original, Emotion original_emotion,
                      std::span<const TokenId> generated) {
  while (!original.empty() && original.back() == Vocabulary::kPad) original = original.first(original.size() - 1);
  const double lp = dual_model.sequence_logprob(generated, original_emotion, original);
  // scored tokens: the original plus its EOS
  return std::exp(lp / static_cast<double>(original.size() + 1));
}

double total_reward(double r_c, double r_e, const RewardConfig& config) {
  if (config.emo_only) return config.gamma * r_e;
  if (config.con_only) return r_c;
  return r_c + config.gamma * r_e;
}

double advantage(double total_sampled, double total_greedy) { return total_sampled - total_greedy; }

RewardBreakdown score_generation(const RewardContext& ctx, std::span<const TokenId> generated,
                                 const RewardConfig& config) {
  RewardBreakdown r;
  r.r_e1 = implicit_emotion_reward(*ctx.classifier, generated, ctx.target_emotion);
  r.r_e2 = explicit_emotion_reward(ctx.dual_model->lexicon(), generated, ctx.target_emotion);
  r.r_e = emotion_reward(r.r_e1, r.r_e2, config);
  r.r_c = content_reward(*ctx.dual_model, ctx.original, ctx.original_emotion, generated);
  r.total = total_reward(r.r_c, r.r_e, config);
  r.advantage = r.total;
  return r;
}

RewardBreakdown score_with_baseline(const RewardContext& ctx, std::span<const TokenId> sampled,
                                    std::span<const TokenId> greedy, const RewardConfig& config) {
  RewardBreakdown r = score_generation(ctx, sampled, config);
  r.baseline = score_generation(ctx, greedy, config).total;
  r.advantage = advantage(r.total, r.baseline);
  return r;
}

}  // namespace cdl
