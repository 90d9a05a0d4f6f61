#include <doctest.h>

#include <cmath>

#include "cdl/classifier.hpp"
#include "cdl/ecm_model.hpp"
#include "cdl/error.hpp"
#include "cdl/rewards.hpp"
#include "fixtures.hpp"

using namespace cdl;

namespace {

struct Setup {
  Vocabulary vocab = fixtures::toy_vocab();
  EmotionLexicon lexicon = fixtures::toy_lexicon();
  LexiconIndex index{lexicon, vocab};
  ModelConfig config = fixtures::tiny_config(static_cast<int>(vocab.size()));

  TokenId id(const char* t) const { return vocab.id(t); }
};

EmotionClassifier small_classifier(std::size_t vocab, std::uint64_t seed) {
  ClassifierConfig c;
  c.vocab_size = static_cast<int>(vocab);
  c.filters = 4;
  c.word_dim = 4;
  return EmotionClassifier(c, seed);
}

/// Neutral-target model whose every step puts the given probability mass on
/// the listed tokens (everything else ~0).
SeqModel peaked_model(const Setup& s, const std::vector<std::pair<TokenId, double>>& mass) {
  SeqModel m(s.config, s.index, 1);
  for (auto& p : m.params()) p.value.setZero();
  auto& b = m.params()[fixtures::param_index(m.params(), "out.generic.b")].value;
  b.setConstant(-60.0);
  for (auto [t, p] : mass) b(t, 0) = std::log(p);
  return m;
}

}  // namespace

TEST_CASE("RewardConfig defaults and validation") {
  RewardConfig c;
  CHECK(c.lambda == 0.5);
  CHECK(c.gamma == 1.0);
  CHECK_NOTHROW(c.validate());
  c.lambda = -0.1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.lambda = 0.5;
  c.emo_only = c.con_only = true;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("implicit reward is the classifier probability") {
  Setup s;
  const EmotionClassifier cls = small_classifier(s.vocab.size(), 3);
  const std::vector<TokenId> sent = {s.id("w0"), s.id("joy"), s.id("w2")};
  for (Emotion e : kAllEmotions)
    CHECK(implicit_emotion_reward(cls, sent, e) == cls.predict_proba(sent)[static_cast<std::size_t>(e)]);
  EmotionClassifier uniform = cls;
  for (auto& p : uniform.params()) p.value.setZero();
  CHECK(implicit_emotion_reward(uniform, sent, Emotion::Sad) == doctest::Approx(1.0 / 6.0));
  CHECK(implicit_emotion_reward(cls, std::vector<TokenId>{}, Emotion::Sad) == 0.0);
}

TEST_CASE("explicit reward counts lexicon occurrences over content tokens") {
  Setup s;
  const std::vector<TokenId> eight = {s.id("w0"), s.id("joy"), s.id("w1"), s.id("w2"),
                                      s.id("glad"), s.id("w3"), s.id("w4"), s.id("w5")};
  CHECK(explicit_emotion_reward(s.index, eight, Emotion::Happy) == 0.25);
  CHECK(explicit_emotion_reward(s.index, eight, Emotion::Sad) == 0.0);
  CHECK(explicit_emotion_reward(s.index, eight, Emotion::Neutral) == 0.0);
  const std::vector<TokenId> triple = {s.id("cry"), s.id("cry"), s.id("cry")};
  CHECK(explicit_emotion_reward(s.index, triple, Emotion::Sad) == 1.0);
  const std::vector<TokenId> with_specials = {Vocabulary::kBos, s.id("cry"), s.id("w0"), Vocabulary::kEos,
                                              Vocabulary::kPad};
  CHECK(explicit_emotion_reward(s.index, with_specials, Emotion::Sad) == 0.5);
  CHECK(explicit_emotion_reward(s.index, std::vector<TokenId>{}, Emotion::Sad) == 0.0);

  const std::vector<std::string> words = {"w0", "joy", "glad", "w1"};
  CHECK(explicit_emotion_reward(s.lexicon, words, Emotion::Happy) == 0.5);
  CHECK(explicit_emotion_reward(s.lexicon, std::vector<std::string>{}, Emotion::Happy) == 0.0);
}

TEST_CASE("reward arithmetic") {
  RewardConfig c;
  CHECK(emotion_reward(0.6, 0.25, c) == 0.725);
  CHECK(emotion_reward(1.0, 1.0, c) == 1.5);
  CHECK(total_reward(0.3, 0.725, c) == 1.025);
  RewardConfig l0;
  l0.lambda = 0.0;
  CHECK(emotion_reward(0.6, 0.25, l0) == 0.6);
  RewardConfig g0;
  g0.gamma = 0.0;
  CHECK(total_reward(0.3, 0.725, g0) == 0.3);
  RewardConfig emo;
  emo.emo_only = true;
  emo.gamma = 2.0;
  CHECK(total_reward(0.3, 0.725, emo) == 1.45);
  RewardConfig con;
  con.con_only = true;
  CHECK(total_reward(0.3, 0.725, con) == 0.3);
  CHECK(advantage(1.0, 1.0) == 0.0);
  CHECK(advantage(1.2, 0.9) == doctest::Approx(0.3));
  CHECK(advantage(0.2, 0.9) < 0.0);
}

TEST_CASE("content reward: uniform model, hand model, padding") {
  Setup s;
  SeqModel uniform(s.config, s.index, 1);
  for (auto& p : uniform.params()) p.value.setZero();
  const double v = static_cast<double>(s.vocab.size() - 2);  // PAD and BOS are never produced
  for (std::size_t len : {3u, 5u, 8u}) {
    std::vector<TokenId> original(len, s.id("w1"));
    const std::vector<TokenId> generated = {s.id("w2"), s.id("w3"), s.id("w4")};
    CHECK(content_reward(uniform, original, Emotion::Neutral, generated) == doctest::Approx(1.0 / v));
  }

  const SeqModel half = peaked_model(s, {{s.id("w0"), 0.5}, {Vocabulary::kEos, 0.5}});
  const std::vector<TokenId> original = {s.id("w0"), s.id("w0"), s.id("w0")};
  const std::vector<TokenId> gen = {s.id("w5"), s.id("w4"), s.id("w3")};
  CHECK(content_reward(half, original, Emotion::Neutral, gen) == doctest::Approx(0.5));

  SeqModel random(s.config, s.index, 4);
  const std::vector<TokenId> q = {s.id("w0"), s.id("w3"), s.id("w2")};
  std::vector<TokenId> q_pad = q;
  q_pad.insert(q_pad.end(), 3, Vocabulary::kPad);
  std::vector<TokenId> g_pad = gen;
  g_pad.push_back(Vocabulary::kPad);
  CHECK(content_reward(random, q_pad, Emotion::Sad, g_pad) == content_reward(random, q, Emotion::Sad, gen));
}

TEST_CASE("content reward is monotone in the original's token probability") {
  Setup s;
  const std::vector<TokenId> original = {s.id("w0"), s.id("w0"), s.id("w0")};
  const std::vector<TokenId> gen = {s.id("w5"), s.id("w4"), s.id("w3")};
  double prev = 0.0;
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const SeqModel m = peaked_model(s, {{s.id("w0"), p}, {s.id("w1"), 1 - p}, {Vocabulary::kEos, 0.5}});
    const double r = content_reward(m, original, Emotion::Neutral, gen);
    CHECK(r >= prev);
    prev = r;
  }
}

TEST_CASE("reward bounds over random inputs") {
  Setup s;
  const EmotionClassifier cls = small_classifier(s.vocab.size(), 9);
  const SeqModel dual(s.config, s.index, 5);
  Rng rng(mix_seed(77));
  RewardConfig c;
  for (int trial = 0; trial < 1000; ++trial) {
    auto sentence = [&](std::size_t min_len) {
      std::vector<TokenId> out(min_len + uniform_index(rng, 6));
      // UNK and content words only; the original never contains PAD/BOS/EOS mid-sequence
      for (auto& t : out)
        t = static_cast<TokenId>(Vocabulary::kUnk + uniform_index(rng, s.vocab.size() - Vocabulary::kUnk));
      return out;
    };
    const auto original = sentence(3);
    const auto generated = sentence(1);
    const Emotion e = emotion_from_id(static_cast<int>(uniform_index(rng, kNumEmotions)));
    const RewardContext ctx{&cls, &dual, original, Emotion::Like, e};
    const RewardBreakdown r = score_generation(ctx, generated, c);
    CHECK(r.r_e1 >= 0.0);
    CHECK(r.r_e1 <= 1.0);
    CHECK(r.r_e2 >= 0.0);
    CHECK(r.r_e2 <= 1.0);
    CHECK(r.r_c > 0.0);
    CHECK(r.r_c <= 1.0);
    CHECK(r.r_e == doctest::Approx(r.r_e1 + c.lambda * r.r_e2));
    CHECK(r.total == doctest::Approx(r.r_c + c.gamma * r.r_e));
    CHECK(r.total <= 1.0 + c.gamma * (1.0 + c.lambda));
  }
}

TEST_CASE("score_with_baseline and ablation compositions") {
  Setup s;
  const EmotionClassifier cls = small_classifier(s.vocab.size(), 9);
  const SeqModel dual(s.config, s.index, 5);
  const std::vector<TokenId> original = {s.id("w0"), s.id("w1"), s.id("w2")};
  const std::vector<TokenId> sampled = {s.id("joy"), s.id("w3"), s.id("w4")};
  const std::vector<TokenId> greedy = {s.id("w5"), s.id("w3"), s.id("w4")};
  const RewardContext ctx{&cls, &dual, original, Emotion::Sad, Emotion::Happy};

  RewardConfig full;
  const RewardBreakdown g = score_generation(ctx, greedy, full);
  const RewardBreakdown r = score_with_baseline(ctx, sampled, greedy, full);
  CHECK(r.baseline == g.total);
  CHECK(r.advantage == doctest::Approx(r.total - g.total));
  CHECK(r.r_e2 == doctest::Approx(1.0 / 3.0));

  RewardConfig emo;
  emo.emo_only = true;
  const RewardBreakdown re = score_with_baseline(ctx, sampled, greedy, emo);
  CHECK(re.total == doctest::Approx(emo.gamma * re.r_e));
  RewardConfig con;
  con.con_only = true;
  const RewardBreakdown rc = score_with_baseline(ctx, sampled, greedy, con);
  CHECK(rc.total == doctest::Approx(rc.r_c));
  CHECK(rc.r_c == doctest::Approx(r.r_c));

  const nlohmann::json j = r;
  for (const char* k : {"r_e1", "r_e2", "r_e", "r_c", "total", "baseline", "advantage"}) CHECK(j.contains(k));
}

TEST_CASE("a deterministic policy has zero expected advantage") {
  Setup s;
  const EmotionClassifier cls = small_classifier(s.vocab.size(), 9);
  const SeqModel dual(s.config, s.index, 5);
  const SeqModel policy = peaked_model(s, {{s.id("w2"), 1.0}});
  const std::vector<TokenId> source = {s.id("w0"), s.id("w1"), s.id("w2")};
  const Generation greedy = policy.generate_greedy(source, Emotion::Neutral);
  const RewardContext ctx{&cls, &dual, source, Emotion::Sad, Emotion::Neutral};
  Rng rng(mix_seed(3));
  double sum = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Generation g = policy.generate_sample(source, Emotion::Neutral, 1.0, rng);
    sum += score_with_baseline(ctx, g.ids, greedy.ids, RewardConfig{}).advantage;
  }
  CHECK(std::abs(sum / 200) < 1e-9);
}
