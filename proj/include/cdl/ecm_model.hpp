#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdl/autograd.hpp"
#include "cdl/corpus.hpp"
#include "cdl/nn.hpp"
#include "cdl/random.hpp"

namespace cdl {

/// Shape of one ECM-style encoder-decoder.
struct ModelConfig {
  int vocab_size = 0;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int hidden = 256;
  int word_dim = 100;
  int emotion_dim = 100;
  int num_emotions = kNumEmotions;
  int max_decode_length = static_cast<int>(kMaxUtteranceLength);
  int min_decode_length = static_cast<int>(kMinUtteranceLength);

  /// Throws ValidationError on non-positive dimensions.
  void validate() const;
  std::size_t parameter_count() const;
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Terms of the ECM training objective for one sequence.
struct LossBreakdown {
  double nll = 0.0;         // -sum_t log o_t(gold_t)
  double type_loss = 0.0;   // word-type (emotion vs generic) cross-entropy
  double memory_reg = 0.0;  // ||M_I|| after the last step
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double s) const;
};

/// Combines per-step quantities into the objective: gold probabilities
/// o_t(gold), emotion-word gate values alpha_t and the gold word types q_t.
/// When `type_supervised` is false (Neutral target) the type term is 0.
LossBreakdown compose_loss(std::span<const double> gold_probs, std::span<const double> alphas,
                           std::span<const std::uint8_t> is_emotion_word, double final_memory_norm,
                           bool type_supervised = true);

enum class Direction { Forward, Backward };
std::string_view direction_name(Direction d);

/// One conditional generation problem: source sequence, target sequence
/// and the emotion the target must express. Forward = (query -> response,
/// e_r); backward = (response -> query, e_q).
struct Seq2SeqExample {
  std::span<const TokenId> source;
  std::span<const TokenId> target;
  Emotion emotion = Emotion::Neutral;
};

Seq2SeqExample make_example(const DialoguePair& pair, Direction direction);

struct Generation {
  std::vector<TokenId> ids;           // content tokens, no EOS
  std::vector<double> token_logprobs;  // per emitted token, plus EOS when terminated
  bool terminated = false;             // ended by EOS rather than the length cap

  double logprob() const;
};

/// Teacher-forced per-step view used for invariant checks.
struct StepTrace {
  ag::Vector probs;
  double alpha = 0.0;
  double memory_norm = 0.0;
  ag::Vector emotion_head;  // P_emotion (empty when the head is disabled)
  ag::Vector generic_head;  // P_generic
};

/// ECM-style attentive GRU encoder-decoder with emotion category
/// embedding, an internal emotion memory (read gate on the decoder input,
/// multiplicative write gate) and an external memory realized as two
/// softmax heads over the emotion-lexicon partition mixed by alpha_t.
class SeqModel {
 public:
  SeqModel() = default;
  SeqModel(const ModelConfig& config, LexiconIndex lexicon, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const LexiconIndex& lexicon() const { return lexicon_; }
  ag::ParameterStore& params() { return params_; }
  const ag::ParameterStore& params() const { return params_; }
  std::uint64_t hash() const { return params_.hash(); }

  /// Whether the emotion head (and alpha gate) is active for `e`.
  bool emotion_head_enabled(Emotion e) const;
  const std::vector<std::uint8_t>& generic_mask(Emotion e) const { return generic_mask_[static_cast<std::size_t>(e)]; }
  const std::vector<std::uint8_t>& emotion_mask(Emotion e) const { return emotion_mask_[static_cast<std::size_t>(e)]; }

  LossBreakdown loss(const Seq2SeqExample& ex) const;
  /// Adds weight * d(total)/d(params) into the parameter gradients.
  LossBreakdown accumulate_loss_gradient(const Seq2SeqExample& ex, double weight);
  /// Adds weight * d(log p(target))/d(params); EOS is scored iff `with_eos`.
  double accumulate_logprob_gradient(const Seq2SeqExample& ex, bool with_eos, double weight);

  Generation generate_greedy(std::span<const TokenId> source, Emotion e) const;
  /// Temperature <= 1e-8 degenerates to greedy decoding.
  Generation generate_sample(std::span<const TokenId> source, Emotion e, double temperature, Rng& rng) const;
  /// log p(target + EOS | source, e). Trailing PAD ids are ignored on both sides.
  double sequence_logprob(std::span<const TokenId> source, Emotion e, std::span<const TokenId> target) const;

  std::vector<StepTrace> trace(const Seq2SeqExample& ex) const;

 private:
  struct Layout {
    std::size_t word_embedding = 0, emotion_embedding = 0;
    std::vector<nn::GruLayer> encoder, decoder;
    std::size_t attn_query = 0, attn_keys = 0, attn_score = 0;
    std::size_t read_w = 0, read_b = 0, write_w = 0, write_b = 0;
    std::size_t generic_w = 0, generic_b = 0, emotion_w = 0, emotion_b = 0, alpha_w = 0, alpha_b = 0;
  };
  struct Bound;
  struct Encoded;
  struct DecoderState;
  struct StepOut;
  struct LossVars;

  Bound bind(ag::Graph& g, ag::ParameterStore* trainable) const;
  Encoded encode(ag::Graph& g, const Bound& p, std::span<const TokenId> source) const;
  DecoderState start(ag::Graph& g, const Bound& p, const Encoded& enc, Emotion e) const;
  StepOut step(ag::Graph& g, const Bound& p, const Encoded& enc, const DecoderState& s, Emotion e) const;
  template <class Select>
  Generation decode(std::span<const TokenId> source, Emotion e, Select&& select) const;
  LossVars build_loss(ag::Graph& g, const Bound& p, const Seq2SeqExample& ex) const;
  ag::Var build_logprob(ag::Graph& g, const Bound& p, const Seq2SeqExample& ex, bool with_eos) const;
  void build_masks();

  ModelConfig config_;
  LexiconIndex lexicon_;
  ag::ParameterStore params_;
  Layout layout_;
  std::array<std::vector<std::uint8_t>, kNumEmotions> generic_mask_;
  std::array<std::vector<std::uint8_t>, kNumEmotions> emotion_mask_;

};

SeqModel init_model(const ModelConfig& config, const LexiconIndex& lexicon, std::uint64_t seed);

/// Objective for a dialogue pair in the given direction (forward scores the
/// response under e_r, backward the query under e_q).
LossBreakdown forward_loss(const SeqModel& model, const DialoguePair& pair, Direction direction);

Generation generate_greedy(const SeqModel& model, const Utterance& query, Emotion emotion);
Generation generate_sample(const SeqModel& model, const Utterance& query, Emotion emotion, double temperature,
                           std::uint64_t seed);
double sequence_logprob(const SeqModel& model, const Utterance& query, Emotion emotion, const Utterance& target);

/// One optimizer step on the batch-mean objective. Returns the pre-step
/// batch mean. Throws DivergenceError on a non-finite loss.
LossBreakdown mle_update(SeqModel& model, nn::Adam& optimizer, std::span<const Seq2SeqExample> batch);

struct CheckpointInfo {
  Direction direction = Direction::Forward;
  std::int64_t step = 0;
};

/// Writes `dir/params.bin` and the `dir/model.json` sidecar.
void save_model(const SeqModel& model, const Vocabulary& vocab, const EmotionLexicon& lexicon,
                const std::filesystem::path& dir, const CheckpointInfo& info = {});
/// Throws IntegrityError on a corrupted blob or a vocabulary / lexicon /
/// config mismatch.
SeqModel load_model(const std::filesystem::path& dir, const Vocabulary& vocab, const EmotionLexicon& lexicon,
                    CheckpointInfo* info = nullptr);

}  // namespace cdl
