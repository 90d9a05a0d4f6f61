#include "cdl/ecm_model.hpp"

#include <cmath>
#include <filesystem>

#include "cdl/checkpoint.hpp"
#include "cdl/error.hpp"

namespace cdl {

using ag::Graph;
using ag::Matrix;
using ag::Var;

// ---------------------------------------------------------------------------
// Config

void ModelConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw ValidationError(std::string("model config: ") + what + " must be positive");
  };
  positive(vocab_size, "vocab_size");
  positive(encoder_layers, "encoder_layers");
  positive(decoder_layers, "decoder_layers");
  positive(hidden, "hidden");
  positive(word_dim, "word_dim");
  positive(emotion_dim, "emotion_dim");
  positive(max_decode_length, "max_decode_length");
  positive(min_decode_length, "min_decode_length");
  if (num_emotions != kNumEmotions) throw ValidationError("model config: num_emotions must be 6");
  if (vocab_size <= static_cast<int>(Vocabulary::kNumSpecial))
    throw ValidationError("model config: vocab_size must exceed the special symbols");
  if (min_decode_length > max_decode_length)
    throw ValidationError("model config: min_decode_length exceeds max_decode_length");
}

std::size_t ModelConfig::parameter_count() const {
  const std::size_t V = static_cast<std::size_t>(vocab_size), H = static_cast<std::size_t>(hidden);
  const std::size_t dw = static_cast<std::size_t>(word_dim), de = static_cast<std::size_t>(emotion_dim);
  std::size_t n = V * dw + static_cast<std::size_t>(num_emotions) * de;
  for (int l = 0; l < encoder_layers; ++l) n += nn::GruLayer::parameter_count(l == 0 ? word_dim : hidden, hidden);
  n += 2 * H * H + H;
  n += de * (dw + 2 * H) + de;
  for (int l = 0; l < decoder_layers; ++l)
    n += nn::GruLayer::parameter_count(l == 0 ? word_dim + 2 * emotion_dim + hidden : hidden, hidden);
  n += de * H + de;
  n += 2 * (V * 2 * H + V) + 2 * H + 1;
  return n;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size},
                     {"encoder_layers", c.encoder_layers},
                     {"decoder_layers", c.decoder_layers},
                     {"hidden", c.hidden},
                     {"word_dim", c.word_dim},
                     {"emotion_dim", c.emotion_dim},
                     {"num_emotions", c.num_emotions},
                     {"max_decode_length", c.max_decode_length},
                     {"min_decode_length", c.min_decode_length}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
  c.hidden = j.value("hidden", c.hidden);
  c.word_dim = j.value("word_dim", c.word_dim);
  c.emotion_dim = j.value("emotion_dim", c.emotion_dim);
  c.num_emotions = j.value("num_emotions", c.num_emotions);
  c.max_decode_length = j.value("max_decode_length", c.max_decode_length);
  c.min_decode_length = j.value("min_decode_length", c.min_decode_length);
}

// ---------------------------------------------------------------------------
// Loss arithmetic

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  nll += o.nll;
  type_loss += o.type_loss;
  memory_reg += o.memory_reg;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const { return {nll * s, type_loss * s, memory_reg * s, total * s}; }

LossBreakdown compose_loss(std::span<const double> gold_probs, std::span<const double> alphas,
                           std::span<const std::uint8_t> is_emotion_word, double final_memory_norm,
                           bool type_supervised) {
  LossBreakdown out;
  for (double p : gold_probs) out.nll -= std::log(p);
  if (type_supervised) {
    for (std::size_t t = 0; t < alphas.size(); ++t)
      out.type_loss -= is_emotion_word[t] ? std::log(alphas[t]) : std::log1p(-alphas[t]);
  }
  out.memory_reg = final_memory_norm;
  out.total = out.nll + out.type_loss + out.memory_reg;
  return out;
}

std::string_view direction_name(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }

Seq2SeqExample make_example(const DialoguePair& pair, Direction direction) {
  if (direction == Direction::Forward) return {pair.query.ids, pair.response.ids, pair.response_emotion};
  return {pair.response.ids, pair.query.ids, pair.query_emotion};
}

double Generation::logprob() const {
  double s = 0.0;
  for (double v : token_logprobs) s += v;
  return s;
}

namespace {

std::span<const TokenId> strip_padding(std::span<const TokenId> ids) {
  std::size_t n = ids.size();
  while (n > 0 && ids[n - 1] == Vocabulary::kPad) --n;
  return ids.first(n);
}

}  // namespace

// ---------------------------------------------------------------------------
// Model structure

struct SeqModel::Bound {
  Var word_embedding, emotion_embedding;
  std::vector<nn::GruVars> encoder, decoder;
  Var attn_query, attn_keys, attn_score;
  Var read_w, read_b, write_w, write_b;
  Var generic_w, generic_b, emotion_w, emotion_b, alpha_w, alpha_b;
};

struct SeqModel::Encoded {
  Var states;     // H x n, top-layer outputs
  Var projected;  // H x n, attention keys
  std::vector<Var> final_states;
};

struct SeqModel::DecoderState {
  std::vector<Var> hidden;
  Var memory;  // internal emotion state M_I
  TokenId prev = Vocabulary::kBos;
};

struct SeqModel::StepOut {
  Var probs;
  Var alpha;  // invalid (id < 0) when the emotion head is disabled
  Var emotion_head, generic_head;
  DecoderState next;
};

struct SeqModel::LossVars {
  Var total, nll, type_loss, memory_reg;
};

SeqModel::SeqModel(const ModelConfig& config, LexiconIndex lexicon, std::uint64_t seed)
    : config_(config), lexicon_(std::move(lexicon)) {
  config_.validate();
  if (lexicon_.category.empty()) lexicon_.category.assign(static_cast<std::size_t>(config_.vocab_size), -1);
  if (lexicon_.category.size() != static_cast<std::size_t>(config_.vocab_size))
    throw ValidationError("lexicon index does not match the model vocabulary size");

  const int V = config_.vocab_size, H = config_.hidden, dw = config_.word_dim, de = config_.emotion_dim;
  auto& L = layout_;
  L.word_embedding = params_.add("embed.word", dw, V);
  L.emotion_embedding = params_.add("embed.emotion", de, config_.num_emotions);
  for (int l = 0; l < config_.encoder_layers; ++l)
    L.encoder.push_back(nn::GruLayer::create(params_, "enc.l" + std::to_string(l), l == 0 ? dw : H, H));
  L.attn_query = params_.add("attn.query", H, H);
  L.attn_keys = params_.add("attn.keys", H, H);
  L.attn_score = params_.add("attn.score", 1, H);
  L.read_w = params_.add("memory.read.W", de, dw + 2 * H);
  L.read_b = params_.add("memory.read.b", de, 1);
  for (int l = 0; l < config_.decoder_layers; ++l)
    L.decoder.push_back(
        nn::GruLayer::create(params_, "dec.l" + std::to_string(l), l == 0 ? dw + 2 * de + H : H, H));
  L.write_w = params_.add("memory.write.W", de, H);
  L.write_b = params_.add("memory.write.b", de, 1);
  L.generic_w = params_.add("out.generic.W", V, 2 * H);
  L.generic_b = params_.add("out.generic.b", V, 1);
  L.emotion_w = params_.add("out.emotion.W", V, 2 * H);
  L.emotion_b = params_.add("out.emotion.b", V, 1);
  L.alpha_w = params_.add("out.alpha.W", 1, 2 * H);
  L.alpha_b = params_.add("out.alpha.b", 1, 1);

  Rng rng(mix_seed(seed, 0xec3));
  nn::init_uniform(params_, rng);
  // alpha_t starts at exactly sigmoid(0) = 0.5.
  params_[L.alpha_w].value.setZero();
  build_masks();
}

void SeqModel::build_masks() {
  const auto V = static_cast<std::size_t>(config_.vocab_size);
  for (Emotion e : kAllEmotions) {
    auto& gm = generic_mask_[static_cast<std::size_t>(e)];
    auto& em = emotion_mask_[static_cast<std::size_t>(e)];
    gm.assign(V, 1);
    em.assign(V, 0);
    gm[Vocabulary::kPad] = 0;
    gm[Vocabulary::kBos] = 0;
    if (e == Emotion::Neutral) continue;
    for (TokenId id : lexicon_.members[static_cast<std::size_t>(e)]) {
      gm[static_cast<std::size_t>(id)] = 0;
      em[static_cast<std::size_t>(id)] = 1;
    }
  }
}

bool SeqModel::emotion_head_enabled(Emotion e) const {
  return e != Emotion::Neutral && !lexicon_.members[static_cast<std::size_t>(e)].empty();
}

SeqModel::Bound SeqModel::bind(Graph& g, ag::ParameterStore* trainable) const {
  auto v = [&](std::size_t i) { return trainable ? g.param((*trainable)[i]) : g.constant_ref(params_[i].value); };
  auto gru = [&](const nn::GruLayer& l) { return nn::GruVars{v(l.w), v(l.u), v(l.b), v(l.bh), config_.hidden}; };
  const auto& L = layout_;
  Bound b;
  b.word_embedding = v(L.word_embedding);
  b.emotion_embedding = v(L.emotion_embedding);
  for (const auto& l : L.encoder) b.encoder.push_back(gru(l));
  for (const auto& l : L.decoder) b.decoder.push_back(gru(l));
  b.attn_query = v(L.attn_query);
  b.attn_keys = v(L.attn_keys);
  b.attn_score = v(L.attn_score);
  b.read_w = v(L.read_w);
  b.read_b = v(L.read_b);
  b.write_w = v(L.write_w);
  b.write_b = v(L.write_b);
  b.generic_w = v(L.generic_w);
  b.generic_b = v(L.generic_b);
  b.emotion_w = v(L.emotion_w);
  b.emotion_b = v(L.emotion_b);
  b.alpha_w = v(L.alpha_w);
  b.alpha_b = v(L.alpha_b);
  return b;
}

SeqModel::Encoded SeqModel::encode(Graph& g, const Bound& p, std::span<const TokenId> source) const {
  source = strip_padding(source);
  std::vector<Var> inputs;
  inputs.reserve(source.size() + 1);
  for (TokenId id : source) {
    if (id < 0 || id >= config_.vocab_size) throw ValidationError("source token id out of range");
    inputs.push_back(ag::column(p.word_embedding, id));
  }
  inputs.push_back(ag::column(p.word_embedding, Vocabulary::kEos));

  Encoded enc;
  const Var zero = g.constant(Matrix::Zero(config_.hidden, 1));
  for (const auto& layer : p.encoder) {
    Var h = zero;
    std::vector<Var> outputs;
    outputs.reserve(inputs.size());
    for (Var x : inputs) {
      h = nn::gru_step(layer, x, h);
      outputs.push_back(h);
    }
    enc.final_states.push_back(h);
    inputs = std::move(outputs);
  }
  enc.states = ag::hcat(inputs);
  enc.projected = ag::matmul(p.attn_keys, enc.states);
  return enc;
}

SeqModel::DecoderState SeqModel::start(Graph&, const Bound& p, const Encoded& enc, Emotion e) const {
  DecoderState s;
  for (std::size_t l = 0; l < p.decoder.size(); ++l)
    s.hidden.push_back(enc.final_states[std::min(l, enc.final_states.size() - 1)]);
  s.memory = ag::column(p.emotion_embedding, emotion_id(e));
  s.prev = Vocabulary::kBos;
  return s;
}

SeqModel::StepOut SeqModel::step(Graph& g, const Bound& p, const Encoded& enc, const DecoderState& s,
                                 Emotion e) const {
  const Var prev_embedding = ag::column(p.word_embedding, s.prev);
  const Var top = s.hidden.back();

  // Additive attention over encoder states, keyed on the previous top state.
  Var energies = ag::tanh(ag::add_colwise(enc.projected, ag::matmul(p.attn_query, top)));
  Var weights = ag::softmax(ag::matmul(p.attn_score, energies));  // 1 x n
  Var context = ag::matmul(enc.states, ag::transpose(weights));    // H x 1

  Var read_gate = ag::sigmoid(ag::add(ag::matmul(p.read_w, ag::vcat({prev_embedding, top, context})), p.read_b));
  Var memory_read = ag::cmul(read_gate, s.memory);

  StepOut out;
  Var x = ag::vcat({prev_embedding, ag::column(p.emotion_embedding, emotion_id(e)), context, memory_read});
  for (std::size_t l = 0; l < p.decoder.size(); ++l) {
    Var h = nn::gru_step(p.decoder[l], x, s.hidden[l]);
    out.next.hidden.push_back(h);
    x = h;
  }
  const Var state = out.next.hidden.back();
  Var write_gate = ag::sigmoid(ag::add(ag::matmul(p.write_w, state), p.write_b));
  out.next.memory = ag::cmul(write_gate, s.memory);

  Var features = ag::vcat({state, context});
  out.generic_head = ag::masked_softmax(ag::add(ag::matmul(p.generic_w, features), p.generic_b), generic_mask(e));
  if (emotion_head_enabled(e)) {
    out.emotion_head =
        ag::masked_softmax(ag::add(ag::matmul(p.emotion_w, features), p.emotion_b), emotion_mask(e));
    out.alpha = ag::sigmoid(ag::add(ag::matmul(p.alpha_w, features), p.alpha_b));
    out.probs = ag::add(ag::scale_by(out.alpha, out.emotion_head),
                        ag::scale_by(ag::one_minus(out.alpha), out.generic_head));
  } else {
    out.probs = out.generic_head;
  }
  (void)g;
  return out;
}

SeqModel::LossVars SeqModel::build_loss(Graph& g, const Bound& p, const Seq2SeqExample& ex) const {
  const auto target = strip_padding(ex.target);
  const Encoded enc = encode(g, p, ex.source);
  DecoderState s = start(g, p, enc, ex.emotion);
  const bool typed = emotion_head_enabled(ex.emotion);

  std::vector<Var> nll_terms, type_terms;
  for (std::size_t t = 0; t <= target.size(); ++t) {
    const TokenId gold = t < target.size() ? target[t] : Vocabulary::kEos;
    if (gold < 0 || gold >= config_.vocab_size) throw ValidationError("gold token id out of vocabulary range");
    StepOut o = step(g, p, enc, s, ex.emotion);
    nll_terms.push_back(ag::log(ag::pick(o.probs, gold)));
    if (typed) {
      const bool emotional = lexicon_.is_emotion_word(gold, ex.emotion);
      type_terms.push_back(ag::log(emotional ? o.alpha : ag::one_minus(o.alpha)));
    }
    s = std::move(o.next);
    s.prev = gold;
  }
  LossVars out;
  out.nll = ag::scale(ag::sum(ag::vcat(nll_terms)), -1.0);
  out.type_loss = type_terms.empty() ? g.scalar(0.0) : ag::scale(ag::sum(ag::vcat(type_terms)), -1.0);
  out.memory_reg = ag::norm(s.memory);
  out.total = ag::add(ag::add(out.nll, out.type_loss), out.memory_reg);
  return out;
}

Var SeqModel::build_logprob(Graph& g, const Bound& p, const Seq2SeqExample& ex, bool with_eos) const {
  const auto target = strip_padding(ex.target);
  const Encoded enc = encode(g, p, ex.source);
  DecoderState s = start(g, p, enc, ex.emotion);
  std::vector<Var> terms;
  const std::size_t steps = target.size() + (with_eos ? 1 : 0);
  for (std::size_t t = 0; t < steps; ++t) {
    const TokenId gold = t < target.size() ? target[t] : Vocabulary::kEos;
    if (gold < 0 || gold >= config_.vocab_size) throw ValidationError("target token id out of vocabulary range");
    StepOut o = step(g, p, enc, s, ex.emotion);
    terms.push_back(ag::log(ag::pick(o.probs, gold)));
    s = std::move(o.next);
    s.prev = gold;
  }
  if (terms.empty()) return g.scalar(0.0);
  return ag::sum(ag::vcat(terms));
}

LossBreakdown SeqModel::loss(const Seq2SeqExample& ex) const {
  Graph g(false);
  const Bound p = bind(g, nullptr);
  const LossVars l = build_loss(g, p, ex);
  return {l.nll.scalar(), l.type_loss.scalar(), l.memory_reg.scalar(), l.total.scalar()};
}

LossBreakdown SeqModel::accumulate_loss_gradient(const Seq2SeqExample& ex, double weight) {
  Graph g(true);
  const Bound p = bind(g, &params_);
  const LossVars l = build_loss(g, p, ex);
  LossBreakdown out{l.nll.scalar(), l.type_loss.scalar(), l.memory_reg.scalar(), l.total.scalar()};
  if (!std::isfinite(out.total)) throw DivergenceError("non-finite sequence loss");
  g.backward(ag::scale(l.total, weight));
  return out;
}

double SeqModel::accumulate_logprob_gradient(const Seq2SeqExample& ex, bool with_eos, double weight) {
  Graph g(true);
  const Bound p = bind(g, &params_);
  const Var lp = build_logprob(g, p, ex, with_eos);
  const double value = lp.scalar();
  if (!std::isfinite(value)) throw DivergenceError("non-finite sequence log-probability");
  g.backward(ag::scale(lp, weight));
  return value;
}

double SeqModel::sequence_logprob(std::span<const TokenId> source, Emotion e, std::span<const TokenId> target) const {
  Graph g(false);
  const Bound p = bind(g, nullptr);
  return build_logprob(g, p, {source, target, e}, true).scalar();
}

template <class Select>
Generation SeqModel::decode(std::span<const TokenId> source, Emotion e, Select&& select) const {
  Graph g(false);
  const Bound p = bind(g, nullptr);
  const Encoded enc = encode(g, p, source);
  DecoderState s = start(g, p, enc, e);
  Generation out;
  const auto max_len = static_cast<std::size_t>(config_.max_decode_length);
  const auto min_len = static_cast<std::size_t>(config_.min_decode_length);
  while (out.ids.size() < max_len) {
    StepOut o = step(g, p, enc, s, e);
    const Matrix& probs = o.probs.value();
    const TokenId tok = select(probs, out.ids.size() >= min_len);
    out.token_logprobs.push_back(std::log(probs(tok)));
    if (tok == Vocabulary::kEos) {
      out.terminated = true;
      break;
    }
    out.ids.push_back(tok);
    s = std::move(o.next);
    s.prev = tok;
  }
  return out;
}

Generation SeqModel::generate_greedy(std::span<const TokenId> source, Emotion e) const {
  return decode(source, e, [](const Matrix& probs, bool eos_allowed) {
    TokenId best = -1;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      if (i == Vocabulary::kEos && !eos_allowed) continue;
      if (best < 0 || probs(i) > probs(best)) best = static_cast<TokenId>(i);
    }
    return best;
  });
}

Generation SeqModel::generate_sample(std::span<const TokenId> source, Emotion e, double temperature, Rng& rng) const {
  if (!(temperature > 0.0)) throw ValidationError("sampling temperature must be positive");
  if (temperature <= 1e-8) return generate_greedy(source, e);
  std::vector<double> weights;
  return decode(source, e, [&](const Matrix& probs, bool eos_allowed) {
    weights.assign(static_cast<std::size_t>(probs.size()), 0.0);
    double max_log = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < probs.size(); ++i)
      if (probs(i) > 0.0 && (eos_allowed || i != Vocabulary::kEos)) max_log = std::max(max_log, std::log(probs(i)));
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      if (probs(i) <= 0.0 || (!eos_allowed && i == Vocabulary::kEos)) continue;
      weights[static_cast<std::size_t>(i)] = std::exp((std::log(probs(i)) - max_log) / temperature);
    }
    return static_cast<TokenId>(sample_weighted(rng, weights));
  });
}

std::vector<StepTrace> SeqModel::trace(const Seq2SeqExample& ex) const {
  Graph g(false);
  const Bound p = bind(g, nullptr);
  const auto target = strip_padding(ex.target);
  const Encoded enc = encode(g, p, ex.source);
  DecoderState s = start(g, p, enc, ex.emotion);
  std::vector<StepTrace> out;
  for (std::size_t t = 0; t <= target.size(); ++t) {
    const TokenId gold = t < target.size() ? target[t] : Vocabulary::kEos;
    StepOut o = step(g, p, enc, s, ex.emotion);
    StepTrace tr;
    tr.probs = o.probs.value();
    tr.generic_head = o.generic_head.value();
    if (o.alpha.id >= 0) {
      tr.alpha = o.alpha.scalar();
      tr.emotion_head = o.emotion_head.value();
    }
    tr.memory_norm = o.next.memory.value().norm();
    out.push_back(std::move(tr));
    s = std::move(o.next);
    s.prev = gold;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Free-function surface

SeqModel init_model(const ModelConfig& config, const LexiconIndex& lexicon, std::uint64_t seed) {
  return SeqModel(config, lexicon, seed);
}

LossBreakdown forward_loss(const SeqModel& model, const DialoguePair& pair, Direction direction) {
  return model.loss(make_example(pair, direction));
}

Generation generate_greedy(const SeqModel& model, const Utterance& query, Emotion emotion) {
  return model.generate_greedy(query.ids, emotion);
}

Generation generate_sample(const SeqModel& model, const Utterance& query, Emotion emotion, double temperature,
                           std::uint64_t seed) {
  Rng rng(seed);
  return model.generate_sample(query.ids, emotion, temperature, rng);
}

double sequence_logprob(const SeqModel& model, const Utterance& query, Emotion emotion, const Utterance& target) {
  return model.sequence_logprob(query.ids, emotion, target.ids);
}

LossBreakdown mle_update(SeqModel& model, nn::Adam& optimizer, std::span<const Seq2SeqExample> batch) {
  if (batch.empty()) throw ValidationError("mle_update needs a non-empty batch");
  const double w = 1.0 / static_cast<double>(batch.size());
  LossBreakdown mean;
  model.params().zero_grad();
  for (const auto& ex : batch) mean += model.accumulate_loss_gradient(ex, w).scaled(w);
  if (!std::isfinite(mean.total)) throw DivergenceError("non-finite batch loss");
  optimizer.step(model.params());
  return mean;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_model(const SeqModel& model, const Vocabulary& vocab, const EmotionLexicon& lexicon,
                const std::filesystem::path& dir, const CheckpointInfo& info) {
  if (vocab.size() != static_cast<std::size_t>(model.config().vocab_size))
    throw ValidationError("vocabulary size does not match the model");
  std::filesystem::create_directories(dir);
  const std::uint64_t checksum = write_parameter_blob(model.params(), dir / "params.bin");
  nlohmann::json meta;
  meta["kind"] = "seq_model";
  meta["config"] = model.config();
  meta["vocab_hash"] = to_hex(vocab.hash());
  meta["lexicon_hash"] = to_hex(lexicon.hash());
  meta["direction"] = direction_name(info.direction);
  meta["step"] = info.step;
  meta["parameter_count"] = model.params().scalar_count();
  meta["checksum"] = to_hex(checksum);
  write_json_file(dir / "model.json", meta);
}

SeqModel load_model(const std::filesystem::path& dir, const Vocabulary& vocab, const EmotionLexicon& lexicon,
                    CheckpointInfo* info) {
  const nlohmann::json meta = read_json_file(dir / "model.json");
  try {
    if (meta.at("kind").get<std::string>() != "seq_model")
      throw IntegrityError(dir.string() + " is not a sequence-model checkpoint");
    if (from_hex(meta.at("vocab_hash").get<std::string>()) != vocab.hash())
      throw IntegrityError("checkpoint " + dir.string() + " was trained with a different vocabulary");
    if (from_hex(meta.at("lexicon_hash").get<std::string>()) != lexicon.hash())
      throw IntegrityError("checkpoint " + dir.string() + " was trained with a different emotion lexicon");
    const ModelConfig config = meta.at("config").get<ModelConfig>();
    if (config.vocab_size != static_cast<int>(vocab.size()))
      throw IntegrityError("checkpoint config does not match the vocabulary size");
    SeqModel model(config, LexiconIndex(lexicon, vocab), 0);
    read_parameter_blob(dir / "params.bin", model.params(), from_hex(meta.at("checksum").get<std::string>()));
    if (info) {
      info->direction = meta.at("direction").get<std::string>() == "backward" ? Direction::Backward : Direction::Forward;
      info->step = meta.at("step").get<std::int64_t>();
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("malformed checkpoint sidecar in " + dir.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw IntegrityError("invalid checkpoint config in " + dir.string() + ": " + e.what());
  }
}

}  // namespace cdl
