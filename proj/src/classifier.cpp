#include "cdl/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cdl/checkpoint.hpp"
#include "cdl/error.hpp"
#include "cdl/nn.hpp"

namespace cdl {

using ag::Graph;
using ag::Matrix;
using ag::Var;

void ClassifierConfig::validate() const {
  if (vocab_size <= static_cast<int>(Vocabulary::kNumSpecial))
    throw ValidationError("classifier config: vocab_size must exceed the special symbols");
  if (filter_widths.empty()) throw ValidationError("classifier config: need at least one filter width");
  for (int w : filter_widths)
    if (w <= 0) throw ValidationError("classifier config: filter widths must be positive");
  if (filters <= 0 || word_dim <= 0 || epochs < 0 || batch_size <= 0 || patience <= 0)
    throw ValidationError("classifier config: sizes must be positive");
  if (num_classes != kNumEmotions) throw ValidationError("classifier config: num_classes must be 6");
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("classifier config: dropout must be in [0, 1)");
  if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0)
    throw ValidationError("classifier config: holdout_fraction must be in (0, 1)");
}

void to_json(nlohmann::json& j, const ClassifierConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size}, {"filter_widths", c.filter_widths},
                     {"filters", c.filters},       {"word_dim", c.word_dim},
                     {"num_classes", c.num_classes}, {"dropout", c.dropout},
                     {"epochs", c.epochs},         {"patience", c.patience},
                     {"batch_size", c.batch_size}, {"lr", c.lr},
                     {"holdout_fraction", c.holdout_fraction}};
}

void from_json(const nlohmann::json& j, ClassifierConfig& c) {
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.filter_widths = j.value("filter_widths", c.filter_widths);
  c.filters = j.value("filters", c.filters);
  c.word_dim = j.value("word_dim", c.word_dim);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.dropout = j.value("dropout", c.dropout);
  c.epochs = j.value("epochs", c.epochs);
  c.patience = j.value("patience", c.patience);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
}

EmotionClassifier::EmotionClassifier(const ClassifierConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  embedding_ = params_.add("embed.word", config_.word_dim, config_.vocab_size);
  for (int w : config_.filter_widths) {
    conv_w_.push_back(params_.add("conv" + std::to_string(w) + ".W", config_.filters, w * config_.word_dim));
    conv_b_.push_back(params_.add("conv" + std::to_string(w) + ".b", config_.filters, 1));
  }
  const auto pooled = static_cast<Eigen::Index>(config_.filters * config_.filter_widths.size());
  out_w_ = params_.add("out.W", config_.num_classes, pooled);
  out_b_ = params_.add("out.b", config_.num_classes, 1);
  Rng rng(mix_seed(seed, 0xc15));
  nn::init_uniform(params_, rng);
}

Var EmotionClassifier::logits(Graph& g, std::span<const TokenId> sentence, ag::ParameterStore* trainable,
                              Rng* dropout) const {
  auto v = [&](std::size_t i) { return trainable ? g.param((*trainable)[i]) : g.constant_ref(params_[i].value); };
  const Var table = v(embedding_);
  const int widest = *std::max_element(config_.filter_widths.begin(), config_.filter_widths.end());
  std::vector<Var> columns;
  for (TokenId id : sentence) {
    if (id < 0 || id >= config_.vocab_size) throw ValidationError("classifier input token out of range");
    columns.push_back(ag::column(table, id));
  }
  while (columns.size() < static_cast<std::size_t>(widest)) columns.push_back(ag::column(table, Vocabulary::kPad));
  const Var embedded = ag::hcat(columns);

  std::vector<Var> pooled;
  for (std::size_t k = 0; k < config_.filter_widths.size(); ++k) {
    Var conv = ag::matmul(v(conv_w_[k]), ag::windows(embedded, config_.filter_widths[k]));
    pooled.push_back(ag::rowmax(ag::relu(ag::add_colwise(conv, v(conv_b_[k])))));
  }
  Var features = ag::vcat(pooled);
  if (dropout && config_.dropout > 0.0) {
    Matrix mask(features.rows(), 1);
    const double keep = 1.0 - config_.dropout;
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = uniform01(*dropout) < keep ? 1.0 / keep : 0.0;
    features = ag::mask_mul(features, std::move(mask));
  }
  return ag::add(ag::matmul(v(out_w_), features), v(out_b_));
}

ClassProbabilities EmotionClassifier::predict_proba(std::span<const TokenId> sentence) const {
  if (sentence.empty()) throw ValidationError("cannot classify an empty sentence");
  Graph g(false);
  const Matrix p = ag::softmax(logits(g, sentence, nullptr, nullptr)).value();
  ClassProbabilities out{};
  for (int k = 0; k < kNumEmotions; ++k) out[static_cast<std::size_t>(k)] = p(k);
  return out;
}

Emotion EmotionClassifier::predict(std::span<const TokenId> sentence) const {
  const auto p = predict_proba(sentence);
  return static_cast<Emotion>(std::max_element(p.begin(), p.end()) - p.begin());
}

double EmotionClassifier::accumulate_gradient(std::span<const TokenId> sentence, Emotion label, double weight,
                                              Rng& rng) {
  Graph g(true);
  Var probs = ag::softmax(logits(g, sentence, &params_, &rng));
  Var nll = ag::scale(ag::log(ag::pick(probs, emotion_id(label))), -1.0);
  const double loss = nll.scalar();
  g.backward(ag::scale(nll, weight));
  return loss;
}

std::vector<LabeledSentence> labeled_sentences(const Corpus& corpus) {
  std::vector<LabeledSentence> out;
  out.reserve(2 * corpus.size());
  for (const auto& p : corpus.pairs) {
    out.push_back({p.query.ids, p.query_emotion});
    out.push_back({p.response.ids, p.response_emotion});
  }
  return out;
}

AccuracyReport accuracy_report(const EmotionClassifier& cls, std::span<const LabeledSentence> sentences) {
  if (sentences.empty()) throw ValidationError("accuracy of an empty set is undefined");
  AccuracyReport r;
  std::array<std::size_t, kNumEmotions> correct{};
  std::size_t total_correct = 0;
  for (const auto& s : sentences) {
    const auto k = static_cast<std::size_t>(s.label);
    ++r.support[k];
    if (cls.predict(s.ids) == s.label) {
      ++correct[k];
      ++total_correct;
    }
  }
  r.overall = static_cast<double>(total_correct) / static_cast<double>(sentences.size());
  for (std::size_t k = 0; k < kNumEmotions; ++k)
    r.per_category[k] = r.support[k] ? static_cast<double>(correct[k]) / static_cast<double>(r.support[k])
                                     : std::numeric_limits<double>::quiet_NaN();
  return r;
}

double accuracy(const EmotionClassifier& cls, const Corpus& corpus) {
  if (corpus.empty()) throw ValidationError("accuracy of an empty corpus is undefined");
  const auto sentences = labeled_sentences(corpus);
  return accuracy_report(cls, sentences).overall;
}

double confidence(const EmotionClassifier& cls, std::span<const TokenId> sentence, Emotion gold) {
  return cls.predict_proba(sentence)[static_cast<std::size_t>(gold)];
}

EmotionClassifier train_classifier(const Corpus& corpus, const ClassifierConfig& config, std::uint64_t seed,
                                   ClassifierTrainingReport* report) {
  auto pool = labeled_sentences(corpus);
  std::array<bool, kNumEmotions> seen{};
  for (const auto& s : pool) seen[static_cast<std::size_t>(s.label)] = true;
  if (std::count(seen.begin(), seen.end(), true) < 2)
    throw ValidationError("classifier training needs at least two emotion classes");

  EmotionClassifier cls(config, seed);
  Rng rng(mix_seed(seed, 0xc1a55));
  shuffle(pool.begin(), pool.end(), rng);
  auto n_holdout = static_cast<std::size_t>(std::ceil(config.holdout_fraction * static_cast<double>(pool.size())));
  n_holdout = std::clamp<std::size_t>(n_holdout, 1, pool.size() - 1);
  const std::vector<LabeledSentence> holdout(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_holdout));
  std::vector<LabeledSentence> train(pool.begin() + static_cast<std::ptrdiff_t>(n_holdout), pool.end());

  nn::Adam opt(cls.params(), {.lr = config.lr, .clip_norm = 5.0});
  ClassifierTrainingReport rep;
  ag::ParameterStore best = cls.params();
  rep.best_holdout_accuracy = accuracy_report(cls, holdout).overall;
  int since_best = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(train.begin(), train.end(), rng);
    for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(train.size(), start + static_cast<std::size_t>(config.batch_size));
      const double w = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) cls.accumulate_gradient(train[i].ids, train[i].label, w, rng);
      opt.step(cls.params());
    }
    const double acc = accuracy_report(cls, holdout).overall;
    rep.holdout_accuracy.push_back(acc);
    rep.epochs_run = epoch;
    if (acc > rep.best_holdout_accuracy) {
      rep.best_holdout_accuracy = acc;
      rep.best_epoch = epoch;
      best = cls.params();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  for (std::size_t i = 0; i < best.size(); ++i) cls.params()[i].value = best[i].value;
  cls.params().zero_grad();
  if (report) *report = std::move(rep);
  return cls;
}

void save_classifier(const EmotionClassifier& cls, const Vocabulary& vocab, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::uint64_t checksum = write_parameter_blob(cls.params(), dir / "params.bin");
  nlohmann::json meta;
  meta["kind"] = "classifier";
  meta["config"] = cls.config();
  meta["vocab_hash"] = to_hex(vocab.hash());
  meta["checksum"] = to_hex(checksum);
  write_json_file(dir / "model.json", meta);
}

EmotionClassifier load_classifier(const std::filesystem::path& dir, const Vocabulary& vocab) {
  const nlohmann::json meta = read_json_file(dir / "model.json");
  try {
    if (meta.at("kind").get<std::string>() != "classifier")
      throw IntegrityError(dir.string() + " is not a classifier checkpoint");
    if (from_hex(meta.at("vocab_hash").get<std::string>()) != vocab.hash())
      throw IntegrityError("classifier " + dir.string() + " was trained with a different vocabulary");
    EmotionClassifier cls(meta.at("config").get<ClassifierConfig>(), 0);
    read_parameter_blob(dir / "params.bin", cls.params(), from_hex(meta.at("checksum").get<std::string>()));
    return cls;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("malformed classifier sidecar in " + dir.string() + ": " + e.what());
  }
}

}  // namespace cdl
