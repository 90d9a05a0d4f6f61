#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cdl/autograd.hpp"
#include "cdl/classifier.hpp"
#include "cdl/corpus.hpp"
#include "cdl/ecm_model.hpp"

namespace cdl {

using Sentence = std::vector<std::string>;

/// Token -> vector table. Out-of-vocabulary tokens are skipped by every metric.
class WordVectors {
 public:
  WordVectors() = default;
  explicit WordVectors(int dim, std::string source = "memory") : dim_(dim), source_(std::move(source)) {}

  /// Text format: one `token v1 ... vd` per line. Throws ParseError on a
  /// line whose dimension differs from the first line's.
  static WordVectors load(const std::filesystem::path& path);
  static WordVectors parse(std::string_view text);
  /// Input word embeddings of a sequence model (special symbols excluded).
  static WordVectors from_model(const SeqModel& model, const Vocabulary& vocab);

  /// Throws ValidationError on a dimension mismatch.
  void add(const std::string& token, ag::Vector v);
  const ag::Vector* find(const std::string& token) const;
  int dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }
  const std::string& source() const { return source_; }

 private:
  int dim_ = 0;
  std::string source_;
  std::unordered_map<std::string, ag::Vector> table_;
};

/// Corpus BLEU-n (uniform weights over 1..n, brevity penalty). Exactly 0
/// when no unigram matches; otherwise zero higher-order counts are
/// smoothed by 1e-9. Throws ValidationError on empty or unequal lists.
double bleu_n(std::span<const Sentence> hypotheses, std::span<const Sentence> references, int n);

/// Distinct n-grams over total n-grams across all sentences; 0 when no
/// sentence has n tokens. Throws ValidationError on an empty set.
double distinct_n(std::span<const Sentence> sentences, int n);

/// Raw cosines in [-1, 1]; nullopt when either side has no in-vocabulary token.
std::optional<double> embedding_average(const Sentence& hyp, const Sentence& ref, const WordVectors& vectors);
std::optional<double> embedding_extrema(const Sentence& hyp, const Sentence& ref, const WordVectors& vectors);
std::optional<double> embedding_greedy(const Sentence& hyp, const Sentence& ref, const WordVectors& vectors);
std::optional<double> coherence(const Sentence& query, const Sentence& response, const WordVectors& vectors);

struct EmbeddingScores {
  double average = 0.0, extrema = 0.0, greedy = 0.0;  // raw corpus means
  std::size_t skipped = 0;
};

EmbeddingScores embedding_scores(std::span<const Sentence> hypotheses, std::span<const Sentence> references,
                                 const WordVectors& vectors);
/// Corpus mean coherence and the skipped-pair count.
std::pair<double, std::size_t> corpus_coherence(std::span<const Sentence> queries, std::span<const Sentence> responses,
                                                const WordVectors& vectors);

/// Fraction of generations the classifier labels with their target.
double emotion_accuracy(const EmotionClassifier& cls, std::span<const std::vector<TokenId>> generated,
                        std::span<const Emotion> targets);

/// Fraction of non-Neutral-target generations containing a lexicon word of
/// the target. Throws ValidationError when every target is Neutral.
double emotion_word_rate(const EmotionLexicon& lexicon, std::span<const Sentence> generated,
                         std::span<const Emotion> targets);

struct EvalReport {
  double average = 0.0, extrema = 0.0, greedy = 0.0, coherence = 0.0;
  double dist1 = 0.0, dist2 = 0.0;
  double bleu1 = 0.0, bleu2 = 0.0;
  double emo_acc = 0.0, emo_word = 0.0;
  std::size_t pairs = 0;
  std::size_t embedding_skipped = 0;
  std::size_t coherence_skipped = 0;
  std::string vectors_source;
  nlohmann::json raw;  // unclamped cosines
};

void to_json(nlohmann::json& j, const EvalReport& r);
/// Aligned text table: embedding metrics, diversity, BLEU, emotion expression.
std::string format_report_table(const EvalReport& r, const std::string& system = "model");

struct GenerationRecord {
  Sentence query;
  Emotion emotion = Emotion::Neutral;
  Sentence response;
  std::vector<TokenId> ids;
};

/// Greedy response per test pair under its gold e_r, then every metric.
EvalReport full_report(const SeqModel& forward, const Corpus& test, const EmotionClassifier& cls,
                       const EmotionLexicon& lexicon, const Vocabulary& vocab, const WordVectors& vectors,
                       std::vector<GenerationRecord>* generations = nullptr);

/// JSON lines {query, e_r, response}.
void write_generations(std::span<const GenerationRecord> generations, std::ostream& out);

}  // namespace cdl
