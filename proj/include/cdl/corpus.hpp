#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cdl/emotion.hpp"

namespace cdl {

using TokenId = std::int32_t;

inline constexpr std::size_t kMinUtteranceLength = 3;
inline constexpr std::size_t kMaxUtteranceLength = 30;

/// A tokenized sentence. `ids` is empty until the utterance is encoded
/// against a vocabulary; neither field contains BOS/EOS.
struct Utterance {
  std::vector<std::string> tokens;
  std::vector<TokenId> ids;

  std::size_t size() const { return tokens.empty() ? ids.size() : tokens.size(); }
  bool encoded() const { return ids.size() == tokens.size() && !(tokens.empty() && ids.empty()); }
  bool operator==(const Utterance&) const = default;
};

struct DialoguePair {
  Utterance query;
  Utterance response;
  Emotion query_emotion = Emotion::Neutral;
  Emotion response_emotion = Emotion::Neutral;
  std::size_t index = 0;

  bool operator==(const DialoguePair&) const = default;
};

enum class Split { Train, Valid, Test };

struct Corpus {
  std::vector<DialoguePair> pairs;
  Split split = Split::Train;
  /// Records rejected by the length bounds during loading.
  std::size_t dropped = 0;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  const DialoguePair& operator[](std::size_t i) const { return pairs[i]; }
};

/// Token <-> id map. Ids 0..3 are reserved for PAD, BOS, EOS, UNK.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr std::size_t kNumSpecial = 4;
  static constexpr std::size_t kDefaultMaxSize = 40000;

  Vocabulary();
  /// Builds from non-special tokens in id order (first token gets id 4).
  explicit Vocabulary(std::vector<std::string> tokens);

  /// Returns kUnk for out-of-vocabulary tokens.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return id_to_token_.size(); }
  static bool is_special(TokenId id) { return id >= 0 && id < static_cast<TokenId>(kNumSpecial); }

  /// Fingerprint over the full id->token table.
  std::uint64_t hash() const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

/// Keeps the `max_size` most frequent tokens of the corpus (ties broken by
/// lexicographic order). Throws ValidationError on an empty corpus.
Vocabulary build_vocabulary(const Corpus& corpus, std::size_t max_size = Vocabulary::kDefaultMaxSize);

Utterance encode_utterance(std::vector<std::string> tokens, const Vocabulary& vocab);
/// Maps ids back to surface tokens; PAD/BOS/EOS are dropped, UNK yields "<unk>".
std::vector<std::string> decode_utterance(std::span<const TokenId> ids, const Vocabulary& vocab);
/// Re-encodes every utterance of the corpus in place.
void encode_corpus(Corpus& corpus, const Vocabulary& vocab);

/// Per-category emotion word sets. Neutral is always empty and the
/// category sets are pairwise disjoint.
class EmotionLexicon {
 public:
  /// Throws ValidationError naming the word if it already belongs to a
  /// category, or if `category` is Neutral.
  void add(Emotion category, const std::string& word);

  std::optional<Emotion> category_of(std::string_view word) const;
  bool contains(Emotion category, std::string_view word) const;
  const std::vector<std::string>& words(Emotion category) const {
    return words_[static_cast<std::size_t>(category)];
  }
  std::size_t size(Emotion category) const { return words(category).size(); }
  std::uint64_t hash() const;

  static EmotionLexicon from_json_text(std::string_view text);
  static EmotionLexicon load(const std::filesystem::path& path);
  std::string to_json_text() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::array<std::vector<std::string>, kNumEmotions> words_;
  std::unordered_map<std::string, Emotion> category_;
};

/// Lexicon resolved against a vocabulary: category per token id
/// (-1 = generic word) and member ids per category.
struct LexiconIndex {
  std::vector<int> category;
  std::array<std::vector<TokenId>, kNumEmotions> members;

  LexiconIndex() = default;
  LexiconIndex(const EmotionLexicon& lexicon, const Vocabulary& vocab);

  bool is_emotion_word(TokenId id, Emotion e) const {
    return id >= 0 && static_cast<std::size_t>(id) < category.size() &&
           category[static_cast<std::size_t>(id)] == emotion_id(e);
  }
};

/// Reads tab-separated records (`query<TAB>q_emotion<TAB>response<TAB>r_emotion`)
/// or JSON lines with keys query/q_emotion/response/r_emotion; the format is
/// picked per file from its first non-blank character. Pairs whose query or
/// response falls outside [3, 30] tokens are dropped and counted.
Corpus load_corpus(const std::filesystem::path& path, const Vocabulary* vocab = nullptr);
Corpus parse_corpus(std::string_view text, const Vocabulary* vocab = nullptr);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string corpus_to_tsv(const Corpus& corpus);

/// Random disjoint train/valid/test partition; sizes are floor(ratio * N)
/// for valid and test, the remainder goes to train.
std::array<Corpus, 3> split_corpus(const Corpus& corpus, std::array<double, 3> ratios, std::uint64_t seed);

struct SyntheticCorpus {
  Corpus corpus;
  EmotionLexicon lexicon;
  Vocabulary vocab;
};

/// Emotion-tagged toy dialogue data with a learnable query->response
/// mapping. An emotional sentence carries 1-2 implicit cue words of its
/// category (not in the lexicon), exactly one lexicon word of the category
/// and, with probability kSyntheticDistractorRate, one cue word of another
/// category. Requires n_pairs >= 60 and vocab_size >= 60.
SyntheticCorpus generate_synthetic_corpus(std::size_t n_pairs, std::size_t vocab_size, std::uint64_t seed);
inline constexpr std::size_t kSyntheticMarkerDivisor = 8;  // lexicon words per category = vocab / 8
inline constexpr std::size_t kSyntheticCueDivisor = 30;    // cue words per category = vocab / 30
inline constexpr double kSyntheticDistractorRate = 0.3;

/// Training-set emotion counts (query side, response side) the generator
/// matches in proportion, indexed by emotion id.
inline constexpr std::array<double, kNumEmotions> kQueryEmotionCounts = {335138, 257471, 128482,
                                                                         184427, 79611,  120358};
inline constexpr std::array<double, kNumEmotions> kResponseEmotionCounts = {195553, 197565, 179215,
                                                                            197428, 138198, 197528};

}  // namespace cdl
