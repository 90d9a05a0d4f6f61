#include "cdl/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cdl/error.hpp"
#include "cdl/hash.hpp"
#include "cdl/random.hpp"

namespace cdl {

namespace {

constexpr std::array<std::string_view, Vocabulary::kNumSpecial> kSpecialTokens = {"<pad>", "<s>", "</s>",
                                                                                  "<unk>"};

std::vector<std::string> split_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\r') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool within_bounds(std::size_t n) { return n >= kMinUtteranceLength && n <= kMaxUtteranceLength; }

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  for (std::size_t i = 0; i < kNumSpecial; ++i) {
    id_to_token_.emplace_back(kSpecialTokens[i]);
    token_to_id_.emplace(kSpecialTokens[i], static_cast<TokenId>(i));
  }
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : Vocabulary() {
  for (auto& t : tokens) {
    if (token_to_id_.count(t)) throw ValidationError("duplicate vocabulary token '" + t + "'");
    token_to_id_.emplace(t, static_cast<TokenId>(id_to_token_.size()));
    id_to_token_.push_back(std::move(t));
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return token_to_id_.count(std::string(token)) > 0; }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw ValidationError("token id out of range: " + std::to_string(id));
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::hash() const {
  Fnv1a h;
  for (const auto& t : id_to_token_) {
    h.update(t);
    h.update("\n");
  }
  return h.digest();
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t i = kNumSpecial; i < id_to_token_.size(); ++i) out << id_to_token_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> tokens;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.find_first_of(" \t") != std::string::npos)
      throw ParseError("vocabulary entries must be single non-empty tokens", lineno);
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary build_vocabulary(const Corpus& corpus, std::size_t max_size) {
  if (corpus.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& p : corpus.pairs) {
    for (const auto& t : p.query.tokens) ++freq[t];
    for (const auto& t : p.response.tokens) ++freq[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  ranked.reserve(freq.size());
  for (auto& [tok, n] : freq) {
    if (std::find(kSpecialTokens.begin(), kSpecialTokens.end(), tok) != kSpecialTokens.end()) continue;
    ranked.emplace_back(tok, n);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& r : ranked) tokens.push_back(std::move(r.first));
  return Vocabulary(std::move(tokens));
}

Utterance encode_utterance(std::vector<std::string> tokens, const Vocabulary& vocab) {
  Utterance u;
  u.ids.reserve(tokens.size());
  for (const auto& t : tokens) u.ids.push_back(vocab.id(t));
  u.tokens = std::move(tokens);
  return u;
}

std::vector<std::string> decode_utterance(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) {
    if (id == Vocabulary::kPad || id == Vocabulary::kBos || id == Vocabulary::kEos) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

void encode_corpus(Corpus& corpus, const Vocabulary& vocab) {
  for (auto& p : corpus.pairs) {
    p.query = encode_utterance(std::move(p.query.tokens), vocab);
    p.response = encode_utterance(std::move(p.response.tokens), vocab);
  }
}

// ---------------------------------------------------------------------------
// Lexicon

void EmotionLexicon::add(Emotion category, const std::string& word) {
  if (category == Emotion::Neutral) throw ValidationError("the Neutral category has no lexicon words");
  auto [it, inserted] = category_.emplace(word, category);
  if (!inserted)
    throw ValidationError("lexicon word '" + word + "' listed under both " +
                          std::string(emotion_name(it->second)) + " and " +
                          std::string(emotion_name(category)));
  words_[static_cast<std::size_t>(category)].push_back(word);
}

std::optional<Emotion> EmotionLexicon::category_of(std::string_view word) const {
  auto it = category_.find(std::string(word));
  if (it == category_.end()) return std::nullopt;
  return it->second;
}

bool EmotionLexicon::contains(Emotion category, std::string_view word) const {
  auto c = category_of(word);
  return c && *c == category;
}

std::uint64_t EmotionLexicon::hash() const {
  Fnv1a h;
  for (int e = 0; e < kNumEmotions; ++e) {
    h.update_value(e);
    for (const auto& w : words_[static_cast<std::size_t>(e)]) {
      h.update(w);
      h.update("\n");
    }
  }
  return h.digest();
}

EmotionLexicon EmotionLexicon::from_json_text(std::string_view text) {
  EmotionLexicon lex;
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) return lex;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("lexicon is not valid JSON: ") + e.what(), 0);
  }
  if (!j.is_object()) throw ParseError("lexicon must be a JSON object of category -> word list", 0);
  for (auto& [name, words] : j.items()) {
    Emotion e = emotion_from_name(name);
    if (!words.is_array()) throw ParseError("lexicon entry for " + name + " must be an array", 0);
    if (e == Emotion::Neutral) {
      if (!words.empty()) throw ValidationError("the Neutral category must have an empty lexicon");
      continue;
    }
    for (const auto& w : words) {
      if (!w.is_string()) throw ParseError("lexicon words must be strings", 0);
      lex.add(e, w.get<std::string>());
    }
  }
  return lex;
}

EmotionLexicon EmotionLexicon::load(const std::filesystem::path& path) { return from_json_text(read_file(path)); }

std::string EmotionLexicon::to_json_text() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (Emotion e : kAllEmotions) j[std::string(emotion_name(e))] = words(e);
  return j.dump(1);
}

void EmotionLexicon::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json_text() << '\n';
}

LexiconIndex::LexiconIndex(const EmotionLexicon& lexicon, const Vocabulary& vocab) : category(vocab.size(), -1) {
  for (Emotion e : kAllEmotions) {
    for (const auto& w : lexicon.words(e)) {
      if (!vocab.contains(w)) continue;
      TokenId id = vocab.id(w);
      category[static_cast<std::size_t>(id)] = emotion_id(e);
      members[static_cast<std::size_t>(e)].push_back(id);
    }
    std::sort(members[static_cast<std::size_t>(e)].begin(), members[static_cast<std::size_t>(e)].end());
  }
}

// ---------------------------------------------------------------------------
// Corpus I/O

Corpus parse_corpus(std::string_view text, const Vocabulary* vocab) {
  Corpus corpus;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }

    std::vector<std::string> q, r;
    std::string qe, re;
    if (line.front() == '{') {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        throw ParseError("malformed JSON record", lineno);
      }
      auto tokens_of = [&](const char* key) {
        if (!j.contains(key)) throw ParseError(std::string("missing key '") + key + "'", lineno);
        const auto& v = j.at(key);
        if (v.is_array()) {
          std::vector<std::string> out;
          for (const auto& t : v) {
            if (!t.is_string()) throw ParseError(std::string("non-string token in '") + key + "'", lineno);
            out.push_back(t.get<std::string>());
          }
          return out;
        }
        if (v.is_string()) return split_tokens(v.get<std::string>());
        throw ParseError(std::string("'") + key + "' must be a token array", lineno);
      };
      auto name_of = [&](const char* key) {
        if (!j.contains(key) || !j.at(key).is_string())
          throw ParseError(std::string("missing emotion key '") + key + "'", lineno);
        return j.at(key).get<std::string>();
      };
      q = tokens_of("query");
      r = tokens_of("response");
      qe = name_of("q_emotion");
      re = name_of("r_emotion");
    } else {
      std::vector<std::string_view> fields;
      std::size_t s = 0;
      while (true) {
        std::size_t t = line.find('\t', s);
        fields.push_back(line.substr(s, t == std::string_view::npos ? std::string_view::npos : t - s));
        if (t == std::string_view::npos) break;
        s = t + 1;
      }
      if (fields.size() != 4)
        throw ParseError("expected 4 tab-separated fields, got " + std::to_string(fields.size()), lineno);
      q = split_tokens(fields[0]);
      qe = std::string(fields[1]);
      r = split_tokens(fields[2]);
      re = std::string(fields[3]);
    }

    auto eq = parse_emotion(qe);
    auto er = parse_emotion(re);
    if (!eq || !er)
      throw ValidationError("unknown emotion '" + (eq ? re : qe) + "' (line " + std::to_string(lineno) + ")");
    if (!within_bounds(q.size()) || !within_bounds(r.size())) {
      ++corpus.dropped;
      continue;
    }
    DialoguePair p;
    p.query.tokens = std::move(q);
    p.response.tokens = std::move(r);
    p.query_emotion = *eq;
    p.response_emotion = *er;
    p.index = corpus.pairs.size();
    corpus.pairs.push_back(std::move(p));
    if (end == text.size()) break;
  }
  if (vocab) encode_corpus(corpus, *vocab);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const Vocabulary* vocab) {
  return parse_corpus(read_file(path), vocab);
}

std::string corpus_to_tsv(const Corpus& corpus) {
  std::string out;
  for (const auto& p : corpus.pairs) {
    out += join(p.query.tokens);
    out += '\t';
    out += emotion_name(p.query_emotion);
    out += '\t';
    out += join(p.response.tokens);
    out += '\t';
    out += emotion_name(p.response_emotion);
    out += '\n';
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << corpus_to_tsv(corpus);
}

std::array<Corpus, 3> split_corpus(const Corpus& corpus, std::array<double, 3> ratios, std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw ValidationError("split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");

  const std::size_t n = corpus.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x5b1f));
  shuffle(order.begin(), order.end(), rng);

  // Round to nearest so 0.1 * 100 lands on 10 despite binary representation.
  const auto n_valid = static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(n) + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(ratios[2] * static_cast<double>(n) + 1e-9));
  const std::size_t n_train = n - n_valid - n_test;

  std::array<Corpus, 3> out;
  out[0].split = Split::Train;
  out[1].split = Split::Valid;
  out[2].split = Split::Test;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t which = k < n_train ? 0 : (k < n_train + n_valid ? 1 : 2);
    DialoguePair p = corpus.pairs[order[k]];
    p.index = out[which].pairs.size();
    out[which].pairs.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

SyntheticCorpus generate_synthetic_corpus(std::size_t n_pairs, std::size_t vocab_size, std::uint64_t seed) {
  constexpr std::size_t kCombos = kNumEmotions * kNumEmotions;
  if (n_pairs < 60)
    throw ValidationError("synthetic corpus needs at least 60 pairs to cover all " + std::to_string(kCombos) +
                          " (query, response) emotion combinations");
  if (vocab_size < 60) throw ValidationError("synthetic vocabulary size must be at least 60");

  Rng rng(mix_seed(seed, 0x5e7d));

  const std::size_t n_markers = std::max<std::size_t>(2, vocab_size / kSyntheticMarkerDivisor);
  const std::size_t n_cues = std::max<std::size_t>(2, vocab_size / kSyntheticCueDivisor);
  const std::size_t n_content = vocab_size - (n_markers + n_cues) * (kNumEmotions - 1);

  std::vector<std::string> content(n_content);
  for (std::size_t i = 0; i < n_content; ++i) {
    std::string digits = std::to_string(i);
    content[i] = "w" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') + digits;
  }

  SyntheticCorpus out;
  std::array<std::vector<std::string>, kNumEmotions> markers, cues;
  for (Emotion e : kAllEmotions) {
    if (e == Emotion::Neutral) continue;
    std::string stem(emotion_name(e));
    std::transform(stem.begin(), stem.end(), stem.begin(), [](unsigned char c) { return std::tolower(c); });
    for (std::size_t k = 0; k < n_markers; ++k) {
      std::string w = stem + std::to_string(k);
      out.lexicon.add(e, w);
      markers[static_cast<std::size_t>(e)].push_back(std::move(w));
    }
    for (std::size_t k = 0; k < n_cues; ++k) cues[static_cast<std::size_t>(e)].push_back(stem + "ish" + std::to_string(k));
  }

  // The response content is a fixed word-level permutation of the query
  // content, so both directions have a learnable deterministic mapping.
  std::vector<std::size_t> perm(n_content);
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(perm.begin(), perm.end(), rng);

  std::vector<std::pair<Emotion, Emotion>> labels;
  labels.reserve(n_pairs);
  for (Emotion a : kAllEmotions)
    for (Emotion b : kAllEmotions) labels.emplace_back(a, b);
  while (labels.size() < n_pairs) {
    auto eq = static_cast<Emotion>(sample_weighted(rng, kQueryEmotionCounts));
    auto er = static_cast<Emotion>(sample_weighted(rng, kResponseEmotionCounts));
    labels.emplace_back(eq, er);
  }
  shuffle(labels.begin(), labels.end(), rng);

  auto insert_from = [&](std::vector<std::string>& tokens, const std::vector<std::string>& pool, std::size_t count) {
    for (std::size_t k = 0; k < count; ++k) {
      std::size_t at = uniform_index(rng, tokens.size() + 1);
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at), pool[uniform_index(rng, pool.size())]);
    }
  };
  auto express = [&](std::vector<std::string>& tokens, Emotion e) {
    if (e == Emotion::Neutral) return;
    const auto k = static_cast<std::size_t>(e);
    insert_from(tokens, cues[k], 1 + uniform_index(rng, 2));
    insert_from(tokens, markers[k], 1);
    if (uniform01(rng) < kSyntheticDistractorRate) {
      auto other = static_cast<std::size_t>(1 + uniform_index(rng, kNumEmotions - 2));
      if (other >= k) ++other;
      insert_from(tokens, cues[other], 1);
    }
  };

  constexpr double kNoise = 0.1;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    auto [eq, er] = labels[i];
    const std::size_t len = 3 + uniform_index(rng, 4);
    std::vector<std::size_t> words(len);
    for (auto& w : words) w = uniform_index(rng, n_content);

    std::vector<std::string> q, r;
    for (auto w : words) q.push_back(content[w]);
    for (auto w : words) {
      std::size_t mapped = uniform01(rng) < kNoise ? uniform_index(rng, n_content) : perm[w];
      r.push_back(content[mapped]);
    }
    express(q, eq);
    express(r, er);

    DialoguePair p;
    p.query.tokens = std::move(q);
    p.response.tokens = std::move(r);
    p.query_emotion = eq;
    p.response_emotion = er;
    p.index = i;
    out.corpus.pairs.push_back(std::move(p));
  }

  out.vocab = build_vocabulary(out.corpus, Vocabulary::kDefaultMaxSize);
  encode_corpus(out.corpus, out.vocab);
  return out;
}

}  // namespace cdl
