#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "cdl/corpus.hpp"
#include "cdl/error.hpp"
#include "cdl/rewards.hpp"

using namespace cdl;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << content;
  return p;
}

std::multiset<std::string> pair_keys(const Corpus& c) {
  std::multiset<std::string> out;
  for (const auto& p : c.pairs) {
    std::string key;
    for (const auto& t : p.query.tokens) key += t + " ";
    key += "|";
    for (const auto& t : p.response.tokens) key += t + " ";
    out.insert(key + emotion_name(p.query_emotion).data() + emotion_name(p.response_emotion).data());
  }
  return out;
}

}  // namespace

TEST_CASE("emotion ids and names are a fixed bijection") {
  const char* names[] = {"Neutral", "Like", "Sad", "Disgust", "Angry", "Happy"};
  for (int i = 0; i < kNumEmotions; ++i) {
    CHECK(emotion_name(emotion_from_id(i)) == names[i]);
    CHECK(emotion_id(emotion_from_name(names[i])) == i);
  }
  CHECK_FALSE(parse_emotion("Bored").has_value());
  CHECK_THROWS_AS(emotion_from_name("Bored"), ValidationError);
}

TEST_CASE("parse_corpus: TSV records, length filter, errors") {
  const std::string text =
      "a b c\tHappy\td e f\tSad\n"
      "a b c d\tNeutral\tx y z\tLike\n"
      "q r s\tAngry\tt u v w\tDisgust\n";
  const Corpus c = parse_corpus(text);
  CHECK(c.size() == 3);
  CHECK(c.dropped == 0);
  CHECK(c[0].query_emotion == Emotion::Happy);
  CHECK(c[0].response_emotion == Emotion::Sad);
  CHECK(c[2].response.tokens == std::vector<std::string>{"t", "u", "v", "w"});
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i].index == i);

  const Corpus d = parse_corpus("a b c\tHappy\td e\tSad\na b c\tHappy\td e f\tSad\n");
  CHECK(d.size() == 1);
  CHECK(d.dropped == 1);
  CHECK(d[0].index == 0);

  std::string long_line;
  for (int i = 0; i < 31; ++i) long_line += "t ";
  CHECK(parse_corpus("a b c\tHappy\t" + long_line + "\tSad\n").dropped == 1);

  try {
    parse_corpus("a b c\tHappy\td e f\tSad\na b c\tHappy\td e f\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_corpus("a b c\tHappy\td e f\tBored\n"), ValidationError);
}

TEST_CASE("parse_corpus: JSON lines") {
  const std::string text =
      R"({"query": ["a","b","c"], "q_emotion": "Like", "response": ["d","e","f"], "r_emotion": "Happy"})"
      "\n"
      R"({"query": ["a","b","c"], "q_emotion": "Like", "response": ["d","e"], "r_emotion": "Happy"})"
      "\n";
  const Corpus c = parse_corpus(text);
  CHECK(c.size() == 1);
  CHECK(c.dropped == 1);
  CHECK(c[0].response_emotion == Emotion::Happy);
  CHECK_THROWS_AS(parse_corpus(R"({"query": ["a","b","c"], "q_emotion": "Like"})"), ParseError);
}

TEST_CASE("corpus TSV round trip through a file") {
  const SyntheticCorpus s = generate_synthetic_corpus(60, 60, 3);
  const auto path = std::filesystem::temp_directory_path() / "cdl_corpus_rt.tsv";
  save_corpus(s.corpus, path);
  const Corpus back = load_corpus(path, &s.vocab);
  REQUIRE(back.size() == s.corpus.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].query == s.corpus[i].query);
    CHECK(back[i].response == s.corpus[i].response);
    CHECK(back[i].response_emotion == s.corpus[i].response_emotion);
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_corpus(path), Error);
}

TEST_CASE("build_vocabulary: specials, frequency order, cap, ties") {
  const Corpus c = parse_corpus("b a c\tNeutral\ta e d\tNeutral\n");
  const Vocabulary v = build_vocabulary(c, 40000);
  CHECK(v.size() == 9);
  CHECK(v.token(Vocabulary::kPad) == "<pad>");
  CHECK(v.token(Vocabulary::kUnk) == "<unk>");
  CHECK(v.token(4) == "a");  // most frequent
  CHECK(v.token(5) == "b");  // ties broken lexicographically
  CHECK(v.token(8) == "e");

  const Vocabulary capped = build_vocabulary(c, 2);
  CHECK(capped.size() == 6);
  CHECK(capped.contains("a"));
  CHECK(capped.contains("b"));
  CHECK_FALSE(capped.contains("c"));
  CHECK_THROWS_AS(build_vocabulary(Corpus{}, 10), ValidationError);
}

TEST_CASE("build_vocabulary keeps exactly the most frequent tokens") {
  // tK appears K+1 times; x, y, z are more frequent still, so cap 40 keeps them and t59..t23.
  std::string text;
  for (int k = 0; k < 60; ++k)
    for (int rep = 0; rep <= k; ++rep) text += "t" + std::to_string(k) + " x y\tNeutral\tx y z\tNeutral\n";
  const Vocabulary v = build_vocabulary(parse_corpus(text), 40);
  CHECK(v.size() == 44);
  for (int k = 0; k < 60; ++k) CHECK(v.contains("t" + std::to_string(k)) == (k >= 23));
}

TEST_CASE("encode / decode round trip and UNK") {
  const Vocabulary v(std::vector<std::string>{"good", "mood"});
  const Utterance u = encode_utterance({"good", "mood"}, v);
  CHECK(decode_utterance(u.ids, v) == std::vector<std::string>{"good", "mood"});
  const Utterance o = encode_utterance({"good", "zzz"}, v);
  CHECK(o.ids[1] == Vocabulary::kUnk);
  CHECK(decode_utterance(o.ids, v)[1] == "<unk>");
  CHECK(encode_utterance({}, v).ids.empty());

  const auto path = std::filesystem::temp_directory_path() / "cdl_vocab_rt.txt";
  v.save(path);
  CHECK(Vocabulary::load(path) == v);
  CHECK(Vocabulary::load(path).hash() == v.hash());
  std::filesystem::remove(path);
}

TEST_CASE("lexicon: disjointness, sizes, empty file") {
  EmotionLexicon lex;
  lex.add(Emotion::Like, "good");
  try {
    lex.add(Emotion::Happy, "good");
    FAIL("expected a duplicate error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("good") != std::string::npos);
  }
  CHECK_THROWS_AS(EmotionLexicon::from_json_text(R"({"Like": ["good"], "Happy": ["good"]})"), ValidationError);
  CHECK_THROWS_AS(lex.add(Emotion::Neutral, "meh"), ValidationError);

  const EmotionLexicon empty = EmotionLexicon::from_json_text("");
  for (Emotion e : kAllEmotions) CHECK(empty.size(e) == 0);

  // Table-6-sized lexicon.
  const std::map<std::string, int> sizes = {{"Like", 1629}, {"Sad", 294}, {"Disgust", 1142}, {"Angry", 30}, {"Happy", 405}};
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, n] : sizes) {
    auto& arr = j[name] = nlohmann::json::array();
    for (int i = 0; i < n; ++i) arr.push_back(name + std::to_string(i));
  }
  const auto path = temp_file("cdl_lexicon_t6.json", j.dump());
  const EmotionLexicon big = EmotionLexicon::load(path);
  for (const auto& [name, n] : sizes) CHECK(big.size(emotion_from_name(name)) == static_cast<std::size_t>(n));
  CHECK(big.size(Emotion::Neutral) == 0);
  CHECK(EmotionLexicon::from_json_text(big.to_json_text()).hash() == big.hash());
  std::filesystem::remove(path);
}

TEST_CASE("split_corpus partitions deterministically") {
  const SyntheticCorpus s = generate_synthetic_corpus(100, 60, 5);
  const auto a = split_corpus(s.corpus, {0.8, 0.1, 0.1}, 9);
  const auto b = split_corpus(s.corpus, {0.8, 0.1, 0.1}, 9);
  CHECK(a[0].size() == 80);
  CHECK(a[1].size() == 10);
  CHECK(a[2].size() == 10);
  for (int k = 0; k < 3; ++k) CHECK(a[k].pairs == b[k].pairs);
  std::multiset<std::string> all;
  for (int k = 0; k < 3; ++k) {
    auto keys = pair_keys(a[k]);
    all.insert(keys.begin(), keys.end());
  }
  CHECK(all == pair_keys(s.corpus));
  CHECK(a[0].split == Split::Train);
  CHECK(a[2].split == Split::Test);
  for (std::size_t i = 0; i < a[1].size(); ++i) CHECK(a[1][i].index == i);
  CHECK_THROWS_AS(split_corpus(s.corpus, {0.5, 0.5, 0.0}, 1), ValidationError);
  CHECK_THROWS_AS(split_corpus(s.corpus, {0.5, 0.3, 0.3}, 1), ValidationError);
}

TEST_CASE("synthetic corpus: determinism, lexicon oracle, coverage, bounds") {
  const SyntheticCorpus a = generate_synthetic_corpus(600, 120, 7);
  const SyntheticCorpus b = generate_synthetic_corpus(600, 120, 7);
  CHECK(corpus_to_tsv(a.corpus) == corpus_to_tsv(b.corpus));
  CHECK(a.lexicon.to_json_text() == b.lexicon.to_json_text());
  CHECK(a.vocab == b.vocab);
  CHECK(corpus_to_tsv(generate_synthetic_corpus(600, 120, 8).corpus) != corpus_to_tsv(a.corpus));

  const LexiconIndex index(a.lexicon, a.vocab);
  std::set<std::pair<int, int>> combos;
  std::array<int, kNumEmotions> q_counts{}, r_counts{};
  for (const auto& p : a.corpus.pairs) {
    combos.insert({emotion_id(p.query_emotion), emotion_id(p.response_emotion)});
    ++q_counts[static_cast<std::size_t>(p.query_emotion)];
    ++r_counts[static_cast<std::size_t>(p.response_emotion)];
    for (const Utterance* u : {&p.query, &p.response}) {
      CHECK(u->size() >= kMinUtteranceLength);
      CHECK(u->size() <= kMaxUtteranceLength);
      CHECK(u->encoded());
      for (TokenId id : u->ids) CHECK(static_cast<std::size_t>(id) < a.vocab.size());
    }
    if (p.response_emotion != Emotion::Neutral)
      CHECK(explicit_emotion_reward(index, p.response.ids, p.response_emotion) > 0.0);
    if (p.query_emotion != Emotion::Neutral)
      CHECK(explicit_emotion_reward(index, p.query.ids, p.query_emotion) > 0.0);
  }
  CHECK(combos.size() == 36);
  CHECK(a.vocab.size() <= 120 + Vocabulary::kNumSpecial);
  // Query marginals: Neutral is the most frequent category, as in the source data.
  CHECK(q_counts[0] == *std::max_element(q_counts.begin(), q_counts.end()));
  for (int c : r_counts) CHECK(c > 30);

  for (Emotion e : kAllEmotions)
    for (Emotion f : kAllEmotions)
      if (e != f)
        for (const auto& w : a.lexicon.words(e)) CHECK_FALSE(a.lexicon.contains(f, w));

  CHECK_THROWS_AS(generate_synthetic_corpus(35, 120, 1), ValidationError);
  CHECK_THROWS_AS(generate_synthetic_corpus(600, 40, 1), ValidationError);
}
