#pragma once

#include <string>
#include <vector>

#include "cdl/corpus.hpp"
#include "cdl/ecm_model.hpp"

namespace fixtures {

using namespace cdl;

// 16 content words, 2 lexicon words per non-neutral category.
inline Vocabulary toy_vocab() {
  std::vector<std::string> t;
  for (int i = 0; i < 6; ++i) t.push_back("w" + std::to_string(i));
  for (const char* w : {"love", "adore", "cry", "tears", "gross", "yuck", "rage", "furious", "joy", "glad"})
    t.push_back(w);
  return Vocabulary(t);
}

inline EmotionLexicon toy_lexicon() {
  EmotionLexicon lex;
  lex.add(Emotion::Like, "love");
  lex.add(Emotion::Like, "adore");
  lex.add(Emotion::Sad, "cry");
  lex.add(Emotion::Sad, "tears");
  lex.add(Emotion::Disgust, "gross");
  lex.add(Emotion::Disgust, "yuck");
  lex.add(Emotion::Angry, "rage");
  lex.add(Emotion::Angry, "furious");
  lex.add(Emotion::Happy, "joy");
  lex.add(Emotion::Happy, "glad");
  return lex;
}

inline ModelConfig tiny_config(int vocab) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.encoder_layers = c.decoder_layers = 1;
  c.hidden = 8;
  c.word_dim = 6;
  c.emotion_dim = 4;
  c.max_decode_length = 8;
  return c;
}

inline Utterance utt(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  return encode_utterance(tokens, vocab);
}

inline DialoguePair pair(const std::vector<std::string>& q, Emotion eq, const std::vector<std::string>& r, Emotion er,
                         const Vocabulary& vocab) {
  DialoguePair p;
  p.query = utt(q, vocab);
  p.response = utt(r, vocab);
  p.query_emotion = eq;
  p.response_emotion = er;
  return p;
}

/// Small synthetic dataset shared by the heavier tests.
inline const SyntheticCorpus& small_synthetic() {
  static const SyntheticCorpus data = generate_synthetic_corpus(120, 60, 11);
  return data;
}

inline std::size_t param_index(const ag::ParameterStore& params, const std::string& name) {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return i;
  return params.size();
}

}  // namespace fixtures
