#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cdl/classifier.hpp"
#include "cdl/config.hpp"
#include "cdl/curriculum.hpp"
#include "cdl/error.hpp"
#include "cdl/eval.hpp"
#include "cdl/rewards.hpp"

namespace py = pybind11;
using namespace cdl;

namespace {

using Words = std::vector<std::string>;

py::dict pair_dict(const DialoguePair& p) {
  py::dict d;
  d["query"] = p.query.tokens;
  d["q_emotion"] = std::string(emotion_name(p.query_emotion));
  d["response"] = p.response.tokens;
  d["r_emotion"] = std::string(emotion_name(p.response_emotion));
  return d;
}

py::list pairs(const Corpus& c) {
  py::list out;
  for (const auto& p : c.pairs) out.append(pair_dict(p));
  return out;
}

const Corpus& split(const Dataset& d, const std::string& name) {
  if (name == "train") return d.train;
  if (name == "valid") return d.valid;
  if (name == "test") return d.test;
  throw ValidationError("unknown split '" + name + "' (train, valid, test)");
}

EmotionLexicon lexicon_from(const std::map<std::string, Words>& m) {
  EmotionLexicon lex;
  for (const auto& [name, words] : m)
    for (const auto& w : words) lex.add(emotion_from_name(name), w);
  return lex;
}

// A sequence model bundled with the vocabulary it was built for.
struct Model {
  Vocabulary vocab;
  EmotionLexicon lexicon;
  SeqModel model;

  Words greedy(const Words& source, Emotion e) const {
    return decode_utterance(model.generate_greedy(encode_utterance(source, vocab).ids, e).ids, vocab);
  }
  double logprob(const Words& source, Emotion e, const Words& target) const {
    return model.sequence_logprob(encode_utterance(source, vocab).ids, e, encode_utterance(target, vocab).ids);
  }
};

struct Classifier {
  Vocabulary vocab;
  EmotionClassifier cls;

  std::vector<double> proba(const Words& s) const {
    const auto p = cls.predict_proba(encode_utterance(s, vocab).ids);
    return {p.begin(), p.end()};
  }
};

}  // namespace

PYBIND11_MODULE(_cdl, m) {
  m.doc() = "Curriculum dual learning for emotion-controllable response generation";

  // Translators run newest first, so the base class goes in first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<IntegrityError>(m, "IntegrityError", PyExc_IOError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  py::enum_<Emotion>(m, "Emotion")
      .value("Neutral", Emotion::Neutral)
      .value("Like", Emotion::Like)
      .value("Sad", Emotion::Sad)
      .value("Disgust", Emotion::Disgust)
      .value("Angry", Emotion::Angry)
      .value("Happy", Emotion::Happy);

  py::class_<Dataset>(m, "Dataset")
      .def_static(
          "synthetic",
          [](std::size_t pairs, std::size_t vocab, std::uint64_t seed) {
            DataConfig c;
            c.synthetic_pairs = pairs;
            c.synthetic_vocab = vocab;
            c.seed = seed;
            return make_synthetic_dataset(c);
          },
          py::arg("pairs") = 600, py::arg("vocab") = 120, py::arg("seed") = 7)
      .def_static("load", [](const std::filesystem::path& dir) { return load_dataset(dir); }, py::arg("dir"))
      .def("save", [](const Dataset& d, const std::filesystem::path& dir) { save_dataset(d, dir); }, py::arg("dir"))
      .def("pairs", [](const Dataset& d, const std::string& name) { return pairs(split(d, name)); },
           py::arg("split") = "train")
      .def_property_readonly("vocab",
                             [](const Dataset& d) {
                               Words out;
                               for (std::size_t i = 0; i < d.vocab.size(); ++i)
                                 out.push_back(d.vocab.token(static_cast<TokenId>(i)));
                               return out;
                             })
      .def_property_readonly("lexicon", [](const Dataset& d) {
        std::map<std::string, Words> out;
        for (Emotion e : kAllEmotions)
          if (e != Emotion::Neutral) out[std::string(emotion_name(e))] = d.lexicon.words(e);
        return out;
      });

  m.def(
      "competence",
      [](std::int64_t t, std::int64_t length, double c0_squared) {
        CurriculumConfig c;
        c.length = length;
        c.c0_squared = c0_squared;
        c.validate();
        return competence(t, c);
      },
      py::arg("t"), py::arg("length"), py::arg("c0_squared") = 0.01);

  m.def(
      "emotion_reward",
      [](double r_e1, double r_e2, double lambda) {
        RewardConfig c;
        c.lambda = lambda;
        return emotion_reward(r_e1, r_e2, c);
      },
      py::arg("r_e1"), py::arg("r_e2"), py::arg("lam") = 0.5);
  m.def(
      "total_reward",
      [](double r_c, double r_e, double gamma) {
        RewardConfig c;
        c.gamma = gamma;
        return total_reward(r_c, r_e, c);
      },
      py::arg("r_c"), py::arg("r_e"), py::arg("gamma") = 1.0);
  m.def(
      "explicit_emotion_reward",
      [](const std::map<std::string, Words>& lexicon, const Words& words, Emotion e) {
        return explicit_emotion_reward(lexicon_from(lexicon), words, e);
      },
      py::arg("lexicon"), py::arg("words"), py::arg("emotion"));

  m.def(
      "bleu", [](const std::vector<Words>& h, const std::vector<Words>& r, int n) { return bleu_n(h, r, n); },
      py::arg("hypotheses"), py::arg("references"), py::arg("n") = 1);
  m.def(
      "distinct", [](const std::vector<Words>& s, int n) { return distinct_n(s, n); }, py::arg("sentences"),
      py::arg("n") = 1);
  m.def(
      "emotion_word_rate",
      [](const std::map<std::string, Words>& lexicon, const std::vector<Words>& gen, const std::vector<Emotion>& t) {
        return emotion_word_rate(lexicon_from(lexicon), gen, t);
      },
      py::arg("lexicon"), py::arg("generated"), py::arg("targets"));

  py::class_<Model>(m, "Model")
      .def_static(
          "init",
          [](const Dataset& d, int hidden, int word_dim, int emotion_dim, int layers, std::uint64_t seed) {
            ModelConfig c;
            c.vocab_size = static_cast<int>(d.vocab.size());
            c.hidden = hidden;
            c.word_dim = word_dim;
            c.emotion_dim = emotion_dim;
            c.encoder_layers = c.decoder_layers = layers;
            return Model{d.vocab, d.lexicon, SeqModel(c, LexiconIndex(d.lexicon, d.vocab), seed)};
          },
          py::arg("dataset"), py::arg("hidden") = 32, py::arg("word_dim") = 16, py::arg("emotion_dim") = 8,
          py::arg("layers") = 1, py::arg("seed") = 1)
      .def_static(
          "load",
          [](const std::filesystem::path& dir, const Dataset& d) {
            return Model{d.vocab, d.lexicon, load_model(dir, d.vocab, d.lexicon)};
          },
          py::arg("dir"), py::arg("dataset"))
      .def("save", [](const Model& mo, const std::filesystem::path& dir) { save_model(mo.model, mo.vocab, mo.lexicon, dir); },
           py::arg("dir"))
      .def("greedy", &Model::greedy, py::arg("source"), py::arg("emotion"))
      .def("logprob", &Model::logprob, py::arg("source"), py::arg("emotion"), py::arg("target"))
      .def_property_readonly("parameter_count", [](const Model& mo) { return mo.model.config().parameter_count(); })
      .def_property_readonly("hash", [](const Model& mo) { return mo.model.hash(); });

  py::class_<Classifier>(m, "Classifier")
      .def_static(
          "train",
          [](const Dataset& d, int filters, int word_dim, double lr, int epochs, std::uint64_t seed) {
            ClassifierConfig c;
            c.vocab_size = static_cast<int>(d.vocab.size());
            c.filters = filters;
            c.word_dim = word_dim;
            c.lr = lr;
            c.epochs = epochs;
            py::gil_scoped_release release;
            return Classifier{d.vocab, train_classifier(d.train, c, seed)};
          },
          py::arg("dataset"), py::arg("filters") = 16, py::arg("word_dim") = 16, py::arg("lr") = 0.01,
          py::arg("epochs") = 10, py::arg("seed") = 1)
      .def_static(
          "load",
          [](const std::filesystem::path& dir, const Dataset& d) { return Classifier{d.vocab, load_classifier(dir, d.vocab)}; },
          py::arg("dir"), py::arg("dataset"))
      .def("predict_proba", &Classifier::proba, py::arg("words"))
      .def("predict", [](const Classifier& c, const Words& s) { return c.cls.predict(encode_utterance(s, c.vocab).ids); },
           py::arg("words"))
      .def("accuracy", [](const Classifier& c, const Dataset& d, const std::string& name) { return accuracy(c.cls, split(d, name)); },
           py::arg("dataset"), py::arg("split") = "test");
}
