#include "cdl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "cdl/error.hpp"

namespace cdl {

using ag::Vector;

// ---------------------------------------------------------------------------
// Word vectors

WordVectors WordVectors::parse(std::string_view text) {
  WordVectors wv(0, "file");
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> values;
    std::string field;
    while (ls >> field) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError("bad vector component '" + field + "'", line_no);
      }
    }
    if (values.empty()) throw ParseError("vector line without components", line_no);
    if (wv.dim_ == 0) wv.dim_ = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != wv.dim_)
      throw ParseError("vector dimension " + std::to_string(values.size()) + " differs from " + std::to_string(wv.dim_),
                       line_no);
    wv.table_[token] = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  }
  return wv;
}

WordVectors WordVectors::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open word vectors " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

WordVectors WordVectors::from_model(const SeqModel& model, const Vocabulary& vocab) {
  const ag::Matrix& table = model.params()[0].value;  // embed.word, one column per id
  WordVectors wv(static_cast<int>(table.rows()), "model");
  for (std::size_t id = Vocabulary::kNumSpecial; id < vocab.size(); ++id)
    wv.table_[vocab.token(static_cast<TokenId>(id))] = table.col(static_cast<Eigen::Index>(id));
  return wv;
}

void WordVectors::add(const std::string& token, Vector v) {
  if (dim_ == 0) dim_ = static_cast<int>(v.size());
  if (v.size() != dim_) throw ValidationError("word vector for '" + token + "' has the wrong dimension");
  table_[token] = std::move(v);
}

const Vector* WordVectors::find(const std::string& token) const {
  auto it = table_.find(token);
  return it == table_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// BLEU / Distinct

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const Sentence& s, int n) {
  std::map<Ngram, std::size_t> counts;
  const auto k = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + k <= s.size(); ++i) ++counts[Ngram(s.begin() + static_cast<std::ptrdiff_t>(i),
                                                                  s.begin() + static_cast<std::ptrdiff_t>(i + k))];
  return counts;
}

}  // namespace

double bleu_n(std::span<const Sentence> hypotheses, std::span<const Sentence> references, int n) {
  if (hypotheses.empty()) throw ValidationError("BLEU of an empty list is undefined");
  if (hypotheses.size() != references.size()) throw ValidationError("BLEU needs paired hypothesis/reference lists");
  if (n < 1) throw ValidationError("BLEU order must be >= 1");
  std::size_t hyp_len = 0, ref_len = 0;
  std::vector<double> matched(static_cast<std::size_t>(n), 0.0), total(static_cast<std::size_t>(n), 0.0);
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    hyp_len += hypotheses[i].size();
    ref_len += references[i].size();
    for (int k = 1; k <= n; ++k) {
      const auto h = ngram_counts(hypotheses[i], k);
      const auto r = ngram_counts(references[i], k);
      for (const auto& [g, c] : h) {
        auto it = r.find(g);
        matched[static_cast<std::size_t>(k - 1)] += static_cast<double>(std::min(c, it == r.end() ? 0 : it->second));
        total[static_cast<std::size_t>(k - 1)] += static_cast<double>(c);
      }
    }
  }
  if (hyp_len == 0 || matched[0] == 0.0) return 0.0;
  double log_sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double m = matched[static_cast<std::size_t>(k)];
    const double t = std::max(1.0, total[static_cast<std::size_t>(k)]);
    log_sum += std::log(m > 0.0 ? m / t : 1e-9 / t);
  }
  const double bp = hyp_len < ref_len ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len)) : 1.0;
  return std::clamp(bp * std::exp(log_sum / n), 0.0, 1.0);
}

double distinct_n(std::span<const Sentence> sentences, int n) {
  if (sentences.empty()) throw ValidationError("distinct-n of an empty set is undefined");
  if (n < 1) throw ValidationError("distinct-n order must be >= 1");
  std::set<Ngram> distinct;
  std::size_t total = 0;
  for (const auto& s : sentences)
    for (const auto& [g, c] : ngram_counts(s, n)) {
      distinct.insert(g);
      total += c;
    }
  return total ? static_cast<double>(distinct.size()) / static_cast<double>(total) : 0.0;
}

// ---------------------------------------------------------------------------
// Embedding metrics

namespace {

std::vector<const Vector*> lookup(const Sentence& s, const WordVectors& wv) {
  std::vector<const Vector*> out;
  for (const auto& t : s)
    if (const Vector* v = wv.find(t)) out.push_back(v);
  return out;
}

double cosine(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ValidationError("word vector dimension mismatch");
  // one pass so that identical inputs give exactly 1
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    dot += a(i) * b(i);
    na += a(i) * a(i);
    nb += b(i) * b(i);
  }
  const double den = std::sqrt(na * nb);
  if (den == 0.0) return 0.0;
  return std::clamp(dot / den, -1.0, 1.0);
}

Vector mean_vector(const std::vector<const Vector*>& vs) {
  Vector m = Vector::Zero(vs.front()->size());
  for (const Vector* v : vs) m += *v;
  return m / static_cast<double>(vs.size());
}

Vector extrema_vector(const std::vector<const Vector*>& vs) {
  Vector m = *vs.front();
  for (const Vector* v : vs)
    for (Eigen::Index d = 0; d < m.size(); ++d)
      if (std::abs((*v)(d)) > std::abs(m(d))) m(d) = (*v)(d);
  return m;
}

double greedy_match(const std::vector<const Vector*>& from, const std::vector<const Vector*>& to) {
  double sum = 0.0;
  for (const Vector* a : from) {
    double best = -1.0;
    for (const Vector* b : to) best = std::max(best, cosine(*a, *b));
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

template <class F>
std::optional<double> pairwise(const Sentence& a, const Sentence& b, const WordVectors& wv, F&& f) {
  const auto va = lookup(a, wv), vb = lookup(b, wv);
  if (va.empty() || vb.empty()) return std::nullopt;
  return f(va, vb);
}

}  // namespace

std::optional<double> embedding_average(const Sentence& hyp, const Sentence& ref, const WordVectors& vectors) {
  return pairwise(hyp, ref, vectors, [](const auto& a, const auto& b) { return cosine(mean_vector(a), mean_vector(b)); });
}

std::optional<double> embedding_extrema(const Sentence& hyp, const Sentence& ref, const WordVectors& vectors) {
  return pairwise(hyp, ref, vectors,
                  [](const auto& a, const auto& b) { return cosine(extrema_vector(a), extrema_vector(b)); });
}

std::optional<double> embedding_greedy(const Sentence& hyp, const Sentence& ref, const WordVectors& vectors) {
  return pairwise(hyp, ref, vectors,
                  [](const auto& a, const auto& b) { return 0.5 * (greedy_match(a, b) + greedy_match(b, a)); });
}

std::optional<double> coherence(const Sentence& query, const Sentence& response, const WordVectors& vectors) {
  return embedding_average(query, response, vectors);
}

EmbeddingScores embedding_scores(std::span<const Sentence> hypotheses, std::span<const Sentence> references,
                                 const WordVectors& vectors) {
  if (hypotheses.size() != references.size()) throw ValidationError("embedding metrics need paired lists");
  EmbeddingScores s;
  std::size_t used = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto a = embedding_average(hypotheses[i], references[i], vectors);
    if (!a) {
      ++s.skipped;
      continue;
    }
    s.average += *a;
    s.extrema += *embedding_extrema(hypotheses[i], references[i], vectors);
    s.greedy += *embedding_greedy(hypotheses[i], references[i], vectors);
    ++used;
  }
  if (used) {
    s.average /= static_cast<double>(used);
    s.extrema /= static_cast<double>(used);
    s.greedy /= static_cast<double>(used);
  }
  return s;
}

std::pair<double, std::size_t> corpus_coherence(std::span<const Sentence> queries, std::span<const Sentence> responses,
                                                const WordVectors& vectors) {
  if (queries.size() != responses.size()) throw ValidationError("coherence needs paired lists");
  double sum = 0.0;
  std::size_t used = 0, skipped = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (auto c = coherence(queries[i], responses[i], vectors)) {
      sum += *c;
      ++used;
    } else {
      ++skipped;
    }
  }
  return {used ? sum / static_cast<double>(used) : 0.0, skipped};
}

// ---------------------------------------------------------------------------
// Emotion metrics

double emotion_accuracy(const EmotionClassifier& cls, std::span<const std::vector<TokenId>> generated,
                        std::span<const Emotion> targets) {
  if (generated.empty()) throw ValidationError("emotion accuracy of an empty list is undefined");
  if (generated.size() != targets.size()) throw ValidationError("emotion accuracy needs paired lists");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < generated.size(); ++i)
    if (!generated[i].empty() && cls.predict(generated[i]) == targets[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(generated.size());
}

double emotion_word_rate(const EmotionLexicon& lexicon, std::span<const Sentence> generated,
                         std::span<const Emotion> targets) {
  if (generated.size() != targets.size()) throw ValidationError("emotion word rate needs paired lists");
  std::size_t considered = 0, hits = 0;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    if (targets[i] == Emotion::Neutral) continue;
    ++considered;
    if (std::any_of(generated[i].begin(), generated[i].end(),
                    [&](const std::string& w) { return lexicon.contains(targets[i], w); }))
      ++hits;
  }
  if (considered == 0) throw ValidationError("emotion word rate is undefined when every target is Neutral");
  return static_cast<double>(hits) / static_cast<double>(considered);
}

// ---------------------------------------------------------------------------
// Report

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"average", r.average},
                     {"extrema", r.extrema},
                     {"greedy", r.greedy},
                     {"coherence", r.coherence},
                     {"dist1", r.dist1},
                     {"dist2", r.dist2},
                     {"bleu1", r.bleu1},
                     {"bleu2", r.bleu2},
                     {"emo_acc", r.emo_acc},
                     {"emo_word", r.emo_word},
                     {"pairs", r.pairs},
                     {"embedding_skipped", r.embedding_skipped},
                     {"coherence_skipped", r.coherence_skipped},
                     {"vectors_source", r.vectors_source},
                     {"raw", r.raw}};
}

std::string format_report_table(const EvalReport& r, const std::string& system) {
  const std::vector<std::pair<std::string, double>> cols = {
      {"Average", r.average}, {"Extrema", r.extrema}, {"Greedy", r.greedy}, {"Coherence", r.coherence},
      {"Dist-1", r.dist1},    {"Dist-2", r.dist2},    {"BLEU-1", r.bleu1},  {"BLEU-2", r.bleu2},
      {"Emo-acc", r.emo_acc}, {"Emo-word", r.emo_word}};
  const int first = static_cast<int>(std::max<std::size_t>(6, system.size())) + 2;
  std::ostringstream out;
  out << std::left << std::setw(first) << "System";
  for (const auto& [name, v] : cols) out << std::right << std::setw(11) << name;
  out << '\n' << std::left << std::setw(first) << system << std::fixed << std::setprecision(4);
  for (const auto& [name, v] : cols) out << std::right << std::setw(11) << v;
  out << '\n';
  return out.str();
}

EvalReport full_report(const SeqModel& forward, const Corpus& test, const EmotionClassifier& cls,
                       const EmotionLexicon& lexicon, const Vocabulary& vocab, const WordVectors& vectors,
                       std::vector<GenerationRecord>* generations) {
  if (test.empty()) throw ValidationError("evaluation corpus is empty");
  std::vector<Sentence> hyps, refs, queries;
  std::vector<std::vector<TokenId>> ids;
  std::vector<Emotion> targets;
  for (const auto& p : test.pairs) {
    const Generation g = forward.generate_greedy(p.query.ids, p.response_emotion);
    ids.push_back(g.ids);
    hyps.push_back(decode_utterance(g.ids, vocab));
    refs.push_back(p.response.tokens.empty() ? decode_utterance(p.response.ids, vocab) : p.response.tokens);
    queries.push_back(p.query.tokens.empty() ? decode_utterance(p.query.ids, vocab) : p.query.tokens);
    targets.push_back(p.response_emotion);
    if (generations) generations->push_back({queries.back(), p.response_emotion, hyps.back(), g.ids});
  }
  EvalReport r;
  r.pairs = test.size();
  r.vectors_source = vectors.source();
  const EmbeddingScores e = embedding_scores(hyps, refs, vectors);
  const auto [coh, coh_skipped] = corpus_coherence(queries, hyps, vectors);
  r.raw = {{"average", e.average}, {"extrema", e.extrema}, {"greedy", e.greedy}, {"coherence", coh}};
  r.average = std::clamp(e.average, 0.0, 1.0);
  r.extrema = std::clamp(e.extrema, 0.0, 1.0);
  r.greedy = std::clamp(e.greedy, 0.0, 1.0);
  r.coherence = std::clamp(coh, 0.0, 1.0);
  r.embedding_skipped = e.skipped;
  r.coherence_skipped = coh_skipped;
  r.dist1 = distinct_n(hyps, 1);
  r.dist2 = distinct_n(hyps, 2);
  r.bleu1 = bleu_n(hyps, refs, 1);
  r.bleu2 = bleu_n(hyps, refs, 2);
  r.emo_acc = emotion_accuracy(cls, ids, targets);
  r.emo_word = emotion_word_rate(lexicon, hyps, targets);
  return r;
}

void write_generations(std::span<const GenerationRecord> generations, std::ostream& out) {
  for (const auto& g : generations) {
    auto join = [](const Sentence& s) {
      std::string out;
      for (const auto& w : s) out += (out.empty() ? "" : " ") + w;
      return out;
    };
    nlohmann::json j{{"query", join(g.query)}, {"e_r", emotion_name(g.emotion)}, {"response", join(g.response)}};
    out << j.dump() << '\n';
  }
}

}  // namespace cdl
