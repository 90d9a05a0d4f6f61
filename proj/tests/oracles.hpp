// Checks shared by the unit tests and the acceptance binary.
#pragma once

#include <boost/math/special_functions/gamma.hpp>
#include <algorithm>
#include <cmath>
#include <vector>

#include "cdl/ecm_model.hpp"
#include "cdl/nn.hpp"
#include "cdl/random.hpp"
#include "cdl/trainer.hpp"
#include "fixtures.hpp"

namespace oracles {

using namespace cdl;

inline double chi_square_pvalue(const std::vector<std::size_t>& counts) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) stat += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  return boost::math::gamma_q(static_cast<double>(counts.size() - 1) / 2.0, stat / 2.0);
}

struct GradCheck {
  int checked = 0;
  int passed = 0;
  double max_rel_error = 0.0;
};

/// Central differences on randomly chosen scalars of the toy model's loss.
inline GradCheck loss_gradient_check(int wanted, std::uint64_t seed) {
  const Vocabulary vocab = fixtures::toy_vocab();
  const LexiconIndex index(fixtures::toy_lexicon(), vocab);
  SeqModel m(fixtures::tiny_config(static_cast<int>(vocab.size())), index, 9);
  const DialoguePair p =
      fixtures::pair({"w0", "w1", "w2"}, Emotion::Neutral, {"w1", "joy", "w3", "glad"}, Emotion::Happy, vocab);
  const Seq2SeqExample ex = make_example(p, Direction::Forward);
  m.params().zero_grad();
  m.accumulate_loss_gradient(ex, 1.0);

  GradCheck out;
  Rng rng(mix_seed(seed));
  for (int attempts = 0; out.checked < wanted && attempts < 4000; ++attempts) {
    auto& prm = m.params()[uniform_index(rng, m.params().size())];
    const auto r = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(prm.value.rows())));
    const auto c = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(prm.value.cols())));
    const double analytic = prm.grad(r, c);
    if (std::abs(analytic) < 1e-4) continue;
    const double h = 1e-5, orig = prm.value(r, c);
    prm.value(r, c) = orig + h;
    const double up = m.loss(ex).total;
    prm.value(r, c) = orig - h;
    const double down = m.loss(ex).total;
    prm.value(r, c) = orig;
    const double numeric = (up - down) / (2 * h);
    const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric));
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.checked;
    if (rel <= 1e-3) ++out.passed;
  }
  return out;
}

/// One-token policy over three content words {a, b, c}; reward 1 iff `a`
/// is sampled, greedy baseline. Returns P(a) before every update.
inline std::vector<double> run_bandit(int steps, std::uint64_t seed, int batch = 8, double lr = 0.05) {
  const Vocabulary vocab(std::vector<std::string>{"a", "b", "c"});
  const LexiconIndex index(EmotionLexicon{}, vocab);
  ModelConfig mc;
  mc.vocab_size = static_cast<int>(vocab.size());
  mc.encoder_layers = mc.decoder_layers = 1;
  mc.hidden = 8;
  mc.word_dim = 6;
  mc.emotion_dim = 4;
  mc.min_decode_length = mc.max_decode_length = 1;
  SeqModel model(mc, index, seed);
  nn::Adam opt(model.params(), {.lr = lr});
  const TokenId a = vocab.id("a");
  const std::vector<TokenId> source = {vocab.id("b"), vocab.id("c"), vocab.id("b")};
  const std::vector<TokenId> target = {a};
  const Seq2SeqExample ex{source, target, Emotion::Neutral};

  Rng rng(mix_seed(seed, 1));
  std::vector<double> p_a;
  for (int t = 0; t < steps; ++t) {
    const auto trace = model.trace(ex);
    // EOS is masked at the only step, so renormalize over the rest.
    const double eos = trace[0].probs(Vocabulary::kEos);
    p_a.push_back(trace[0].probs(a) / (1.0 - eos));

    const Generation greedy = model.generate_greedy(source, Emotion::Neutral);
    const double baseline = !greedy.ids.empty() && greedy.ids[0] == a ? 1.0 : 0.0;
    std::vector<Generation> gens;
    for (int i = 0; i < batch; ++i) gens.push_back(model.generate_sample(source, Emotion::Neutral, 1.0, rng));
    std::vector<PolicySample> samples;
    for (const auto& g : gens) {
      const double reward = !g.ids.empty() && g.ids[0] == a ? 1.0 : 0.0;
      samples.push_back({source, &g, Emotion::Neutral, reward - baseline});
    }
    reinforce_update(model, opt, samples);
  }
  return p_a;
}

inline std::vector<double> window_means(const std::vector<double>& v, std::size_t w) {
  std::vector<double> out;
  for (std::size_t i = 0; i + w <= v.size(); i += w) {
    double s = 0.0;
    for (std::size_t k = i; k < i + w; ++k) s += v[k];
    out.push_back(s / static_cast<double>(w));
  }
  return out;
}

}  // namespace oracles
