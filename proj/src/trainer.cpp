#include "cdl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "cdl/checkpoint.hpp"
#include "cdl/error.hpp"
#include "cdl/random.hpp"

namespace cdl {

namespace {

constexpr std::size_t kReferenceSample = 256;

std::uint64_t direction_tag(Direction d) { return d == Direction::Forward ? 0xf0 : 0xb0; }
std::size_t direction_slot(Direction d) { return d == Direction::Forward ? 0 : 1; }
Direction other(Direction d) { return d == Direction::Forward ? Direction::Backward : Direction::Forward; }

double mean_nll(const SeqModel& model, const Corpus& corpus, Direction d, std::size_t limit) {
  const std::size_t n = std::min(limit, corpus.size());
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += model.loss(make_example(corpus.pairs[i], d)).nll;
  return sum / static_cast<double>(n);
}

}  // namespace

void TrainerConfig::validate() const {
  if (!(pretrain_lr > 0.0) || !(cdl_lr > 0.0)) throw ValidationError("trainer config: learning rates must be > 0");
  if (batch_size < 1) throw ValidationError("trainer config: batch_size must be >= 1");
  if (pretrain_epochs < 0 || max_steps < 0) throw ValidationError("trainer config: epochs and steps must be >= 0");
  if (validation_interval < 1 || patience < 1) throw ValidationError("trainer config: validation_interval and patience must be >= 1");
  if (checkpoint_interval < 0) throw ValidationError("trainer config: checkpoint_interval must be >= 0");
  if (!(sample_temperature > 0.0)) throw ValidationError("trainer config: sample_temperature must be > 0");
  if (!(collapse_factor > 1.0)) throw ValidationError("trainer config: collapse_factor must be > 1");
  if (!(collapse_smoothing >= 0.0 && collapse_smoothing < 1.0))
    throw ValidationError("trainer config: collapse_smoothing must be in [0, 1)");
}

void to_json(nlohmann::json& j, const TrainerConfig& c) {
  j = nlohmann::json{{"pretrain_epochs", c.pretrain_epochs},
                     {"pretrain_lr", c.pretrain_lr},
                     {"cdl_lr", c.cdl_lr},
                     {"batch_size", c.batch_size},
                     {"max_steps", c.max_steps},
                     {"validation_interval", c.validation_interval},
                     {"patience", c.patience},
                     {"checkpoint_interval", c.checkpoint_interval},
                     {"sample_temperature", c.sample_temperature},
                     {"collapse_factor", c.collapse_factor},
                     {"collapse_smoothing", c.collapse_smoothing},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainerConfig& c) {
  c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
  c.pretrain_lr = j.value("pretrain_lr", c.pretrain_lr);
  c.cdl_lr = j.value("cdl_lr", c.cdl_lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.validation_interval = j.value("validation_interval", c.validation_interval);
  c.patience = j.value("patience", c.patience);
  c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
  c.sample_temperature = j.value("sample_temperature", c.sample_temperature);
  c.collapse_factor = j.value("collapse_factor", c.collapse_factor);
  c.collapse_smoothing = j.value("collapse_smoothing", c.collapse_smoothing);
  c.seed = j.value("seed", c.seed);
}

std::string_view ablation_name(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::EmoOnly: return "emo";
    case Ablation::ConOnly: return "con";
    case Ablation::NoCurriculum: return "dl";
  }
  return "full";
}

Ablation parse_ablation(std::string_view name) {
  for (Ablation a : {Ablation::Full, Ablation::EmoOnly, Ablation::ConOnly, Ablation::NoCurriculum})
    if (ablation_name(a) == name) return a;
  throw ValidationError("unknown ablation '" + std::string(name) + "' (expected full, emo, con or dl)");
}

void apply_ablation(Ablation a, RewardConfig& rewards, CurriculumConfig& curriculum) {
  rewards.emo_only = a == Ablation::EmoOnly;
  rewards.con_only = a == Ablation::ConOnly;
  curriculum.enabled = a != Ablation::NoCurriculum;
}

// ---------------------------------------------------------------------------

LossBreakdown mean_loss(const SeqModel& model, const Corpus& corpus, Direction direction) {
  if (corpus.empty()) throw ValidationError("mean loss of an empty corpus is undefined");
  LossBreakdown sum;
  for (const auto& p : corpus.pairs) sum += model.loss(make_example(p, direction));
  return sum.scaled(1.0 / static_cast<double>(corpus.size()));
}

std::vector<double> pretrain_seq_model(SeqModel& model, const Corpus& train, Direction direction, int epochs,
                                       double lr, int batch_size, std::uint64_t seed) {
  std::vector<double> history;
  if (epochs <= 0 || train.empty()) return history;
  nn::Adam opt(model.params(), {.lr = lr, .clip_norm = 5.0});
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, direction_tag(direction), 0x9e7));
  std::vector<Seq2SeqExample> batch;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(make_example(train.pairs[order[i]], direction));
      sum += mle_update(model, opt, batch).total;
      ++batches;
    }
    history.push_back(sum / static_cast<double>(batches));
    spdlog::debug("pretrain {} epoch {}: loss {:.4f}", direction_name(direction), epoch + 1, history.back());
  }
  return history;
}

PretrainResult pretrain(const Corpus& train, const Corpus& valid, const LexiconIndex& lexicon,
                        const ModelConfig& model_config, const ClassifierConfig& classifier_config,
                        const TrainerConfig& config) {
  config.validate();
  const Corpus& held = valid.empty() ? train : valid;
  PretrainResult r{init_model(model_config, lexicon, mix_seed(config.seed, 1)),
                   init_model(model_config, lexicon, mix_seed(config.seed, 2)),
                   {},
                   {},
                   {},
                   {}};
  for (Direction d : {Direction::Forward, Direction::Backward}) {
    SeqModel& m = d == Direction::Forward ? r.forward : r.backward;
    r.initial_loss[direction_slot(d)] = mean_loss(m, held, d).total;
    pretrain_seq_model(m, train, d, config.pretrain_epochs, config.pretrain_lr, config.batch_size,
                       mix_seed(config.seed, 4));
    r.final_loss[direction_slot(d)] = mean_loss(m, held, d).total;
    if (!std::isfinite(r.final_loss[direction_slot(d)])) throw DivergenceError("pretraining diverged");
    spdlog::info("pretrained {} model: validation loss {:.4f} -> {:.4f}", direction_name(d),
                 r.initial_loss[direction_slot(d)], r.final_loss[direction_slot(d)]);
  }
  r.classifier = train_classifier(train, classifier_config, mix_seed(config.seed, 3), &r.classifier_report);
  spdlog::info("classifier: best holdout accuracy {:.4f} after {} epochs", r.classifier_report.best_holdout_accuracy,
               r.classifier_report.epochs_run);
  return r;
}

// ---------------------------------------------------------------------------

TrainState make_train_state(SeqModel forward, SeqModel backward, EmotionClassifier classifier, const Corpus& train,
                            const TrainerConfig& config) {
  config.validate();
  TrainState s;
  s.forward = std::move(forward);
  s.backward = std::move(backward);
  s.classifier = std::move(classifier);
  s.forward_opt = nn::Adam(s.forward.params(), {.lr = config.cdl_lr, .clip_norm = 5.0});
  s.backward_opt = nn::Adam(s.backward.params(), {.lr = config.cdl_lr, .clip_norm = 5.0});
  s.ranked_forward = rank_by_difficulty(train, s.classifier, Direction::Forward);
  s.ranked_backward = rank_by_difficulty(train, s.classifier, Direction::Backward);
  for (Direction d : {Direction::Forward, Direction::Backward}) {
    const double ref = mean_nll(s.policy(d), train, d, kReferenceSample);
    s.tf_reference[direction_slot(d)] = ref;
    s.tf_ema[direction_slot(d)] = ref;
  }
  return s;
}

double reinforce_update(SeqModel& model, nn::Adam& optimizer, std::span<const PolicySample> samples) {
  if (samples.empty()) return 0.0;
  model.params().zero_grad();
  const double w = 1.0 / static_cast<double>(samples.size());
  bool any = false;
  for (const auto& s : samples) {
    if (s.advantage == 0.0 || !std::isfinite(s.advantage)) continue;
    const Seq2SeqExample ex{s.source, s.generation->ids, s.emotion};
    model.accumulate_logprob_gradient(ex, s.generation->terminated, -s.advantage * w);
    any = true;
  }
  if (!any) return 0.0;
  return optimizer.step(model.params());
}

nlohmann::json step_log_record(const StepStats& s) {
  nlohmann::json j = s.mean;
  j["kind"] = "step";
  j["step"] = s.step;
  j["direction"] = direction_name(s.direction);
  j["competence"] = s.competence;
  j["frontier"] = s.frontier;
  j["rl_grad_norm"] = s.rl_grad_norm;
  j["tf_nll"] = s.tf_nll;
  j["tf_ema"] = s.tf_ema;
  j["skipped"] = s.skipped;
  return j;
}

StepStats rl_step(TrainState& state, Direction direction, const Corpus& train, std::span<const std::size_t> batch,
                  const TrainerConfig& config, const RewardConfig& rewards) {
  if (batch.empty()) throw ValidationError("rl_step needs a non-empty batch");
  SeqModel& policy = state.policy(direction);
  const SeqModel& dual = state.dual(direction);
  StepStats st;
  st.step = state.step + 1;
  st.direction = direction;
  st.policy_before = policy.hash();
  st.dual_before = dual.hash();
  st.classifier_before = state.classifier.hash();

  std::vector<Seq2SeqExample> examples;
  std::vector<Generation> sampled(batch.size());
  std::vector<PolicySample> policy_samples;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const DialoguePair& pair = train.pairs.at(batch[i]);
    const Seq2SeqExample ex = make_example(pair, direction);
    examples.push_back(ex);
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(state.step) * 2 + direction_slot(direction), i));
    sampled[i] = policy.generate_sample(ex.source, ex.emotion, config.sample_temperature, rng);
    const Generation greedy = policy.generate_greedy(ex.source, ex.emotion);
    const RewardContext ctx{&state.classifier, &dual, ex.source, make_example(pair, other(direction)).emotion,
                            ex.emotion};
    RewardBreakdown r = score_with_baseline(ctx, sampled[i].ids, greedy.ids, rewards);
    if (!std::isfinite(r.advantage)) {
      ++st.skipped;
      spdlog::warn("step {} {}: non-finite advantage for corpus index {}, sample skipped", st.step,
                   direction_name(direction), batch[i]);
      continue;
    }
    st.samples.push_back(r);
    policy_samples.push_back({ex.source, &sampled[i], ex.emotion, r.advantage});
  }
  for (const auto& r : st.samples) {
    st.mean.r_e1 += r.r_e1;
    st.mean.r_e2 += r.r_e2;
    st.mean.r_e += r.r_e;
    st.mean.r_c += r.r_c;
    st.mean.total += r.total;
    st.mean.baseline += r.baseline;
    st.mean.advantage += r.advantage;
  }
  if (!st.samples.empty()) {
    const double k = 1.0 / static_cast<double>(st.samples.size());
    for (double* v : {&st.mean.r_e1, &st.mean.r_e2, &st.mean.r_e, &st.mean.r_c, &st.mean.total, &st.mean.baseline,
                      &st.mean.advantage})
      *v *= k;
  }

  nn::Adam& opt = state.optimizer(direction);
  st.rl_grad_norm = reinforce_update(policy, opt, policy_samples);
  const LossBreakdown tf = mle_update(policy, opt, examples);
  st.tf_nll = tf.nll;
  auto& ema = state.tf_ema[direction_slot(direction)];
  ema = config.collapse_smoothing * ema + (1.0 - config.collapse_smoothing) * tf.nll;
  st.tf_ema = ema;

  st.policy_after = policy.hash();
  st.dual_after = dual.hash();
  st.classifier_after = state.classifier.hash();
  return st;
}

StepStats rl_step_forward(TrainState& state, const Corpus& train, std::span<const std::size_t> batch,
                          const TrainerConfig& config, const RewardConfig& rewards) {
  return rl_step(state, Direction::Forward, train, batch, config, rewards);
}

StepStats rl_step_backward(TrainState& state, const Corpus& train, std::span<const std::size_t> batch,
                           const TrainerConfig& config, const RewardConfig& rewards) {
  return rl_step(state, Direction::Backward, train, batch, config, rewards);
}

double validation_emotion_accuracy(const SeqModel& forward, const EmotionClassifier& cls, const Corpus& valid) {
  if (valid.empty()) throw ValidationError("validation corpus is empty");
  std::size_t hits = 0;
  for (const auto& p : valid.pairs) {
    const Generation g = forward.generate_greedy(p.query.ids, p.response_emotion);
    if (!g.ids.empty() && cls.predict(g.ids) == p.response_emotion) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(valid.size());
}

namespace {

void write_record(const TrainingOutputs& out, const nlohmann::json& j) {
  if (out.log) *out.log << j.dump() << '\n';
}

void checkpoint(const TrainState& state, const TrainingOutputs& out, const char* name) {
  if (!out.checkpoint_dir) return;
  if (!out.vocab || !out.lexicon) throw ValidationError("checkpointing needs the vocabulary and lexicon");
  save_train_state(state, *out.vocab, *out.lexicon, *out.checkpoint_dir / name);
}

}  // namespace

TrainingResult run_training(TrainState& state, const Corpus& train, const Corpus& valid, const TrainerConfig& config,
                            const RewardConfig& rewards, const CurriculumConfig& curriculum,
                            const TrainingCallbacks& callbacks, const TrainingOutputs& outputs) {
  config.validate();
  rewards.validate();
  curriculum.validate();
  if (curriculum.balance_emotions) {
    state.ranked_forward = rank_by_difficulty(train, state.classifier, Direction::Forward, true);
    state.ranked_backward = rank_by_difficulty(train, state.classifier, Direction::Backward, true);
  }
  TrainingResult result;
  const auto validate_now = [&]() {
    const double acc = validation_emotion_accuracy(state.forward, state.classifier, valid);
    result.validation_curve.emplace_back(state.step, acc);
    write_record(outputs, {{"kind", "validation"}, {"step", state.step}, {"emo_acc", acc}});
    if (callbacks.on_validation) callbacks.on_validation(state.step, acc);
    if (acc > state.best_valid) {
      state.best_valid = acc;
      state.best_step = state.step;
      state.stale_rounds = 0;
      checkpoint(state, outputs, "best");
    } else {
      ++state.stale_rounds;
    }
    spdlog::info("step {}: validation emotion accuracy {:.4f} (best {:.4f} at {})", state.step, acc, state.best_valid,
                 state.best_step);
  };

  if (state.step == 0 && result.validation_curve.empty()) validate_now();
  result.stop_reason = "max_steps";
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  while (state.step < config.max_steps) {
    const std::int64_t t = state.step;
    bool collapsed = false;
    for (Direction d : {Direction::Forward, Direction::Backward}) {
      const CurriculumBatch b =
          sample_batch(state.ranked(d), t, batch_size, mix_seed(config.seed, 5, direction_tag(d)), curriculum);
      StepStats st = rl_step(state, d, train, b.indices, config, rewards);
      st.competence = b.competence;
      st.frontier = b.frontier;
      write_record(outputs, step_log_record(st));
      if (callbacks.on_step) callbacks.on_step(st);
      if (st.tf_ema > config.collapse_factor * state.tf_reference[direction_slot(d)]) {
        spdlog::error("step {} {}: teacher-forcing NLL {:.4f} exceeds {}x its pretraining value {:.4f}; halting",
                      st.step, direction_name(d), st.tf_ema, config.collapse_factor,
                      state.tf_reference[direction_slot(d)]);
        write_record(outputs, {{"kind", "collapse"}, {"step", st.step}, {"direction", direction_name(d)},
                               {"tf_ema", st.tf_ema}, {"reference", state.tf_reference[direction_slot(d)]}});
        collapsed = true;
      }
    }
    state.step = t + 1;
    if (collapsed) {
      result.stop_reason = "collapse";
      break;
    }
    if (state.step % config.validation_interval == 0) {
      validate_now();
      if (state.stale_rounds >= config.patience) {
        result.stop_reason = "patience";
        break;
      }
    }
    if (config.checkpoint_interval > 0 && state.step % config.checkpoint_interval == 0)
      checkpoint(state, outputs, "latest");
  }
  checkpoint(state, outputs, "final");
  result.steps = state.step;
  result.best_step = state.best_step;
  result.best_valid = state.best_valid;
  return result;
}

// ---------------------------------------------------------------------------

void save_train_state(const TrainState& state, const Vocabulary& vocab, const EmotionLexicon& lexicon,
                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_model(state.forward, vocab, lexicon, dir / "forward", {Direction::Forward, state.step});
  save_model(state.backward, vocab, lexicon, dir / "backward", {Direction::Backward, state.step});
  save_classifier(state.classifier, vocab, dir / "classifier");
  for (auto [opt, name] : {std::pair{&state.forward_opt, "forward.adam"}, std::pair{&state.backward_opt, "backward.adam"}}) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    opt->save(out);
  }
  nlohmann::json j{{"step", state.step},
                   {"best_valid", state.best_valid},
                   {"best_step", state.best_step},
                   {"stale_rounds", state.stale_rounds},
                   {"tf_reference", state.tf_reference},
                   {"tf_ema", state.tf_ema}};
  const auto& o = state.forward_opt.options();
  j["optimizer"] = {{"lr", o.lr}, {"beta1", o.beta1}, {"beta2", o.beta2}, {"eps", o.eps}, {"clip_norm", o.clip_norm}};
  write_json_file(dir / "trainer_state.json", j);
}

TrainState load_train_state(const std::filesystem::path& dir, const Vocabulary& vocab, const EmotionLexicon& lexicon,
                            const Corpus& train) {
  for (const char* part : {"forward", "backward", "classifier", "trainer_state.json", "forward.adam", "backward.adam"})
    if (!std::filesystem::exists(dir / part))
      throw Error("missing checkpoint component: " + (dir / part).string());
  TrainState s;
  s.forward = load_model(dir / "forward", vocab, lexicon);
  s.backward = load_model(dir / "backward", vocab, lexicon);
  s.classifier = load_classifier(dir / "classifier", vocab);
  const nlohmann::json j = read_json_file(dir / "trainer_state.json");
  const auto& o = j.at("optimizer");
  const nn::Adam::Options options{o.at("lr").get<double>(), o.at("beta1").get<double>(), o.at("beta2").get<double>(),
                                  o.at("eps").get<double>(), o.at("clip_norm").get<double>()};
  s.forward_opt = nn::Adam(s.forward.params(), options);
  s.backward_opt = nn::Adam(s.backward.params(), options);
  for (auto [opt, name] : {std::pair{&s.forward_opt, "forward.adam"}, std::pair{&s.backward_opt, "backward.adam"}}) {
    std::ifstream in(dir / name, std::ios::binary);
    opt->load(in);
  }
  s.step = j.at("step").get<std::int64_t>();
  s.best_valid = j.at("best_valid").get<double>();
  s.best_step = j.at("best_step").get<std::int64_t>();
  s.stale_rounds = j.at("stale_rounds").get<int>();
  s.tf_reference = j.at("tf_reference").get<std::array<double, 2>>();
  s.tf_ema = j.at("tf_ema").get<std::array<double, 2>>();
  s.ranked_forward = rank_by_difficulty(train, s.classifier, Direction::Forward);
  s.ranked_backward = rank_by_difficulty(train, s.classifier, Direction::Backward);
  return s;
}

}  // namespace cdl
