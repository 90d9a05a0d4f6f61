#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdl/classifier.hpp"
#include "cdl/corpus.hpp"
#include "cdl/curriculum.hpp"
#include "cdl/ecm_model.hpp"
#include "cdl/nn.hpp"
#include "cdl/rewards.hpp"

namespace cdl {

struct TrainerConfig {
  int pretrain_epochs = 10;
  double pretrain_lr = 0.05;
  double cdl_lr = 1e-5;
  int batch_size = 64;
  std::int64_t max_steps = 100000;
  std::int64_t validation_interval = 500;
  int patience = 10;                     // validation rounds without improvement
  std::int64_t checkpoint_interval = 0;  // 0: only best and final
  double sample_temperature = 1.0;
  double collapse_factor = 3.0;
  double collapse_smoothing = 0.9;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const TrainerConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainerConfig& c);
void from_json(const nlohmann::json& j, TrainerConfig& c);

enum class Ablation { Full, EmoOnly, ConOnly, NoCurriculum };
std::string_view ablation_name(Ablation a);
/// Accepts full / emo / con / dl.
Ablation parse_ablation(std::string_view name);
void apply_ablation(Ablation a, RewardConfig& rewards, CurriculumConfig& curriculum);

// ---------------------------------------------------------------------------
// Pretraining

/// Mean objective over the corpus in one direction.
LossBreakdown mean_loss(const SeqModel& model, const Corpus& corpus, Direction direction);

/// MLE epochs over shuffled minibatches. Returns the per-epoch mean loss.
std::vector<double> pretrain_seq_model(SeqModel& model, const Corpus& train, Direction direction, int epochs,
                                       double lr, int batch_size, std::uint64_t seed);

struct PretrainResult {
  SeqModel forward;
  SeqModel backward;
  EmotionClassifier classifier;
  ClassifierTrainingReport classifier_report;
  std::array<double, 2> initial_loss{};  // validation objective per direction
  std::array<double, 2> final_loss{};
};

/// M_f on (q, r, e_r), M_b on (r, q, e_q), the classifier on every labeled utterance.
PretrainResult pretrain(const Corpus& train, const Corpus& valid, const LexiconIndex& lexicon,
                        const ModelConfig& model_config, const ClassifierConfig& classifier_config,
                        const TrainerConfig& config);

// ---------------------------------------------------------------------------
// Curriculum dual learning

struct TrainState {
  SeqModel forward;
  SeqModel backward;
  EmotionClassifier classifier;
  nn::Adam forward_opt;
  nn::Adam backward_opt;
  RankedDataset ranked_forward;
  RankedDataset ranked_backward;
  std::int64_t step = 0;
  double best_valid = -std::numeric_limits<double>::infinity();
  std::int64_t best_step = 0;
  int stale_rounds = 0;
  std::array<double, 2> tf_reference{};  // teacher-forcing NLL at the end of pretraining
  std::array<double, 2> tf_ema{};

  SeqModel& policy(Direction d) { return d == Direction::Forward ? forward : backward; }
  SeqModel& dual(Direction d) { return d == Direction::Forward ? backward : forward; }
  nn::Adam& optimizer(Direction d) { return d == Direction::Forward ? forward_opt : backward_opt; }
  const RankedDataset& ranked(Direction d) const { return d == Direction::Forward ? ranked_forward : ranked_backward; }
};

TrainState make_train_state(SeqModel forward, SeqModel backward, EmotionClassifier classifier, const Corpus& train,
                            const TrainerConfig& config);

struct PolicySample {
  std::span<const TokenId> source;
  const Generation* generation = nullptr;
  Emotion emotion = Emotion::Neutral;
  double advantage = 0.0;
};

/// One step on -mean_i(advantage_i * log p(sample_i)). Samples with a zero
/// or non-finite advantage contribute nothing; when no sample contributes
/// the optimizer is not stepped. Returns the pre-clip gradient norm.
double reinforce_update(SeqModel& model, nn::Adam& optimizer, std::span<const PolicySample> samples);

struct StepStats {
  std::int64_t step = 0;
  Direction direction = Direction::Forward;
  RewardBreakdown mean;  // batch means
  double competence = 1.0;
  std::size_t frontier = 0;
  double rl_grad_norm = 0.0;
  double tf_nll = 0.0;
  double tf_ema = 0.0;
  std::size_t skipped = 0;
  std::vector<RewardBreakdown> samples;
  // Parameter fingerprints around the update.
  std::uint64_t policy_before = 0, policy_after = 0;
  std::uint64_t dual_before = 0, dual_after = 0;
  std::uint64_t classifier_before = 0, classifier_after = 0;
};

nlohmann::json step_log_record(const StepStats& s);

/// RL update plus teacher forcing for one direction on the given corpus
/// indices. Forward: sample r' from M_f, reward with the classifier on
/// (r', e_r) and M_b reconstructing q under e_q. Backward mirrors it.
StepStats rl_step(TrainState& state, Direction direction, const Corpus& train, std::span<const std::size_t> batch,
                  const TrainerConfig& config, const RewardConfig& rewards);
StepStats rl_step_forward(TrainState& state, const Corpus& train, std::span<const std::size_t> batch,
                          const TrainerConfig& config, const RewardConfig& rewards);
StepStats rl_step_backward(TrainState& state, const Corpus& train, std::span<const std::size_t> batch,
                           const TrainerConfig& config, const RewardConfig& rewards);

/// Fraction of validation pairs whose greedy response (under e_r) the
/// classifier labels e_r.
double validation_emotion_accuracy(const SeqModel& forward, const EmotionClassifier& cls, const Corpus& valid);

struct TrainingCallbacks {
  std::function<void(const StepStats&)> on_step;
  std::function<void(std::int64_t step, double valid_accuracy)> on_validation;
};

struct TrainingOutputs {
  std::ostream* log = nullptr;  // JSON lines
  std::optional<std::filesystem::path> checkpoint_dir;
  const Vocabulary* vocab = nullptr;
  const EmotionLexicon* lexicon = nullptr;
};

struct TrainingResult {
  std::string stop_reason;  // max_steps | patience | collapse
  std::int64_t steps = 0;
  std::int64_t best_step = 0;
  double best_valid = 0.0;
  std::vector<std::pair<std::int64_t, double>> validation_curve;
};

TrainingResult run_training(TrainState& state, const Corpus& train, const Corpus& valid, const TrainerConfig& config,
                            const RewardConfig& rewards, const CurriculumConfig& curriculum,
                            const TrainingCallbacks& callbacks = {}, const TrainingOutputs& outputs = {});

/// {forward/, backward/, classifier/, trainer_state.json, *.adam}.
void save_train_state(const TrainState& state, const Vocabulary& vocab, const EmotionLexicon& lexicon,
                      const std::filesystem::path& dir);
TrainState load_train_state(const std::filesystem::path& dir, const Vocabulary& vocab, const EmotionLexicon& lexicon,
                            const Corpus& train);

}  // namespace cdl
