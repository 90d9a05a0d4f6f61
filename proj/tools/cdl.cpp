// cdl: data generation, pretraining, curriculum dual learning, evaluation,
// curriculum inspection and a chat REPL.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cdl/checkpoint.hpp"
#include "cdl/config.hpp"
#include "cdl/error.hpp"
#include "cdl/eval.hpp"

namespace fs = std::filesystem;
using namespace cdl;

namespace {

struct Common {
  std::string config;
  std::string preset = "paper";
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out = true) {
  cmd->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--preset", c.preset, "base defaults before the config file")
      ->check(CLI::IsMember({"paper", "desk"}));
  cmd->add_option("--seed", c.seed, "overrides the run seed");
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
}

RunConfig resolve(const Common& c) {
  RunConfig base = c.preset == "desk" ? RunConfig::desk_scale() : RunConfig{};
  RunConfig cfg = c.config.empty() ? base : load_run_config(c.config, base);
  cfg.validate();
  return cfg;
}

void require_dir(const fs::path& dir, const char* what) {
  if (!fs::is_directory(dir)) throw Error(std::string(what) + " not found: " + dir.string());
}

std::optional<Emotion> parse_emotion_flag(const std::string& s) {
  if (s == "all") return std::nullopt;
  return emotion_from_name(s);
}

// ---------------------------------------------------------------------------

void cmd_gen_data(Common& c, std::optional<std::size_t> n, std::optional<std::size_t> vocab) {
  RunConfig cfg = resolve(c);
  if (c.seed) cfg.data.seed = *c.seed;
  if (n) cfg.data.synthetic_pairs = *n;
  if (vocab) cfg.data.synthetic_vocab = *vocab;
  cfg.validate();
  const Dataset data = make_synthetic_dataset(cfg.data);
  save_dataset(data, c.out);
  write_meta(c.out, "gen-data", cfg,
             {{"pairs", {{"train", data.train.size()}, {"valid", data.valid.size()}, {"test", data.test.size()}}},
              {"vocab_size", data.vocab.size()}});
  spdlog::info("wrote {} pairs to {}", data.train.size() + data.valid.size() + data.test.size(), c.out);
}

void cmd_pretrain(Common& c, const std::string& data_dir) {
  RunConfig cfg = resolve(c);
  if (c.seed) cfg.trainer.seed = *c.seed;
  require_dir(data_dir, "dataset directory");
  Dataset data = load_dataset(data_dir, cfg.data.max_vocab);
  bind_vocabulary(cfg, data.vocab);
  const LexiconIndex index(data.lexicon, data.vocab);
  PretrainResult r = pretrain(data.train, data.valid, index, cfg.model, cfg.classifier, cfg.trainer);
  const fs::path out(c.out);
  save_model(r.forward, data.vocab, data.lexicon, out / "forward", {Direction::Forward, 0});
  save_model(r.backward, data.vocab, data.lexicon, out / "backward", {Direction::Backward, 0});
  save_classifier(r.classifier, data.vocab, out / "classifier");
  const double cls_acc = accuracy(r.classifier, data.test);
  write_meta(out, "pretrain", cfg,
             {{"data", fs::absolute(data_dir).string()},
              {"initial_loss", r.initial_loss},
              {"final_loss", r.final_loss},
              {"classifier_test_accuracy", cls_acc}});
  std::cout << "forward valid loss " << r.initial_loss[0] << " -> " << r.final_loss[0] << "\n"
            << "backward valid loss " << r.initial_loss[1] << " -> " << r.final_loss[1] << "\n"
            << "classifier test accuracy " << cls_acc << "\n";
}

void cmd_train_cdl(Common& c, const std::string& data_dir, const std::string& pretrained, const std::string& resume,
                   const std::string& ablation_name) {
  RunConfig cfg = resolve(c);
  if (c.seed) cfg.trainer.seed = *c.seed;
  const Ablation ablation = parse_ablation(ablation_name);
  apply_ablation(ablation, cfg.rewards, cfg.curriculum);
  cfg.validate();
  require_dir(data_dir, "dataset directory");
  Dataset data = load_dataset(data_dir, cfg.data.max_vocab);
  bind_vocabulary(cfg, data.vocab);

  TrainState state = [&] {
    if (!resume.empty()) {
      require_dir(resume, "checkpoint");
      return load_train_state(resume, data.vocab, data.lexicon, data.train);
    }
    const fs::path p(pretrained);
    for (const char* sub : {"forward", "backward", "classifier"}) require_dir(p / sub, "checkpoint");
    return make_train_state(load_model(p / "forward", data.vocab, data.lexicon),
                            load_model(p / "backward", data.vocab, data.lexicon),
                            load_classifier(p / "classifier", data.vocab), data.train, cfg.trainer);
  }();

  const fs::path out(c.out);
  fs::create_directories(out);
  write_meta(out, "train-cdl", cfg,
             {{"data", fs::absolute(data_dir).string()},
              {"pretrained", pretrained.empty() ? "" : fs::absolute(pretrained).string()},
              {"resume", resume.empty() ? "" : fs::absolute(resume).string()},
              {"ablation", ablation_name}});
  std::ofstream log(out / "log.jsonl", resume.empty() ? std::ios::trunc : std::ios::app);
  TrainingOutputs outputs{&log, out, &data.vocab, &data.lexicon};
  const TrainingResult r =
      run_training(state, data.train, data.valid, cfg.trainer, cfg.rewards, cfg.curriculum, {}, outputs);
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [s, a] : r.validation_curve) curve.push_back({s, a});
  write_json_file(out / "result.json", {{"stop_reason", r.stop_reason},
                                        {"steps", r.steps},
                                        {"best_step", r.best_step},
                                        {"best_valid", r.best_valid},
                                        {"validation_curve", curve}});
  std::cout << "stopped (" << r.stop_reason << ") after " << r.steps << " steps; best valid emotion-acc "
            << r.best_valid << " at step " << r.best_step << "\n";
}

void cmd_evaluate(Common& c, const std::string& data_dir, const std::string& model_dir, std::string vectors) {
  RunConfig cfg = resolve(c);
  if (vectors.empty()) vectors = cfg.data.vectors;
  require_dir(data_dir, "dataset directory");
  Dataset data = load_dataset(data_dir, cfg.data.max_vocab);
  const fs::path m(model_dir);
  require_dir(m / "forward", "checkpoint");
  require_dir(m / "classifier", "checkpoint");
  const SeqModel forward = load_model(m / "forward", data.vocab, data.lexicon);
  const EmotionClassifier cls = load_classifier(m / "classifier", data.vocab);
  const WordVectors wv = vectors.empty() ? WordVectors::from_model(forward, data.vocab) : WordVectors::load(vectors);

  std::vector<GenerationRecord> gens;
  const EvalReport report = full_report(forward, data.test, cls, data.lexicon, data.vocab, wv, &gens);
  const fs::path out(c.out);
  fs::create_directories(out);
  nlohmann::json rj = report;
  write_json_file(out / "report.json", rj);
  const std::string table = format_report_table(report, m.filename().string());
  std::ofstream(out / "report.txt") << table;
  std::ofstream g(out / "generations.jsonl");
  write_generations(gens, g);
  write_meta(out, "evaluate", cfg,
             {{"data", fs::absolute(data_dir).string()}, {"model", fs::absolute(m).string()},
              {"vectors", report.vectors_source}});
  std::cout << table;
}

void cmd_rank(Common& c, const std::string& data_dir, const std::string& model_dir, const std::string& direction) {
  RunConfig cfg = resolve(c);
  require_dir(data_dir, "dataset directory");
  Dataset data = load_dataset(data_dir, cfg.data.max_vocab);
  const fs::path cls_dir = fs::path(model_dir) / "classifier";
  require_dir(cls_dir, "checkpoint");
  const EmotionClassifier cls = load_classifier(cls_dir, data.vocab);
  const fs::path out(c.out);
  fs::create_directories(out);
  for (Direction d : {Direction::Forward, Direction::Backward}) {
    if (direction != "both" && direction != direction_name(d)) continue;
    const RankedDataset ranked = rank_by_difficulty(data.train, cls, d, cfg.curriculum.balance_emotions);
    const fs::path file = out / ("ranking_" + std::string(direction_name(d)) + ".csv");
    write_ranking_csv(ranked, file);
    std::cout << file.string() << "\n";
  }
  write_meta(out, "rank-curriculum", cfg,
             {{"data", fs::absolute(data_dir).string()}, {"model", fs::absolute(model_dir).string()}});
}

void cmd_chat(Common& c, const std::string& data_dir, const std::string& model_dir, const std::string& emotion_flag) {
  RunConfig cfg = resolve(c);
  const std::optional<Emotion> only = parse_emotion_flag(emotion_flag);
  require_dir(data_dir, "dataset directory");
  Dataset data = load_dataset(data_dir, cfg.data.max_vocab);
  const fs::path m(model_dir);
  require_dir(m / "forward", "checkpoint");
  require_dir(m / "classifier", "checkpoint");
  const SeqModel forward = load_model(m / "forward", data.vocab, data.lexicon);
  const EmotionClassifier cls = load_classifier(m / "classifier", data.vocab);
  if (!c.out.empty())
    write_meta(c.out, "chat", cfg, {{"model", fs::absolute(m).string()}, {"emotion", emotion_flag}});

  std::string line;
  while (std::getline(std::cin, line)) {
    std::istringstream ss(line);
    std::vector<std::string> tokens{std::istream_iterator<std::string>(ss), std::istream_iterator<std::string>()};
    if (tokens.empty()) continue;
    const Utterance q = encode_utterance(tokens, data.vocab);
    std::cout << "query emotion: " << emotion_name(cls.predict(q.ids)) << "\n";
    for (Emotion e : kAllEmotions) {
      if (only && *only != e) continue;
      const Generation gen = generate_greedy(forward, q, e);
      std::cout << "[" << emotion_name(e) << "]";
      for (const auto& w : decode_utterance(gen.ids, data.vocab)) std::cout << " " << w;
      std::cout << "\n";
    }
    std::cout.flush();
  }
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("cdl"));
  if (const char* lvl = std::getenv("CDL_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(lvl));

  CLI::App app{"Curriculum dual learning for emotion-controllable response generation"};
  app.require_subcommand(1);

  Common common;
  std::optional<std::size_t> n, vocab;
  std::string data_dir, pretrained, resume, model_dir, vectors, ablation = "full", emotion = "all",
                                                                direction = "both";

  auto* gen = app.add_subcommand("gen-data", "write a synthetic corpus, lexicon and vocabulary");
  add_common(gen, common);
  gen->add_option("--n", n, "number of dialogue pairs");
  gen->add_option("--vocab", vocab, "vocabulary size");

  auto* pre = app.add_subcommand("pretrain", "pretrain forward/backward models and the classifier");
  add_common(pre, common);
  pre->add_option("--data", data_dir, "dataset directory")->required();

  auto* train = app.add_subcommand("train-cdl", "curriculum dual learning");
  add_common(train, common);
  train->add_option("--data", data_dir, "dataset directory")->required();
  auto* pre_opt = train->add_option("--pretrained", pretrained, "pretrain output directory");
  auto* res_opt = train->add_option("--resume", resume, "checkpoint directory to resume from");
  pre_opt->excludes(res_opt);
  train->add_option("--ablation", ablation, "full | emo | con | dl")
      ->check(CLI::IsMember({"full", "emo", "con", "dl"}));

  auto* ev = app.add_subcommand("evaluate", "score greedy test responses");
  add_common(ev, common);
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--model", model_dir, "directory holding forward/ and classifier/")->required();
  ev->add_option("--vectors", vectors, "external word vectors (text format)");

  auto* rank = app.add_subcommand("rank-curriculum", "export the difficulty ranking");
  add_common(rank, common);
  rank->add_option("--data", data_dir, "dataset directory")->required();
  rank->add_option("--model", model_dir, "directory holding classifier/")->required();
  rank->add_option("--direction", direction, "forward | backward | both")
      ->check(CLI::IsMember({"forward", "backward", "both"}));

  auto* chat = app.add_subcommand("chat", "read queries from stdin, reply under each emotion");
  add_common(chat, common, false);
  chat->add_option("--data", data_dir, "dataset directory")->required();
  chat->add_option("--model", model_dir, "directory holding forward/ and classifier/")->required();
  chat->add_option("--emotion", emotion, "emotion name or all");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      cmd_gen_data(common, n, vocab);
    } else if (*pre) {
      cmd_pretrain(common, data_dir);
    } else if (*train) {
      if (pretrained.empty() && resume.empty()) throw ValidationError("train-cdl needs --pretrained or --resume");
      cmd_train_cdl(common, data_dir, pretrained, resume, ablation);
    } else if (*ev) {
      cmd_evaluate(common, data_dir, model_dir, vectors);
    } else if (*rank) {
      cmd_rank(common, data_dir, model_dir, direction);
    } else if (*chat) {
      cmd_chat(common, data_dir, model_dir, emotion);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
