#include "cdl/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>

#include "cdl/error.hpp"
#include "cdl/random.hpp"

namespace cdl {

void CurriculumConfig::validate() const {
  if (!(c0_squared > 0.0 && c0_squared <= 1.0)) throw ValidationError("curriculum config: c0_squared must be in (0, 1]");
  if (length < 1) throw ValidationError("curriculum config: length must be >= 1");
}

void to_json(nlohmann::json& j, const CurriculumConfig& c) {
  j = nlohmann::json{{"c0_squared", c.c0_squared}, {"length", c.length}, {"enabled", c.enabled},
                     {"balance_emotions", c.balance_emotions}};
}

void from_json(const nlohmann::json& j, CurriculumConfig& c) {
  c.c0_squared = j.value("c0_squared", c.c0_squared);
  c.length = j.value("length", c.length);
  c.enabled = j.value("enabled", c.enabled);
  c.balance_emotions = j.value("balance_emotions", c.balance_emotions);
}

double competence(std::int64_t t, const CurriculumConfig& config) {
  if (t >= config.length) return 1.0;
  const double c2 = config.c0_squared;
  const double v = static_cast<double>(std::max<std::int64_t>(t, 0)) * (1.0 - c2) / static_cast<double>(config.length) + c2;
  return std::min(1.0, std::sqrt(v));
}

RankedDataset rank_by_scores(std::vector<double> scores, Direction direction) {
  RankedDataset r;
  r.direction = direction;
  r.order.resize(scores.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  r.scores = std::move(scores);
  return r;
}

RankedDataset rank_by_group_percentile(std::vector<double> scores, std::span<const int> groups, Direction direction) {
  if (groups.size() != scores.size()) throw ValidationError("one group per score required");
  const std::size_t n = scores.size();
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[groups[i]].push_back(i);
  std::vector<double> key(n);
  for (auto& [g, idx] : members) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    for (std::size_t r = 0; r < idx.size(); ++r)
      key[idx[r]] = (static_cast<double>(r) + 0.5) / static_cast<double>(idx.size());
  }
  RankedDataset out;
  out.direction = direction;
  out.order.resize(n);
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
    if (key[a] != key[b]) return key[a] < key[b];
    return scores[a] > scores[b];
  });
  out.scores = std::move(scores);
  return out;
}

RankedDataset rank_by_difficulty(const Corpus& corpus, const EmotionClassifier& cls, Direction direction,
                                 bool balance) {
  std::vector<double> scores;
  std::vector<int> groups;
  scores.reserve(corpus.size());
  for (const auto& p : corpus.pairs) {
    const bool fwd = direction == Direction::Forward;
    const Emotion e = fwd ? p.response_emotion : p.query_emotion;
    scores.push_back(confidence(cls, fwd ? p.response.ids : p.query.ids, e));
    groups.push_back(emotion_id(e));
  }
  if (balance) return rank_by_group_percentile(std::move(scores), groups, direction);
  return rank_by_scores(std::move(scores), direction);
}

std::size_t frontier_size(std::int64_t t, std::size_t n, std::size_t batch_size, const CurriculumConfig& config) {
  if (!config.enabled) return n;
  const auto f = static_cast<std::size_t>(std::ceil(competence(t, config) * static_cast<double>(n) - 1e-9));
  return std::min(n, std::max({f, batch_size, std::size_t{1}}));
}

std::vector<std::size_t> uniform_batch(std::size_t n, std::int64_t t, std::size_t batch_size, std::uint64_t seed) {
  if (n == 0) throw ValidationError("cannot sample from an empty dataset");
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t), 0xba7c4));
  std::vector<std::size_t> out(batch_size);
  for (auto& i : out) i = uniform_index(rng, n);
  return out;
}

CurriculumBatch sample_batch(const RankedDataset& ranked, std::int64_t t, std::size_t batch_size, std::uint64_t seed,
                             const CurriculumConfig& config) {
  CurriculumBatch b;
  const std::size_t n = ranked.size();
  b.competence = config.enabled ? competence(t, config) : 1.0;
  b.frontier = frontier_size(t, n, batch_size, config);
  if (!config.enabled) {
    b.indices = uniform_batch(n, t, batch_size, seed);
    return b;
  }
  b.indices = uniform_batch(b.frontier, t, batch_size, seed);
  for (auto& i : b.indices) i = ranked.order[i];
  return b;
}

void write_ranking_csv(const RankedDataset& ranked, std::ostream& out) {
  out << "rank,corpus_index,confidence\n" << std::setprecision(9);
  for (std::size_t pos = 0; pos < ranked.order.size(); ++pos)
    out << pos << ',' << ranked.order[pos] << ',' << ranked.scores[ranked.order[pos]] << '\n';
}

void write_ranking_csv(const RankedDataset& ranked, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_ranking_csv(ranked, out);
}

}  // namespace cdl
