#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "cdl/classifier.hpp"
#include "cdl/corpus.hpp"
#include "cdl/ecm_model.hpp"

namespace cdl {

struct CurriculumConfig {
  double c0_squared = 0.01;
  std::int64_t length = 100000;  // T: steps until the whole dataset is available
  bool enabled = true;
  bool balance_emotions = false;  // interleave categories by within-category rank

  void validate() const;
  bool operator==(const CurriculumConfig&) const = default;
};

void to_json(nlohmann::json& j, const CurriculumConfig& c);
void from_json(const nlohmann::json& j, CurriculumConfig& c);

/// f(t) = min(1, sqrt(t (1 - c0^2) / T + c0^2)).
double competence(std::int64_t t, const CurriculumConfig& config);

/// Corpus indices ordered easy -> hard with their difficulty scores.
struct RankedDataset {
  std::vector<std::size_t> order;  // position -> corpus index
  std::vector<double> scores;      // corpus index -> gold-class confidence
  Direction direction = Direction::Forward;

  std::size_t size() const { return order.size(); }
};

/// Sorts by score descending, ties by ascending index.
RankedDataset rank_by_scores(std::vector<double> scores, Direction direction);
/// Orders by within-group percentile (easiest of every group first), then
/// score descending, then index.
RankedDataset rank_by_group_percentile(std::vector<double> scores, std::span<const int> groups, Direction direction);
/// Forward ranks by response confidence under e_r, backward by query
/// confidence under e_q. `balance` groups by that emotion.
RankedDataset rank_by_difficulty(const Corpus& corpus, const EmotionClassifier& cls, Direction direction,
                                 bool balance = false);

/// ceil(f(t) N) clamped to [max(batch, 1), N]; N when the curriculum is off.
std::size_t frontier_size(std::int64_t t, std::size_t n, std::size_t batch_size, const CurriculumConfig& config);

struct CurriculumBatch {
  std::vector<std::size_t> indices;  // corpus indices
  double competence = 1.0;
  std::size_t frontier = 0;
};

/// Uniform draws with replacement from the frontier prefix of the ranking;
/// a pure function of (t, seed). With the curriculum off this is
/// `uniform_batch` over the whole corpus.
CurriculumBatch sample_batch(const RankedDataset& ranked, std::int64_t t, std::size_t batch_size, std::uint64_t seed,
                             const CurriculumConfig& config);
std::vector<std::size_t> uniform_batch(std::size_t n, std::int64_t t, std::size_t batch_size, std::uint64_t seed);

/// CSV with header rank,corpus_index,confidence.
void write_ranking_csv(const RankedDataset& ranked, std::ostream& out);
void write_ranking_csv(const RankedDataset& ranked, const std::filesystem::path& path);

}  // namespace cdl
