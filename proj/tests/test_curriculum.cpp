#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cdl/curriculum.hpp"
#include "cdl/error.hpp"
#include "cdl/random.hpp"
#include "oracles.hpp"

using namespace cdl;

namespace {

CurriculumConfig with_t(std::int64_t t) {
  CurriculumConfig c;
  c.length = t;
  return c;
}

}  // namespace

TEST_CASE("competence values") {
  const CurriculumConfig c = with_t(100000);
  CHECK(std::abs(competence(0, c) - 0.1) < 1e-9);
  CHECK(std::abs(competence(100000, c) - 1.0) < 1e-9);
  CHECK(std::abs(competence(25000, c) - 0.507445) < 1e-6);
  CHECK(competence(500000, c) == 1.0);
  CHECK(std::abs(competence(500, with_t(2000)) - 0.507445) < 1e-6);
}

TEST_CASE("competence is monotone") {
  const CurriculumConfig c = with_t(2000);
  Rng rng(mix_seed(1));
  for (int i = 0; i < 1000; ++i) {
    auto a = static_cast<std::int64_t>(uniform_index(rng, 4000));
    auto b = static_cast<std::int64_t>(uniform_index(rng, 4000));
    if (a > b) std::swap(a, b);
    CHECK(competence(a, c) <= competence(b, c));
  }
}

TEST_CASE("CurriculumConfig validation") {
  CurriculumConfig c;
  CHECK_NOTHROW(c.validate());
  c.length = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = CurriculumConfig{};
  c.c0_squared = 1.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  const nlohmann::json j = with_t(77);
  CHECK(j.get<CurriculumConfig>() == with_t(77));
}

TEST_CASE("ranking orders by confidence, ties by index") {
  const RankedDataset r = rank_by_scores({0.2, 0.9, 0.5, 0.9}, Direction::Backward);
  CHECK(r.order == std::vector<std::size_t>{1, 3, 2, 0});
  CHECK(r.scores[2] == 0.5);
  CHECK(r.direction == Direction::Backward);

  // Group 0: 0.9, 0.8, 0.1. Group 1: 0.3, 0.2. Each group's easiest comes first.
  const std::vector<int> groups = {0, 0, 1, 1, 0};
  const RankedDataset g = rank_by_group_percentile({0.9, 0.8, 0.3, 0.2, 0.1}, groups, Direction::Forward);
  CHECK(g.order.size() == 5);
  CHECK(std::set<std::size_t>{g.order[0], g.order[1]} == std::set<std::size_t>{0, 2});
  CHECK(g.order[4] == 4);
}

TEST_CASE("frontier size") {
  const CurriculumConfig c = with_t(2000);
  CHECK(frontier_size(0, 1000, 16, c) == 100);
  CHECK(frontier_size(2000, 1000, 16, c) == 1000);
  CHECK(frontier_size(0, 50, 16, c) == 16);
  CHECK(frontier_size(0, 10, 16, c) == 10);
  CurriculumConfig off = c;
  off.enabled = false;
  CHECK(frontier_size(0, 1000, 16, off) == 1000);
}

TEST_CASE("sampled indices stay inside the frontier") {
  const CurriculumConfig c = with_t(2000);
  std::vector<double> scores(1000);
  Rng rng(mix_seed(5));
  for (auto& s : scores) s = uniform01(rng);
  const RankedDataset r = rank_by_scores(scores, Direction::Forward);
  std::vector<std::size_t> position(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) position[r.order[i]] = i;

  std::size_t drawn = 0;
  while (drawn < 10000) {
    const auto t = static_cast<std::int64_t>(uniform_index(rng, 3000));
    const CurriculumBatch b = sample_batch(r, t, 16, 42, c);
    CHECK(b.frontier == frontier_size(t, r.size(), 16, c));
    CHECK(b.competence == competence(t, c));
    for (std::size_t idx : b.indices) {
      REQUIRE(position[idx] < b.frontier);
      ++drawn;
    }
  }
  CHECK(sample_batch(r, 17, 16, 42, c).indices == sample_batch(r, 17, 16, 42, c).indices);
  CHECK(sample_batch(r, 17, 16, 42, c).indices != sample_batch(r, 18, 16, 42, c).indices);
}

TEST_CASE("sampling is uniform within the frontier") {
  CurriculumConfig c = with_t(1000000);
  c.c0_squared = 0.0025;  // f(0) = 0.05 -> frontier 50 of 1000
  const RankedDataset r = rank_by_scores(std::vector<double>(1000, 0.5), Direction::Forward);
  REQUIRE(frontier_size(0, 1000, 10, c) == 50);
  std::vector<std::size_t> counts(50, 0);
  for (std::uint64_t seed = 0; seed < 1000; ++seed)
    for (std::size_t idx : sample_batch(r, 0, 10, seed, c).indices) ++counts.at(idx);
  const double p = oracles::chi_square_pvalue(counts);
  INFO("chi-square p = " << p);
  CHECK(p > 0.01);
}

TEST_CASE("ranking CSV") {
  const RankedDataset r = rank_by_scores({0.25, 0.75}, Direction::Forward);
  std::ostringstream out;
  write_ranking_csv(r, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "rank,corpus_index,confidence");
  std::getline(in, line);
  CHECK(line.rfind("0,1,0.75", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("1,0,0.25", 0) == 0);
}
