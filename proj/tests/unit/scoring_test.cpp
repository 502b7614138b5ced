#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "hardsel/errors.hpp"
#include "hardsel/scoring.hpp"
#include "oracles.hpp"

namespace hardsel {
namespace {

Embedding vec(std::initializer_list<double> v) { return Embedding(std::vector<double>(v)); }

TEST(SimilarityTest, Examples) {
  const auto c = vec({1, 0});
  EXPECT_NEAR(similarity_score(c, std::vector<Embedding>{vec({0, 1}), c}), 1.0, 1e-12);
  EXPECT_EQ(similarity_score(c, std::vector<Embedding>{}), 0.0);
  EXPECT_NEAR(similarity_score(c, std::vector<Embedding>{vec({0, 1}), vec({1, 1})}), 0.7071, 1e-4);
  EXPECT_THROW(similarity_score(c, std::vector<Embedding>{vec({1, 2, 3})}), ConfigError);
}

TEST(SimilarityTest, IndexAgreesWithDirectMaxAndIsMonotone) {
  const auto hard = testing::random_points(60, 7, 1);
  const auto cands = testing::random_points(50, 7, 2);
  for (const auto& c : cands) {
    double prev = -2.0;
    for (std::size_t n = 1; n <= hard.size(); n += 7) {
      std::span<const Embedding> prefix(hard.data(), n);
      const double direct = similarity_score(c, prefix);
      EXPECT_NEAR(HardSetIndex(prefix).max_similarity(c), direct, 1e-12);
      EXPECT_LE(direct, 1.0 + 1e-9);
      EXPECT_GE(direct, prev);
      prev = direct;
    }
  }
}

TEST(QualityTest, Examples) {
  EXPECT_NEAR(quality_score(1.0, 1.0, 0.7), 1.0, 1e-15);
  EXPECT_NEAR(quality_score(1.0, 1.0, 0.51), 1.0, 1e-15);
  EXPECT_NEAR(quality_score(0.5, 0.3, 0.7), 0.44, 1e-12);
  EXPECT_NEAR(quality_score(0.0, 1.0, 0.7), 0.30, 1e-12);
}

TEST(QualityTest, AlphaBounds) {
  EXPECT_THROW(quality_score(0.5, 0.5, 0.5), ConfigError);
  EXPECT_THROW(quality_score(0.5, 0.5, 1.01), ConfigError);
  EXPECT_THROW(validate_alpha(std::nan("")), ConfigError);
  EXPECT_NO_THROW(validate_alpha(1.0));
}

TEST(QualityTest, StrictlyIncreasingInBothArguments) {
  for (double a : {0.55, 0.7, 0.9}) {
    EXPECT_LT(quality_score(0.3, 0.4, a), quality_score(0.31, 0.4, a));
    EXPECT_LT(quality_score(0.3, 0.4, a), quality_score(0.3, 0.41, a));
  }
}

std::vector<ScoredCandidate> random_candidates(std::size_t n, std::uint64_t seed, int levels = 0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<ScoredCandidate> out;
  for (std::size_t i = 0; i < n; ++i) {
    double m = u(gen), r = u(gen) * 2 - 1;
    if (levels > 0) {
      m = std::floor(m * levels) / levels;
      r = 0;
    }
    out.push_back({"c" + std::to_string(i), m, r, quality_score(m, r, 0.7), i});
  }
  return out;
}

TEST(RankTest, Examples) {
  const auto c = random_candidates(5, 1);
  EXPECT_TRUE(rank_top_n(c, 0).empty());
  EXPECT_EQ(rank_top_n(c, 50).size(), 5u);

  std::vector<ScoredCandidate> tied{{"a", 0, 0, 0.9, 0}, {"b", 0, 0, 0.9, 1}, {"c", 0, 0, 0.1, 2}};
  const auto top = rank_top_n(tied, 1);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].record_id, "a");
}

TEST(RankTest, MatchesFullSortOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = random_candidates(1000, seed, seed % 2 ? 20 : 0);
    std::vector<std::string> ids;
    for (const auto& x : rank_top_n(c, 50)) ids.push_back(x.record_id);
    EXPECT_EQ(ids, testing::full_sort_top_ids(c, 50));
  }
}

TEST(RankTest, SelectedDominateExcluded) {
  const auto c = random_candidates(300, 7);
  const auto top = rank_top_n(c, 40);
  std::set<std::string> chosen;
  double min_q = 2;
  for (const auto& x : top) {
    chosen.insert(x.record_id);
    min_q = std::min(min_q, x.quality);
  }
  for (const auto& x : c) {
    if (!chosen.count(x.record_id)) EXPECT_LE(x.quality, min_q);
  }
}

TEST(RankTest, ShiftingModelScoresKeepsOrder) {
  auto c = random_candidates(200, 3);
  std::vector<std::string> before;
  for (const auto& x : rank_top_n(c, 30)) before.push_back(x.record_id);
  for (auto& x : c) {
    x.model_score += 0.25;
    x.quality = 0.7 * x.model_score + 0.3 * x.similarity_score;
  }
  std::vector<std::string> after;
  for (const auto& x : rank_top_n(c, 30)) after.push_back(x.record_id);
  EXPECT_EQ(before, after);
}

TEST(ScoreCandidatesTest, CombinesModelAndSimilarity) {
  const auto hard = testing::random_points(10, 4, 5);
  const auto vecs = testing::random_points(30, 4, 6);
  std::vector<std::string> ids;
  for (int i = 0; i < 30; ++i) ids.push_back("x" + std::to_string(i));
  ClassifierModel model({std::vector<double>{1, 0, 0, 0}, std::vector<double>{0, 1, 0, 0}}, {0.1, 0}, 1);
  const HardSetIndex index(hard);
  const auto out = score_candidates(ids, vecs, model, index, 0.7, 2);
  ASSERT_EQ(out.size(), 30u);
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(out[i].record_id, ids[i]);
    EXPECT_EQ(out[i].tie_break_index, i);
    EXPECT_NEAR(out[i].model_score, model_score(model, vecs[i]), 1e-15);
    EXPECT_NEAR(out[i].similarity_score, similarity_score(vecs[i], hard), 1e-12);
    EXPECT_NEAR(out[i].quality, 0.7 * out[i].model_score + 0.3 * out[i].similarity_score, 1e-12);
  }
}

}  // namespace
}  // namespace hardsel
