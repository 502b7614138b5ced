#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hardsel/classifier.hpp"
#include "hardsel/errors.hpp"
#include "oracles.hpp"

namespace hardsel {
namespace {

std::vector<TrainingExample> separable(std::size_t n, std::size_t dim, std::uint64_t seed) {
  const auto pts = testing::random_points(n, dim, seed);
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({pts[i], pts[i][0] > 0 ? Hardness::kHard : Hardness::kEasy, "ex" + std::to_string(i)});
  }
  return out;
}

ClassifierModel random_model(std::size_t dim, std::mt19937_64& gen) {
  std::normal_distribution<double> nd(0.0, 0.7);
  std::array<std::vector<double>, 2> w{std::vector<double>(dim), std::vector<double>(dim)};
  for (auto& row : w)
    for (auto& x : row) x = nd(gen);
  return ClassifierModel(w, {nd(gen), nd(gen)}, 0);
}

TEST(ModelScoreTest, SoftmaxExamples) {
  EXPECT_DOUBLE_EQ(hard_probability(0, 0), 0.5);
  EXPECT_NEAR(hard_probability(std::log(3.0), 0), 0.75, 1e-15);
  EXPECT_NEAR(hard_probability(1000, 0), 1.0, 1e-12);
  EXPECT_NEAR(hard_probability(0, 1000), 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(hard_probability(-1e308, 1e308)));
}

TEST(ModelScoreTest, ComplementarityAndMonotonicity) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int i = 0; i < 1000; ++i) {
    const double z0 = u(gen), z1 = u(gen);
    EXPECT_NEAR(hard_probability(z0, z1) + hard_probability(z1, z0), 1.0, 1e-12);
  }
  double prev = hard_probability(-5, 0);
  for (double z0 = -4.9; z0 <= 5; z0 += 0.1) {
    const double p = hard_probability(z0, 0);
    EXPECT_GT(p, prev);
    prev = p;
  }
}

TEST(ModelScoreTest, ModelScoreUsesHardLogit) {
  ClassifierModel m({std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 0.0}}, {0.0, 0.0}, 0);
  const Embedding v(std::vector<double>{std::log(3.0), 5.0});
  EXPECT_NEAR(model_score(m, v), 0.75, 1e-15);
  EXPECT_EQ(m.predict(v), Hardness::kHard);
  EXPECT_THROW(model_score(m, Embedding(std::vector<double>{1.0})), ConfigError);
}

TEST(ModelScoreTest, TieResolvesToHard) {
  ClassifierModel zero(3);
  EXPECT_EQ(zero.predict(Embedding(std::vector<double>{1, 2, 3})), Hardness::kHard);
}

TEST(ValidationAccuracyTest, AllHardPredictor) {
  ClassifierModel zero(2);
  std::vector<TrainingExample> hard, easy;
  for (int i = 0; i < 5; ++i) {
    hard.push_back({Embedding(std::vector<double>{double(i), 1.0}), Hardness::kHard, ""});
    easy.push_back({Embedding(std::vector<double>{double(i), 1.0}), Hardness::kEasy, ""});
  }
  EXPECT_EQ(validation_accuracy(zero, hard), 1.0);
  EXPECT_EQ(validation_accuracy(zero, easy), 0.0);
  EXPECT_THROW(validation_accuracy(zero, std::vector<TrainingExample>{}), ConfigError);
}

TEST(GradientTest, MatchesFiniteDifferences) {
  std::mt19937_64 gen(42);
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t dim = 1 + draw % 6;
    const auto model = random_model(dim, gen);
    auto examples = separable(3 + draw % 5, dim, 1000 + draw);
    if (draw % 3 == 0) examples[0].label = Hardness::kEasy;
    const auto g = cross_entropy_gradient(model, examples);
    const auto num = testing::finite_difference_gradient(model, examples);
    for (int c = 0; c < 2; ++c) {
      for (std::size_t d = 0; d < dim; ++d) {
        EXPECT_LT(testing::relative_error(g.weights[c][d], num.weights[c][d]), 1e-5)
            << "draw " << draw << " w[" << c << "][" << d << "]";
      }
      EXPECT_LT(testing::relative_error(g.bias[c], num.bias[c]), 1e-5) << "draw " << draw;
    }
    EXPECT_NEAR(cross_entropy_loss(model, examples),
                testing::reference_loss(model.weights(), model.bias(), examples), 1e-12);
  }
}

TEST(TrainTest, SeparableSetReachesHighAccuracy) {
  const auto ex = separable(400, 8, 3);
  const auto result = train_incremental(ClassifierModel(8), ex, 11);
  EXPECT_GE(result.report.val_accuracy, 0.95);
  EXPECT_EQ(result.report.val_size, 80u);
  EXPECT_EQ(result.report.train_size, 320u);
  EXPECT_FALSE(result.report.single_class);
}

TEST(TrainTest, SingleClassPredictsHardEverywhere) {
  auto ex = separable(50, 4, 5);
  for (auto& e : ex) e.label = Hardness::kHard;
  const auto result = train_incremental(ClassifierModel(4), ex, 1);
  EXPECT_EQ(result.report.val_accuracy, 1.0);
  EXPECT_TRUE(result.report.single_class);
  for (const auto& e : ex) EXPECT_EQ(result.model.predict(e.embedding), Hardness::kHard);
}

TEST(TrainTest, IdenticalEmbeddingsMixedLabelsDoNotError) {
  std::vector<TrainingExample> ex;
  for (int i = 0; i < 20; ++i) {
    ex.push_back({Embedding(std::vector<double>{0.5, 0.5}), i < 14 ? Hardness::kHard : Hardness::kEasy, ""});
  }
  const auto r = train_incremental(ClassifierModel(2), ex, 3);
  EXPECT_GE(r.report.val_accuracy, 0.0);
  EXPECT_LE(r.report.val_accuracy, 1.0);
}

TEST(TrainTest, DeterministicAndVersioned) {
  const auto ex = separable(120, 5, 8);
  const ClassifierModel start(5);
  const auto a = train_incremental(start, ex, 4);
  const auto b = train_incremental(start, ex, 4);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.model.version(), 1u);
  EXPECT_EQ(start.version(), 0u);
  const auto c = train_incremental(a.model, ex, 5);
  EXPECT_EQ(c.model.version(), 2u);
}

TEST(TrainTest, SplitSizesFollowEightTwo) {
  for (std::size_t n : {5u, 7u, 12u, 33u, 401u}) {
    const auto r = train_incremental(ClassifierModel(3), separable(n, 3, n), 1);
    EXPECT_EQ(r.report.train_size + r.report.val_size, n);
    const auto expected = static_cast<std::size_t>(std::floor(0.2 * n + 0.5));
    EXPECT_EQ(r.report.val_size, std::max<std::size_t>(1, expected)) << n;
  }
}

TEST(TrainTest, ResumingFromConvergedModelKeepsAccuracy) {
  const auto ex = separable(300, 6, 21);
  const auto first = train_incremental(ClassifierModel(6), ex, 2);
  const auto second = train_incremental(first.model, ex, 2);
  EXPECT_GE(second.report.val_accuracy, first.report.val_accuracy - 0.05);
}

TEST(TrainTest, Errors) {
  EXPECT_THROW(train_incremental(ClassifierModel(3), separable(4, 3, 1), 1), ConfigError);
  EXPECT_THROW(train_incremental(ClassifierModel(2), separable(10, 3, 1), 1), ConfigError);
  OptimizerConfig bad;
  bad.learning_rate = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(ClassifierModel(0), ConfigError);
}

TEST(CheckpointTest, JsonRoundTrip) {
  const auto trained = train_incremental(ClassifierModel(4), separable(40, 4, 2), 3).model;
  const auto j = classifier_to_json(trained);
  EXPECT_EQ(j.at("dim"), 4);
  EXPECT_EQ(j.at("version"), 1);
  EXPECT_EQ(j.at("weights").size(), 2u);
  EXPECT_EQ(classifier_from_json(j), trained);

  const auto dir = testing::scratch_dir("ckpt");
  save_checkpoint(dir / "m.json", trained);
  EXPECT_EQ(load_checkpoint(dir / "m.json"), trained);
}

TEST(CheckpointTest, MalformedIsParseError) {
  EXPECT_THROW(classifier_from_json(nlohmann::json{{"dim", 2}}), ParseError);
  auto j = classifier_to_json(ClassifierModel(2));
  j["weights"][0].push_back(1.0);
  EXPECT_THROW(classifier_from_json(j), ParseError);
  EXPECT_THROW(load_checkpoint("/nonexistent/m.json"), IoError);
}

}  // namespace
}  // namespace hardsel
