#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "hardsel/clients.hpp"
#include "hardsel/errors.hpp"
#include "hardsel/mocks.hpp"
#include "hardsel/pipeline.hpp"
#include "hardsel/rng.hpp"
#include "oracles.hpp"

namespace hardsel {
namespace {

class PipelineTest : public ::testing::Test {
 protected:
  PipelineTest()
      : corpus_(testing::synthetic_records(600)),
        embedder_(std::make_shared<HashEmbedder>(8, 3)),
        oracle_(embedder_, 17),
        generator_(5),
        judge_(oracle_.scorer()) {
    cfg_.batch_size = 40;
    cfg_.subset_size = 150;
    cfg_.k = 5;
    cfg_.max_iterations = 3;
    cfg_.val_threshold = 1.0;  // accuracy must exceed this, so never converges
    ctx_ = {&corpus_, embedder_.get(), &generator_, &judge_, 1, std::nullopt};
  }

  PipelineState fresh(std::uint64_t seed = 9) const { return initial_state(corpus_, 8, seed); }

  Corpus corpus_;
  std::shared_ptr<HashEmbedder> embedder_;
  mock::HyperplaneOracle oracle_;
  MockGenerationClient generator_;
  mock::PreferenceJudge judge_;
  TrainPhaseConfig cfg_;
  PipelineContext ctx_;
};

TEST_F(PipelineTest, InitialState) {
  const auto s = fresh();
  EXPECT_EQ(s.remaining_ids.size(), 600u);
  EXPECT_EQ(s.classifier.version(), 0u);
  EXPECT_TRUE(s.hard_ids.empty());
  EXPECT_EQ(s.iteration, 0u);
}

TEST_F(PipelineTest, OneIterationBookkeeping) {
  const auto s0 = fresh();
  const auto s1 = run_training_iteration(s0, cfg_, ctx_);
  EXPECT_EQ(s1.iteration, 1u);
  ASSERT_EQ(s1.history.size(), 1u);
  const auto& row = s1.history[0];
  EXPECT_EQ(row.hard_count + row.easy_count + row.failed_count, 40u);
  EXPECT_EQ(row.judge_calls, 40u);
  EXPECT_EQ(s1.hard_ids.size(), row.hard_count);
  EXPECT_EQ(s1.labeled_examples.size(), 40u);
  EXPECT_EQ(s1.remaining_ids.size(), 560u);
  EXPECT_EQ(s1.classifier.version(), 1u);
  EXPECT_EQ(row.val_size, 8u);
  for (const auto& id : s1.hard_ids) EXPECT_TRUE(oracle_.is_hard(corpus_.at(id).instruction));
  for (const auto& id : s1.easy_ids) EXPECT_FALSE(oracle_.is_hard(corpus_.at(id).instruction));
  EXPECT_EQ(s0, fresh());
}

TEST_F(PipelineTest, PhaseKeepsSetsDisjointAndCountsConsistent) {
  const auto s = run_training_phase(fresh(), cfg_, ctx_);
  EXPECT_EQ(s.iteration, 3u);
  std::set<std::string> remaining(s.remaining_ids.begin(), s.remaining_ids.end());
  std::set<std::string> hard(s.hard_ids.begin(), s.hard_ids.end());
  EXPECT_EQ(hard.size(), s.hard_ids.size());
  for (const auto& id : s.hard_ids) EXPECT_FALSE(remaining.count(id));
  for (const auto& id : s.easy_ids) EXPECT_FALSE(remaining.count(id));
  std::size_t hard_sum = 0;
  for (const auto& row : s.history) {
    hard_sum += row.hard_count;
    EXPECT_LE(row.hard_count + row.easy_count, cfg_.batch_size);
  }
  EXPECT_EQ(hard_sum, s.hard_ids.size());
  EXPECT_EQ(s.remaining_ids.size() + s.hard_ids.size() + s.easy_ids.size(), 600u);
}

TEST_F(PipelineTest, DeterministicForSeed) {
  const auto a = run_training_phase(fresh(4), cfg_, ctx_);
  const auto b = run_training_phase(fresh(4), cfg_, ctx_);
  EXPECT_EQ(a, b);
  EXPECT_EQ(state_to_json(a).dump(), state_to_json(b).dump());
  const auto c = run_training_phase(fresh(5), cfg_, ctx_);
  EXPECT_NE(a.hard_ids, c.hard_ids);
}

TEST_F(PipelineTest, WorkerCountDoesNotChangeResult) {
  auto ctx4 = ctx_;
  ctx4.workers = 4;
  EXPECT_EQ(run_training_phase(fresh(), cfg_, ctx_), run_training_phase(fresh(), cfg_, ctx4));
}

TEST_F(PipelineTest, MaxIterationsZeroIsNoOp) {
  cfg_.max_iterations = 0;
  const auto s = run_training_phase(fresh(), cfg_, ctx_);
  EXPECT_EQ(s, fresh());
  EXPECT_EQ(judge_.calls(), 0u);
}

TEST_F(PipelineTest, StopsWhenThresholdExceeded) {
  cfg_.val_threshold = 0.01;
  cfg_.max_iterations = 5;
  std::size_t callbacks = 0;
  const auto s = run_training_phase(fresh(), cfg_, ctx_, [&](const PipelineState&) { ++callbacks; });
  EXPECT_TRUE(s.converged);
  EXPECT_EQ(s.history.size(), 1u);
  EXPECT_EQ(callbacks, 1u);
}

TEST_F(PipelineTest, SmallPoolEndsPhase) {
  cfg_.subset_size = 700;
  EXPECT_THROW(run_training_iteration(fresh(), cfg_, ctx_), PhaseComplete);
  EXPECT_EQ(run_training_phase(fresh(), cfg_, ctx_), fresh());
}

class BrokenJudge final : public ChatClient {
 protected:
  std::string chat_impl(std::span<const ChatMessage>) override { throw ProviderError("down", true); }
};

TEST_F(PipelineTest, AllJudgementsFailingIsProviderError) {
  BrokenJudge broken;
  auto ctx = ctx_;
  ctx.judge = &broken;
  EXPECT_THROW(run_training_iteration(fresh(), cfg_, ctx), ProviderError);
}

class FlakyGenerator final : public GenerationClient {
 protected:
  std::string generate_impl(const std::string& instruction, const std::string&) override {
    if (fnv1a64(instruction) % 4 == 0) throw ProviderError("flaky", true);
    return "answer";
  }
};

TEST_F(PipelineTest, FailedGenerationsStayInPool) {
  FlakyGenerator flaky;
  auto ctx = ctx_;
  ctx.generator = &flaky;
  const auto s1 = run_training_iteration(fresh(), cfg_, ctx);
  const auto& row = s1.history[0];
  EXPECT_GT(row.failed_count, 0u);
  EXPECT_EQ(row.hard_count + row.easy_count + row.failed_count, 40u);
  EXPECT_EQ(s1.remaining_ids.size(), 600u - row.hard_count - row.easy_count);
}

TEST(SelectionMathTest, CountsAndSubsetSize) {
  InferenceConfig cfg;
  EXPECT_EQ(selection_count(120'000, 0.2), 24'000u);
  EXPECT_EQ(inference_subset_size(120'000, cfg), 72'000u);
  cfg.selection_rate = 0.6;
  EXPECT_EQ(selection_count(120'000, 0.6), 72'000u);
  EXPECT_EQ(inference_subset_size(120'000, cfg), 100'000u);
  cfg.selection_rate = 0.5;
  EXPECT_EQ(inference_subset_size(10, cfg), 10u);
  EXPECT_EQ(selection_count(5, 0.1), 1u);
  EXPECT_EQ(selection_count(4, 0.1), 0u);
  EXPECT_EQ(selection_count(0, 0.5), 0u);
}

class SelectionTest : public PipelineTest {
 protected:
  void SetUp() override { trained_ = run_training_phase(fresh(), cfg_, ctx_); }
  InferenceConfig inf_cfg() const {
    InferenceConfig c;
    c.k = 5;
    c.selection_rate = 0.1;
    return c;
  }
  PipelineState trained_;
};

TEST_F(SelectionTest, SizesAndOrdering) {
  const auto calls = judge_.calls();
  const auto gen_calls = generator_.calls();
  const auto r = run_inference_selection(trained_, inf_cfg(), corpus_, *embedder_);
  const std::size_t pool = trained_.remaining_ids.size();
  EXPECT_EQ(r.n_sel, selection_count(pool, 0.1));
  EXPECT_EQ(r.subset_size, std::min<std::size_t>(3 * r.n_sel, pool));
  EXPECT_EQ(r.top.size(), r.n_sel);
  EXPECT_EQ(r.scored.size(), r.subset_size);
  EXPECT_EQ(r.records.size(), trained_.hard_ids.size() + r.n_sel - r.overlap);
  for (std::size_t i = 0; i < trained_.hard_ids.size(); ++i) EXPECT_EQ(r.records[i].id, trained_.hard_ids[i]);
  EXPECT_EQ(judge_.calls(), calls);
  EXPECT_EQ(generator_.calls(), gen_calls);
}

TEST_F(SelectionTest, TopMatchesFullSortOracle) {
  const auto r = run_inference_selection(trained_, inf_cfg(), corpus_, *embedder_);
  std::vector<std::string> got;
  for (const auto& c : r.top) got.push_back(c.record_id);
  EXPECT_EQ(got, testing::full_sort_top_ids(r.scored, r.n_sel));
  std::set<std::string> pool(trained_.remaining_ids.begin(), trained_.remaining_ids.end());
  for (const auto& c : r.scored) EXPECT_TRUE(pool.count(c.record_id));
}

TEST_F(SelectionTest, HigherRateIsSuperset) {
  auto lo = inf_cfg();
  auto hi = inf_cfg();
  hi.selection_rate = 0.3;
  const auto a = run_inference_selection(trained_, lo, corpus_, *embedder_);
  const auto b = run_inference_selection(trained_, hi, corpus_, *embedder_);
  EXPECT_GT(b.records.size(), a.records.size());
  std::set<std::string> ids;
  for (const auto& r : b.records) ids.insert(r.id);
  EXPECT_EQ(ids.size(), b.records.size());
}

TEST_F(SelectionTest, ZeroSelectionReturnsHardSet) {
  auto cfg = inf_cfg();
  cfg.selection_rate = 1e-6;
  const auto r = run_inference_selection(trained_, cfg, corpus_, *embedder_);
  EXPECT_EQ(r.n_sel, 0u);
  ASSERT_EQ(r.records.size(), trained_.hard_ids.size());
  cfg.include_hard_in_output = false;
  EXPECT_TRUE(run_inference_selection(trained_, cfg, corpus_, *embedder_).records.empty());
}

TEST_F(SelectionTest, ExcludingHardSetEmitsOnlyTop) {
  auto cfg = inf_cfg();
  cfg.include_hard_in_output = false;
  const auto r = run_inference_selection(trained_, cfg, corpus_, *embedder_);
  EXPECT_EQ(r.records.size(), r.n_sel);
}

TEST_F(SelectionTest, UntrainedStateRejected) {
  EXPECT_THROW(run_inference_selection(fresh(), inf_cfg(), corpus_, *embedder_), ConfigError);
  HashEmbedder other(4, 1);
  EXPECT_THROW(run_inference_selection(trained_, inf_cfg(), corpus_, other), ConfigError);
}

TEST_F(SelectionTest, EmptyHardSetStillSelects) {
  auto s = trained_;
  s.hard_ids.clear();
  const auto r = run_inference_selection(s, inf_cfg(), corpus_, *embedder_);
  EXPECT_EQ(r.records.size(), r.n_sel);
  for (const auto& c : r.scored) EXPECT_EQ(c.similarity_score, 0.0);
}

TEST_F(SelectionTest, StateRoundTrip) {
  const auto dir = testing::scratch_dir("state");
  save_state(trained_, dir / "state.json");
  EXPECT_FALSE(std::filesystem::exists(dir / "state.json.tmp"));
  EXPECT_EQ(load_state(dir / "state.json"), trained_);
  const auto j = state_to_json(trained_);
  EXPECT_EQ(j.at("format"), "hardsel-pipeline-state");
  EXPECT_EQ(j.at("version"), kStateFormatVersion);
}

TEST_F(SelectionTest, BadStateFilesRejected) {
  auto j = state_to_json(trained_);
  j["version"] = 99;
  EXPECT_THROW(state_from_json(j), ParseError);
  j = state_to_json(trained_);
  j["format"] = "other";
  EXPECT_THROW(state_from_json(j), ParseError);
  j = state_to_json(trained_);
  j.erase("hard_ids");
  EXPECT_THROW(state_from_json(j), ParseError);

  const auto dir = testing::scratch_dir("badstate");
  std::ofstream(dir / "s.json") << "{ truncated";
  EXPECT_THROW(load_state(dir / "s.json"), ParseError);
  EXPECT_THROW(load_state(dir / "missing.json"), IoError);
}

TEST_F(SelectionTest, ManifestHasTrajectory) {
  const auto m = training_manifest(trained_, 600);
  EXPECT_EQ(m.at("iterations"), trained_.history.size());
  EXPECT_EQ(m.at("source_size"), 600);
}

}  // namespace
}  // namespace hardsel
