#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hardsel/classifier.hpp"
#include "hardsel/clients.hpp"
#include "hardsel/corpus.hpp"
#include "hardsel/embedding.hpp"
#include "hardsel/judge.hpp"
#include "hardsel/scoring.hpp"

namespace hardsel {

/// One row per training iteration: judge outcome counts and classifier
/// validation accuracy.
struct HistoryRow {
  std::uint64_t iteration = 0;
  std::size_t hard_count = 0;
  std::size_t easy_count = 0;
  std::size_t failed_count = 0;  // generation + judge failures
  double val_accuracy = 0.0;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  std::size_t judge_calls = 0;

  bool operator==(const HistoryRow&) const = default;
};

struct PipelineState {
  std::uint64_t iteration = 0;
  std::vector<std::string> remaining_ids;  // source pool, in corpus order
  std::vector<std::string> hard_ids;       // cumulative hard set, in labeling order
  std::vector<std::string> easy_ids;
  std::vector<TrainingExample> labeled_examples;
  ClassifierModel classifier;
  std::uint64_t seed = 0;
  std::vector<HistoryRow> history;
  bool converged = false;

  bool operator==(const PipelineState&) const = default;
};

/// Fresh state: every corpus record remaining, zero classifier of `dim`.
PipelineState initial_state(const Corpus& corpus, std::size_t dim, std::uint64_t seed);

struct TrainPhaseConfig {
  std::size_t batch_size = 400;
  std::size_t subset_size = 10'000;
  std::size_t k = 100;
  double alpha = 0.7;
  double val_threshold = 0.95;
  std::size_t max_iterations = 10;
  std::size_t kmeans_max_iter = 100;
  OptimizerConfig optimizer;

  void validate() const;
};

struct InferenceConfig {
  double selection_rate = 0.2;
  std::size_t subset_multiplier = 3;
  std::size_t subset_cap = 100'000;
  double alpha = 0.7;
  std::size_t k = 100;
  std::size_t kmeans_max_iter = 100;
  bool include_hard_in_output = true;

  void validate() const;
};

/// Everything an iteration talks to. Clients are shared, never owned.
struct PipelineContext {
  const Corpus* corpus = nullptr;
  EmbeddingProvider* embedder = nullptr;
  GenerationClient* generator = nullptr;
  ChatClient* judge = nullptr;
  std::size_t workers = 1;
  std::optional<std::filesystem::path> transcript_path;
};

/// Text used for embedding, generation and judging: the instruction,
/// followed by the input after a blank line when present.
std::string prompt_text(const InstructionRecord& r);

/// Embeds the records behind `ids`, batching requests over ctx.workers.
std::vector<Embedding> embed_records(const Corpus& corpus, EmbeddingProvider& embedder,
                                     std::span<const std::string> ids, std::size_t workers);

/// One pass of the training loop: diverse subset, pick B (random on the
/// first iteration, top quality afterwards), generate, judge, grow the hard
/// set, retrain on all labels so far, shrink the pool. Judged ids leave the
/// pool; items whose generation or judgement failed stay. Throws
/// PhaseComplete when the pool is smaller than subset_size. The input state
/// is untouched when anything throws.
PipelineState run_training_iteration(const PipelineState& state, const TrainPhaseConfig& cfg,
                                     const PipelineContext& ctx);

/// Iterates until validation accuracy exceeds val_threshold or `iteration`
/// reaches max_iterations. The last iteration's hard labels are merged
/// before stopping. `after_iteration` (optional) sees every new state.
PipelineState run_training_phase(PipelineState state, const TrainPhaseConfig& cfg,
                                 const PipelineContext& ctx,
                                 const std::function<void(const PipelineState&)>& after_iteration = {});

struct SelectionResult {
  std::vector<InstructionRecord> records;  // hard set first, then top-N_sel
  std::size_t n_sel = 0;
  std::size_t subset_size = 0;
  std::size_t hard_count = 0;
  std::size_t overlap = 0;
  std::vector<ScoredCandidate> scored;  // every subset member
  std::vector<ScoredCandidate> top;     // the N_sel chosen
};

/// Selection without any judge or generation traffic: N_sel =
/// round(|pool|·rate), subset = min(multiplier·N_sel, cap, |pool|), score
/// the diverse subset, keep the top N_sel and union with the hard set.
SelectionResult run_inference_selection(const PipelineState& state, const InferenceConfig& cfg,
                                        const Corpus& corpus, EmbeddingProvider& embedder,
                                        std::size_t workers = 1);

/// round-half-up(remaining · rate)
std::size_t selection_count(std::size_t remaining, double rate);

/// min(multiplier·N_sel, cap, |pool|) with N_sel = selection_count(pool, rate).
std::size_t inference_subset_size(std::size_t pool, const InferenceConfig& cfg);

inline constexpr int kStateFormatVersion = 1;

nlohmann::json state_to_json(const PipelineState& state);
/// ParseError on a wrong format tag, unknown version or malformed fields.
PipelineState state_from_json(const nlohmann::json& j);

/// Writes to a temporary sibling and renames it into place.
void save_state(const PipelineState& state, const std::filesystem::path& path);
PipelineState load_state(const std::filesystem::path& path);

/// Per-iteration trajectory plus totals.
nlohmann::json training_manifest(const PipelineState& state, std::size_t source_size);

}  // namespace hardsel
