#pragma once

#include <span>
#include <string>
#include <vector>

#include "hardsel/classifier.hpp"
#include "hardsel/embedding.hpp"

namespace hardsel {

struct ScoredCandidate {
  std::string record_id;
  double model_score = 0.0;       // M
  double similarity_score = 0.0;  // R
  double quality = 0.0;           // Q = alpha·M + (1 - alpha)·R
  std::size_t tie_break_index = 0;
};

/// Max cosine similarity between `candidate` and any hard vector; 0 for an
/// empty hard set. Throws ConfigError on dimension mismatch.
double similarity_score(const Embedding& candidate, std::span<const Embedding> hard_vectors);

/// Pre-normalised hard set for scoring many candidates. Produces the same
/// maxima as similarity_score up to rounding.
class HardSetIndex {
 public:
  HardSetIndex() = default;
  explicit HardSetIndex(std::span<const Embedding> hard_vectors);

  std::size_t size() const noexcept { return rows_; }
  double max_similarity(const Embedding& candidate) const;

 private:
  std::size_t dim_ = 0;
  std::size_t rows_ = 0;
  std::vector<double> unit_;  // row-major, zero rows for zero-norm inputs
};

/// Throws ConfigError unless alpha is in (0.5, 1].
void validate_alpha(double alpha);

/// alpha·m + (1 - alpha)·r. Throws ConfigError for alpha outside (0.5, 1].
double quality_score(double m, double r, double alpha);

/// The n best candidates by descending quality; equal qualities keep
/// ascending tie_break_index.
std::vector<ScoredCandidate> rank_top_n(std::span<const ScoredCandidate> candidates, std::size_t n);

/// Scores every vector against the classifier and the hard set, on up to
/// `workers` threads. tie_break_index is the position in the input.
std::vector<ScoredCandidate> score_candidates(std::span<const std::string> ids,
                                              std::span<const Embedding> vectors,
                                              const ClassifierModel& model,
                                              const HardSetIndex& hard_set, double alpha,
                                              std::size_t workers = 1);

/// JSONL audit lines {"id", "m", "r", "q"}.
void write_score_dump(const std::string& path, std::span<const ScoredCandidate> scored);

}  // namespace hardsel
