#include "hardsel/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hardsel/errors.hpp"
#include "hardsel/kernels.hpp"
#include "hardsel/parallel.hpp"

namespace hardsel {

double similarity_score(const Embedding& candidate, std::span<const Embedding> hard_vectors) {
  if (hard_vectors.empty()) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& h : hard_vectors) best = std::max(best, cosine_similarity(candidate, h));
  return best;
}

HardSetIndex::HardSetIndex(std::span<const Embedding> hard_vectors) {
  if (hard_vectors.empty()) return;
  dim_ = hard_vectors[0].dim();
  rows_ = hard_vectors.size();
  unit_.assign(rows_ * dim_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    const auto& h = hard_vectors[r];
    if (h.dim() != dim_) throw ConfigError("HardSetIndex: hard vectors have mixed dimensions");
    const double norm = h.norm();
    if (norm == 0.0) {
      spdlog::warn("HardSetIndex: zero-norm hard vector at row {}", r);
      continue;
    }
    for (std::size_t d = 0; d < dim_; ++d) unit_[r * dim_ + d] = h[d] / norm;
  }
}

double HardSetIndex::max_similarity(const Embedding& candidate) const {
  if (rows_ == 0) return 0.0;
  if (candidate.dim() != dim_) {
    throw ConfigError("similarity: candidate dim " + std::to_string(candidate.dim()) +
                      " does not match hard set dim " + std::to_string(dim_));
  }
  const double norm = candidate.norm();
  if (norm == 0.0) {
    spdlog::warn("similarity: zero-norm candidate, returning 0");
    return 0.0;
  }
  double best = -std::numeric_limits<double>::infinity();
  const std::span<const double> all(unit_);
  for (std::size_t r = 0; r < rows_; ++r) {
    best = std::max(best, simd::dot(candidate.values(), all.subspan(r * dim_, dim_)));
  }
  return std::clamp(best / norm, -1.0, 1.0);
}

void validate_alpha(double alpha) {
  if (!(alpha > 0.5 && alpha <= 1.0)) {
    throw ConfigError("alpha must be in (0.5, 1], got " + std::to_string(alpha));
  }
}

double quality_score(double m, double r, double alpha) {
  validate_alpha(alpha);
  return alpha * m + (1.0 - alpha) * r;
}

std::vector<ScoredCandidate> rank_top_n(std::span<const ScoredCandidate> candidates,
                                        std::size_t n) {
  std::vector<ScoredCandidate> out(candidates.begin(), candidates.end());
  n = std::min(n, out.size());
  const auto better = [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.quality != b.quality) return a.quality > b.quality;
    return a.tie_break_index < b.tie_break_index;
  };
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n), out.end(), better);
  out.resize(n);
  return out;
}

std::vector<ScoredCandidate> score_candidates(std::span<const std::string> ids,
                                              std::span<const Embedding> vectors,
                                              const ClassifierModel& model,
                                              const HardSetIndex& hard_set, double alpha,
                                              std::size_t workers) {
  validate_alpha(alpha);
  if (ids.size() != vectors.size()) throw ConfigError("score_candidates: ids/vectors length mismatch");
  std::vector<ScoredCandidate> out(ids.size());
  parallel_for(ids.size(), workers, [&](std::size_t i) {
    ScoredCandidate& c = out[i];
    c.record_id = ids[i];
    c.model_score = model_score(model, vectors[i]);
    c.similarity_score = hard_set.max_similarity(vectors[i]);
    c.quality = alpha * c.model_score + (1.0 - alpha) * c.similarity_score;
    c.tie_break_index = i;
  });
  return out;
}

void write_score_dump(const std::string& path, std::span<const ScoredCandidate> scored) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& c : scored) {
    out << nlohmann::json{{"id", c.record_id},
                          {"m", c.model_score},
                          {"r", c.similarity_score},
                          {"q", c.quality}}
               .dump()
        << '\n';
  }
}

}  // namespace hardsel
