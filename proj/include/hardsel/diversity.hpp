#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hardsel/corpus.hpp"
#include "hardsel/embedding.hpp"

namespace hardsel {

struct DiversityConfig {
  std::size_t k = 100;
  std::size_t per_cluster_quota = 100;
  std::size_t max_iter = 100;
  double tol = 1e-9;  // stop when the objective drops by less than this
  std::uint64_t seed = 0;

  /// Throws ConfigError unless k, per_cluster_quota, max_iter >= 1 and tol >= 0.
  void validate() const;
  std::size_t default_target() const noexcept { return k * per_cluster_quota; }
};

struct Clustering {
  std::vector<Embedding> centroids;      // length k
  std::vector<std::size_t> assignments;  // point index -> cluster in [0, k)
  double objective = 0.0;                // sum of squared distances to assigned centroid
  std::vector<double> objective_history; // after seeding, then after every Lloyd iteration
  std::size_t iterations_run = 0;

  std::vector<std::size_t> cluster_sizes() const;
};

/// Sum of squared Euclidean distances of each point to its assigned centroid.
double kmeans_objective(std::span<const Embedding> points, std::span<const Embedding> centroids,
                        std::span<const std::size_t> assignments);

/// Lloyd's algorithm with greedy k-means++ seeding. Each iteration moves
/// centroids to cluster means (repairing empty clusters by moving in the
/// point farthest from the centroid of the largest cluster) and then
/// reassigns every point to its nearest centroid, lowest index on ties.
/// Stops after max_iter iterations, at a fixed point, or when the objective
/// decreases by less than tol. Deterministic for a given seed.
Clustering kmeans(std::span<const Embedding> points, const DiversityConfig& cfg);

/// Indices of a diverse subset of exactly target_size points. Clusters give
/// up to ceil(target_size / k) random members each; any shortfall is taken
/// round-robin from clusters with members left, largest clusters first.
/// Output interleaves clusters (first pick of every cluster, then second…).
std::vector<std::size_t> diverse_subset_indices(std::span<const Embedding> points,
                                                const DiversityConfig& cfg,
                                                std::size_t target_size, std::uint64_t seed,
                                                Clustering* clustering_out = nullptr);

std::vector<InstructionRecord> diverse_subset(std::span<const InstructionRecord> records,
                                              std::span<const Embedding> vectors,
                                              const DiversityConfig& cfg,
                                              std::size_t target_size, std::uint64_t seed);

/// Audit dump: {"k": int, "objective": number, "assignments": {id: cluster}}.
void write_clustering_json(const std::filesystem::path& path, const Clustering& clustering,
                           std::span<const std::string> ids);

}  // namespace hardsel
