#include "hardsel/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "hardsel/errors.hpp"
#include "hardsel/kernels.hpp"
#include "hardsel/rng.hpp"

namespace hardsel {

void DiversityConfig::validate() const {
  if (k == 0) throw ConfigError("diversity: k must be >= 1");
  if (per_cluster_quota == 0) throw ConfigError("diversity: per_cluster_quota must be >= 1");
  if (max_iter == 0) throw ConfigError("diversity: max_iter must be >= 1");
  if (!(tol >= 0.0)) throw ConfigError("diversity: tol must be >= 0");
}

std::vector<std::size_t> Clustering::cluster_sizes() const {
  std::vector<std::size_t> sizes(centroids.size(), 0);
  for (std::size_t c : assignments) ++sizes[c];
  return sizes;
}

double kmeans_objective(std::span<const Embedding> points, std::span<const Embedding> centroids,
                        std::span<const std::size_t> assignments) {
  double j = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    j += simd::squared_distance(points[i].values(), centroids[assignments[i]].values());
  }
  return j;
}

namespace {

using Matrix = std::vector<std::vector<double>>;

std::size_t nearest(std::span<const double> x, const Matrix& centroids, double* dist_out) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = simd::squared_distance(x, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist_out != nullptr) *dist_out = best_d;
  return best;
}

// Greedy k-means++: every new centre is the best of several D²-weighted
// candidates, measured by the resulting potential.
Matrix seed_centroids(std::span<const Embedding> points, std::size_t k, Rng& rng) {
  const std::size_t n = points.size();
  Matrix centroids;
  centroids.reserve(k);
  const std::size_t first = static_cast<std::size_t>(rng.below(n));
  centroids.emplace_back(points[first].values().begin(), points[first].values().end());

  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = simd::squared_distance(points[i].values(), centroids[0]);
  }
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  std::vector<double> candidate_dist(n);
  std::vector<double> best_dist(n);

  while (centroids.size() < k) {
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    std::size_t chosen = 0;
    if (total <= 0.0) {
      chosen = static_cast<std::size_t>(rng.below(n));
      for (std::size_t i = 0; i < n; ++i) {
        best_dist[i] = std::min(dist[i], simd::squared_distance(points[i].values(),
                                                                 points[chosen].values()));
      }
    } else {
      double best_potential = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < trials; ++t) {
        const double r = rng.uniform() * total;
        double cum = 0.0;
        std::size_t cand = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          cum += dist[i];
          if (cum > r) {
            cand = i;
            break;
          }
        }
        double potential = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          candidate_dist[i] =
              std::min(dist[i], simd::squared_distance(points[i].values(), points[cand].values()));
          potential += candidate_dist[i];
        }
        if (potential < best_potential) {
          best_potential = potential;
          chosen = cand;
          best_dist.swap(candidate_dist);
        }
      }
    }
    centroids.emplace_back(points[chosen].values().begin(), points[chosen].values().end());
    dist.swap(best_dist);
  }
  return centroids;
}

// Moves points into empty clusters, then sets every centroid to its mean.
void update_centroids(std::span<const Embedding> points, std::vector<std::size_t>& assign,
                      Matrix& centroids) {
  const std::size_t k = centroids.size();
  const std::size_t dim = centroids[0].size();
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t c : assign) ++counts[c];

  for (std::size_t e = 0; e < k; ++e) {
    if (counts[e] != 0) continue;
    const std::size_t largest = static_cast<std::size_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
    if (counts[largest] < 2) break;
    std::size_t far = points.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (assign[i] != largest) continue;
      const double d = simd::squared_distance(points[i].values(), centroids[largest]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    assign[far] = e;
    --counts[largest];
    ++counts[e];
  }

  for (auto& c : centroids) std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    simd::axpy(1.0, points[i].values(), centroids[assign[i]]);
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    const double inv = 1.0 / static_cast<double>(counts[c]);
    for (std::size_t d = 0; d < dim; ++d) centroids[c][d] *= inv;
  }
}

}  // namespace

Clustering kmeans(std::span<const Embedding> points, const DiversityConfig& cfg) {
  cfg.validate();
  if (points.empty()) throw ConfigError("kmeans: empty input");
  if (points.size() < cfg.k) {
    throw ConfigError("kmeans: " + std::to_string(points.size()) + " points but k = " +
                      std::to_string(cfg.k) + "; lower k");
  }
  const std::size_t dim = points[0].dim();
  for (const auto& p : points) {
    if (p.dim() != dim) throw ConfigError("kmeans: vectors have mixed dimensions");
  }

  Rng rng(cfg.seed);
  Matrix centroids = seed_centroids(points, cfg.k, rng);
  std::vector<std::size_t> assign(points.size());
  double objective = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double d = 0.0;
    assign[i] = nearest(points[i].values(), centroids, &d);
    objective += d;
  }

  Clustering out;
  out.objective_history.push_back(objective);
  std::vector<std::size_t> previous;
  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    previous = assign;
    update_centroids(points, assign, centroids);
    double next_objective = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double d = 0.0;
      assign[i] = nearest(points[i].values(), centroids, &d);
      next_objective += d;
    }
    ++out.iterations_run;
    out.objective_history.push_back(next_objective);
    const double decrease = objective - next_objective;
    objective = next_objective;
    if (assign == previous || decrease < cfg.tol) break;
  }

  out.centroids.reserve(cfg.k);
  for (auto& c : centroids) out.centroids.emplace_back(std::move(c));
  out.assignments = std::move(assign);
  out.objective = objective;
  return out;
}

std::vector<std::size_t> diverse_subset_indices(std::span<const Embedding> points,
                                                const DiversityConfig& cfg,
                                                std::size_t target_size, std::uint64_t seed,
                                                Clustering* clustering_out) {
  if (target_size == 0) throw ConfigError("diverse_subset: target_size must be >= 1");
  if (target_size > points.size()) {
    throw ConfigError("diverse_subset: target_size " + std::to_string(target_size) +
                      " exceeds " + std::to_string(points.size()) + " records");
  }
  Clustering clustering = kmeans(points, cfg);
  const std::size_t k = cfg.k;

  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < clustering.assignments.size(); ++i) {
    members[clustering.assignments[i]].push_back(i);
  }
  Rng rng(seed);
  for (auto& m : members) rng.shuffle(m);

  const std::size_t quota = (target_size + k - 1) / k;
  std::vector<std::size_t> take(k);
  std::size_t total = 0;
  for (std::size_t c = 0; c < k; ++c) {
    take[c] = std::min(quota, members[c].size());
    total += take[c];
  }

  if (total < target_size) {
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return members[a].size() > members[b].size();
    });
    while (total < target_size) {
      for (std::size_t c : order) {
        if (total == target_size) break;
        if (take[c] < members[c].size()) {
          ++take[c];
          ++total;
        }
      }
    }
  }

  std::vector<std::size_t> out;
  out.reserve(total);
  const std::size_t rounds = *std::max_element(take.begin(), take.end());
  for (std::size_t r = 0; r < rounds; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      if (r < take[c]) out.push_back(members[c][r]);
    }
  }
  out.resize(target_size);
  if (clustering_out != nullptr) *clustering_out = std::move(clustering);
  return out;
}

std::vector<InstructionRecord> diverse_subset(std::span<const InstructionRecord> records,
                                              std::span<const Embedding> vectors,
                                              const DiversityConfig& cfg,
                                              std::size_t target_size, std::uint64_t seed) {
  if (records.size() != vectors.size()) {
    throw ConfigError("diverse_subset: records and vectors differ in length");
  }
  std::vector<InstructionRecord> out;
  for (std::size_t i : diverse_subset_indices(vectors, cfg, target_size, seed)) {
    out.push_back(records[i]);
  }
  return out;
}

void write_clustering_json(const std::filesystem::path& path, const Clustering& clustering,
                           std::span<const std::string> ids) {
  if (ids.size() != clustering.assignments.size()) {
    throw ConfigError("write_clustering_json: id count does not match assignments");
  }
  nlohmann::json doc{{"k", clustering.centroids.size()},
                     {"objective", clustering.objective},
                     {"assignments", nlohmann::json::object()}};
  for (std::size_t i = 0; i < ids.size(); ++i) doc["assignments"][ids[i]] = clustering.assignments[i];
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace hardsel
