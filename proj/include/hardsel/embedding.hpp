#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hardsel/http.hpp"

namespace hardsel {

/// Fixed-length real vector. Always non-empty and finite.
class Embedding {
 public:
  Embedding() = default;
  /// Throws ContractError when empty or any component is NaN/Inf.
  explicit Embedding(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double norm() const noexcept;

  bool operator==(const Embedding&) const = default;

 private:
  std::vector<double> values_;
};

/// ⟨a,b⟩ / (‖a‖·‖b‖), clamped to [-1, 1]. Zero-norm input yields 0 and a
/// warning. Throws ConfigError on dimension mismatch.
double cosine_similarity(const Embedding& a, const Embedding& b);

/// Text → vector contract. Implementations must be safe to call from
/// several threads and must map equal texts to equal vectors.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;

  /// Checks preconditions (non-empty batch, non-blank texts), delegates to
  /// embed_impl and verifies the output shape. A wrong count or dimension is
  /// a ContractError.
  std::vector<Embedding> embed_batch(std::span<const std::string> texts);

 protected:
  virtual std::vector<Embedding> embed_impl(std::span<const std::string> texts) = 0;
};

/// Offline provider: each text is hashed (FNV-1a, mixed with the seed) into
/// a xoshiro stream that fills uniform components in [-1, 1), then the
/// vector is scaled to unit norm.
class HashEmbedder final : public EmbeddingProvider {
 public:
  HashEmbedder(std::size_t dim, std::uint64_t seed);

  std::string name() const override { return "hash"; }
  std::size_t dim() const override { return dim_; }

  Embedding embed_one(const std::string& text) const;

 protected:
  std::vector<Embedding> embed_impl(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

struct RemoteEmbedderConfig {
  std::string endpoint;  // full URL, POST target
  std::size_t dim = 0;
  double timeout_seconds = 60.0;
  int max_retries = 2;
  std::size_t max_batch = 64;  // texts per request
  std::string api_key_env;     // sent as a Bearer token when set
};

/// POST {"texts": [...]} → {"vectors": [[...], ...]}.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  /// Validates the endpoint URL eagerly (ConfigError).
  explicit RemoteEmbedder(RemoteEmbedderConfig cfg);

  std::string name() const override { return "remote:" + cfg_.endpoint; }
  std::size_t dim() const override { return cfg_.dim; }

 protected:
  std::vector<Embedding> embed_impl(std::span<const std::string> texts) override;

 private:
  RemoteEmbedderConfig cfg_;
  http::Endpoint endpoint_;
};

/// Memoizing wrapper. Thread-safe; the wrapped provider is only asked for
/// texts it has not seen yet.
class CachingEmbedder final : public EmbeddingProvider {
 public:
  explicit CachingEmbedder(std::shared_ptr<EmbeddingProvider> inner);

  std::string name() const override { return inner_->name(); }
  std::size_t dim() const override { return inner_->dim(); }
  std::size_t cache_size() const;

 protected:
  std::vector<Embedding> embed_impl(std::span<const std::string> texts) override;

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, Embedding> cache_;
};

}  // namespace hardsel
