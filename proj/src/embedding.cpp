#include "hardsel/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string_view>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "hardsel/corpus.hpp"
#include "hardsel/errors.hpp"
#include "hardsel/kernels.hpp"
#include "hardsel/rng.hpp"

namespace hardsel {

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ContractError("embedding must have dim >= 1");
  for (double v : values_) {
    if (!std::isfinite(v)) throw ContractError("embedding has a non-finite component");
  }
}

double Embedding::norm() const noexcept { return std::sqrt(simd::dot(values_, values_)); }

double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw ConfigError("cosine_similarity: dimension mismatch (" + std::to_string(a.dim()) +
                      " vs " + std::to_string(b.dim()) + ")");
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    spdlog::warn("cosine_similarity: zero-norm vector, returning 0");
    return 0.0;
  }
  const double s = simd::dot(a.values(), b.values()) / (na * nb);
  return std::clamp(s, -1.0, 1.0);
}

std::vector<Embedding> EmbeddingProvider::embed_batch(std::span<const std::string> texts) {
  if (texts.empty()) throw ConfigError("embed_batch: empty batch");
  for (const auto& t : texts) {
    if (is_blank(t)) throw ConfigError("embed_batch: blank text");
  }
  auto out = embed_impl(texts);
  if (out.size() != texts.size()) {
    throw ContractError(name() + ": returned " + std::to_string(out.size()) + " vectors for " +
                        std::to_string(texts.size()) + " texts");
  }
  for (const auto& v : out) {
    if (v.dim() != dim()) {
      throw ContractError(name() + ": vector of dim " + std::to_string(v.dim()) + ", expected " +
                          std::to_string(dim()));
    }
  }
  return out;
}

HashEmbedder::HashEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw ConfigError("HashEmbedder: dim must be >= 1");
}

Embedding HashEmbedder::embed_one(const std::string& text) const {
  Rng rng(seed_ ^ fnv1a64(text));
  std::vector<double> v(dim_);
  double sq = 0.0;
  do {
    sq = 0.0;
    for (auto& x : v) {
      x = 2.0 * rng.uniform() - 1.0;
      sq += x * x;
    }
  } while (sq == 0.0);
  const double inv = 1.0 / std::sqrt(sq);
  for (auto& x : v) x *= inv;
  return Embedding(std::move(v));
}

std::vector<Embedding> HashEmbedder::embed_impl(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig cfg)
    : cfg_(std::move(cfg)), endpoint_(http::parse_endpoint(cfg_.endpoint)) {
  if (cfg_.dim == 0) throw ConfigError("RemoteEmbedder: dim must be >= 1");
  if (cfg_.max_batch == 0) cfg_.max_batch = 1;
}

std::vector<Embedding> RemoteEmbedder::embed_impl(std::span<const std::string> texts) {
  http::PostOptions opt;
  opt.timeout_seconds = cfg_.timeout_seconds;
  opt.max_retries = cfg_.max_retries;
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str())) {
      opt.headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
  }

  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += cfg_.max_batch) {
    const auto chunk = texts.subspan(start, std::min(cfg_.max_batch, texts.size() - start));
    nlohmann::json body{{"texts", nlohmann::json::array()}};
    for (const auto& t : chunk) body["texts"].push_back(t);
    const auto reply = http::post_json(endpoint_, body, opt);

    const auto it = reply.find("vectors");
    if (it == reply.end() || !it->is_array() || it->size() != chunk.size()) {
      throw ContractError(name() + ": reply lacks a 'vectors' array matching the request");
    }
    for (const auto& row : *it) {
      if (!row.is_array()) throw ContractError(name() + ": vector is not an array");
      std::vector<double> values;
      values.reserve(row.size());
      for (const auto& x : row) {
        if (!x.is_number()) throw ContractError(name() + ": non-numeric vector component");
        values.push_back(x.get<double>());
      }
      if (values.size() != cfg_.dim) {
        throw ContractError(name() + ": vector of dim " + std::to_string(values.size()) +
                            ", expected " + std::to_string(cfg_.dim));
      }
      out.emplace_back(std::move(values));
    }
  }
  return out;
}

CachingEmbedder::CachingEmbedder(std::shared_ptr<EmbeddingProvider> inner)
    : inner_(std::move(inner)) {
  if (!inner_) throw ConfigError("CachingEmbedder: null provider");
}

std::size_t CachingEmbedder::cache_size() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

std::vector<Embedding> CachingEmbedder::embed_impl(std::span<const std::string> texts) {
  std::vector<std::string> missing;
  {
    std::unordered_set<std::string_view> queued;
    std::lock_guard lock(mu_);
    for (const auto& t : texts) {
      if (!cache_.contains(t) && queued.insert(t).second) missing.push_back(t);
    }
  }
  if (!missing.empty()) {
    auto fresh = inner_->embed_batch(missing);
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < missing.size(); ++i) cache_.emplace(missing[i], std::move(fresh[i]));
  }
  std::vector<Embedding> out;
  out.reserve(texts.size());
  std::lock_guard lock(mu_);
  for (const auto& t : texts) out.push_back(cache_.at(t));
  return out;
}

}  // namespace hardsel
