#pragma once

// Offline judges. All are pure functions of their construction arguments
// and the prompt, so pipeline runs built on them are bit-reproducible.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "hardsel/clients.hpp"
#include "hardsel/embedding.hpp"
#include "hardsel/judge.hpp"

namespace hardsel::mock {

/// Replies with fixed positional scores looked up by question text. Unknown
/// questions get `fallback`, or an unparseable reply when there is none.
class ScriptedJudge final : public ChatClient {
 public:
  using Table = std::map<std::string, std::pair<double, double>>;
  explicit ScriptedJudge(Table table,
                         std::optional<std::pair<double, double>> fallback = std::nullopt)
      : table_(std::move(table)), fallback_(fallback) {}

 protected:
  std::string chat_impl(std::span<const ChatMessage> messages) override;

 private:
  Table table_;
  std::optional<std::pair<double, double>> fallback_;
};

/// Scores each answer on its own, so verdicts never depend on presentation
/// order.
class PreferenceJudge final : public ChatClient {
 public:
  using Scorer = std::function<double(const std::string& question, const std::string& answer)>;
  explicit PreferenceJudge(Scorer scorer) : scorer_(std::move(scorer)) {}

 protected:
  std::string chat_impl(std::span<const ChatMessage> messages) override;

 private:
  Scorer scorer_;
};

/// Score in {1, 1.5, ..., 10} from a hash of (seed, answer).
PreferenceJudge::Scorer hash_scorer(std::uint64_t seed);

/// Difficulty oracle: an instruction is hard when its embedding falls below
/// a fixed hyperplane, ⟨normal, v⟩ < threshold. The normal is a unit vector
/// derived from the seed; the threshold sits `hard_z` standard deviations
/// above zero for random unit vectors (hard_z / sqrt(dim)).
class HyperplaneOracle {
 public:
  HyperplaneOracle(std::shared_ptr<EmbeddingProvider> embedder, std::uint64_t seed,
                   double hard_z = 0.8);

  bool is_hard(const std::string& instruction) const;
  double margin(const std::string& instruction) const;

  /// Mock-model answers get 4 on hard questions and 8 on easy ones; any
  /// other answer (the reference) gets 6.
  PreferenceJudge::Scorer scorer() const;

 private:
  std::shared_ptr<EmbeddingProvider> embedder_;
  Embedding normal_;
  double threshold_;
};

}  // namespace hardsel::mock
