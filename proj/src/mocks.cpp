#include "hardsel/mocks.hpp"

#include <cmath>
#include <sstream>

#include "hardsel/errors.hpp"
#include "hardsel/kernels.hpp"
#include "hardsel/rng.hpp"

namespace hardsel::mock {
namespace {

const ChatMessage& user_message(std::span<const ChatMessage> messages) {
  for (const auto& m : messages) {
    if (m.role == Role::kUser) return m;
  }
  throw ConfigError("mock judge: no user message");
}

std::string format_score(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string reply(double a, double b, std::string_view why) {
  return format_score(a) + " " + format_score(b) + "\n" + std::string(why);
}

}  // namespace

std::string ScriptedJudge::chat_impl(std::span<const ChatMessage> messages) {
  const auto slots = parse_judge_prompt(user_message(messages).content);
  if (slots) {
    if (auto it = table_.find(slots->question); it != table_.end()) {
      return reply(it->second.first, it->second.second, "Scores taken from the script.");
    }
  }
  if (fallback_) return reply(fallback_->first, fallback_->second, "Default scores.");
  return "I think both are good.";
}

std::string PreferenceJudge::chat_impl(std::span<const ChatMessage> messages) {
  const auto slots = parse_judge_prompt(user_message(messages).content);
  if (!slots) return "The prompt could not be read.";
  return reply(scorer_(slots->question, slots->answer_1), scorer_(slots->question, slots->answer_2),
               "Each answer was rated independently of its position.");
}

PreferenceJudge::Scorer hash_scorer(std::uint64_t seed) {
  return [seed](const std::string&, const std::string& answer) {
    const auto h = splitmix64(seed ^ fnv1a64(answer));
    return 1.0 + 0.5 * static_cast<double>(h % 19);
  };
}

HyperplaneOracle::HyperplaneOracle(std::shared_ptr<EmbeddingProvider> embedder,
                                   std::uint64_t seed, double hard_z)
    : embedder_(std::move(embedder)) {
  if (!embedder_) throw ConfigError("HyperplaneOracle: null embedder");
  HashEmbedder normal_source(embedder_->dim(), derive_seed(seed, 0x0dd1ce));
  normal_ = normal_source.embed_one("hyperplane-normal");
  threshold_ = hard_z / std::sqrt(static_cast<double>(embedder_->dim()));
}

double HyperplaneOracle::margin(const std::string& instruction) const {
  const std::string text[] = {instruction};
  const auto v = embedder_->embed_batch(text);
  return simd::dot(normal_.values(), v[0].values()) - threshold_;
}

bool HyperplaneOracle::is_hard(const std::string& instruction) const {
  return margin(instruction) < 0.0;
}

PreferenceJudge::Scorer HyperplaneOracle::scorer() const {
  return [this](const std::string& question, const std::string& answer) {
    if (!answer.starts_with(kMockResponsePrefix)) return 6.0;
    return is_hard(question) ? 4.0 : 8.0;
  };
}

}  // namespace hardsel::mock
