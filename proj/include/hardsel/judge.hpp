#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hardsel/classifier.hpp"
#include "hardsel/clients.hpp"

namespace hardsel {

inline constexpr std::string_view kJudgeSystemPrompt =
    "You are a helpful and precise assistant for checking the quality of the answer.";

struct JudgePrompt {
  std::string system;
  std::string user;
};

/// Renders the pairwise rating template with the question and both answers
/// substituted. ConfigError if any text is blank.
JudgePrompt build_judge_prompt(std::string_view question, std::string_view answer_1,
                               std::string_view answer_2);

struct PromptSlots {
  std::string question;
  std::string answer_1;
  std::string answer_2;
};

/// Inverse of build_judge_prompt for well-formed user messages; nullopt
/// otherwise. Used by offline judges.
std::optional<PromptSlots> parse_judge_prompt(std::string_view user_message);

/// Reads "<score_1> <score_2>" from the first non-empty line. Scores outside
/// [1, 10] are clamped with a warning. ParseError unless the line holds
/// exactly two finite numbers.
std::pair<double, double> parse_judge_scores(std::string_view text);

enum class PresentationOrder { kOriginalFirst, kModelFirst };
std::string_view order_name(PresentationOrder o) noexcept;

/// Easy only when the model's answer scored strictly higher; ties are hard.
Hardness label_from_scores(double score_model, double score_original) noexcept;

struct JudgedPair {
  std::string record_id;
  double score_original = 0.0;
  double score_model = 0.0;
  PresentationOrder order = PresentationOrder::kOriginalFirst;
  Hardness label = Hardness::kHard;
  std::string raw_judge_text;
};

struct JudgeItem {
  std::string record_id;
  std::string instruction;
  std::string original_response;
  std::string model_response;
};

struct PositionalScores {
  double first = 0.0;   // Assistant 1
  double second = 0.0;  // Assistant 2
  std::string raw;
};

/// One judge request for (question, answer_1, answer_2). A reply that does
/// not parse is asked once more; a second parse failure throws ParseError.
PositionalScores ask_judge(ChatClient& judge, std::string_view question,
                           std::string_view answer_1, std::string_view answer_2);

/// Judges one pair with answers presented in `order`. A reply that does not
/// parse is asked once more; a second parse failure throws ParseError.
/// Transport errors propagate as ProviderError.
JudgedPair judge_training_pair(ChatClient& judge, const JudgeItem& item, PresentationOrder order);

/// floor(n/2) original-first and the rest model-first, positions shuffled
/// by seed.
std::vector<PresentationOrder> assign_orders(std::size_t n, std::uint64_t seed);

struct FailedJudgement {
  std::string record_id;
  PresentationOrder order = PresentationOrder::kOriginalFirst;
  std::string error;
};

struct LabeledBatch {
  std::vector<JudgedPair> hard;  // input order
  std::vector<JudgedPair> easy;  // input order
  std::vector<FailedJudgement> failed;
  std::size_t original_first = 0;
  std::size_t model_first = 0;
};

/// Judges every item once on up to `workers` threads and partitions by
/// label after all items settle. ConfigError on an empty batch.
LabeledBatch label_batch(ChatClient& judge, std::span<const JudgeItem> items, std::uint64_t seed,
                         std::size_t workers = 1);

/// JSONL lines {"id", "order", "scores": [first, second], "label", "raw"}
/// with scores as the judge gave them (presentation order). Appends.
void append_transcript(const std::filesystem::path& path, const LabeledBatch& batch);

}  // namespace hardsel
