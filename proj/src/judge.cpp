#include "hardsel/judge.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hardsel/corpus.hpp"
#include "hardsel/errors.hpp"
#include "hardsel/parallel.hpp"
#include "hardsel/rng.hpp"

namespace hardsel {

namespace {

constexpr std::string_view kQuestionTag = "[Question]\n";
constexpr std::string_view kStart1 = "\n[The Start of Assistant 1's Answer]\n";
constexpr std::string_view kEnd1 = "\n[The End of Assistant 1's Answer]\n";
constexpr std::string_view kStart2 = "[The Start of Assistant 2's Answer]\n";
constexpr std::string_view kEnd2 = "\n[The End of Assistant 2's Answer]\n";
constexpr std::string_view kInstructions =
    "\n"
    "We would like to request your feedback on the performance of two AI assistants in response "
    "to the user question displayed above. Please rate the helpfulness, relevance, accuracy, and "
    "level of detail of their responses. Each assistant receives an overall score on a scale of 1 "
    "to 10, where a higher score indicates better overall performance.\n"
    "Please first output a single line containing only two values indicating the scores for "
    "Assistant 1 and Assistant 2, respectively. The two scores are separated by a space. In the "
    "subsequent line, please provide a comprehensive explanation of your evaluation, avoiding any "
    "potential bias and ensuring that the order in which the responses were presented does not "
    "affect your judgment.";

std::optional<double> parse_number(std::string_view tok) {
  double v = 0.0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

double clamp_score(double v) {
  if (v < 1.0 || v > 10.0) {
    spdlog::warn("judge score {} outside [1, 10], clamping", v);
    return std::clamp(v, 1.0, 10.0);
  }
  return v;
}

}  // namespace

JudgePrompt build_judge_prompt(std::string_view question, std::string_view answer_1,
                               std::string_view answer_2) {
  if (is_blank(question) || is_blank(answer_1) || is_blank(answer_2)) {
    throw ConfigError("build_judge_prompt: question and answers must be non-empty");
  }
  JudgePrompt p;
  p.system = std::string(kJudgeSystemPrompt);
  p.user.reserve(question.size() + answer_1.size() + answer_2.size() + 1024);
  p.user += kQuestionTag;
  p.user += question;
  p.user += kStart1;
  p.user += answer_1;
  p.user += kEnd1;
  p.user += kStart2;
  p.user += answer_2;
  p.user += kEnd2;
  p.user += kInstructions;
  return p;
}

std::optional<PromptSlots> parse_judge_prompt(std::string_view user) {
  if (!user.starts_with(kQuestionTag)) return std::nullopt;
  const auto s1 = user.find(kStart1);
  if (s1 == std::string_view::npos) return std::nullopt;
  const auto e1 = user.find(kEnd1, s1 + kStart1.size());
  if (e1 == std::string_view::npos) return std::nullopt;
  const auto s2 = e1 + kEnd1.size();
  if (user.substr(s2, kStart2.size()) != kStart2) return std::nullopt;
  const auto e2 = user.rfind(kEnd2);
  if (e2 == std::string_view::npos || e2 < s2 + kStart2.size()) return std::nullopt;
  PromptSlots slots;
  slots.question = std::string(user.substr(kQuestionTag.size(), s1 - kQuestionTag.size()));
  slots.answer_1 = std::string(user.substr(s1 + kStart1.size(), e1 - s1 - kStart1.size()));
  slots.answer_2 = std::string(user.substr(s2 + kStart2.size(), e2 - s2 - kStart2.size()));
  return slots;
}

std::pair<double, double> parse_judge_scores(std::string_view text) {
  std::string_view line;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!is_blank(line)) break;
    line = {};
  }
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  if (tokens.size() != 2) {
    throw ParseError("judge reply: expected two scores on the first line, got '" +
                     std::string(line.substr(0, 80)) + "'");
  }
  const auto a = parse_number(tokens[0]);
  const auto b = parse_number(tokens[1]);
  if (!a || !b) {
    throw ParseError("judge reply: non-numeric score in '" + std::string(line.substr(0, 80)) + "'");
  }
  return {clamp_score(*a), clamp_score(*b)};
}

std::string_view order_name(PresentationOrder o) noexcept {
  return o == PresentationOrder::kOriginalFirst ? "original_first" : "model_first";
}

Hardness label_from_scores(double score_model, double score_original) noexcept {
  return score_model > score_original ? Hardness::kEasy : Hardness::kHard;
}

PositionalScores ask_judge(ChatClient& judge, std::string_view question,
                           std::string_view answer_1, std::string_view answer_2) {
  const auto prompt = build_judge_prompt(question, answer_1, answer_2);
  const ChatMessage messages[] = {{Role::kSystem, prompt.system}, {Role::kUser, prompt.user}};
  std::string raw = judge.chat(messages);
  std::pair<double, double> scores;
  try {
    scores = parse_judge_scores(raw);
  } catch (const ParseError& first) {
    spdlog::info("re-asking judge: {}", first.what());
    raw = judge.chat(messages);
    scores = parse_judge_scores(raw);
  }
  return {scores.first, scores.second, std::move(raw)};
}

JudgedPair judge_training_pair(ChatClient& judge, const JudgeItem& item, PresentationOrder order) {
  const bool original_first = order == PresentationOrder::kOriginalFirst;
  auto scores = ask_judge(judge, item.instruction,
                          original_first ? item.original_response : item.model_response,
                          original_first ? item.model_response : item.original_response);
  JudgedPair out;
  out.record_id = item.record_id;
  out.order = order;
  out.score_original = original_first ? scores.first : scores.second;
  out.score_model = original_first ? scores.second : scores.first;
  out.label = label_from_scores(out.score_model, out.score_original);
  out.raw_judge_text = std::move(scores.raw);
  return out;
}

std::vector<PresentationOrder> assign_orders(std::size_t n, std::uint64_t seed) {
  std::vector<PresentationOrder> orders(n, PresentationOrder::kModelFirst);
  std::fill_n(orders.begin(), n / 2, PresentationOrder::kOriginalFirst);
  Rng rng(seed);
  rng.shuffle(orders);
  return orders;
}

LabeledBatch label_batch(ChatClient& judge, std::span<const JudgeItem> items, std::uint64_t seed,
                         std::size_t workers) {
  if (items.empty()) throw ConfigError("label_batch: empty batch");
  const auto orders = assign_orders(items.size(), seed);

  struct Slot {
    std::optional<JudgedPair> pair;
    std::string error;
  };
  std::vector<Slot> slots(items.size());
  parallel_for(items.size(), workers, [&](std::size_t i) {
    try {
      slots[i].pair = judge_training_pair(judge, items[i], orders[i]);
    } catch (const ParseError& e) {
      slots[i].error = e.what();
    } catch (const ProviderError& e) {
      slots[i].error = e.what();
    } catch (const ContractError& e) {
      slots[i].error = e.what();
    }
  });

  LabeledBatch batch;
  for (std::size_t i = 0; i < items.size(); ++i) {
    (orders[i] == PresentationOrder::kOriginalFirst ? batch.original_first : batch.model_first) += 1;
    if (!slots[i].pair) {
      batch.failed.push_back({items[i].record_id, orders[i], std::move(slots[i].error)});
      continue;
    }
    auto& pair = *slots[i].pair;
    (pair.label == Hardness::kHard ? batch.hard : batch.easy).push_back(std::move(pair));
  }
  if (!batch.failed.empty()) {
    spdlog::warn("{} of {} judgements failed", batch.failed.size(), items.size());
  }
  return batch;
}

void append_transcript(const std::filesystem::path& path, const LabeledBatch& batch) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot write " + path.string());
  auto emit = [&](const JudgedPair& p) {
    const bool of = p.order == PresentationOrder::kOriginalFirst;
    nlohmann::json line{{"id", p.record_id},
                        {"order", order_name(p.order)},
                        {"scores", {of ? p.score_original : p.score_model,
                                    of ? p.score_model : p.score_original}},
                        {"label", p.label == Hardness::kHard ? "hard" : "easy"},
                        {"raw", p.raw_judge_text}};
    out << line.dump() << '\n';
  };
  for (const auto& p : batch.hard) emit(p);
  for (const auto& p : batch.easy) emit(p);
  for (const auto& f : batch.failed) {
    out << nlohmann::json{{"id", f.record_id}, {"order", order_name(f.order)},
                          {"scores", nullptr}, {"label", "failed"}, {"raw", f.error}}
               .dump()
        << '\n';
  }
}

}  // namespace hardsel
