#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hardsel/clients.hpp"

namespace hardsel {

/// Outcome for model 1, per round or per match.
enum class Verdict { kWin, kTie, kLoss };
std::string_view verdict_name(Verdict v) noexcept;

/// Strict comparison of the two models' scores within one round.
Verdict round_outcome(double score_model_1, double score_model_2) noexcept;

/// Win: both rounds won, or one won and one tied. Tie: both tied, or one won
/// and one lost. Loss: both lost, or one tied and one lost.
Verdict combine_rounds(Verdict round1, Verdict round2) noexcept;

struct MatchResult {
  std::string instruction_id;
  std::pair<double, double> round1;  // (model 1, model 2); model 1 shown first
  std::pair<double, double> round2;  // (model 1, model 2); model 2 shown first
  Verdict verdict = Verdict::kTie;
};

/// Two judge rounds with the presentation order reversed in the second.
/// Judge failures in either round propagate (ParseError / ProviderError).
MatchResult two_round_compare(ChatClient& judge, std::string instruction_id,
                              std::string_view instruction, std::string_view out_1,
                              std::string_view out_2);

/// Same verdict table applied to scores already collected.
MatchResult match_from_scores(std::string instruction_id, std::pair<double, double> round1,
                              std::pair<double, double> round2);

struct WinningScoreReport {
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;
  std::size_t n = 0;
  double winning_score = 0.0;  // (wins - losses) / n + 1
};

/// ConfigError on empty input.
WinningScoreReport winning_score(std::span<const MatchResult> results);

struct TestItem {
  std::string id;
  std::string instruction;
};

/// Test set JSONL: "instruction" (plus optional "input"); ids from "id" or
/// "test:<line>".
std::vector<TestItem> load_test_set(const std::filesystem::path& path);

/// Response JSONL keyed by "id", text in "response" or "output".
std::map<std::string, std::string> load_responses(const std::filesystem::path& path);

struct EvaluationReport {
  WinningScoreReport summary;
  std::vector<MatchResult> matches;  // test-set order
  std::vector<std::string> missing_ids;
  std::vector<std::string> failed_ids;  // judge failures, excluded from n
};

/// Compares model A (model 1) against model B over every test id present in
/// both response maps. Missing ids beyond max_missing_fraction of the test
/// set raise ConfigError listing them.
EvaluationReport evaluate_models(ChatClient& judge, std::span<const TestItem> test_set,
                                 const std::map<std::string, std::string>& responses_a,
                                 const std::map<std::string, std::string>& responses_b,
                                 double max_missing_fraction = 0.0, std::size_t workers = 1);

nlohmann::json report_to_json(const EvaluationReport& report);

}  // namespace hardsel
