#include "hardsel/evalharness.hpp"

#include <fstream>
#include <optional>

#include <spdlog/spdlog.h>

#include "hardsel/corpus.hpp"
#include "hardsel/errors.hpp"
#include "hardsel/judge.hpp"
#include "hardsel/parallel.hpp"

namespace hardsel {

std::string_view verdict_name(Verdict v) noexcept {
  switch (v) {
    case Verdict::kWin: return "win";
    case Verdict::kTie: return "tie";
    case Verdict::kLoss: return "loss";
  }
  return "unknown";
}

Verdict round_outcome(double score_model_1, double score_model_2) noexcept {
  if (score_model_1 > score_model_2) return Verdict::kWin;
  if (score_model_1 < score_model_2) return Verdict::kLoss;
  return Verdict::kTie;
}

Verdict combine_rounds(Verdict a, Verdict b) noexcept {
  const int score = (a == Verdict::kWin) - (a == Verdict::kLoss) + (b == Verdict::kWin) -
                    (b == Verdict::kLoss);
  if (score > 0) return Verdict::kWin;
  if (score < 0) return Verdict::kLoss;
  return Verdict::kTie;
}

MatchResult match_from_scores(std::string instruction_id, std::pair<double, double> round1,
                              std::pair<double, double> round2) {
  MatchResult m;
  m.instruction_id = std::move(instruction_id);
  m.round1 = round1;
  m.round2 = round2;
  m.verdict = combine_rounds(round_outcome(round1.first, round1.second),
                             round_outcome(round2.first, round2.second));
  return m;
}

MatchResult two_round_compare(ChatClient& judge, std::string instruction_id,
                              std::string_view instruction, std::string_view out_1,
                              std::string_view out_2) {
  if (is_blank(out_1) || is_blank(out_2)) {
    throw ConfigError("two_round_compare: both outputs must be non-empty");
  }
  const auto first = ask_judge(judge, instruction, out_1, out_2);
  const auto second = ask_judge(judge, instruction, out_2, out_1);
  return match_from_scores(std::move(instruction_id), {first.first, first.second},
                           {second.second, second.first});
}

WinningScoreReport winning_score(std::span<const MatchResult> results) {
  if (results.empty()) throw ConfigError("winning_score: no results");
  WinningScoreReport r;
  for (const auto& m : results) {
    switch (m.verdict) {
      case Verdict::kWin: ++r.wins; break;
      case Verdict::kTie: ++r.ties; break;
      case Verdict::kLoss: ++r.losses; break;
    }
  }
  r.n = results.size();
  r.winning_score = (static_cast<double>(r.wins) - static_cast<double>(r.losses)) /
                        static_cast<double>(r.n) +
                    1.0;
  return r;
}

std::vector<TestItem> load_test_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<TestItem> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!j.is_object() || !j.contains("instruction") || !j["instruction"].is_string()) {
      throw ParseError(where + ": expected an object with an \"instruction\" string");
    }
    TestItem item;
    item.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>()
                                                      : "test:" + std::to_string(line_no);
    item.instruction = j["instruction"].get<std::string>();
    if (j.contains("input") && j["input"].is_string() && !is_blank(j["input"].get<std::string>())) {
      item.instruction += "\n\n" + j["input"].get<std::string>();
    }
    if (is_blank(item.instruction)) throw ParseError(where + ": blank instruction");
    out.push_back(std::move(item));
  }
  if (out.empty()) throw EmptyPoolError(path.string() + " has no test items");
  return out;
}

std::map<std::string, std::string> load_responses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      throw ParseError(where + ": expected an object with an \"id\" string");
    }
    const char* key = j.contains("response") ? "response" : "output";
    if (!j.contains(key) || !j[key].is_string()) {
      throw ParseError(where + ": missing \"response\" text");
    }
    out[j["id"].get<std::string>()] = j[key].get<std::string>();
  }
  return out;
}

EvaluationReport evaluate_models(ChatClient& judge, std::span<const TestItem> test_set,
                                 const std::map<std::string, std::string>& responses_a,
                                 const std::map<std::string, std::string>& responses_b,
                                 double max_missing_fraction, std::size_t workers) {
  if (test_set.empty()) throw ConfigError("evaluate: empty test set");
  EvaluationReport report;
  std::vector<const TestItem*> shared;
  for (const auto& item : test_set) {
    const auto a = responses_a.find(item.id);
    const auto b = responses_b.find(item.id);
    if (a == responses_a.end() || b == responses_b.end() || is_blank(a->second) ||
        is_blank(b->second)) {
      report.missing_ids.push_back(item.id);
    } else {
      shared.push_back(&item);
    }
  }
  const double missing_fraction =
      static_cast<double>(report.missing_ids.size()) / static_cast<double>(test_set.size());
  if (missing_fraction > max_missing_fraction || shared.empty()) {
    std::string listing;
    for (std::size_t i = 0; i < report.missing_ids.size() && i < 20; ++i) {
      listing += (i ? ", " : "") + report.missing_ids[i];
    }
    if (report.missing_ids.size() > 20) listing += ", ...";
    throw ConfigError(std::to_string(report.missing_ids.size()) +
                      " test id(s) lack a response in one of the files: " + listing);
  }

  std::vector<std::optional<MatchResult>> slots(shared.size());
  parallel_for(shared.size(), workers, [&](std::size_t i) {
    const auto& item = *shared[i];
    try {
      slots[i] = two_round_compare(judge, item.id, item.instruction, responses_a.at(item.id),
                                   responses_b.at(item.id));
    } catch (const ParseError& e) {
      spdlog::warn("match {} excluded: {}", item.id, e.what());
    } catch (const ProviderError& e) {
      spdlog::warn("match {} excluded: {}", item.id, e.what());
    } catch (const ContractError& e) {
      spdlog::warn("match {} excluded: {}", item.id, e.what());
    }
  });
  for (std::size_t i = 0; i < shared.size(); ++i) {
    if (slots[i]) {
      report.matches.push_back(std::move(*slots[i]));
    } else {
      report.failed_ids.push_back(shared[i]->id);
    }
  }
  if (report.matches.empty()) throw ProviderError("every match failed to judge", false);
  report.summary = winning_score(report.matches);
  return report;
}

nlohmann::json report_to_json(const EvaluationReport& report) {
  nlohmann::json matches = nlohmann::json::array();
  for (const auto& m : report.matches) {
    matches.push_back({{"id", m.instruction_id},
                       {"round1", {m.round1.first, m.round1.second}},
                       {"round2", {m.round2.first, m.round2.second}},
                       {"verdict", verdict_name(m.verdict)}});
  }
  const auto& s = report.summary;
  return nlohmann::json{{"wins", s.wins},
                        {"ties", s.ties},
                        {"losses", s.losses},
                        {"n", s.n},
                        {"winning_score", s.winning_score},
                        {"missing_ids", report.missing_ids},
                        {"failed_ids", report.failed_ids},
                        {"matches", std::move(matches)}};
}

}  // namespace hardsel
