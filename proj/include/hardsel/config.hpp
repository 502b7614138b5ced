#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hardsel/clients.hpp"
#include "hardsel/pipeline.hpp"

namespace hardsel {

struct SourceSpec {
  std::filesystem::path path;
  std::string tag;  // defaults to the file stem
};

struct EmbeddingSettings {
  std::string provider = "hash";  // "hash" or "remote"
  std::size_t dim = 64;
  std::uint64_t seed = 0x5eed;
  std::string endpoint;
  double timeout_seconds = 60.0;
  int max_retries = 2;
  std::size_t max_batch = 64;
  std::string api_key_env;
};

struct MockSettings {
  std::string judge = "oracle";  // "oracle" (hyperplane difficulty) or "hash"
  double hard_z = 0.8;
};

struct RunConfig {
  std::filesystem::path base_dir = ".";  // relative paths resolve against this

  std::vector<SourceSpec> sources;
  std::filesystem::path source_path = "work/source.jsonl";
  std::filesystem::path ingest_manifest = "work/ingest_manifest.json";
  std::filesystem::path state_path = "work/state.json";
  std::filesystem::path run_manifest = "work/train_manifest.json";
  std::filesystem::path transcript = "work/judge_transcript.jsonl";
  std::filesystem::path output = "work/selected.jsonl";
  std::filesystem::path selection_report = "work/selection_report.json";
  std::filesystem::path score_dump;  // optional
  std::filesystem::path test_set;
  std::filesystem::path responses_a;
  std::filesystem::path responses_b;
  std::filesystem::path eval_report = "work/eval_report.json";

  std::size_t n_per_source = 15'000;
  EmbeddingSettings embedding;
  GenerationConfig generator;
  GenerationConfig judge = default_judge_config();
  MockSettings mock;
  TrainPhaseConfig train;
  InferenceConfig inference;
  double max_missing_fraction = 0.0;

  std::uint64_t seed = 42;
  std::size_t workers = 1;
  bool force_mock = false;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  /// Checks every numeric invariant; ConfigError on the first violation.
  void validate() const;
};

/// Parses a config document (already in JSON form). Unknown keys are errors.
RunConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// Loads .json or .toml (by extension). Relative paths in the file resolve
/// against the file's directory.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace hardsel
