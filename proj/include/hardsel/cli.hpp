#pragma once

#include <memory>
#include <optional>

#include <nlohmann/json.hpp>

#include "hardsel/clients.hpp"
#include "hardsel/config.hpp"
#include "hardsel/embedding.hpp"
#include "hardsel/mocks.hpp"

namespace hardsel::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Clients built from a RunConfig. The oracle (when used) is kept alive here
/// because the mock judge's scorer refers to it.
struct Providers {
  std::shared_ptr<EmbeddingProvider> embedder;
  std::shared_ptr<GenerationClient> generator;
  std::shared_ptr<ChatClient> judge;
  std::shared_ptr<mock::HyperplaneOracle> oracle;
};

/// Mock implementations are used for any endpoint set to "mock" and for
/// everything when cfg.force_mock is set.
Providers make_providers(const RunConfig& cfg);

/// Load, sample, write the unified source JSONL and its manifest.
nlohmann::json cmd_ingest(const RunConfig& cfg);

/// Run (or resume) the training loop; writes the state after each
/// iteration and a run manifest at the end.
nlohmann::json cmd_train_policy(const RunConfig& cfg, const Providers& providers);

/// Selection from the trained state; writes the output JSONL and a report.
nlohmann::json cmd_select(const RunConfig& cfg, const Providers& providers);

/// Two-round pairwise comparison of responses_a (model 1) vs responses_b.
nlohmann::json cmd_evaluate(const RunConfig& cfg, const Providers& providers);

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e) noexcept;

/// Full command-line entry point (subcommands ingest, train-policy, select,
/// evaluate). Returns the process exit code.
int run(int argc, char** argv);

}  // namespace hardsel::cli
