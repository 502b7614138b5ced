#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hardsel/http.hpp"

namespace hardsel {

enum class Role { kSystem, kUser };
std::string_view role_name(Role r) noexcept;

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;
};

struct GenerationConfig {
  std::size_t max_tokens = 1024;
  double temperature = 0.7;
  std::string endpoint = "mock";  // URL, or "mock" / "mock:<tag>"
  std::string model_name;
  double timeout_seconds = 60.0;
  int max_retries = 2;
  std::string api_key_env;  // name of the env var holding a bearer token
  std::uint64_t seed = 0;   // mock determinism

  void validate() const;
  bool is_mock() const noexcept;
};

/// Judge-side settings: temperature 0 unless overridden.
GenerationConfig default_judge_config();

/// Chat-completion client. Exactly one system and one user message per call.
class ChatClient {
 public:
  virtual ~ChatClient() = default;

  /// Validates the message list (ConfigError), then calls the backend.
  /// Trailing whitespace is stripped from the completion.
  std::string chat(std::span<const ChatMessage> messages);
  std::size_t calls() const noexcept { return calls_.load(); }

 protected:
  virtual std::string chat_impl(std::span<const ChatMessage> messages) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

/// Base-model response generation.
class GenerationClient {
 public:
  virtual ~GenerationClient() = default;

  /// Throws ConfigError for a blank instruction and ProviderError when the
  /// backend keeps failing.
  std::string generate_response(const std::string& instruction, const std::string& input = {});
  std::size_t calls() const noexcept { return calls_.load(); }

 protected:
  virtual std::string generate_impl(const std::string& instruction, const std::string& input) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

/// OpenAI-style POST {"model","messages","temperature","max_tokens"}. The
/// completion is read from choices[0].message.content, choices[0].text,
/// or a top-level "text" / "completion" / "content" field.
class RemoteChatClient final : public ChatClient {
 public:
  /// ConfigError for a malformed endpoint, before any network traffic.
  explicit RemoteChatClient(GenerationConfig cfg);

 protected:
  std::string chat_impl(std::span<const ChatMessage> messages) override;

 private:
  GenerationConfig cfg_;
  http::Endpoint endpoint_;
};

/// Sends the instruction (and input, after a blank line) as one user message.
class RemoteGenerationClient final : public GenerationClient {
 public:
  explicit RemoteGenerationClient(GenerationConfig cfg);

 protected:
  std::string generate_impl(const std::string& instruction, const std::string& input) override;

 private:
  GenerationConfig cfg_;
  http::Endpoint endpoint_;
};

/// Shared by the remote clients: POST one chat request, return the text.
std::string post_chat(const http::Endpoint& endpoint, const GenerationConfig& cfg,
                      std::span<const ChatMessage> messages);

/// Prefix identifying responses produced by MockGenerationClient.
inline constexpr std::string_view kMockResponsePrefix = "[mock-response ";

/// Deterministic offline base model: "[mock-response <hash>] ..." followed
/// by a rewrite of the instruction. Pure function of (seed, instruction, input).
class MockGenerationClient final : public GenerationClient {
 public:
  explicit MockGenerationClient(std::uint64_t seed) : seed_(seed) {}

 protected:
  std::string generate_impl(const std::string& instruction, const std::string& input) override;

 private:
  std::uint64_t seed_;
};

struct GenerationOutcome {
  std::vector<std::optional<std::string>> responses;  // nullopt = failed item
  std::size_t failed = 0;
};

/// Generates responses for a batch on up to `workers` threads. Items whose
/// call throws a ProviderError are reported as failed rather than aborting
/// the batch; results are positioned by input index.
GenerationOutcome generate_batch(GenerationClient& client,
                                 std::span<const std::pair<std::string, std::string>> prompts,
                                 std::size_t workers);

}  // namespace hardsel
