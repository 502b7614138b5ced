#include "hardsel/clients.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <mutex>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hardsel/corpus.hpp"
#include "hardsel/errors.hpp"
#include "hardsel/parallel.hpp"
#include "hardsel/rng.hpp"

namespace hardsel {

std::string_view role_name(Role r) noexcept { return r == Role::kSystem ? "system" : "user"; }

void GenerationConfig::validate() const {
  if (max_retries < 0) throw ConfigError("client: max_retries must be >= 0");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("client: temperature must be >= 0");
  }
  if (max_tokens == 0) throw ConfigError("client: max_tokens must be >= 1");
  if (!(timeout_seconds > 0.0)) throw ConfigError("client: timeout must be positive");
  if (!is_mock()) http::parse_endpoint(endpoint);
}

bool GenerationConfig::is_mock() const noexcept {
  return endpoint == "mock" || endpoint.starts_with("mock:");
}

GenerationConfig default_judge_config() {
  GenerationConfig cfg;
  cfg.temperature = 0.0;
  return cfg;
}

namespace {

std::string rstrip(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

}  // namespace

std::string ChatClient::chat(std::span<const ChatMessage> messages) {
  std::size_t system = 0;
  std::size_t user = 0;
  for (const auto& m : messages) {
    if (m.content.empty()) throw ConfigError("chat: message content must be non-empty");
    (m.role == Role::kSystem ? system : user) += 1;
  }
  if (system != 1 || user != 1) {
    throw ConfigError("chat: expected exactly one system and one user message");
  }
  calls_.fetch_add(1);
  return rstrip(chat_impl(messages));
}

std::string GenerationClient::generate_response(const std::string& instruction,
                                                const std::string& input) {
  if (is_blank(instruction)) throw ConfigError("generate_response: instruction is empty");
  calls_.fetch_add(1);
  return generate_impl(instruction, input);
}

std::string post_chat(const http::Endpoint& endpoint, const GenerationConfig& cfg,
                      std::span<const ChatMessage> messages) {
  nlohmann::json body{{"model", cfg.model_name},
                      {"messages", nlohmann::json::array()},
                      {"temperature", cfg.temperature},
                      {"max_tokens", cfg.max_tokens}};
  for (const auto& m : messages) {
    body["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
  }
  http::PostOptions opt;
  opt.timeout_seconds = cfg.timeout_seconds;
  opt.max_retries = cfg.max_retries;
  if (!cfg.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg.api_key_env.c_str())) {
      opt.headers.emplace_back("Authorization", std::string("Bearer ") + key);
    } else {
      spdlog::warn("environment variable {} is not set; sending no credentials", cfg.api_key_env);
    }
  }
  const auto reply = http::post_json(endpoint, body, opt);

  if (auto choices = reply.find("choices"); choices != reply.end() && choices->is_array() &&
                                            !choices->empty()) {
    const auto& first = (*choices)[0];
    if (auto msg = first.find("message"); msg != first.end() && msg->contains("content") &&
                                          (*msg)["content"].is_string()) {
      return (*msg)["content"].get<std::string>();
    }
    if (auto text = first.find("text"); text != first.end() && text->is_string()) {
      return text->get<std::string>();
    }
  }
  for (const char* key : {"text", "completion", "content"}) {
    if (auto it = reply.find(key); it != reply.end() && it->is_string()) {
      return it->get<std::string>();
    }
  }
  throw ContractError("chat reply from " + endpoint.base() + endpoint.path +
                      " has no completion text");
}

RemoteChatClient::RemoteChatClient(GenerationConfig cfg)
    : cfg_(std::move(cfg)), endpoint_(http::parse_endpoint(cfg_.endpoint)) {
  cfg_.validate();
}

std::string RemoteChatClient::chat_impl(std::span<const ChatMessage> messages) {
  return post_chat(endpoint_, cfg_, messages);
}

RemoteGenerationClient::RemoteGenerationClient(GenerationConfig cfg)
    : cfg_(std::move(cfg)), endpoint_(http::parse_endpoint(cfg_.endpoint)) {
  cfg_.validate();
}

std::string RemoteGenerationClient::generate_impl(const std::string& instruction,
                                                  const std::string& input) {
  std::string prompt = instruction;
  if (!is_blank(input)) prompt += "\n\n" + input;
  const ChatMessage msg{Role::kUser, std::move(prompt)};
  return post_chat(endpoint_, cfg_, std::span(&msg, 1));
}

std::string MockGenerationClient::generate_impl(const std::string& instruction,
                                                const std::string& input) {
  const std::uint64_t h = splitmix64(seed_ ^ fnv1a64(instruction) ^ (fnv1a64(input) << 1));
  char tag[17];
  std::snprintf(tag, sizeof(tag), "%016llx", static_cast<unsigned long long>(h));
  std::string out(kMockResponsePrefix);
  out += tag;
  out += "] Here is my answer to: ";
  out += instruction;
  return out;
}

GenerationOutcome generate_batch(GenerationClient& client,
                                 std::span<const std::pair<std::string, std::string>> prompts,
                                 std::size_t workers) {
  GenerationOutcome out;
  out.responses.resize(prompts.size());
  std::mutex mu;
  parallel_for(prompts.size(), workers, [&](std::size_t i) {
    try {
      out.responses[i] = client.generate_response(prompts[i].first, prompts[i].second);
    } catch (const ProviderError& e) {
      std::lock_guard lock(mu);
      spdlog::warn("generation failed for item {}: {}", i, e.what());
    } catch (const ContractError& e) {
      std::lock_guard lock(mu);
      spdlog::warn("generation failed for item {}: {}", i, e.what());
    }
  });
  for (const auto& r : out.responses) out.failed += r ? 0 : 1;
  if (out.failed > 0) spdlog::warn("{} of {} generations failed", out.failed, prompts.size());
  return out;
}

}  // namespace hardsel
