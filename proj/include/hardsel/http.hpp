#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace hardsel::http {

struct Endpoint {
  std::string scheme;  // "http" or "https"
  std::string host;
  int port = 0;
  std::string path;  // always starts with '/'

  std::string base() const;  // scheme://host:port
};

/// Throws ConfigError for anything that is not http(s)://host[:port][/path].
Endpoint parse_endpoint(std::string_view url);

struct PostOptions {
  double timeout_seconds = 60.0;
  int max_retries = 2;
  std::vector<std::pair<std::string, std::string>> headers;
};

/// POSTs `body` as JSON and parses the JSON reply. Transport failures,
/// timeouts, 429 and 5xx are retried up to max_retries times (so at most
/// max_retries + 1 attempts); then ProviderError(retryable=true) is thrown.
/// Other non-2xx statuses throw ProviderError(retryable=false). A reply that
/// is not JSON throws ContractError.
nlohmann::json post_json(const Endpoint& endpoint, const nlohmann::json& body,
                         const PostOptions& options);

}  // namespace hardsel::http
