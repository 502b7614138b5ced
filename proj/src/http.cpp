#include "hardsel/http.hpp"

#include <chrono>
#include <regex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "hardsel/errors.hpp"

namespace hardsel::http {

std::string Endpoint::base() const { return scheme + "://" + host + ":" + std::to_string(port); }

Endpoint parse_endpoint(std::string_view url) {
  static const std::regex kUrl(R"(^(https?)://([A-Za-z0-9.\-]+|\[[0-9A-Fa-f:]+\])(?::([0-9]{1,5}))?(/[^\s]*)?$)");
  std::cmatch m;
  if (!std::regex_match(url.data(), url.data() + url.size(), m, kUrl)) {
    throw ConfigError("malformed endpoint URL '" + std::string(url) + "'");
  }
  Endpoint ep;
  ep.scheme = m[1].str();
  ep.host = m[2].str();
  if (m[3].matched) {
    ep.port = std::stoi(m[3].str());
    if (ep.port <= 0 || ep.port > 65535) {
      throw ConfigError("endpoint port out of range in '" + std::string(url) + "'");
    }
  } else {
    ep.port = ep.scheme == "https" ? 443 : 80;
  }
  ep.path = m[4].matched ? m[4].str() : "/";
  return ep;
}

namespace {

httplib::Result do_post(const Endpoint& ep, const std::string& payload, const PostOptions& opt) {
  httplib::Client client(ep.base());
  const auto timeout = std::chrono::duration<double>(opt.timeout_seconds);
  const auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout - sec);
  client.set_connection_timeout(sec.count(), usec.count());
  client.set_read_timeout(sec.count(), usec.count());
  client.set_write_timeout(sec.count(), usec.count());
  httplib::Headers headers;
  for (const auto& [k, v] : opt.headers) headers.emplace(k, v);
  return client.Post(ep.path, headers, payload, "application/json");
}

}  // namespace

nlohmann::json post_json(const Endpoint& endpoint, const nlohmann::json& body,
                         const PostOptions& options) {
  const std::string payload = body.dump();
  const int attempts = options.max_retries + 1;
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto res = do_post(endpoint, payload, options);
    if (!res) {
      last_error = httplib::to_string(res.error());
    } else if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
    } else if (res->status < 200 || res->status >= 300) {
      throw ProviderError(endpoint.base() + endpoint.path + " returned HTTP " +
                              std::to_string(res->status) + ": " + res->body.substr(0, 200),
                          /*retryable=*/false);
    } else {
      auto parsed = nlohmann::json::parse(res->body, nullptr, /*allow_exceptions=*/false);
      if (parsed.is_discarded()) {
        throw ContractError(endpoint.base() + endpoint.path + " returned a non-JSON body");
      }
      return parsed;
    }
    spdlog::debug("POST {}{} attempt {}/{} failed: {}", endpoint.base(), endpoint.path, attempt,
                  attempts, last_error);
    if (attempt < attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
    }
  }
  throw ProviderError("POST " + endpoint.base() + endpoint.path + " failed after " +
                          std::to_string(attempts) + " attempt(s): " + last_error,
                      /*retryable=*/true);
}

}  // namespace hardsel::http
