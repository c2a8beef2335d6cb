#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <string_view>

namespace rusgroup::http {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

Url parse_url(std::string_view url);

struct Result {
  int status = 0;
  std::string body;
  std::string transport_error;  // non-empty when no HTTP response arrived
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::milliseconds max_backoff{5000};
};

struct RetriedResult {
  Result result;
  int retries = 0;
};

Result post_json(std::string_view url, const std::string& body, std::chrono::milliseconds timeout,
                 const std::string& bearer_token);

// Retries connection failures, 408, 429 and 5xx with exponential backoff.
// Throws TransportError once retries are exhausted or on any other non-2xx.
// `before_attempt` runs ahead of every attempt (rate limiting hook).
RetriedResult post_json_with_retries(std::string_view url, const std::string& body,
                                     std::chrono::milliseconds timeout,
                                     const std::string& bearer_token, const RetryPolicy& policy,
                                     const std::function<void()>& before_attempt = {});

// Reads the named environment variable; empty when unset or name is empty.
std::string env_or_empty(const std::string& name);

}  // namespace rusgroup::http
