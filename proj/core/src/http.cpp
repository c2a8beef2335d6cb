#include "http.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "rusgroup/error.hpp"

namespace rusgroup::http {

Url parse_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw InputError("endpoint URL lacks scheme: " + std::string(url));
  const auto path_start = url.find('/', scheme_end + 3);
  Url out;
  if (path_start == std::string_view::npos) {
    out.origin = std::string(url);
    out.path = "/";
  } else {
    out.origin = std::string(url.substr(0, path_start));
    out.path = std::string(url.substr(path_start));
  }
  return out;
}

Result post_json(std::string_view url, const std::string& body, std::chrono::milliseconds timeout,
                 const std::string& bearer_token) {
  const Url parsed = parse_url(url);
  httplib::Client client(parsed.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);

  Result out;
  auto res = client.Post(parsed.path, headers, body, "application/json");
  if (!res) {
    out.transport_error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

namespace {

bool retryable(const Result& r) {
  if (!r.transport_error.empty()) return true;
  return r.status == 408 || r.status == 429 || r.status >= 500;
}

}  // namespace

RetriedResult post_json_with_retries(std::string_view url, const std::string& body,
                                     std::chrono::milliseconds timeout,
                                     const std::string& bearer_token, const RetryPolicy& policy,
                                     const std::function<void()>& before_attempt) {
  auto backoff = policy.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    if (before_attempt) before_attempt();
    Result r = post_json(url, body, timeout, bearer_token);
    if (r.transport_error.empty() && r.status >= 200 && r.status < 300) {
      return {std::move(r), attempt};
    }
    if (!retryable(r)) {
      throw TransportError(std::string(url) + " returned HTTP " + std::to_string(r.status), r.status,
                           std::move(r.body));
    }
    if (attempt >= policy.max_retries) {
      const std::string what = r.transport_error.empty()
                                   ? "HTTP " + std::to_string(r.status)
                                   : r.transport_error;
      throw TransportError(std::string(url) + ": giving up after " + std::to_string(attempt) +
                               " retries (" + what + ")",
                           r.status, std::move(r.body));
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::min(backoff * 2, policy.max_backoff);
  }
}

std::string env_or_empty(const std::string& name) {
  if (name.empty()) return {};
  const char* v = std::getenv(name.c_str());
  return v ? std::string(v) : std::string{};
}

}  // namespace rusgroup::http
