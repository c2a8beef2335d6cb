#pragma once

#include <stdexcept>
#include <string>

namespace rusgroup {

// Failure classes surfaced to callers; the CLI maps each to an exit code.
enum class ErrorKind { input, transport, protocol };

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Bad data, bad configuration, or a missing prerequisite artifact.
class InputError : public Error {
 public:
  explicit InputError(const std::string& message) : Error(ErrorKind::input, message) {}
};

// The endpoint could not be reached or kept failing after retries.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, int status = 0, std::string body = {})
      : Error(ErrorKind::transport, message), status_(status), body_(std::move(body)) {}

  [[nodiscard]] int status() const noexcept { return status_; }
  [[nodiscard]] const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

// The endpoint answered, but not with something we can use.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& message, std::string raw_body)
      : Error(ErrorKind::protocol, message), raw_body_(std::move(raw_body)) {}

  [[nodiscard]] const std::string& raw_body() const noexcept { return raw_body_; }

 private:
  std::string raw_body_;
};

}  // namespace rusgroup
