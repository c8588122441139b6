#pragma once

#include <stdexcept>
#include <string>

namespace recipro {

// Failure category; maps onto the CLI exit codes 1/2/3.
enum class ErrorKind { validation = 1, data = 2, internal = 3 };

// Every fatal condition carries a stable machine-readable reason
// ("degenerate_class", "corrupt_model", ...) plus free-form detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string reason, const std::string& detail = {})
      : std::runtime_error(detail.empty() ? reason : reason + ": " + detail),
        kind_(kind),
        reason_(std::move(reason)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  ErrorKind kind_;
  std::string reason_;
};

inline Error data_error(std::string reason, const std::string& detail = {}) {
  return Error(ErrorKind::data, std::move(reason), detail);
}

inline Error validation_error(std::string reason, const std::string& detail = {}) {
  return Error(ErrorKind::validation, std::move(reason), detail);
}

}  // namespace recipro
