#pragma once

#include <stdexcept>
#include <string>

namespace sei {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid data or broken domain invariant (bad JSONL line, query == positive, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Filesystem problems: missing files, unwritable directories, lock contention.
class IoError : public Error {
 public:
  using Error::Error;
};

// Bad manifest or configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// HTTP gateway failures. `status` is the last HTTP status seen (0 for
// transport-level failures), `attempts` how many requests were made.
// The message never contains credentials.
class GatewayError : public Error {
 public:
  GatewayError(const std::string& what, int status, int attempts)
      : Error(what), status_(status), attempts_(attempts) {}

  int status() const { return status_; }
  int attempts() const { return attempts_; }

 private:
  int status_ = 0;
  int attempts_ = 0;
};

// CLI exit code convention: 0 success, 1 invariant/validation failure,
// 2 environment/IO/gateway failure.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) != nullptr) return 1;
  if (dynamic_cast<const IoError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const GatewayError*>(&e) != nullptr) return 2;
  return 1;
}

}  // namespace sei
