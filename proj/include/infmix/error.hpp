#pragma once

#include <stdexcept>
#include <string>

namespace infmix {

// Bad user input or a violated precondition. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// A computation that could not finish (non-convergence, overflow, truncation).
// Carries the module/op that raised it. Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

class ReturnOverflow : public NumericError {
 public:
  ReturnOverflow(long long cap)
      : NumericError("systems.return_time", "return time exceeded cap " + std::to_string(cap)),
        cap_(cap) {}
  long long cap() const { return cap_; }

 private:
  long long cap_;
};

class TruncationError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace infmix
