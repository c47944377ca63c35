#pragma once

#include <stdexcept>
#include <string>

namespace degrpo {

// Invalid configuration or input file; CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse (out-of-range position, wrong objective variant, ...).
class UsageError : public std::logic_error {
 public:
  explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

// Trajectory log-probs do not match the old-policy snapshot they claim to
// come from.
class IntegrityError : public std::runtime_error {
 public:
  explicit IntegrityError(const std::string& what)
      : std::runtime_error(what) {}
};

// Non-finite parameters or objective during training; carries a dump of the
// offending step's batch. CLI maps this to exit code 2.
class NanAbort : public std::runtime_error {
 public:
  NanAbort(int step, const std::string& what, std::string dump)
      : std::runtime_error(what), step_(step), dump_(std::move(dump)) {}
  int step() const { return step_; }
  const std::string& dump() const { return dump_; }

 private:
  int step_;
  std::string dump_;
};

}  // namespace degrpo
