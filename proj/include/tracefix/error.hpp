#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace tracefix {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A malformed trace document or a trace operation applied outside its
/// preconditions. `step()` names the offending step when there is one.
class TraceError : public Error {
 public:
  explicit TraceError(std::string message, std::optional<std::size_t> step = std::nullopt)
      : Error(std::move(message)), step_(step) {}
  std::optional<std::size_t> step() const { return step_; }

 private:
  std::optional<std::size_t> step_;
};

/// Missing configuration for an operation (no gold answer, no gateway, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An operation was called on an input that violates its contract, e.g.
/// scoring a trace that already succeeds.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace tracefix
