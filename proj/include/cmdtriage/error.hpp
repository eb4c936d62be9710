#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cmdtriage {

/// Base of every error thrown by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or wire payload. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Backend could not be reached or returned a transport-level failure.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts)
      : Error(what + " after " + std::to_string(attempts) + " attempt(s)"), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

/// The mock backend has no rule for a prompt: the test fixture is incomplete.
class RuleMissError : public Error {
 public:
  using Error::Error;
};

/// A feature was requested that the backend does not declare (e.g. token probabilities).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// One request of a batch failed; `index` identifies it within the batch.
class BatchError : public Error {
 public:
  BatchError(std::size_t index, const std::string& cause)
      : Error("request " + std::to_string(index) + " failed: " + cause), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace cmdtriage
