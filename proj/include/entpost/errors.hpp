#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace entpost {

/// Input violates a documented precondition or invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Codebook generation ran out of attempts: n is too small for the
/// requested separation.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A reveal broke the disclosure rules (duplicate or out-of-range position,
/// non-increasing round). Carries the input line when it came from a file.
class ProtocolViolation : public std::runtime_error {
 public:
  explicit ProtocolViolation(const std::string& what,
                             std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(line ? "line " + std::to_string(*line) + ": " + what : what),
        line_(line) {}

  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  std::optional<std::size_t> line_;
};

/// Malformed codebook or transcript document.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what, std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(line ? "line " + std::to_string(*line) + ": " + what : what),
        line_(line) {}

  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  std::optional<std::size_t> line_;
};

}  // namespace entpost
