#pragma once

#include <stdexcept>
#include <string>

namespace clra {

// Invalid parameter or configuration (rank, accuracy, dimensions, windows).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite or otherwise unusable numeric input rows.
class InputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Ingestion failure (ragged CSV, unparsable cell). Carries the 1-based line.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, long line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  long line() const noexcept { return line_; }

 private:
  long line_;
};

// Broken internal invariant; never expected on valid input.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace clra
