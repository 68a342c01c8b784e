#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qamc {

// Malformed input file. Carries the 1-based line number (0 when the problem
// is not tied to a single line, e.g. a missing section).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line) : ParseError(what, line, {}) {}

  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }

  // Same error, reported as "<file>:<line>: <detail>".
  ParseError in_file(const std::string& file) const { return ParseError(detail_, line_, file); }

 private:
  ParseError(const std::string& what, std::size_t line, const std::string& file)
      : std::runtime_error(prefix(file, line) + what), line_(line), detail_(what) {}

  static std::string prefix(const std::string& file, std::size_t line) {
    if (file.empty()) return line ? "line " + std::to_string(line) + ": " : std::string();
    return file + (line ? ":" + std::to_string(line) : std::string()) + ": ";
  }

  std::size_t line_;
  std::string detail_;
};

// Structurally valid input whose contents break a type invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad run configuration: budgets, counts, point sets.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IntegratorError : public std::runtime_error {
 public:
  IntegratorError(const std::string& what, double t, double dt)
      : std::runtime_error(what + " (t=" + std::to_string(t) + ", dt=" + std::to_string(dt) + ")"),
        t_(t),
        dt_(dt) {}
  double t() const { return t_; }
  double dt() const { return dt_; }

 private:
  double t_;
  double dt_;
};

// Transition matrix fails detailed balance w.r.t. the target it was built for.
class ReversibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical bookkeeping broke an internal identity (e.g. negative holding mass).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace qamc
