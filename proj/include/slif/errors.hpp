#pragma once

#include <stdexcept>
#include <string>

namespace slif {

// Shape/contract violations: caller passed non-conformable arguments.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// A forward op produced NaN/Inf. Carries the op name in the message.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& op, const std::string& detail)
      : std::runtime_error("numeric error in op '" + op + "': " + detail), op_(op) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

// Malformed input file. Carries a 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, long line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

// Structurally valid input that violates a declared constraint (id ranges etc.).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Bad configuration value or unknown key.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Bad on-disk artifact (snapshot, binary tensor file).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace slif
