#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pucl {

// Caller passed a value outside an operation's domain.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A structural invariant of an input object is violated (unnormalized
// embeddings, stale forward tape, incongruent gradient shapes, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ZeroRowError : public std::domain_error {
 public:
  explicit ZeroRowError(std::size_t row)
      : std::domain_error("row " + std::to_string(row) + " has zero L2 norm"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace pucl
