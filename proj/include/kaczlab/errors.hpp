#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace kaczlab {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed or non-finite input data, mismatched dimensions.
class InputError : public Error {
public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

// A row with zero Euclidean norm reached a Kaczmarz projection.
class ZeroRowError : public Error {
public:
  static constexpr std::size_t unknown_row = std::numeric_limits<std::size_t>::max();

  explicit ZeroRowError(std::size_t row)
      : Error(row == unknown_row ? std::string("zero row in projection")
                                 : "row " + std::to_string(row) + " has zero norm"),
        row_(row) {}

  std::size_t row() const noexcept { return row_; }

private:
  std::size_t row_;
};

// b is not in Range(A) to the configured tolerance.
class ConsistencyError : public Error {
public:
  explicit ConsistencyError(double residual)
      : Error("linear system is inconsistent: ||A A^+ b - b|| = " + std::to_string(residual)),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

// Exhaustive enumeration requested beyond the permitted size.
class CapacityError : public Error {
public:
  using Error::Error;
};

// Operation called with data it cannot use (e.g. a report without traces).
class UsageError : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  // 1-based line of the offending input, 0 when not tied to a line.
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace kaczlab
