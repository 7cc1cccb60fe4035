#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgrad {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated an operation's contract (mismatched grids, bad axis, missing periods).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Input data does not satisfy a documented precondition (e.g. nonzero mean).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed external data: CSV shape, header, or node count.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Lexical or syntax error in an expression, with byte offset and 1-based line/column.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset, std::size_t line, std::size_t column)
      : Error(what + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
        offset_(offset), line_(line), column_(column) {}

  std::size_t offset() const noexcept { return offset_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t offset_;
  std::size_t line_;
  std::size_t column_;
};

/// Potential could not be evaluated (division by zero, sqrt of a negative, non-finite value).
/// `offset` points at the offending expression node when known; `node` carries the grid
/// multi-index when the failure happened inside a field evaluation.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what, std::size_t offset = npos,
                       std::vector<std::size_t> node = {})
      : Error(what), offset_(offset), node_(std::move(node)) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t offset() const noexcept { return offset_; }
  const std::vector<std::size_t>& node() const noexcept { return node_; }

 private:
  std::size_t offset_;
  std::vector<std::size_t> node_;
};

}  // namespace pgrad
