#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace blindeval {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based row (0 when not row-specific)
/// and the column name when one applies.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& message);

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A segment id was not found where it was required.
class UnknownSegmentError : public Error {
 public:
  explicit UnknownSegmentError(std::string segment_id);
  const std::string& segment_id() const noexcept { return segment_id_; }

 private:
  std::string segment_id_;
};

}  // namespace blindeval
