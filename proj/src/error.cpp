#include "blindeval/error.hpp"

#include <fmt/format.h>

namespace blindeval {

namespace {

std::string describe(std::size_t row, const std::string& column,
                     const std::string& message) {
  if (row == 0) return message;
  if (column.empty()) return fmt::format("row {}: {}", row, message);
  return fmt::format("row {}, column '{}': {}", row, column, message);
}

}  // namespace

ParseError::ParseError(std::size_t row, std::string column,
                       const std::string& message)
    : Error(describe(row, column, message)), row_(row), column_(std::move(column)) {}

UnknownSegmentError::UnknownSegmentError(std::string segment_id)
    : Error(fmt::format("unknown segment id '{}'", segment_id)),
      segment_id_(std::move(segment_id)) {}

}  // namespace blindeval
