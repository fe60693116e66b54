#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blindeval/corpus.hpp"

namespace blindeval {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// ISO-8601 UTC with millisecond precision, e.g. 2021-03-01T09:30:00.000Z.
std::string format_timestamp(Timestamp t);
/// Accepts YYYY-MM-DDTHH:MM:SS[.fff]Z.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Presence indicators only; the number of errors is not recorded.
struct ErrorFlags {
  bool terminology = false;
  bool omission = false;
  bool typography = false;

  friend bool operator==(const ErrorFlags&, const ErrorFlags&) = default;
};

/// Spreadsheet flag cells: empty, "0", "no", "false" are absent; "1", "x",
/// "X", "yes", "true" are present. Anything else is rejected.
std::optional<bool> parse_flag(std::string_view cell);

struct AnnotationRecord {
  std::string segment_id;
  std::string rater_id;
  /// The pre-translation shown to the rater.
  std::string target;
  std::string postedited;
  ErrorFlags flags;
  std::optional<std::string> comment;
  bool completed = false;
  std::optional<Timestamp> submitted_at;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

nlohmann::json to_json(const AnnotationRecord& record);
AnnotationRecord record_from_json(const nlohmann::json& j);

void write_jsonl(const std::vector<AnnotationRecord>& records, std::ostream& out);
std::vector<AnnotationRecord> read_jsonl(std::istream& in);
std::vector<AnnotationRecord> read_jsonl_file(const std::filesystem::path& path);

/// Reads a filled prepared-document spreadsheet. A row counts as submitted
/// when its postedit cell is nonempty; rows without one become incomplete
/// records. `submitted_at` is stamped on every submitted row.
std::vector<AnnotationRecord> read_filled_tsv(std::istream& in,
                                              const std::string& rater_id,
                                              std::optional<Timestamp> submitted_at);

/// Keeps one record per segment id: completed beats incomplete, then the
/// later timestamp wins, then the later input position. Output keeps the
/// order in which segment ids were first seen.
std::vector<AnnotationRecord> merge_records(std::vector<AnnotationRecord> records);

/// A record joined with its origin after unblinding.
struct EvalRecord {
  AnnotationRecord annotation;
  Origin origin = Origin::HT;
};

struct RaterCompletion {
  std::string rater_id;
  std::size_t assigned = 0;
  std::size_t completed = 0;
  bool excluded = false;
};

struct EvalDataset {
  LanguagePair language_pair;
  /// Seed of the blinding key the records were joined with.
  std::optional<std::uint64_t> seed;
  std::vector<EvalRecord> records;
  std::size_t n_ht = 0;
  std::size_t n_mt = 0;
  std::vector<RaterCompletion> completion;

  std::size_t n(Origin origin) const { return origin == Origin::HT ? n_ht : n_mt; }
  std::size_t size() const { return records.size(); }
};

}  // namespace blindeval
