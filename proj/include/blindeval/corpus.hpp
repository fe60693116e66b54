#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace blindeval {

enum class Origin { HT, MT };

std::string_view to_string(Origin origin);
/// Parses the literal strings "HT" and "MT".
std::optional<Origin> parse_origin(std::string_view text);
Origin other(Origin origin);

struct LanguagePair {
  std::string source;
  std::string target;

  /// "de-en"; empty when both codes are empty.
  std::string str() const;
  static LanguagePair parse(std::string_view text);
  bool empty() const { return source.empty() && target.empty(); }
  friend bool operator==(const LanguagePair&, const LanguagePair&) = default;
};

struct AlignedSegment {
  std::string id;
  std::string source;
  std::string ht;
  std::string mt;

  const std::string& translation(Origin origin) const {
    return origin == Origin::HT ? ht : mt;
  }
  friend bool operator==(const AlignedSegment&, const AlignedSegment&) = default;
};

struct AlignedDocument {
  LanguagePair language_pair;
  std::vector<AlignedSegment> segments;
  /// Free-form key/value pairs in file order.
  std::vector<std::pair<std::string, std::string>> metadata;

  std::size_t size() const { return segments.size(); }
  friend bool operator==(const AlignedDocument&, const AlignedDocument&) = default;
};

namespace corpus {

/// Reads the tab-separated corpus format:
///
///   # language_pair=de-en        (optional comment lines, key=value)
///   id<TAB>source<TAB>ht<TAB>mt
///   s1<TAB>...<TAB>...<TAB>...
///
/// Cells use the escape_cell convention. All texts are NFC-normalized.
/// Throws ParseError naming the row (and column where applicable).
AlignedDocument load_aligned(std::istream& in);
AlignedDocument load_aligned_file(const std::filesystem::path& path);

void serialize(const AlignedDocument& doc, std::ostream& out);
std::string serialize(const AlignedDocument& doc);

struct Finding {
  std::string severity;
  std::string segment_id;
  std::string message;
  friend bool operator==(const Finding&, const Finding&) = default;
};

/// One finding per invariant violation; empty when the document is valid.
std::vector<Finding> validate(const AlignedDocument& doc);

/// `<severity>\t<segment-id>\t<message>` lines.
std::string format_findings_text(const std::vector<Finding>& findings);
std::string format_findings_json(const std::vector<Finding>& findings);

}  // namespace corpus
}  // namespace blindeval
