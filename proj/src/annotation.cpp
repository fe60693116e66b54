#include "blindeval/annotation.hpp"

#include <fmt/format.h>

#include <array>
#include <charconv>
#include <ctime>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "blindeval/error.hpp"
#include "blindeval/text.hpp"

namespace blindeval {

using nlohmann::json;

std::string format_timestamp(Timestamp t) {
  const auto secs = std::chrono::floor<std::chrono::seconds>(t);
  const auto ms = (t - secs).count();
  const std::time_t tt = secs.time_since_epoch().count();
  std::tm tm{};
  gmtime_r(&tt, &tm);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900,
                     tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  const auto* first = s.data() + pos;
  const auto [ptr, ec] = std::from_chars(first, first + len, out);
  return ec == std::errc() && ptr == first + len;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view s) {
  std::tm tm{};
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (s.size() < 20 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' ||
      s[16] != ':' || s.back() != 'Z') {
    return std::nullopt;
  }
  if (!read_int(s, 0, 4, year) || !read_int(s, 5, 2, month) || !read_int(s, 8, 2, day) ||
      !read_int(s, 11, 2, hour) || !read_int(s, 14, 2, minute) ||
      !read_int(s, 17, 2, second)) {
    return std::nullopt;
  }
  int millis = 0;
  if (s.size() > 20) {
    if (s[19] != '.') return std::nullopt;
    const auto frac = s.substr(20, s.size() - 21);
    if (frac.empty() || frac.size() > 9) return std::nullopt;
    int value = 0;
    if (!read_int(frac, 0, frac.size(), value)) return std::nullopt;
    // Truncate or pad to milliseconds.
    std::string digits(frac);
    digits.resize(3, '0');
    read_int(digits, 0, 3, millis);
  }
  tm.tm_year = year - 1900;
  tm.tm_mon = month - 1;
  tm.tm_mday = day;
  tm.tm_hour = hour;
  tm.tm_min = minute;
  tm.tm_sec = second;
  const std::time_t tt = timegm(&tm);
  return Timestamp(std::chrono::seconds(tt)) + std::chrono::milliseconds(millis);
}

std::optional<bool> parse_flag(std::string_view cell) {
  const auto v = text::to_lower_ascii(text::trim(cell));
  if (v.empty() || v == "0" || v == "no" || v == "false") return false;
  if (v == "1" || v == "x" || v == "yes" || v == "true") return true;
  return std::nullopt;
}

json to_json(const AnnotationRecord& r) {
  json j = {{"segment_id", r.segment_id},
            {"rater_id", r.rater_id},
            {"target", r.target},
            {"postedit", r.postedited},
            {"flags",
             {{"terminology", r.flags.terminology},
              {"omission", r.flags.omission},
              {"typography", r.flags.typography}}},
            {"comment", r.comment ? json(*r.comment) : json(nullptr)},
            {"completed", r.completed},
            {"submitted_at",
             r.submitted_at ? json(format_timestamp(*r.submitted_at)) : json(nullptr)}};
  return j;
}

AnnotationRecord record_from_json(const json& j) {
  if (!j.is_object()) throw ParseError(0, "", "annotation is not a JSON object");
  AnnotationRecord r;
  r.segment_id = j.at("segment_id").get<std::string>();
  r.rater_id = j.value("rater_id", std::string{});
  r.target = text::nfc(j.value("target", std::string{}));
  r.postedited = text::nfc(j.value("postedit", std::string{}));
  if (const auto it = j.find("flags"); it != j.end() && it->is_object()) {
    r.flags.terminology = it->value("terminology", false);
    r.flags.omission = it->value("omission", false);
    r.flags.typography = it->value("typography", false);
  }
  if (const auto it = j.find("comment"); it != j.end() && it->is_string()) {
    r.comment = it->get<std::string>();
  }
  r.completed = j.value("completed", false);
  if (const auto it = j.find("submitted_at"); it != j.end() && it->is_string()) {
    r.submitted_at = parse_timestamp(it->get<std::string>());
    if (!r.submitted_at) {
      throw ParseError(0, "submitted_at",
                       fmt::format("bad timestamp '{}'", it->get<std::string>()));
    }
  }
  return r;
}

void write_jsonl(const std::vector<AnnotationRecord>& records, std::ostream& out) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<AnnotationRecord> read_jsonl(std::istream& in) {
  std::vector<AnnotationRecord> records;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    try {
      records.push_back(record_from_json(json::parse(line)));
    } catch (const ParseError& e) {
      throw ParseError(row, e.column(), e.what());
    } catch (const json::exception& e) {
      throw ParseError(row, "", e.what());
    }
  }
  return records;
}

std::vector<AnnotationRecord> read_jsonl_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open annotations '{}'", path.string()));
  return read_jsonl(in);
}

std::vector<AnnotationRecord> read_filled_tsv(std::istream& in,
                                              const std::string& rater_id,
                                              std::optional<Timestamp> submitted_at) {
  static constexpr std::array<std::string_view, 8> kColumns = {
      "id",          "source",   "target",     "postedit",
      "terminology", "omission", "typography", "comment"};
  std::vector<AnnotationRecord> records;
  std::string line;
  std::size_t row = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (line.empty() || line.front() == '#') continue;
      const auto cols = text::split(line, '\t');
      if (cols.size() != kColumns.size() ||
          !std::equal(cols.begin(), cols.end(), kColumns.begin())) {
        throw ParseError(row, "", "header does not match the prepared-document schema");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    if (!text::is_valid_utf8(line)) throw ParseError(row, "", "invalid UTF-8");
    auto cells = text::split(line, '\t');
    // Spreadsheet exports often drop trailing empty cells.
    if (cells.size() < 3 || cells.size() > kColumns.size()) {
      throw ParseError(row, "",
                       fmt::format("expected {} columns, found {}", kColumns.size(),
                                   cells.size()));
    }
    cells.resize(kColumns.size(), std::string_view{});

    AnnotationRecord r;
    r.segment_id = text::unescape_cell(cells[0]);
    if (r.segment_id.empty()) throw ParseError(row, "id", "empty cell");
    r.rater_id = rater_id;
    r.target = text::nfc(text::unescape_cell(cells[2]));
    r.postedited = text::nfc(text::unescape_cell(cells[3]));
    std::array<bool*, 3> flags = {&r.flags.terminology, &r.flags.omission,
                                  &r.flags.typography};
    for (std::size_t k = 0; k < flags.size(); ++k) {
      const auto parsed = parse_flag(cells[4 + k]);
      if (!parsed) {
        throw ParseError(row, std::string(kColumns[4 + k]),
                         fmt::format("unrecognized flag value '{}'", cells[4 + k]));
      }
      *flags[k] = *parsed;
    }
    auto comment = text::unescape_cell(cells[7]);
    if (!comment.empty()) r.comment = std::move(comment);
    r.completed = !r.postedited.empty();
    if (r.completed) r.submitted_at = submitted_at;
    records.push_back(std::move(r));
  }
  if (!header_seen) throw ParseError(0, "", "missing header row");
  return records;
}

std::vector<AnnotationRecord> merge_records(std::vector<AnnotationRecord> records) {
  std::vector<AnnotationRecord> merged;
  std::unordered_map<std::string, std::size_t> slot;
  for (auto& r : records) {
    const auto [it, inserted] = slot.try_emplace(r.segment_id, merged.size());
    if (inserted) {
      merged.push_back(std::move(r));
      continue;
    }
    auto& current = merged[it->second];
    bool replace = false;
    if (r.completed != current.completed) {
      replace = r.completed;
    } else {
      replace = r.submitted_at.value_or(Timestamp{}) >=
                current.submitted_at.value_or(Timestamp{});
    }
    if (replace) current = std::move(r);
  }
  return merged;
}

}  // namespace blindeval
