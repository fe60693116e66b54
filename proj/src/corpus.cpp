#include "blindeval/corpus.hpp"

#include <fmt/format.h>

#include <array>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <sstream>
#include <unordered_set>

#include "blindeval/error.hpp"
#include "blindeval/text.hpp"

namespace blindeval {

std::string_view to_string(Origin origin) {
  return origin == Origin::HT ? "HT" : "MT";
}

std::optional<Origin> parse_origin(std::string_view text) {
  if (text == "HT") return Origin::HT;
  if (text == "MT") return Origin::MT;
  return std::nullopt;
}

Origin other(Origin origin) {
  return origin == Origin::HT ? Origin::MT : Origin::HT;
}

std::string LanguagePair::str() const {
  if (empty()) return {};
  return source + "-" + target;
}

LanguagePair LanguagePair::parse(std::string_view text) {
  const auto trimmed = text::trim(text);
  if (trimmed.empty()) return {};
  const auto dash = trimmed.find_first_of("-_/");
  if (dash == std::string::npos) {
    throw PreconditionError(
        fmt::format("language pair '{}' is not of the form src-tgt", trimmed));
  }
  return {text::to_lower_ascii(trimmed.substr(0, dash)),
          text::to_lower_ascii(trimmed.substr(dash + 1))};
}

namespace corpus {

namespace {

constexpr std::array<std::string_view, 4> kColumns = {"id", "source", "ht", "mt"};

}  // namespace

AlignedDocument load_aligned(std::istream& in) {
  AlignedDocument doc;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t row = 0;
  bool header_seen = false;

  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    if (line.empty()) continue;
    if (!header_seen) {
      if (line.front() == '#') {
        const auto body = text::trim(std::string_view(line).substr(1));
        const auto eq = body.find('=');
        if (eq == std::string::npos) continue;
        auto key = text::trim(body.substr(0, eq));
        auto value = text::trim(body.substr(eq + 1));
        if (key == "language_pair") {
          doc.language_pair = LanguagePair::parse(value);
        } else {
          doc.metadata.emplace_back(std::move(key), std::move(value));
        }
        continue;
      }
      const auto cols = text::split(line, '\t');
      if (cols.size() != kColumns.size() ||
          !std::equal(cols.begin(), cols.end(), kColumns.begin())) {
        throw ParseError(row, "", "expected header 'id\\tsource\\tht\\tmt'");
      }
      header_seen = true;
      continue;
    }

    if (!text::is_valid_utf8(line)) {
      throw ParseError(row, "", "invalid UTF-8");
    }
    const auto cells = text::split(line, '\t');
    if (cells.size() != kColumns.size()) {
      throw ParseError(row, "",
                       fmt::format("expected 4 columns, found {}", cells.size()));
    }
    std::array<std::string, 4> values;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      values[c] = text::nfc(text::unescape_cell(cells[c]));
      if (values[c].empty()) {
        throw ParseError(row, std::string(kColumns[c]), "empty cell");
      }
    }
    if (!seen.insert(values[0]).second) {
      throw ParseError(row, "id", fmt::format("duplicate id '{}'", values[0]));
    }
    doc.segments.push_back({std::move(values[0]), std::move(values[1]),
                            std::move(values[2]), std::move(values[3])});
  }
  if (!header_seen) throw ParseError(0, "", "missing header row");
  return doc;
}

AlignedDocument load_aligned_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open corpus '{}'", path.string()));
  return load_aligned(in);
}

void serialize(const AlignedDocument& doc, std::ostream& out) {
  if (!doc.language_pair.empty()) {
    out << "# language_pair=" << doc.language_pair.str() << '\n';
  }
  for (const auto& [key, value] : doc.metadata) {
    out << "# " << key << '=' << value << '\n';
  }
  out << "id\tsource\tht\tmt\n";
  for (const auto& s : doc.segments) {
    out << text::escape_cell(s.id) << '\t' << text::escape_cell(s.source) << '\t'
        << text::escape_cell(s.ht) << '\t' << text::escape_cell(s.mt) << '\n';
  }
}

std::string serialize(const AlignedDocument& doc) {
  std::ostringstream out;
  serialize(doc, out);
  return out.str();
}

std::vector<Finding> validate(const AlignedDocument& doc) {
  std::vector<Finding> findings;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < doc.segments.size(); ++i) {
    const auto& s = doc.segments[i];
    const std::string where = s.id.empty() ? fmt::format("#{}", i + 1) : s.id;
    if (s.id.empty()) {
      findings.push_back({"error", where, "empty id"});
    } else if (!seen.insert(s.id).second) {
      findings.push_back({"error", where, "duplicate id"});
    }
    if (s.source.empty()) findings.push_back({"error", where, "empty source"});
    if (s.ht.empty()) findings.push_back({"error", where, "empty ht"});
    if (s.mt.empty()) findings.push_back({"error", where, "empty mt"});
  }
  return findings;
}

std::string format_findings_text(const std::vector<Finding>& findings) {
  std::string out;
  for (const auto& f : findings) {
    out += fmt::format("{}\t{}\t{}\n", f.severity, f.segment_id, f.message);
  }
  return out;
}

std::string format_findings_json(const std::vector<Finding>& findings) {
  auto arr = nlohmann::json::array();
  for (const auto& f : findings) {
    arr.push_back({{"severity", f.severity},
                   {"segment_id", f.segment_id},
                   {"message", f.message}});
  }
  return arr.dump();
}

}  // namespace corpus
}  // namespace blindeval
