#include "blindeval/interleaver.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>

#include "blindeval/error.hpp"
#include "blindeval/random.hpp"
#include "blindeval/text.hpp"

namespace blindeval {

std::string_view to_string(BalanceScope scope) {
  return scope == BalanceScope::per_section ? "per_section" : "whole_document";
}

std::optional<BalanceScope> parse_balance_scope(std::string_view text) {
  if (text == "per_section") return BalanceScope::per_section;
  if (text == "whole_document") return BalanceScope::whole_document;
  return std::nullopt;
}

void PreparationConfig::check() const {
  if (segments_per_rater < 1) {
    throw PreconditionError("segments per rater must be at least 1");
  }
  if (raters.empty()) throw PreconditionError("at least one rater is required");
  std::set<std::string> unique;
  for (const auto& r : raters) {
    if (r.empty()) throw PreconditionError("rater ids must be nonempty");
    if (!unique.insert(r).second) {
      throw PreconditionError(fmt::format("duplicate rater id '{}'", r));
    }
  }
}

BlindingKey::BlindingKey(std::uint64_t seed, LanguagePair language_pair,
                         BalanceScope scope)
    : seed_(seed), language_pair_(std::move(language_pair)), scope_(scope) {}

void BlindingKey::add(KeyEntry entry) {
  const auto [it, inserted] = index_.try_emplace(entry.segment_id, entries_.size());
  if (!inserted) {
    throw PreconditionError(
        fmt::format("duplicate key entry for segment '{}'", entry.segment_id));
  }
  entries_.push_back(std::move(entry));
}

const KeyEntry* BlindingKey::find(const std::string& segment_id) const {
  const auto it = index_.find(segment_id);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

std::size_t BlindingKey::count(Origin origin) const {
  return static_cast<std::size_t>(std::count_if(
      entries_.begin(), entries_.end(), [&](const auto& e) { return e.origin == origin; }));
}

namespace interleaver {

namespace {

constexpr std::uint64_t kWholeDocumentStream = std::numeric_limits<std::uint64_t>::max();

std::vector<Origin> balanced_labels(std::size_t n, std::uint64_t seed,
                                    std::uint64_t stream) {
  SeededStream rng(seed, stream);
  std::size_t ht = n / 2;
  if (n % 2 == 1 && rng.below(2) == 0) ++ht;
  std::vector<Origin> labels(n, Origin::MT);
  std::fill_n(labels.begin(), ht, Origin::HT);
  rng.shuffle(std::span<Origin>(labels));
  return labels;
}

void check_sections(const AlignedDocument& doc, const std::vector<RaterSection>& sections) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::set<std::string> raters;
  for (const auto& s : sections) {
    if (s.start_index + s.count > doc.size()) {
      throw PreconditionError(fmt::format(
          "section for rater '{}' ends at {} but the document has {} segments",
          s.rater_id, s.start_index + s.count, doc.size()));
    }
    if (!raters.insert(s.rater_id).second) {
      throw PreconditionError(fmt::format("rater '{}' has two sections", s.rater_id));
    }
    ranges.emplace_back(s.start_index, s.start_index + s.count);
  }
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].first < ranges[i - 1].second) {
      throw PreconditionError("sections overlap");
    }
  }
}

}  // namespace

std::vector<RaterSection> partition_sections(const AlignedDocument& doc,
                                             const PreparationConfig& cfg) {
  cfg.check();
  const std::size_t required = cfg.raters.size() * cfg.segments_per_rater;
  if (required > doc.size()) {
    throw PreconditionError(
        fmt::format("document too short: need {}, have {}", required, doc.size()));
  }
  std::vector<RaterSection> sections;
  sections.reserve(cfg.raters.size());
  for (std::size_t i = 0; i < cfg.raters.size(); ++i) {
    sections.push_back({cfg.raters[i], i * cfg.segments_per_rater, cfg.segments_per_rater});
  }
  return sections;
}

Prepared interleave(const AlignedDocument& doc, const std::vector<RaterSection>& sections,
                    const PreparationConfig& cfg) {
  check_sections(doc, sections);

  std::vector<std::vector<Origin>> labels(sections.size());
  if (cfg.balance_scope == BalanceScope::per_section) {
    for (std::size_t s = 0; s < sections.size(); ++s) {
      labels[s] = balanced_labels(sections[s].count, cfg.seed, s);
    }
  } else {
    std::size_t total = 0;
    for (const auto& s : sections) total += s.count;
    const auto all = balanced_labels(total, cfg.seed, kWholeDocumentStream);
    auto it = all.begin();
    for (std::size_t s = 0; s < sections.size(); ++s) {
      labels[s].assign(it, it + static_cast<std::ptrdiff_t>(sections[s].count));
      it += static_cast<std::ptrdiff_t>(sections[s].count);
    }
  }

  Prepared out{{}, BlindingKey(cfg.seed, doc.language_pair, cfg.balance_scope)};
  out.documents.reserve(sections.size());
  for (std::size_t s = 0; s < sections.size(); ++s) {
    const auto& section = sections[s];
    PreparedDocument prepared{section.rater_id, {}};
    prepared.rows.reserve(section.count);
    for (std::size_t k = 0; k < section.count; ++k) {
      const auto& seg = doc.segments[section.start_index + k];
      const Origin origin = labels[s][k];
      prepared.rows.push_back({seg.id, seg.source, seg.translation(origin)});
      out.key.add({seg.id, origin, section.rater_id});
    }
    out.documents.push_back(std::move(prepared));
  }
  return out;
}

EvalDataset unblind(const std::vector<AnnotationRecord>& records, const BlindingKey& key,
                    const AlignedDocument* corpus) {
  std::unordered_map<std::string, const AlignedSegment*> by_id;
  if (corpus != nullptr) {
    for (const auto& seg : corpus->segments) by_id.emplace(seg.id, &seg);
  }

  EvalDataset ds;
  ds.language_pair = key.language_pair();
  ds.seed = key.seed();
  ds.records.reserve(records.size());
  for (const auto& r : records) {
    const KeyEntry* entry = key.find(r.segment_id);
    if (entry == nullptr) throw UnknownSegmentError(r.segment_id);
    if (!r.rater_id.empty() && r.rater_id != entry->rater_id) {
      throw PreconditionError(fmt::format(
          "segment '{}' was annotated by '{}' but assigned to '{}'", r.segment_id,
          r.rater_id, entry->rater_id));
    }
    EvalRecord joined{r, entry->origin};
    if (joined.annotation.rater_id.empty()) joined.annotation.rater_id = entry->rater_id;
    if (joined.annotation.target.empty()) {
      const auto it = by_id.find(r.segment_id);
      if (it != by_id.end()) joined.annotation.target = it->second->translation(entry->origin);
    }
    (entry->origin == Origin::HT ? ds.n_ht : ds.n_mt) += 1;
    ds.records.push_back(std::move(joined));
  }
  return ds;
}

void write_prepared_tsv(const PreparedDocument& doc, std::ostream& out) {
  out << "id\tsource\ttarget\tpostedit\tterminology\tomission\ttypography\tcomment\n";
  for (const auto& row : doc.rows) {
    out << text::escape_cell(row.segment_id) << '\t' << text::escape_cell(row.source)
        << '\t' << text::escape_cell(row.target) << "\t\t\t\t\t\n";
  }
}

PreparedDocument read_prepared_tsv(std::istream& in, std::string rater_id) {
  PreparedDocument doc{std::move(rater_id), {}};
  std::string line;
  std::size_t row = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line.front() == '#') continue;
      if (!line.starts_with("id\tsource\ttarget\tpostedit\t")) {
        throw ParseError(row, "", "header does not match the prepared-document schema");
      }
      header_seen = true;
      continue;
    }
    if (!text::is_valid_utf8(line)) throw ParseError(row, "", "invalid UTF-8");
    const auto cells = text::split(line, '\t');
    if (cells.size() < 3) {
      throw ParseError(row, "", fmt::format("expected 8 columns, found {}", cells.size()));
    }
    doc.rows.push_back({text::unescape_cell(cells[0]), text::nfc(text::unescape_cell(cells[1])),
                        text::nfc(text::unescape_cell(cells[2]))});
  }
  if (!header_seen) throw ParseError(0, "", "missing header row");
  return doc;
}

void write_key_tsv(const BlindingKey& key, std::ostream& out) {
  out << "# blinding key: do not distribute to raters\n";
  out << "# seed=" << key.seed() << '\n';
  if (!key.language_pair().empty()) {
    out << "# language_pair=" << key.language_pair().str() << '\n';
  }
  out << "# balance_scope=" << to_string(key.balance_scope()) << '\n';
  out << "id\torigin\trater\n";
  for (const auto& e : key.entries()) {
    out << text::escape_cell(e.segment_id) << '\t' << to_string(e.origin) << '\t'
        << text::escape_cell(e.rater_id) << '\n';
  }
}

BlindingKey read_key_tsv(std::istream& in) {
  std::uint64_t seed = 0;
  bool have_seed = false;
  LanguagePair pair;
  BalanceScope scope = BalanceScope::per_section;
  std::vector<KeyEntry> entries;
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
        const auto k = text::trim(body.substr(0, eq));
        const auto v = text::trim(body.substr(eq + 1));
        if (k == "seed") {
          const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), seed);
          if (ec != std::errc() || ptr != v.data() + v.size()) {
            throw ParseError(row, "", fmt::format("bad seed '{}'", v));
          }
          have_seed = true;
        } else if (k == "language_pair") {
          pair = LanguagePair::parse(v);
        } else if (k == "balance_scope") {
          const auto parsed = parse_balance_scope(v);
          if (!parsed) throw ParseError(row, "", fmt::format("bad balance scope '{}'", v));
          scope = *parsed;
        }
        continue;
      }
      if (line != "id\torigin\trater") {
        throw ParseError(row, "", "expected header 'id\\torigin\\trater'");
      }
      header_seen = true;
      continue;
    }
    const auto cells = text::split(line, '\t');
    if (cells.size() != 3) {
      throw ParseError(row, "", fmt::format("expected 3 columns, found {}", cells.size()));
    }
    const auto origin = parse_origin(cells[1]);
    if (!origin) {
      throw ParseError(row, "origin", fmt::format("bad origin '{}'", cells[1]));
    }
    entries.push_back({text::unescape_cell(cells[0]), *origin, text::unescape_cell(cells[2])});
  }
  if (!header_seen) throw ParseError(0, "", "missing key header row");
  if (!have_seed) throw ParseError(0, "", "key has no seed header comment");
  BlindingKey key(seed, pair, scope);
  for (auto& e : entries) key.add(std::move(e));
  return key;
}

BlindingKey read_key_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open key '{}'", path.string()));
  return read_key_tsv(in);
}

}  // namespace interleaver
}  // namespace blindeval
