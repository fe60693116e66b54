#pragma once

#include <fmt/format.h>
#include <stdlib.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "blindeval/annotation.hpp"
#include "blindeval/cli.hpp"
#include "blindeval/corpus.hpp"
#include "blindeval/interleaver.hpp"

namespace support {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "blindeval-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Every regular file under `dir`, concatenated in path order.
inline std::string read_tree(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += fs::relative(f, dir).string() + "\n" + read_text(f);
  return all;
}

/// Segments s001..sNNN with distinguishable HT and MT texts.
inline blindeval::AlignedDocument make_corpus(std::size_t n, std::string pair = "de-en") {
  blindeval::AlignedDocument doc;
  doc.language_pair = blindeval::LanguagePair::parse(pair);
  for (std::size_t i = 1; i <= n; ++i) {
    doc.segments.push_back({fmt::format("s{:03}", i), fmt::format("Quelle Satz {}.", i),
                            fmt::format("Human sentence {}.", i),
                            fmt::format("Machine sentence {}.", i)});
  }
  return doc;
}

inline std::string corpus_tsv(const blindeval::AlignedDocument& doc) {
  std::string out = fmt::format("# language_pair = {}\nid\tsource\tht\tmt\n", doc.language_pair.str());
  for (const auto& s : doc.segments) out += fmt::format("{}\t{}\t{}\t{}\n", s.id, s.source, s.ht, s.mt);
  return out;
}

/// Rewrites every data row of a prepared spreadsheet. `fill` gets the 0-based
/// row index and the eight cells.
template <typename Fill>
std::string fill_sheet(const std::string& sheet, Fill fill) {
  std::istringstream in(sheet);
  std::string out, line;
  std::getline(in, line);
  out += line + "\n";
  for (std::size_t i = 0; std::getline(in, line); ++i) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
      cells.push_back(line.substr(start, tab - start));
    }
    cells.push_back(line.substr(start));
    cells.resize(8);
    fill(i, cells);
    for (std::size_t c = 0; c < cells.size(); ++c) out += (c ? "\t" : "") + cells[c];
    out += "\n";
  }
  return out;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

inline CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = blindeval::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Counts for one origin in one column of the published counts.
struct OriginCounts {
  std::size_t n;
  std::size_t terminology;
  std::size_t omission;
  std::size_t typography;
  std::size_t med_gt_0;
  std::size_t med_gt_5;
};

struct PairCounts {
  std::string language_pair;
  OriginCounts ht;
  OriginCounts mt;
};

/// Published HT and MT counts for the three language pairs.
inline const std::vector<PairCounts>& published_counts() {
  static const std::vector<PairCounts> rows{
      {"de-en", {150, 8, 1, 3, 20, 12}, {150, 15, 5, 4, 37, 19}},
      {"de-fr", {237, 27, 14, 5, 67, 53}, {238, 39, 12, 3, 90, 75}},
      {"de-it", {244, 18, 4, 8, 65, 30}, {248, 19, 1, 6, 50, 27}},
  };
  return rows;
}

struct Fixture {
  std::vector<blindeval::AnnotationRecord> records;
  blindeval::BlindingKey key;
};

/// Completed records reproducing the given counts. MED>5 segments get 8
/// appended characters, the remaining MED>0 ones 2, the rest none. Flags are
/// set on the first k records of each origin. HT and MT records alternate so
/// ids do not reveal origin by position.
inline Fixture make_fixture(const PairCounts& counts, std::uint64_t seed = 1) {
  using namespace blindeval;
  Fixture f;
  f.key = BlindingKey(seed, LanguagePair::parse(counts.language_pair), BalanceScope::whole_document);
  const auto build = [](const OriginCounts& c, std::size_t i) {
    AnnotationRecord r;
    r.target = fmt::format("Segment text number {}", i);
    const std::size_t appended = i < c.med_gt_5 ? 8 : i < c.med_gt_0 ? 2 : 0;
    r.postedited = r.target + std::string(appended, 'x');
    r.flags.terminology = i < c.terminology;
    r.flags.omission = i < c.omission;
    r.flags.typography = i < c.typography;
    r.completed = true;
    r.submitted_at = Timestamp(std::chrono::milliseconds(1'600'000'000'000));
    return r;
  };
  std::size_t next_id = 1;
  std::size_t h = 0, m = 0;
  while (h < counts.ht.n || m < counts.mt.n) {
    for (const Origin o : {Origin::HT, Origin::MT}) {
      auto& i = o == Origin::HT ? h : m;
      const auto& c = o == Origin::HT ? counts.ht : counts.mt;
      if (i >= c.n) continue;
      auto r = build(c, i++);
      r.segment_id = fmt::format("seg{:04}", next_id++);
      r.rater_id = fmt::format("r{}", (next_id / 150) + 1);
      f.key.add({r.segment_id, o, r.rater_id});
      f.records.push_back(std::move(r));
    }
  }
  return f;
}

inline std::string key_tsv(const blindeval::BlindingKey& key) {
  std::ostringstream ss;
  blindeval::interleaver::write_key_tsv(key, ss);
  return ss.str();
}

inline std::string records_jsonl(const std::vector<blindeval::AnnotationRecord>& records) {
  std::ostringstream ss;
  blindeval::write_jsonl(records, ss);
  return ss.str();
}

}  // namespace support
