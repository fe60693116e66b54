#include <doctest.h>

#include <nlohmann/json.hpp>

#include "support.hpp"

using namespace blindeval;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

support::CliResult run(const std::vector<std::string>& args) { return support::cli(args); }

/// Prepared study for raters a and b over a 300-segment corpus.
struct Study {
  support::TempDir dir;
  fs::path corpus = dir / "corpus.tsv";
  fs::path out = dir / "study";

  Study() {
    support::write_text(corpus, support::corpus_tsv(support::make_corpus(300, "de-en")));
    const auto r = run({"prepare", "--corpus", corpus.string(), "--raters", "a,b", "--seed", "7",
                        "--out", out.string()});
    REQUIRE(r.code == cli::kOk);
  }
  fs::path key() const { return out / "key" / "blinding_key.tsv"; }
  fs::path sheet(const std::string& rater) const { return out / "prepared" / (rater + ".tsv"); }
};

std::size_t count(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = haystack.find(needle); p != std::string::npos; p = haystack.find(needle, p + 1)) ++n;
  return n;
}

/// Writes the fixture as a key and one JSONL file; returns the analyze args.
std::vector<std::string> fixture_args(const support::TempDir& dir, const support::PairCounts& counts) {
  const auto f = support::make_fixture(counts);
  support::write_text(dir / "key.tsv", support::key_tsv(f.key));
  support::write_text(dir / "records.jsonl", support::records_jsonl(f.records));
  return {"analyze", "--annotations", (dir / "records.jsonl").string(), "--key", (dir / "key.tsv").string()};
}

}  // namespace

TEST_CASE("prepare is deterministic and keeps the key apart") {
  Study s;
  const auto again = s.dir / "again";
  const auto r = run({"prepare", "--corpus", s.corpus.string(), "--raters", "a,b", "--seed", "7", "--out",
                      again.string()});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("prepared 2 document(s), 300 segments, seed=7") != std::string::npos);
  CHECK(support::read_tree(s.out) == support::read_tree(again));

  const auto manifest = json::parse(support::read_text(s.out / "manifest.json"));
  CHECK(manifest["seed"] == 7);
  CHECK(manifest["corpus"]["segments"] == 300);
  CHECK(manifest["key"] == "key/blinding_key.tsv");

  for (const auto& rater : {"a", "b"}) {
    const auto sheet = support::read_text(s.sheet(rater));
    CHECK(sheet.starts_with("id\tsource\ttarget\tpostedit\tterminology\tomission\ttypography\tcomment\n"));
    CHECK(count(sheet, "\n") == 151);
    CHECK(sheet.find("\tHT") == std::string::npos);
    CHECK(sheet.find("\tMT") == std::string::npos);
  }
  for (const auto& e : fs::recursive_directory_iterator(s.out / "prepared")) {
    CHECK(e.path().parent_path() != s.key().parent_path());
    CHECK_FALSE(support::read_text(e.path()).starts_with("# blinding key"));
  }
  CHECK(support::read_text(s.key()).starts_with("# blinding key"));

  const auto other = s.dir / "other";
  run({"prepare", "--corpus", s.corpus.string(), "--raters", "a,b", "--seed", "8", "--out", other.string()});
  CHECK(support::read_text(other / "prepared" / "a.tsv") != support::read_text(s.sheet("a")));
}

TEST_CASE("prepare rejects bad input") {
  support::TempDir dir;
  const auto corpus = dir / "short.tsv";
  support::write_text(corpus, support::corpus_tsv(support::make_corpus(299)));

  auto r = run({"prepare", "--corpus", corpus.string(), "--raters", "a,b", "--seed", "1", "--out",
                (dir / "out").string()});
  CHECK(r.code == cli::kValidation);
  CHECK(r.err.find("need 300, have 299") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out" / "key"));

  r = run({"prepare", "--corpus", corpus.string(), "--raters", "a,b", "--out", (dir / "out").string()});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("--seed") != std::string::npos);

  CHECK(run({"prepare", "--bogus"}).code == cli::kUsage);
  CHECK(run({}).code == cli::kUsage);

  support::write_text(corpus, "# language_pair = de-en\nid\tsource\tht\tmt\ns1\tQ\tsame\tsame\n");
  r = run({"prepare", "--corpus", corpus.string(), "--raters", "a", "--segments-per-rater", "2",
           "--seed", "1", "--out", (dir / "out").string()});
  CHECK(r.code == cli::kValidation);
}

TEST_CASE("ingest a filled spreadsheet") {
  Study s;
  const auto filled = support::fill_sheet(support::read_text(s.sheet("a")), [](std::size_t i, auto& cells) {
    cells[3] = cells[2] + (i % 3 ? "" : " edited");
    if (i < 30) cells[5] = "x";
  });
  support::write_text(s.dir / "a.tsv", filled);
  const auto out = s.dir / "a.jsonl";
  const auto r = run({"ingest", (s.dir / "a.tsv").string(), "--key", s.key().string(), "--out", out.string()});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("a: 150 completed, 0 incomplete, 150 assigned") != std::string::npos);
  CHECK(r.out.find("ingested 150 record(s), 150 completed") != std::string::npos);

  const auto records = read_jsonl_file(out);
  CHECK(records.size() == 150);
  CHECK(std::count_if(records.begin(), records.end(), [](const auto& x) { return x.flags.omission; }) == 30);
  CHECK(std::all_of(records.begin(), records.end(), [](const auto& x) { return x.rater_id == "a"; }));
  CHECK(support::read_text(out).find("origin") == std::string::npos);
}

TEST_CASE("ingest reports bad cells by row and column") {
  Study s;
  const auto filled = support::fill_sheet(support::read_text(s.sheet("a")), [](std::size_t i, auto& cells) {
    cells[3] = cells[2];
    if (i == 4) cells[5] = "maybe";
  });
  support::write_text(s.dir / "a.tsv", filled);
  const auto r = run({"ingest", (s.dir / "a.tsv").string(), "--out", (s.dir / "a.jsonl").string()});
  CHECK(r.code == cli::kValidation);
  CHECK(r.err.find("row 6") != std::string::npos);
  CHECK(r.err.find("omission") != std::string::npos);
  CHECK(r.err.find("maybe") != std::string::npos);
}

TEST_CASE("ingest merges spreadsheets with service exports") {
  Study s;
  const auto sheet = s.dir / "a.tsv";
  support::write_text(sheet, support::fill_sheet(support::read_text(s.sheet("a")), [](std::size_t i, auto& cells) {
    if (i < 3) cells[3] = "from sheet";
  }));
  const auto mtime = fs::file_time_type::clock::now() - std::chrono::hours(1);
  fs::last_write_time(sheet, mtime);
  const auto sheet_time = std::chrono::time_point_cast<std::chrono::milliseconds>(
      std::chrono::file_clock::to_sys(mtime));

  std::istringstream blank(support::read_text(s.sheet("a")));
  const auto rows = read_filled_tsv(blank, "a", std::nullopt);
  std::vector<AnnotationRecord> exported;
  for (std::size_t i = 0; i < 2; ++i) {
    AnnotationRecord r = rows[i];
    r.postedited = "from service";
    r.completed = true;
    // Row 0 was saved in the service after the spreadsheet, row 1 before it.
    r.submitted_at = sheet_time + (i == 0 ? std::chrono::minutes(5) : -std::chrono::minutes(5));
    exported.push_back(r);
  }
  support::write_text(s.dir / "export.jsonl", support::records_jsonl(exported));

  const auto out = s.dir / "merged.jsonl";
  const auto r = run({"ingest", sheet.string(), (s.dir / "export.jsonl").string(), "--key", s.key().string(),
                      "--out", out.string()});
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("a: 3 completed, 147 incomplete, 150 assigned") != std::string::npos);
  CHECK(r.out.find("b: 0 completed, 0 incomplete, 150 assigned") != std::string::npos);
  std::map<std::string, std::string> post;
  for (const auto& rec : read_jsonl_file(out)) post[rec.segment_id] = rec.postedited;
  CHECK(post[rows[0].segment_id] == "from service");
  CHECK(post[rows[1].segment_id] == "from sheet");
  CHECK(post[rows[2].segment_id] == "from sheet");
}

TEST_CASE("ingest rejects ids outside the key") {
  Study s;
  AnnotationRecord stray;
  stray.segment_id = "zz-404";
  stray.rater_id = "a";
  stray.postedited = "x";
  stray.completed = true;
  support::write_text(s.dir / "stray.jsonl", support::records_jsonl({stray}));
  const auto r = run({"ingest", (s.dir / "stray.jsonl").string(), "--key", s.key().string(), "--out",
                      (s.dir / "o.jsonl").string()});
  CHECK(r.code == cli::kValidation);
  CHECK(r.err.find("unknown segment id: zz-404") != std::string::npos);
}

TEST_CASE("analyze prints one line per comparison") {
  support::TempDir dir;
  auto args = fixture_args(dir, support::published_counts()[1]);
  const auto r = run(args);
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("omission HT 14/237 MT 12/238 p=0.693\n") != std::string::npos);
  CHECK(count(r.out, "\n") == 5);
}

TEST_CASE("analyze alpha moves the significance markers") {
  support::TempDir dir;
  auto args = fixture_args(dir, support::published_counts()[0]);
  const auto at_05 = run(args);
  args.insert(args.end(), {"--alpha", "0.01"});
  const auto at_01 = run(args);
  REQUIRE(at_05.code == cli::kOk);
  REQUIRE(at_01.code == cli::kOk);
  CHECK(count(at_05.out, " *\n") == 1);
  CHECK(at_05.out.find("med>0 HT 20/150 MT 37/150 p=0.018 *") != std::string::npos);
  CHECK(count(at_01.out, " *\n") == 0);

  args.back() = "1.5";
  CHECK(run(args).code == cli::kUsage);
}

TEST_CASE("analyze refuses bad inputs") {
  support::TempDir dir;
  auto args = fixture_args(dir, support::published_counts()[2]);

  auto no_key = args;
  no_key.resize(3);
  const auto r = run(no_key);
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("refusing to analyze blinded data") != std::string::npos);

  auto f = support::make_fixture(support::published_counts()[2]);
  f.records[3].segment_id = "ghost-1";
  f.records[9].segment_id = "ghost-2";
  support::write_text(dir / "records.jsonl", support::records_jsonl(f.records));
  const auto bad = run(args);
  CHECK(bad.code == cli::kValidation);
  CHECK(bad.err.find("unknown segment id: ghost-1\n") != std::string::npos);
  CHECK(bad.err.find("unknown segment id: ghost-2\n") != std::string::npos);

  auto thresholds = args;
  thresholds.insert(thresholds.end(), {"--thresholds", "5,0"});
  CHECK(run(thresholds).code == cli::kUsage);
}

TEST_CASE("report regenerates from results.json and checks the digest") {
  support::TempDir dir;
  auto args = fixture_args(dir, support::published_counts()[0]);
  args.insert(args.end(), {"--out", (dir / "first").string(), "--reproducible"});
  const auto r = run(args);
  REQUIRE(r.code == cli::kOk);
  for (const auto* name : {"table.csv", "results.json", "segments.tsv"}) CHECK(fs::exists(dir / "first" / name));

  const auto results = (dir / "first" / "results.json").string();
  const auto again = run({"report", "--results", results, "--out", (dir / "second").string(), "--reproducible"});
  REQUIRE(again.code == cli::kOk);
  CHECK(support::read_tree(dir / "first") == support::read_tree(dir / "second"));

  auto text = support::read_text(results);
  const auto at = text.find("Segment text number 3");
  REQUIRE(at != std::string::npos);
  text.replace(at, 21, "Segment text number 9");
  support::write_text(dir / "tampered.json", text);
  const auto tampered = run({"report", "--results", (dir / "tampered.json").string(), "--out",
                             (dir / "third").string()});
  CHECK(tampered.code == cli::kValidation);
  CHECK(tampered.err.find("digest mismatch") != std::string::npos);

  const auto csv_only = run({"report", "--results", results, "--out", (dir / "csv").string(), "--format", "csv"});
  CHECK(csv_only.code == cli::kOk);
  CHECK(fs::exists(dir / "csv" / "table.csv"));
  CHECK_FALSE(fs::exists(dir / "csv" / "results.json"));
}

TEST_CASE("serve never takes the key") {
  Study s;
  const auto journal = (s.dir / "journal.jsonl").string();
  auto r = run({"serve", "--prepared", (s.out / "prepared").string(), "--journal", journal, "--key",
                s.key().string()});
  CHECK(r.code == cli::kUsage);

  fs::copy_file(s.key(), s.out / "prepared" / "key.tsv");
  r = run({"serve", "--prepared", (s.out / "prepared").string(), "--journal", journal, "--port", "0"});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("blinding key") != std::string::npos);
}
