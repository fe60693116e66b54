#include <doctest.h>

#include <map>
#include <sstream>

#include "blindeval/error.hpp"
#include "blindeval/interleaver.hpp"
#include "blindeval/text.hpp"
#include "support.hpp"

using namespace blindeval;
namespace il = blindeval::interleaver;

namespace {

PreparationConfig config(std::uint64_t seed, std::vector<std::string> raters, std::size_t per) {
  PreparationConfig cfg;
  cfg.seed = seed;
  cfg.raters = std::move(raters);
  cfg.segments_per_rater = per;
  return cfg;
}

il::Prepared prepare(const AlignedDocument& doc, const PreparationConfig& cfg) {
  return il::interleave(doc, il::partition_sections(doc, cfg), cfg);
}

std::string prepared_bytes(const PreparedDocument& d) {
  std::ostringstream ss;
  il::write_prepared_tsv(d, ss);
  return ss.str();
}

}  // namespace

TEST_CASE("partition_sections") {
  SUBCASE("300 segments, two raters of 150") {
    const auto s = il::partition_sections(support::make_corpus(300), config(1, {"a", "b"}, 150));
    REQUIRE(s.size() == 2);
    CHECK(s[0] == RaterSection{"a", 0, 150});
    CHECK(s[1] == RaterSection{"b", 150, 150});
  }
  SUBCASE("one rater takes the whole document") {
    const auto s = il::partition_sections(support::make_corpus(150), config(1, {"a"}, 150));
    REQUIRE(s.size() == 1);
    CHECK(s[0] == RaterSection{"a", 0, 150});
  }
  SUBCASE("too short reports need and have") {
    CHECK_THROWS_WITH_AS(
        il::partition_sections(support::make_corpus(299), config(1, {"a", "b"}, 150)),
        doctest::Contains("need 300, have 299"), PreconditionError);
  }
  SUBCASE("config invariants") {
    CHECK_THROWS_AS(config(1, {}, 150).check(), PreconditionError);
    CHECK_THROWS_AS(config(1, {"a", "a"}, 150).check(), PreconditionError);
    CHECK_THROWS_AS(config(1, {"a"}, 0).check(), PreconditionError);
  }
}

TEST_CASE("six-segment section always splits 3/3") {
  const auto doc = support::make_corpus(6);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto p = prepare(doc, config(seed, {"a"}, 6));
    REQUIRE(p.key.count(Origin::HT) == 3);
    REQUIRE(p.key.count(Origin::MT) == 3);
  }
}

TEST_CASE("seven-segment section splits 4/3 or 3/4 and both occur") {
  const auto doc = support::make_corpus(7);
  std::map<std::size_t, int> ht_counts;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto p = prepare(doc, config(seed, {"a"}, 7));
    const auto ht = p.key.count(Origin::HT);
    REQUIRE((ht == 3 || ht == 4));
    ++ht_counts[ht];
  }
  CHECK(ht_counts[3] > 0);
  CHECK(ht_counts[4] > 0);
}

TEST_CASE("balance holds per section and for the whole document") {
  const auto doc = support::make_corpus(35);
  auto cfg = config(3, {"a", "b", "c"}, 11);
  const auto per = prepare(doc, cfg);
  for (const auto& d : per.documents) {
    std::size_t ht = 0;
    for (const auto& row : d.rows) ht += per.key.find(row.segment_id)->origin == Origin::HT;
    CHECK((ht == 5 || ht == 6));
  }
  cfg.balance_scope = BalanceScope::whole_document;
  cfg.segments_per_rater = 10;
  const auto whole = prepare(doc, cfg);
  CHECK(whole.key.count(Origin::HT) == 15);
  CHECK(whole.key.count(Origin::MT) == 15);
}

TEST_CASE("same inputs give identical output") {
  const auto doc = support::make_corpus(300);
  const auto cfg = config(42, {"en-1", "en-2"}, 150);
  const auto a = prepare(doc, cfg);
  const auto b = prepare(doc, cfg);
  CHECK(a.key == b.key);
  REQUIRE(a.documents.size() == b.documents.size());
  for (std::size_t i = 0; i < a.documents.size(); ++i) {
    CHECK(prepared_bytes(a.documents[i]) == prepared_bytes(b.documents[i]));
  }
  CHECK_FALSE(prepare(doc, config(43, {"en-1", "en-2"}, 150)).key == a.key);
}

TEST_CASE("per-segment origin frequency is near one half") {
  const auto doc = support::make_corpus(10);
  std::vector<int> ht(10, 0);
  const int seeds = 10'000;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto p = prepare(doc, config(static_cast<std::uint64_t>(seed), {"a"}, 10));
    for (std::size_t i = 0; i < 10; ++i) ht[i] += p.key.entries()[i].origin == Origin::HT;
  }
  for (std::size_t i = 0; i < 10; ++i) {
    CAPTURE(i);
    CHECK(std::abs(ht[i] / double(seeds) - 0.5) <= 0.05);
  }
}

TEST_CASE("prepared documents carry no origin data") {
  const auto doc = support::make_corpus(300);
  const auto p = prepare(doc, config(7, {"a", "b"}, 150));
  for (const auto& d : p.documents) {
    const auto bytes = prepared_bytes(d);
    std::istringstream in(bytes);
    std::string line;
    std::getline(in, line);
    CHECK(line == "id\tsource\ttarget\tpostedit\tterminology\tomission\ttypography\tcomment");
    while (std::getline(in, line)) {
      for (const auto cell : text::split(line, '\t')) {
        CHECK(cell != "HT");
        CHECK(cell != "MT");
      }
    }
    CHECK(bytes.find("origin") == std::string::npos);
  }
}

TEST_CASE("unblind restores every origin") {
  const auto doc = support::make_corpus(300);
  const auto p = prepare(doc, config(9, {"a", "b"}, 150));
  std::vector<AnnotationRecord> records;
  for (const auto& d : p.documents) {
    for (const auto& row : d.rows) {
      AnnotationRecord r;
      r.segment_id = row.segment_id;
      r.rater_id = d.rater_id;
      r.target = row.target;
      r.postedited = row.target;
      r.completed = true;
      records.push_back(r);
    }
  }
  const auto ds = il::unblind(records, p.key);
  CHECK(ds.size() == 300);
  CHECK(ds.n_ht + ds.n_mt == 300);
  CHECK(ds.seed == 9u);
  std::map<std::string, const AlignedSegment*> by_id;
  for (const auto& s : doc.segments) by_id[s.id] = &s;
  for (const auto& r : ds.records) {
    CHECK(r.annotation.target == by_id.at(r.annotation.segment_id)->translation(r.origin));
  }
}

TEST_CASE("unblind errors") {
  BlindingKey key(1, LanguagePair::parse("de-en"), BalanceScope::per_section);
  key.add({"s3", Origin::HT, "a"});
  AnnotationRecord r;
  r.segment_id = "s3";
  r.rater_id = "a";
  r.completed = true;
  const auto ds = il::unblind({r}, key);
  REQUIRE(ds.size() == 1);
  CHECK(ds.records[0].origin == Origin::HT);

  r.segment_id = "s4";
  CHECK_THROWS_WITH_AS(il::unblind({r}, key), doctest::Contains("s4"), UnknownSegmentError);
  r.segment_id = "s3";
  r.rater_id = "b";
  CHECK_THROWS_AS(il::unblind({r}, key), PreconditionError);
  CHECK_THROWS_AS(key.add({"s3", Origin::MT, "a"}), PreconditionError);
}

TEST_CASE("475 completed records unblind to 237 HT and 238 MT") {
  const auto& de_fr = support::published_counts()[1];
  const auto f = support::make_fixture(de_fr);
  const auto ds = il::unblind(f.records, f.key);
  CHECK(ds.size() == 475);
  CHECK(ds.n_ht == 237);
  CHECK(ds.n_mt == 238);
}

TEST_CASE("key and prepared files round-trip") {
  const auto doc = support::make_corpus(20, "de-it");
  const auto p = prepare(doc, config(123456789012345ULL, {"it-1", "it-2"}, 10));

  std::stringstream key_text;
  il::write_key_tsv(p.key, key_text);
  CHECK(key_text.str().rfind("# blinding key", 0) == 0);
  CHECK(key_text.str().find("# seed=123456789012345\n") != std::string::npos);
  const auto key = il::read_key_tsv(key_text);
  CHECK(key == p.key);

  const auto bytes = prepared_bytes(p.documents[1]);
  std::istringstream in(bytes);
  CHECK(il::read_prepared_tsv(in, "it-2") == p.documents[1]);

  std::istringstream no_seed("id\torigin\trater\ns1\tHT\ta\n");
  CHECK_THROWS_AS(il::read_key_tsv(no_seed), Error);
}
