#include <doctest.h>

#include <json.hpp>
#include <random>
#include <sstream>

#include "blindeval/corpus.hpp"
#include "blindeval/error.hpp"
#include "blindeval/text.hpp"

using namespace blindeval;

namespace {

AlignedDocument load(const std::string& tsv) {
  std::istringstream in(tsv);
  return corpus::load_aligned(in);
}

std::string error_of(const std::string& tsv) {
  try {
    load(tsv);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

const char* kHeader = "id\tsource\tht\tmt\n";

}  // namespace

TEST_CASE("three well-formed rows load in order") {
  const auto doc = load(std::string("# language_pair=de-en\n# domain=insurance\n") + kHeader +
                        "s1\tEins\tOne\tUno\n"
                        "s2\tZwei\tTwo\tDos\n"
                        "s3\tDrei\tThree\tTres\n");
  REQUIRE(doc.size() == 3);
  CHECK(doc.segments[0].id == "s1");
  CHECK(doc.segments[2].mt == "Tres");
  CHECK(doc.language_pair.str() == "de-en");
  REQUIRE(doc.metadata.size() == 1);
  CHECK(doc.metadata[0] == std::pair<std::string, std::string>{"domain", "insurance"});
  CHECK(corpus::validate(doc).empty());
}

TEST_CASE("empty mt cell names row and column") {
  const auto msg = error_of(std::string(kHeader) + "s1\ta\tb\tc\ns2\ta\tb\t\n");
  CHECK(msg.find("row 3") != std::string::npos);
  CHECK(msg.find("mt") != std::string::npos);
}

TEST_CASE("duplicate id is reported with the id") {
  const auto msg = error_of(std::string(kHeader) + "s7\ta\tb\tc\ns7\td\te\tf\n");
  CHECK(msg.find("s7") != std::string::npos);
  CHECK(msg.find("duplicate") != std::string::npos);
}

TEST_CASE("malformed rows are rejected with the row number") {
  CHECK(error_of(std::string(kHeader) + "s1\ta\tb\n").find("row 2") != std::string::npos);
  CHECK(error_of(std::string(kHeader) + "s1\ta\tb\tc\td\n").find("5") != std::string::npos);
  CHECK(error_of(std::string(kHeader) + "s1\ta\t\xff\tc\n").find("UTF-8") != std::string::npos);
  CHECK(error_of("id\tsrc\tht\tmt\n").find("header") != std::string::npos);
  CHECK(error_of("").find("header") != std::string::npos);
}

TEST_CASE("texts are NFC-normalized at load") {
  // "e" + combining acute accent becomes U+00E9.
  const auto doc = load(std::string(kHeader) + "s1\tCafe\xcc\x81\tcafe\xcc\x81\tcaf\xc3\xa9\n");
  CHECK(doc.segments[0].source == "Caf\xc3\xa9");
  CHECK(doc.segments[0].ht == doc.segments[0].mt);
}

TEST_CASE("escaped tabs and newlines survive") {
  const auto doc = load(std::string(kHeader) + "s1\ta\\tb\tline\\nbreak\tback\\\\slash\n");
  CHECK(doc.segments[0].source == "a\tb");
  CHECK(doc.segments[0].ht == "line\nbreak");
  CHECK(doc.segments[0].mt == "back\\slash");
}

TEST_CASE("validate") {
  AlignedDocument doc;
  doc.segments = {{"s1", "a", "b", "c"}, {"s2", "a", "b", "c"}, {"s3", "a", "b", "c"}};
  CHECK(corpus::validate(doc).empty());

  SUBCASE("one empty source is one finding") {
    doc.segments[1].source.clear();
    const auto findings = corpus::validate(doc);
    REQUIRE(findings.size() == 1);
    CHECK(findings[0].segment_id == "s2");
  }

  SUBCASE("two duplicate ids and one empty ht give three findings") {
    doc.segments = {{"s1", "a", "b", "c"},
                    {"s2", "a", "b", "c"},
                    {"s1", "a", "b", "c"},
                    {"s3", "a", "", "c"},
                    {"s2", "a", "b", "c"}};
    const auto findings = corpus::validate(doc);
    CHECK(findings.size() == 3);

    const auto text = corpus::format_findings_text(findings);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    CHECK(text.find("error\ts3\t") != std::string::npos);

    const auto json = nlohmann::json::parse(corpus::format_findings_json(findings));
    REQUIRE(json.is_array());
    CHECK(json.size() == 3);
    CHECK(json[0].contains("segment_id"));
  }
}

TEST_CASE("serialize then load is the identity") {
  std::mt19937_64 rng(11);
  const std::vector<std::string> pieces{"a", "\xc3\xa9", "\t", "\n", "\\", " ", "\xe4\xb8\xad",
                                        "\xd0\x96", "#", "x"};
  for (int trial = 0; trial < 200; ++trial) {
    AlignedDocument doc;
    doc.language_pair = LanguagePair::parse("de-fr");
    doc.metadata = {{"domain", "insurance"}};
    const auto text = [&] {
      std::string s;
      const auto len = 1 + rng() % 12;
      for (std::size_t i = 0; i < len; ++i) s += pieces[rng() % pieces.size()];
      return text::nfc(s);
    };
    const auto n = 1 + rng() % 8;
    for (std::size_t i = 0; i < n; ++i) {
      doc.segments.push_back({"id" + std::to_string(i), text(), text(), text()});
    }
    const auto once = corpus::serialize(doc);
    const auto back = load(once);
    CHECK(back == doc);
    CHECK(corpus::serialize(back) == once);
    CHECK(corpus::validate(back).empty());
  }
}

TEST_CASE("origin and language pair strings") {
  CHECK(to_string(Origin::HT) == "HT");
  CHECK(to_string(Origin::MT) == "MT");
  CHECK(parse_origin("MT") == Origin::MT);
  CHECK_FALSE(parse_origin("mt").has_value());
  CHECK(other(Origin::HT) == Origin::MT);
  CHECK(LanguagePair::parse("de_IT").str() == "de-it");
  CHECK(LanguagePair::parse("").empty());
}
