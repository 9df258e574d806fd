#include <algorithm>
#include <fstream>
#include <random>
#include <string>

#include "doctest.h"
#include "rla/csv.hpp"
#include "rla/ingest.hpp"
#include "rla/zip_reader.hpp"
#include "test_support.hpp"

using namespace rla;
using rla::testing::fixture;

namespace {

const CardRecord& find(const CvrParse& parse, const std::string& id) {
  auto it = std::find_if(parse.records.begin(), parse.records.end(), [&](const CardRecord& c) { return c.id == id; });
  REQUIRE(it != parse.records.end());
  return *it;
}

/// Byte-level mutations: flips, inserts, deletes, truncation, splices.
std::string mutate(const std::string& seed, std::mt19937_64& rng) {
  std::string s = seed;
  std::uniform_int_distribution<int> op(0, 5);
  std::uniform_int_distribution<int> byte(0, 255);
  const int edits = 1 + static_cast<int>(rng() % 8);
  for (int e = 0; e < edits; ++e) {
    const std::size_t pos = s.empty() ? 0 : rng() % s.size();
    switch (op(rng)) {
      case 0:
        if (!s.empty()) s[pos] = static_cast<char>(byte(rng));
        break;
      case 1: s.insert(pos, 1, static_cast<char>(byte(rng))); break;
      case 2:
        if (!s.empty()) s.erase(pos, 1 + rng() % 4);
        break;
      case 3: s.resize(pos); break;
      case 4: {
        const std::size_t from = seed.empty() ? 0 : rng() % seed.size();
        s.insert(pos, seed.substr(from, rng() % 32));
        break;
      }
      default: {
        static const char* tokens[] = {"{", "}", "[", "]", "\"", ",", ":", "null", "-1", "1e999", "<", ">", "</Cvr>", "\n"};
        s.insert(pos, tokens[rng() % std::size(tokens)]);
      }
    }
  }
  return s;
}

std::string random_bytes(std::mt19937_64& rng) {
  std::string s(rng() % 256, '\0');
  for (auto& c : s) c = static_cast<char>(rng() & 0xff);
  return s;
}

/// Runs `parse` on mutated and random inputs; only ParseError or ZipError
/// may escape.
template <typename F>
void fuzz(const std::string& seed, int iterations, F parse) {
  std::mt19937_64 rng(0x5eed);
  int refused = 0;
  for (int i = 0; i < iterations; ++i) {
    const std::string input = (i % 10 == 0) ? random_bytes(rng) : mutate(seed, rng);
    try {
      parse(input);
    } catch (const ParseError&) {
      ++refused;
    } catch (const ZipError&) {
      ++refused;
    } catch (const std::exception& e) {
      FAIL("unexpected exception: " << e.what());
    }
  }
  CHECK(refused > 0);
}

}  // namespace

TEST_CASE("canonical records round-trip byte for byte") {
  const std::string text = read_file(fixture("cvrs_canonical.json"));
  const CvrParse parse = parse_canonical(text);
  REQUIRE(parse.records.size() == 5);
  CHECK(parse.report.rejections.empty());
  CHECK(parse.report.contests_seen == std::set<std::string>{"mayor", "prop", "rcv"});
  CHECK(serialize_canonical(parse.records) == text);
  CHECK(find(parse, "c-3").votes.at("mayor").empty());
  CHECK(find(parse, "c-4").votes.at("rcv").at("ben") == 3);
  CHECK(find(parse, "c-5").votes.at("mayor").size() == 2);
}

TEST_CASE("canonical parser rejects bad records individually") {
  const CvrParse parse = parse_canonical(R"([
    {"id": "a", "contests": {"x": {"p": 1}}},
    {"contests": {}},
    {"id": "b", "contests": {"x": {"p": "one"}}},
    {"id": "a", "contests": {}}
  ])");
  CHECK(parse.records.size() == 2);
  CHECK(parse.report.rejections.size() == 2);
  CHECK(parse.report.duplicate_ids == std::vector<std::string>{"a"});
  CHECK_THROWS_AS(parse_canonical("{\"nothing\": 1}"), ParseError);
  CHECK_THROWS_AS(parse_canonical("[1, 2"), ParseError);
}

TEST_CASE("duplicate ids across files are refused") {
  rla::testing::TempDir dir("dups");
  const auto a = dir / "a.json";
  const auto b = dir / "b.json";
  {
    std::ofstream(a) << R"([{"id": "x", "contests": {}}])";
    std::ofstream(b) << R"([{"id": "x", "contests": {}}])";
  }
  CHECK_THROWS_AS(parse_cvrs(CvrFormat::canonical, {a, b}), ParseError);
  CHECK(parse_cvrs(CvrFormat::canonical, a).records.size() == 1);
}

TEST_CASE("hart archive: good members parsed, truncated member rejected") {
  const CvrParse parse = parse_cvrs(CvrFormat::hart_zip_xml, fixture("hart_cvrs.zip"));
  REQUIRE(parse.records.size() == 3);
  CHECK(find(parse, "h-1").votes.at("mayor") == Marks{{"ann", 1}});
  CHECK(find(parse, "h-1").votes.at("prop") == Marks{{"yes", 1}});
  CHECK(find(parse, "h-2").votes.at("mayor") == Marks{{"ben", 1}});
  CHECK(find(parse, "h-3").votes.at("rcv") == Marks{{"ann", 2}, {"ben", 1}});
  REQUIRE(parse.report.rejections.size() == 1);
  CHECK(parse.report.rejections[0].location.find("h-4.xml") != std::string::npos);
}

TEST_CASE("hart xml without an id is refused") {
  CHECK_THROWS(parse_hart_xml("<Cvr><Contests/></Cvr>"));
  const CardRecord card =
      parse_hart_xml("<Cvr><BatchNumber>7</BatchNumber><BatchSequence>3</BatchSequence><Contests/></Cvr>");
  CHECK(card.id == "7-3");
}

TEST_CASE("zip reader verifies checksums") {
  std::string bytes = read_file(fixture("hart_cvrs.zip"));
  {
    ZipReader zip(bytes);
    REQUIRE(zip.members().size() == 4);
    CHECK(zip.extract(zip.members()[0]).find("<ImprintedId>h-1</ImprintedId>") != std::string::npos);
  }
  // Corrupt one byte inside the stored member's data.
  std::size_t offset = 0;
  {
    ZipReader zip(bytes);
    const auto& m = zip.members()[3];
    CHECK(m.method == 0);
    offset = m.local_header_offset + 30 + m.name.size() + 10;
  }
  bytes[offset] = static_cast<char>(bytes[offset] ^ 0x20);
  ZipReader zip(bytes);
  CHECK_THROWS_AS(zip.extract(zip.members()[3]), ZipError);
  int ok = 0;
  int failed = 0;
  zip.for_each([&](const ZipReader::Member&, const std::string&) { ++ok; },
               [&](const ZipReader::Member&, const std::string&) { ++failed; });
  CHECK(ok == 3);
  CHECK(failed == 1);
  CHECK_THROWS_AS(ZipReader("not a zip"), ZipError);
}

TEST_CASE("dominion export") {
  const CvrParse parse = parse_cvrs(CvrFormat::dominion_export, fixture("dominion_export.json"));
  CHECK(parse.report.rejections.empty());
  REQUIRE(parse.records.size() == 5);
  CHECK(find(parse, "1-1-1").votes.at("10") == Marks{{"100", 1}});
  CHECK(find(parse, "1-1-1").votes.at("20") == Marks{{"200", 1}});
  // The modified body replaces the original.
  CHECK(find(parse, "1-1-2").votes.at("10") == Marks{{"100", 1}});
  // Overvoted contests keep every mark.
  CHECK(find(parse, "1-2-1").votes.at("10") == Marks{{"100", 1}, {"101", 1}});
  // Multi-card sessions get per-card suffixes.
  CHECK(find(parse, "2-1-7-1").votes.at("30") == Marks{{"300", 1}, {"301", 2}});
  CHECK(find(parse, "2-1-7-2").votes.at("20") == Marks{{"201", 1}});
  CHECK_THROWS_AS(parse_dominion("{\"Version\": 1}"), ParseError);
}

TEST_CASE("manifest parsing") {
  const BallotManifest m = parse_manifest(fixture("manifest.csv"));
  REQUIRE(m.entries.size() == 2);
  CHECK(m.total_cards == 5);
  CHECK(m.entries[1].id_prefix == "d-");
  CHECK(m.entries[0].container == "BOX-1");

  CHECK_THROWS_AS(parse_manifest_text("container,tabulator,batch,card_count\nA,B,C,1,x\n"), ParseError);
  CHECK_THROWS_AS(parse_manifest_text("container,tabulator,batch,card_count,id_prefix\nA,B,C,-1,x\n"), ParseError);
  CHECK_THROWS_AS(parse_manifest_text("container,tabulator,batch,card_count,id_prefix\nA,B,C,1,x\nA,B,C,2,y\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_manifest_text("container,tabulator,batch,card_count,id_prefix\n"), ParseError);
  CHECK_THROWS_AS(parse_manifest_text("container,tabulator,batch,card_count,id_prefix\n\"A,B,C,1,x\n"), ParseError);

  const BallotManifest reordered =
      parse_manifest_text("id_prefix,card_count,batch,tabulator,container\r\n\"p,1\",4,B9,T,\"Box \"\"A\"\"\"\r\n");
  REQUIRE(reordered.entries.size() == 1);
  CHECK(reordered.entries[0].id_prefix == "p,1");
  CHECK(reordered.entries[0].container == "Box \"A\"");
  CHECK(reordered.total_cards == 4);
}

TEST_CASE("manual records") {
  const std::set<std::string> known = {"c-1", "c-2"};
  const CvrParse parse = parse_mvrs(fixture("mvrs.json"), &known);
  REQUIRE(parse.records.size() == 2);
  CHECK(find(parse, "c-2").not_found);
  CHECK(parse.report.rejections.size() == 1);
  CHECK(parse.report.rejections[0].reason.find("c-3") != std::string::npos);

  const CvrParse bad = parse_mvrs_text(R"([{"id": "c-1", "not_found": true, "contests": {"x": {"a": 1}}}])", nullptr);
  CHECK(bad.records.empty());
  CHECK(bad.report.rejections.size() == 1);

  const CvrParse phantom = parse_mvrs_text(R"({"mvrs": [{"id": "c-1", "contests": {}}]})", nullptr);
  CHECK(phantom.records.size() == 1);
}

TEST_CASE("raire assertions") {
  const auto entries = parse_raire(fixture("raire.json"));
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].type == RaireEntry::Type::neb);
  CHECK(entries[0].winner == "ann");
  CHECK(entries[0].loser == "cat");
  CHECK(entries[1].type == RaireEntry::Type::nen);
  CHECK(entries[1].continuing == std::vector<std::string>{"ann", "ben"});

  const auto wrapped = parse_raire_text(
      R"({"solution": {"Ok": {"assertions": [{"assertion": {"type": "NEB", "winner": 1, "loser": 2}}]}}})");
  REQUIRE(wrapped.size() == 1);
  CHECK(wrapped[0].winner == "1");
  CHECK_THROWS_AS(parse_raire_text(R"([{"type": "XYZ", "winner": "a", "loser": "b"}])"), ParseError);
  CHECK_THROWS_AS(parse_raire_text(R"({"other": []})"), ParseError);
}

TEST_CASE("csv splitting and quoting") {
  CHECK(split_csv_line("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(split_csv_line("\"a,b\",\"say \"\"hi\"\"\"") == std::vector<std::string>{"a,b", "say \"hi\""});
  CHECK(split_csv_line("x\r") == std::vector<std::string>{"x"});
  CHECK_THROWS_AS(split_csv_line("\"open"), std::invalid_argument);
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("q\"") == "\"q\"\"\"");
  for (const std::string v : {"plain", "a,b", "q\"x", " sp "}) CHECK(split_csv_line(csv_field(v))[0] == v);
}

TEST_CASE("parsers survive mutated and random input") {
  constexpr int kIterations = 5000;
  fuzz(read_file(fixture("cvrs_canonical.json")), kIterations, [](const std::string& s) { parse_canonical(s); });
  fuzz(read_file(fixture("mvrs.json")), kIterations, [](const std::string& s) {
    const std::set<std::string> known = {"c-1"};
    parse_mvrs_text(s, &known);
  });
  fuzz(read_file(fixture("dominion_export.json")), kIterations, [](const std::string& s) { parse_dominion(s); });
  fuzz(read_file(fixture("hart_cvrs.zip")), kIterations, [](const std::string& s) { parse_hart_zip(s); });
  fuzz(read_file(fixture("manifest.csv")), kIterations, [](const std::string& s) { parse_manifest_text(s); });
  fuzz(read_file(fixture("raire.json")), kIterations, [](const std::string& s) { parse_raire_text(s); });
}
