#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <set>

#include "dynlink/corpus.hpp"
#include "dynlink/error.hpp"
#include "dynlink/log.hpp"
#include "test_support.hpp"

using namespace dynlink;
using testing::TempDir;

namespace {

std::string join(const TokenSeq& t) {
    std::string s;
    for (const auto& w : t) s += (s.empty() ? "" : " ") + w;
    return s;
}

} // namespace

TEST_CASE("load_corpus on an empty file returns nothing") {
    TempDir dir;
    testing::write_file(dir / "c.jsonl", "");
    auto r = load_corpus(dir / "c.jsonl");
    CHECK(r.records.empty());
    CHECK(r.skipped == 0);
}

TEST_CASE("load_corpus skips a malformed date and keeps file order") {
    log::level() = log::Level::quiet;
    TempDir dir;
    testing::write_file(dir / "c.jsonl",
                        R"({"id":"a","date":"1999-03","abstract":"First text."})"
                        "\n"
                        R"({"id":"b","date":"19xx-03","abstract":"Bad date."})"
                        "\n"
                        R"({"id":"c","date":"1997-12-05","abstract":"Third."})"
                        "\n");
    auto r = load_corpus(dir / "c.jsonl");
    REQUIRE(r.records.size() == 2);
    CHECK(r.skipped == 1);
    CHECK(r.records[0].id == "a");
    CHECK(r.records[0].year == 1999);
    CHECK(r.records[0].month == 3);
    CHECK(r.records[1].id == "c");
    CHECK(r.records[1].year == 1997);
    CHECK(r.records[1].month == 12);
    log::level() = log::Level::warn;
}

TEST_CASE("load_corpus ignores blank lines and counts other malformed records") {
    log::level() = log::Level::quiet;
    TempDir dir;
    testing::write_file(dir / "c.jsonl",
                        "\n"
                        R"({"id":"a","date":"2001-13","abstract":"month 13"})"
                        "\n"
                        R"({"id":"b","date":"2001-01","abstract":"   "})"
                        "\n"
                        "not json\n"
                        R"({"id":"c","date":"2001-01"})"
                        "\n"
                        R"({"id":"d","date":"2001-01","abstract":"fine"})"
                        "\n");
    auto r = load_corpus(dir / "c.jsonl");
    CHECK(r.records.size() == 1);
    CHECK(r.skipped == 4);
    log::level() = log::Level::warn;
}

TEST_CASE("load_corpus on a missing file throws") {
    TempDir dir;
    CHECK_THROWS_AS(load_corpus(dir / "nope.jsonl"), Error);
}

TEST_CASE("normalize_text examples") {
    CHECK(normalize_text("").empty());
    CHECK(normalize_text("Entanglement Witnesses, revisited.") == TokenSeq{"entanglement", "witness", "revisited"});
    CHECK(normalize_text("spin-1/2 chains") == TokenSeq{"spin", "1/2", "chain"});
    CHECK(normalize_text("  Two   spaces\tand\nlines ") == TokenSeq{"two", "space", "and", "line"});
    CHECK(normalize_text("energy of 3.14 eV (approx.)") == TokenSeq{"energy", "of", "3.14", "ev", "approx"});
    CHECK(normalize_text("end. Start") == TokenSeq{"end", "start"});
}

TEST_CASE("singularize follows the suffix rules") {
    CHECK(singularize("qubits") == "qubit");
    CHECK(singularize("properties") == "property");
    CHECK(singularize("witnesses") == "witness");
    CHECK(singularize("class") == "class");
    CHECK(singularize("status") == "status");
    CHECK(singularize("basis") == "basis");
    CHECK(singularize("gas") == "gas");   // too short
    CHECK(singularize("ties") == "tie");  // "ies" rule needs more than four letters
    CHECK(singularize("1/2s") == "1/2s"); // only plain words are touched
}

TEST_CASE("normalize_text is idempotent on random text") {
    std::mt19937_64 rng(11);
    const std::string alphabet = "abcdefsiuy ABCSIU-/.,;:0123456789()'\"";
    for (int trial = 0; trial < 500; ++trial) {
        std::string raw;
        const auto len = rng() % 60;
        for (std::size_t i = 0; i < len; ++i) raw += alphabet[rng() % alphabet.size()];
        auto once = normalize_text(raw);
        CHECK_MESSAGE(normalize_text(join(once)) == once, raw);
        for (const auto& t : once) {
            CHECK(!t.empty());
            CHECK(t.find_first_of(" \t\n") == std::string::npos);
        }
    }
}

TEST_CASE("slice_by_year examples") {
    auto empty = slice_by_year({}, {1994, 1995});
    REQUIRE(empty.size() == 2);
    CHECK(empty.at(1994).empty());
    CHECK(empty.at(1995).empty());

    std::vector<AbstractRecord> recs{
        {"a", 2000, 1, "x"}, {"b", 2001, 1, "x"}, {"c", 2000, 5, "x"}, {"d", 2001, 2, "x"}, {"e", 2000, 9, "x"}};
    auto s = slice_by_year(recs, {2000, 2001});
    CHECK(s.at(2000).size() == 3);
    CHECK(s.at(2001).size() == 2);
    CHECK(s.at(2000)[1].id == "c");

    CHECK_THROWS_AS(slice_by_year(recs, {2001, 2000}), Error);
}

TEST_CASE("slice_by_year partitions in-range records") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<AbstractRecord> recs;
        const auto n = rng() % 40;
        for (std::size_t i = 0; i < n; ++i) {
            recs.push_back({std::to_string(i), 1990 + static_cast<int>(rng() % 10), 1, "t"});
        }
        auto s = slice_by_year(recs, {1990, 1999});
        std::size_t total = 0;
        std::set<std::string> ids;
        for (const auto& [year, slice] : s) {
            total += slice.size();
            for (const auto& r : slice) {
                CHECK(r.year == year);
                CHECK(ids.insert(r.id).second);
            }
        }
        CHECK(total == recs.size());
        CHECK(s.size() == 10);
    }
}

TEST_CASE("corpus_stats covers every year and writes the documented CSV") {
    std::vector<AbstractRecord> recs{{"a", 2000, 1, "Two words"}, {"b", 2002, 1, "three more words"}};
    auto stats = corpus_stats(recs, {2000, 2002});
    CHECK(stats.papers_per_year.size() == 3);
    CHECK(stats.papers_per_year.at(2001) == 0);
    CHECK(stats.tokens_per_year.at(2000) == 2);
    CHECK(stats.tokens_per_year.at(2002) == 3);
    TempDir dir;
    write_stats_csv(stats, dir / "s.csv");
    CHECK(testing::read_file(dir / "s.csv") == "year,papers,tokens\n2000,1,2\n2001,0,0\n2002,1,3\n");
}
