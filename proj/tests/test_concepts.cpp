#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "dynlink/concepts.hpp"
#include "dynlink/error.hpp"
#include "dynlink/log.hpp"
#include "test_support.hpp"

using namespace dynlink;
using testing::TempDir;

namespace {

ConceptLexicon lexicon_of(std::initializer_list<const char*> phrases) {
    ConceptLexicon lex;
    for (const char* p : phrases) REQUIRE(lex.add(normalize_text(p)).has_value());
    return lex;
}

// Longest phrase at each position, scanning left to right and skipping past
// every match.
std::vector<PhraseMatcher::Match> naive_matches(const ConceptLexicon& lex, const TokenSeq& tokens) {
    std::vector<PhraseMatcher::Match> out;
    std::size_t i = 0;
    while (i < tokens.size()) {
        std::size_t best_len = 0;
        ConceptId best = -1;
        for (std::size_t c = 0; c < lex.size(); ++c) {
            const auto& p = lex.phrase(static_cast<ConceptId>(c));
            if (p.size() <= best_len || i + p.size() > tokens.size()) continue;
            if (std::equal(p.begin(), p.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
                best_len = p.size();
                best = static_cast<ConceptId>(c);
            }
        }
        if (best_len > 0) {
            out.push_back({i, best_len, best});
            i += best_len;
        } else {
            ++i;
        }
    }
    return out;
}

} // namespace

TEST_CASE("load_lexicon normalizes phrases") {
    TempDir dir;
    testing::write_file(dir / "l.txt", "Entanglement Witnesses\n");
    auto r = load_lexicon(dir / "l.txt");
    REQUIRE(r.lexicon.size() == 1);
    CHECK(r.lexicon.phrase(0) == TokenSeq{"entanglement", "witness"});
    CHECK(r.merged == 0);
}

TEST_CASE("load_lexicon merges case variants, first occurrence wins") {
    log::level() = log::Level::quiet;
    TempDir dir;
    testing::write_file(dir / "l.txt", "# comment\nQuantum Dot\n\nquantum dots\nspin chain\n");
    auto r = load_lexicon(dir / "l.txt");
    CHECK(r.lexicon.size() == 2);
    CHECK(r.merged == 1);
    CHECK(r.lexicon.display(0) == "quantum dot");
    CHECK(r.lexicon.display(1) == "spin chain");
    CHECK(r.lexicon.find({"spin", "chain"}) == ConceptId{1});
    log::level() = log::Level::warn;
}

TEST_CASE("load_lexicon rejects an empty file") {
    TempDir dir;
    testing::write_file(dir / "l.txt", "\n# only comments\n");
    CHECK_THROWS_AS(load_lexicon(dir / "l.txt"), Error);
}

TEST_CASE("concept tokens round trip and never look like words") {
    CHECK(concept_token(42) == "#42");
    CHECK(parse_concept_token("#42") == ConceptId{42});
    CHECK_FALSE(parse_concept_token("42").has_value());
    CHECK_FALSE(parse_concept_token("#").has_value());
    CHECK_FALSE(parse_concept_token("#4a").has_value());
    for (const auto& t : normalize_text("#1 issue # 2")) CHECK_FALSE(parse_concept_token(t).has_value());
}

TEST_CASE("the longest phrase wins at a start position") {
    auto lex = lexicon_of({"quantum dot", "quantum dot emission"});
    PhraseMatcher m(lex);
    auto doc = replace_concepts({"quantum", "dot", "emission"}, m);
    CHECK(doc.tokens == TokenSeq{"#1"});
    CHECK(doc.concept_positions == std::vector<ConceptPosition>{{0, 1}});

    auto shorter = replace_concepts({"a", "quantum", "dot", "laser"}, m);
    CHECK(shorter.tokens == TokenSeq{"a", "#0", "laser"});
    CHECK(shorter.concept_positions == std::vector<ConceptPosition>{{1, 0}});
}

TEST_CASE("a document with no phrase is unchanged") {
    auto lex = lexicon_of({"quantum dot"});
    PhraseMatcher m(lex);
    TokenSeq tokens{"spin", "chain", "dot", "quantum"};
    auto doc = replace_concepts(tokens, m);
    CHECK(doc.tokens == tokens);
    CHECK(doc.concept_positions.empty());
}

TEST_CASE("an abstract mentioning entanglement witnesses tracks the span as one token") {
    auto lex = lexicon_of({"entanglement witness", "entanglement"});
    PhraseMatcher m(lex);
    auto doc = replace_concepts(normalize_text("We construct entanglement witnesses for qudits."), m);
    CHECK(doc.tokens == TokenSeq{"we", "construct", "#0", "for", "qudit"});
}

TEST_CASE("a failed long candidate falls back to the shorter match inside it") {
    // "a b c d" is not a phrase but "b c" is: the scan must not skip it.
    auto lex = lexicon_of({"a b c e", "b c", "c d"});
    PhraseMatcher m(lex);
    TokenSeq tokens{"a", "b", "c", "d"};
    CHECK(m.find(tokens) == naive_matches(lex, tokens));
    CHECK(m.find(tokens) == std::vector<PhraseMatcher::Match>{{1, 2, 1}});
}

TEST_CASE("automaton matches the naive oracle on random inputs") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t alphabet = 3 + rng() % 8;
        auto word = [&] { return std::string(1, static_cast<char>('a' + rng() % alphabet)); };
        ConceptLexicon lex;
        const auto n_phrases = 1 + rng() % 200;
        for (std::size_t p = 0; p < n_phrases; ++p) {
            TokenSeq phrase;
            const auto len = 1 + rng() % 4;
            for (std::size_t i = 0; i < len; ++i) phrase.push_back(word());
            lex.add(std::move(phrase));
        }
        PhraseMatcher m(lex);
        TokenSeq tokens;
        const auto n_tokens = rng() % 2001;
        for (std::size_t i = 0; i < n_tokens; ++i) tokens.push_back(word());

        auto got = m.find(tokens);
        REQUIRE(got == naive_matches(lex, tokens));
        for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i - 1].start + got[i - 1].length <= got[i].start);

        auto doc = m.replace(tokens);
        CHECK(doc.concept_positions.size() == got.size());
        for (const auto& cp : doc.concept_positions) {
            REQUIRE(cp.index < doc.tokens.size());
            CHECK(parse_concept_token(doc.tokens[cp.index]) == cp.concept_id);
        }
        CHECK(m.replace(tokens).tokens == doc.tokens);
    }
}

TEST_CASE("first_occurrences takes the earliest year") {
    auto lex = lexicon_of({"spin chain", "quantum dot"});
    PhraseMatcher m(lex);
    std::vector<TokenizedDoc> docs{
        m.replace(normalize_text("spin chains"), 1999, "a"),
        m.replace(normalize_text("spin chain and quantum dot"), 1997, "b"),
        m.replace(normalize_text("quantum dots"), 2005, "c"),
    };
    auto fs = first_occurrences(docs);
    CHECK(fs == FirstSeen{{0, 1997}, {1, 1997}});

    std::vector<TokenizedDoc> only_2005{m.replace(normalize_text("quantum dot"), 2005, "x")};
    CHECK(first_occurrences(only_2005) == FirstSeen{{1, 2005}});
}

TEST_CASE("first_occurrences agrees with a brute-force scan") {
    std::mt19937_64 rng(5);
    auto lex = lexicon_of({"a b", "b", "c d e", "d", "e f"});
    PhraseMatcher m(lex);
    const std::string words = "abcdefg";
    std::vector<TokenizedDoc> docs;
    for (int i = 0; i < 10; ++i) {
        TokenSeq t;
        for (int j = 0; j < 12; ++j) t.emplace_back(1, words[rng() % words.size()]);
        docs.push_back(m.replace(t, 1990 + static_cast<int>(rng() % 8)));
    }
    FirstSeen oracle;
    for (const auto& d : docs) {
        for (const auto& tok : d.tokens) {
            if (auto c = parse_concept_token(tok)) {
                auto [it, fresh] = oracle.emplace(*c, d.year);
                if (!fresh) it->second = std::min(it->second, d.year);
            }
        }
    }
    CHECK(first_occurrences(docs) == oracle);
}

TEST_CASE("write_first_seen_csv format") {
    TempDir dir;
    write_first_seen_csv(FirstSeen{{0, 2001}, {3, 1999}}, dir / "f.csv");
    CHECK(testing::read_file(dir / "f.csv") == "concept_id,first_year\n0,2001\n3,1999\n");
}
