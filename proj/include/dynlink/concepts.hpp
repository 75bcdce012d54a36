#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dynlink/corpus.hpp"

namespace dynlink {

using ConceptId = std::int32_t;

// Normalized multi-word phrases with dense ids 0..size()-1.
class ConceptLexicon {
public:
    ConceptLexicon() = default;

    // Adds a normalized phrase. Returns its id, or nullopt if it duplicates an
    // existing phrase (first occurrence wins).
    std::optional<ConceptId> add(TokenSeq phrase);

    std::size_t size() const { return phrases_.size(); }
    const TokenSeq& phrase(ConceptId id) const { return phrases_.at(static_cast<std::size_t>(id)); }
    const std::vector<TokenSeq>& phrases() const { return phrases_; }
    std::optional<ConceptId> find(const TokenSeq& phrase) const;
    // Phrase joined with single spaces.
    std::string display(ConceptId id) const;

private:
    std::vector<TokenSeq> phrases_;
    std::unordered_map<std::string, ConceptId> ids_;
};

struct LexiconLoad {
    ConceptLexicon lexicon;
    std::size_t merged = 0; // phrases dropped as duplicates after normalization
};

// One phrase per line, '#' comment lines and blank lines ignored. Throws if no
// phrase survives.
LexiconLoad load_lexicon(const std::filesystem::path& path);

struct ConceptPosition {
    std::size_t index = 0;
    ConceptId concept_id = 0;
    bool operator==(const ConceptPosition&) const = default;
};

struct TokenizedDoc {
    std::string id;
    int year = 0;
    TokenSeq tokens;
    std::vector<ConceptPosition> concept_positions;
};

// Token spelling used for a matched concept span. Cannot collide with output of
// normalize_text, which never emits '#'.
std::string concept_token(ConceptId id);
// Inverse of concept_token; nullopt for ordinary words.
std::optional<ConceptId> parse_concept_token(std::string_view token);

// Aho-Corasick automaton over token sequences. Immutable after construction.
class PhraseMatcher {
public:
    explicit PhraseMatcher(const ConceptLexicon& lexicon);

    struct Match {
        std::size_t start = 0;
        std::size_t length = 0;
        ConceptId concept_id = 0;
        bool operator==(const Match&) const = default;
    };

    // Leftmost, longest-at-each-start, non-overlapping matches.
    std::vector<Match> find(const TokenSeq& tokens) const;

    TokenizedDoc replace(const TokenSeq& tokens, int year = 0, std::string id = {}) const;

private:
    struct Node {
        std::vector<std::pair<std::int32_t, std::int32_t>> next; // (symbol, node), sorted by symbol
        std::int32_t fail = 0;
        std::int32_t dict = -1; // nearest terminal node along the fail chain
        ConceptId concept_id = -1;
        std::int32_t depth = 0;
    };

    std::int32_t child(std::int32_t node, std::int32_t symbol) const;
    std::int32_t symbol_of(const std::string& token) const;

    std::unordered_map<std::string, std::int32_t> symbols_;
    std::vector<Node> nodes_;
};

TokenizedDoc replace_concepts(const TokenSeq& doc, const PhraseMatcher& matcher);

// Earliest year each concept occurs in.
using FirstSeen = std::map<ConceptId, int>;

FirstSeen first_occurrences(const std::vector<TokenizedDoc>& docs);

// CSV `concept_id,first_year`.
void write_first_seen_csv(const FirstSeen& first_seen, const std::filesystem::path& path);

} // namespace dynlink
