#include "dynlink/concepts.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <fstream>

#include "dynlink/error.hpp"
#include "dynlink/log.hpp"

namespace dynlink {

namespace {

std::string join(const TokenSeq& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

} // namespace

std::optional<ConceptId> ConceptLexicon::add(TokenSeq phrase) {
    auto key = join(phrase);
    if (ids_.count(key)) return std::nullopt;
    auto id = static_cast<ConceptId>(phrases_.size());
    ids_.emplace(std::move(key), id);
    phrases_.push_back(std::move(phrase));
    return id;
}

std::optional<ConceptId> ConceptLexicon::find(const TokenSeq& phrase) const {
    auto it = ids_.find(join(phrase));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

std::string ConceptLexicon::display(ConceptId id) const {
    return join(phrase(id));
}

LexiconLoad load_lexicon(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open lexicon file: " + path.string());

    LexiconLoad out;
    std::string line;
    while (std::getline(in, line)) {
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        auto phrase = normalize_text(line);
        if (phrase.empty()) continue;
        if (!out.lexicon.add(phrase)) {
            ++out.merged;
            log::info("lexicon: merged duplicate phrase '" + join(phrase) + "'");
        }
    }
    if (out.lexicon.size() == 0) throw Error("lexicon is empty: " + path.string());
    return out;
}

std::string concept_token(ConceptId id) {
    return "#" + std::to_string(id);
}

std::optional<ConceptId> parse_concept_token(std::string_view token) {
    if (token.size() < 2 || token[0] != '#') return std::nullopt;
    ConceptId id = 0;
    auto [ptr, ec] = std::from_chars(token.data() + 1, token.data() + token.size(), id);
    if (ec != std::errc() || ptr != token.data() + token.size() || id < 0) return std::nullopt;
    return id;
}

PhraseMatcher::PhraseMatcher(const ConceptLexicon& lexicon) {
    nodes_.emplace_back();
    for (std::size_t c = 0; c < lexicon.size(); ++c) {
        const auto& phrase = lexicon.phrase(static_cast<ConceptId>(c));
        std::int32_t node = 0;
        for (const auto& tok : phrase) {
            auto [it, inserted] = symbols_.emplace(tok, static_cast<std::int32_t>(symbols_.size()));
            std::int32_t sym = it->second;
            std::int32_t nxt = child(node, sym);
            if (nxt < 0) {
                nxt = static_cast<std::int32_t>(nodes_.size());
                Node fresh;
                fresh.depth = nodes_[node].depth + 1;
                nodes_.push_back(fresh);
                auto& edges = nodes_[node].next;
                auto pos = std::lower_bound(edges.begin(), edges.end(), std::make_pair(sym, std::int32_t{-1}));
                edges.insert(pos, {sym, nxt});
            }
            node = nxt;
        }
        nodes_[node].concept_id = static_cast<ConceptId>(c);
    }

    // Breadth-first construction of failure and dictionary links.
    std::deque<std::int32_t> queue;
    for (auto [sym, nxt] : nodes_[0].next) {
        nodes_[nxt].fail = 0;
        queue.push_back(nxt);
    }
    while (!queue.empty()) {
        auto node = queue.front();
        queue.pop_front();
        for (auto [sym, nxt] : nodes_[node].next) {
            std::int32_t f = nodes_[node].fail;
            while (f != 0 && child(f, sym) < 0) f = nodes_[f].fail;
            std::int32_t target = child(f, sym);
            nodes_[nxt].fail = (target >= 0 && target != nxt) ? target : 0;
            std::int32_t fl = nodes_[nxt].fail;
            nodes_[nxt].dict = nodes_[fl].concept_id >= 0 ? fl : nodes_[fl].dict;
            queue.push_back(nxt);
        }
    }
}

std::int32_t PhraseMatcher::child(std::int32_t node, std::int32_t symbol) const {
    const auto& edges = nodes_[node].next;
    auto it = std::lower_bound(edges.begin(), edges.end(), std::make_pair(symbol, std::int32_t{-1}));
    if (it != edges.end() && it->first == symbol) return it->second;
    return -1;
}

std::int32_t PhraseMatcher::symbol_of(const std::string& token) const {
    auto it = symbols_.find(token);
    return it == symbols_.end() ? -1 : it->second;
}

std::vector<PhraseMatcher::Match> PhraseMatcher::find(const TokenSeq& tokens) const {
    // Longest phrase starting at each position, collected from every phrase
    // ending at each position.
    std::vector<std::size_t> longest(tokens.size(), 0);
    std::vector<ConceptId> concept_at(tokens.size(), -1);

    std::int32_t state = 0;
    for (std::size_t end = 0; end < tokens.size(); ++end) {
        std::int32_t sym = symbol_of(tokens[end]);
        if (sym < 0) {
            state = 0;
            continue;
        }
        while (state != 0 && child(state, sym) < 0) state = nodes_[state].fail;
        std::int32_t nxt = child(state, sym);
        state = nxt < 0 ? 0 : nxt;

        std::int32_t hit = nodes_[state].concept_id >= 0 ? state : nodes_[state].dict;
        while (hit >= 0) {
            auto len = static_cast<std::size_t>(nodes_[hit].depth);
            std::size_t start = end + 1 - len;
            if (len > longest[start]) {
                longest[start] = len;
                concept_at[start] = nodes_[hit].concept_id;
            }
            hit = nodes_[hit].dict;
        }
    }

    std::vector<Match> matches;
    for (std::size_t i = 0; i < tokens.size();) {
        if (longest[i] > 0) {
            matches.push_back({i, longest[i], concept_at[i]});
            i += longest[i];
        } else {
            ++i;
        }
    }
    return matches;
}

TokenizedDoc PhraseMatcher::replace(const TokenSeq& tokens, int year, std::string id) const {
    TokenizedDoc doc;
    doc.id = std::move(id);
    doc.year = year;
    auto matches = find(tokens);
    doc.tokens.reserve(tokens.size());
    std::size_t i = 0;
    for (const auto& m : matches) {
        for (; i < m.start; ++i) doc.tokens.push_back(tokens[i]);
        doc.concept_positions.push_back({doc.tokens.size(), m.concept_id});
        doc.tokens.push_back(concept_token(m.concept_id));
        i = m.start + m.length;
    }
    for (; i < tokens.size(); ++i) doc.tokens.push_back(tokens[i]);
    return doc;
}

TokenizedDoc replace_concepts(const TokenSeq& doc, const PhraseMatcher& matcher) {
    return matcher.replace(doc);
}

FirstSeen first_occurrences(const std::vector<TokenizedDoc>& docs) {
    FirstSeen first;
    for (const auto& d : docs) {
        for (const auto& cp : d.concept_positions) {
            auto [it, inserted] = first.emplace(cp.concept_id, d.year);
            if (!inserted && d.year < it->second) it->second = d.year;
        }
    }
    return first;
}

void write_first_seen_csv(const FirstSeen& first_seen, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "concept_id,first_year\n";
    for (const auto& [c, y] : first_seen) out << c << ',' << y << '\n';
}

} // namespace dynlink
