#include "dynlink/corpus.hpp"

#include <cctype>
#include <fstream>

#include "json.hpp"

#include "dynlink/error.hpp"
#include "dynlink/log.hpp"

namespace dynlink {

namespace {

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) != 0 || c >= 0x80;
}

bool all_alpha(std::string_view w) {
    for (unsigned char c : w) {
        if (!std::isalpha(c)) return false;
    }
    return !w.empty();
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool parse_date(std::string_view date, int& year, int& month) {
    // "YYYY-MM", optionally followed by "-DD".
    if (date.size() < 7 || date[4] != '-') return false;
    for (int i : {0, 1, 2, 3, 5, 6}) {
        if (!std::isdigit(static_cast<unsigned char>(date[i]))) return false;
    }
    if (date.size() > 7 && date[7] != '-') return false;
    year = std::stoi(std::string(date.substr(0, 4)));
    month = std::stoi(std::string(date.substr(5, 2)));
    return month >= 1 && month <= 12;
}

bool blank(std::string_view s) {
    for (unsigned char c : s) {
        if (!std::isspace(c)) return false;
    }
    return true;
}

} // namespace

bool parse_corpus_line(std::string_view line, AbstractRecord& out) {
    auto doc = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (!doc.is_object()) return false;
    auto id = doc.find("id");
    auto date = doc.find("date");
    auto text = doc.find("abstract");
    if (id == doc.end() || date == doc.end() || text == doc.end()) return false;
    if (!id->is_string() || !date->is_string() || !text->is_string()) return false;

    AbstractRecord rec;
    if (!parse_date(date->get_ref<const std::string&>(), rec.year, rec.month)) return false;
    rec.id = id->get<std::string>();
    rec.text = text->get<std::string>();
    if (blank(rec.text)) return false;
    out = std::move(rec);
    return true;
}

LoadResult load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open corpus file: " + path.string());

    LoadResult result;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;
        AbstractRecord rec;
        if (parse_corpus_line(line, rec)) {
            result.records.push_back(std::move(rec));
        } else {
            ++result.skipped;
            log::warn(path.string() + ":" + std::to_string(lineno) + ": malformed record skipped");
        }
    }
    return result;
}

std::string singularize(std::string_view word) {
    std::string w(word);
    if (!all_alpha(w)) return w;
    if (ends_with(w, "sses")) {
        w.resize(w.size() - 2);
    } else if (w.size() > 4 && ends_with(w, "ies")) {
        w.resize(w.size() - 3);
        w.push_back('y');
    } else if (w.size() > 3 && w.back() == 's' && !ends_with(w, "ss") && !ends_with(w, "us") &&
               !ends_with(w, "is")) {
        w.pop_back();
    }
    return w;
}

TokenSeq normalize_text(std::string_view raw) {
    std::string buf(raw.size(), ' ');
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto c = static_cast<unsigned char>(raw[i]);
        if (is_word_byte(c)) {
            buf[i] = static_cast<char>(std::tolower(c));
            continue;
        }
        bool inner = i > 0 && i + 1 < raw.size() && is_word_byte(static_cast<unsigned char>(raw[i - 1])) &&
                     is_word_byte(static_cast<unsigned char>(raw[i + 1]));
        if (c == '/' && inner) {
            buf[i] = '/';
        } else if (c == '.' && inner && std::isdigit(static_cast<unsigned char>(raw[i - 1])) &&
                   std::isdigit(static_cast<unsigned char>(raw[i + 1]))) {
            buf[i] = '.';
        }
    }

    TokenSeq tokens;
    std::size_t i = 0;
    while (i < buf.size()) {
        while (i < buf.size() && buf[i] == ' ') ++i;
        std::size_t j = i;
        while (j < buf.size() && buf[j] != ' ') ++j;
        if (j > i) tokens.push_back(singularize(std::string_view(buf).substr(i, j - i)));
        i = j;
    }
    return tokens;
}

std::map<int, std::vector<AbstractRecord>> slice_by_year(const std::vector<AbstractRecord>& records,
                                                         YearRange range) {
    if (range.first > range.last) {
        throw Error("inverted year range [" + std::to_string(range.first) + "," +
                    std::to_string(range.last) + "]");
    }
    std::map<int, std::vector<AbstractRecord>> slices;
    for (int y = range.first; y <= range.last; ++y) slices[y];
    for (const auto& r : records) {
        if (range.contains(r.year)) slices[r.year].push_back(r);
    }
    return slices;
}

CorpusStats corpus_stats(const std::vector<AbstractRecord>& records, YearRange range) {
    CorpusStats stats;
    for (int y = range.first; y <= range.last; ++y) {
        stats.papers_per_year[y] = 0;
        stats.tokens_per_year[y] = 0;
    }
    for (const auto& r : records) {
        if (!range.contains(r.year)) continue;
        stats.papers_per_year[r.year] += 1;
        stats.tokens_per_year[r.year] += normalize_text(r.text).size();
    }
    return stats;
}

void write_stats_csv(const CorpusStats& stats, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "year,papers,tokens\n";
    for (const auto& [year, papers] : stats.papers_per_year) {
        auto tok = stats.tokens_per_year.find(year);
        out << year << ',' << papers << ',' << (tok == stats.tokens_per_year.end() ? 0 : tok->second)
            << '\n';
    }
}

} // namespace dynlink
