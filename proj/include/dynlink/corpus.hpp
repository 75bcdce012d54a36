#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dynlink {

// Lowercase tokens with no whitespace and no empty entries.
using TokenSeq = std::vector<std::string>;

struct AbstractRecord {
    std::string id;
    int year = 0;
    int month = 1;
    std::string text;
};

struct YearRange {
    int first = 0;
    int last = 0;

    bool contains(int y) const { return y >= first && y <= last; }
    int size() const { return last - first + 1; }
    bool operator==(const YearRange&) const = default;
};

struct LoadResult {
    std::vector<AbstractRecord> records;
    std::size_t skipped = 0;
};

struct CorpusStats {
    std::map<int, std::size_t> papers_per_year;
    std::map<int, std::size_t> tokens_per_year;
};

// Reads one JSON object per line: {"id": ..., "date": "YYYY-MM", "abstract": ...}.
// Malformed lines are skipped with a warning; a missing file throws.
LoadResult load_corpus(const std::filesystem::path& path);

// Parses a single corpus line. Returns false (and leaves `out` untouched) when
// the line is not a valid record.
bool parse_corpus_line(std::string_view line, AbstractRecord& out);

// Lowercases, turns punctuation and hyphens into separators, keeps digits and
// '/' or '.' between alphanumerics, then singularizes plain words.
TokenSeq normalize_text(std::string_view raw);

// Rule-based singular form: "sses"->"ss", "ies"->"y", trailing "s" dropped when
// the word is longer than three letters and does not end in "ss", "us" or "is".
std::string singularize(std::string_view word);

// Partition by year. Every year of `range` gets an entry, possibly empty.
// Records outside the range are dropped. Throws on an inverted range.
std::map<int, std::vector<AbstractRecord>> slice_by_year(const std::vector<AbstractRecord>& records,
                                                         YearRange range);

CorpusStats corpus_stats(const std::vector<AbstractRecord>& records, YearRange range);

// CSV `year,papers,tokens`.
void write_stats_csv(const CorpusStats& stats, const std::filesystem::path& path);

} // namespace dynlink
