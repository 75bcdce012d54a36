#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dynlink/corpus.hpp"
#include "dynlink/dataset.hpp"

namespace dynlink {

// Two topic communities of concepts. Inside a community concepts co-occur
// freely; across communities nothing co-occurs before the first label window.
// Each wave picks "drifting" concepts from both sides. For `lead_years` before
// the wave's link window their abstracts borrow a shared bridge vocabulary,
// then every cross pair of the wave co-occurs once inside the link window.
struct SyntheticConfig {
    std::uint64_t seed = 1;
    int first_year = 2000;
    SplitSpec split{{2000, 2006}, {2007, 2008}, {2000, 2008}, {2009, 2010}};
    int docs_per_year = 150;
    int concepts_per_community = 30;
    int drifters_per_wave = 6; // per community and wave
    int late_concepts = 2;     // per community, introduced in the third year
    int lead_years = 3;
    int topic_words = 40;      // per community
    int generic_words = 30;
    int bridge_words = 10;
    int body_tokens = 36;      // approximate words per abstract, excluding concepts

    int last_year() const { return split.test_lambda.last; }
    void validate() const;
};

struct SyntheticWave {
    YearRange link_window;
    std::vector<ConceptPair> pairs; // lexicon ids, first < second
};

struct SyntheticCorpus {
    std::vector<AbstractRecord> records;
    std::vector<std::string> lexicon; // phrase per concept id (line order)
    std::vector<int> community;       // per concept id: 0 or 1
    SyntheticWave train_wave;
    SyntheticWave test_wave;
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg);

// The bundled small fixture: 200 abstracts over the default year span.
SyntheticConfig fixture_config();

// JSON lines in the ingest format and one phrase per line.
void write_corpus_jsonl(const std::vector<AbstractRecord>& records, const std::filesystem::path& path);
void write_lexicon(const std::vector<std::string>& phrases, const std::filesystem::path& path);

} // namespace dynlink
