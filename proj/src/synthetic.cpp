#include "dynlink/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "dynlink/error.hpp"
#include "dynlink/random.hpp"

namespace dynlink {

namespace {

constexpr char kConsonants[] = "bdfgklmnprtvz";
constexpr char kVowels[] = "aeiou";
constexpr std::size_t kSyllables = 13 * 5;

// Pronounceable three-syllable word, distinct for distinct i < 65^3. Always
// ends in a vowel, so normalization leaves it alone.
std::string pseudo_word(std::size_t i) {
    constexpr std::size_t space = kSyllables * kSyllables * kSyllables;
    std::size_t k = (i * 40503 + 7919) % space; // 40503 is coprime to 65^3
    std::string w;
    for (int s = 0; s < 3; ++s) {
        std::size_t syl = k % kSyllables;
        k /= kSyllables;
        w += kConsonants[syl / 5];
        w += kVowels[syl % 5];
    }
    return w;
}

// Index blocks keep every vocabulary class disjoint.
enum Block : std::size_t { kConceptBlock = 0, kHeadBlock = 20000, kTopicBlock = 30000, kGenericBlock = 60000,
                           kBridgeBlock = 70000 };

const char* const kHeads[] = {"lattice", "model", "state", "circuit", "channel", "phase"};

} // namespace

void SyntheticConfig::validate() const {
    split.validate();
    if (split.train_delta.first != first_year) throw ConfigError("synthetic: first_year must equal the delta start");
    if (docs_per_year < 4) throw ConfigError("synthetic: docs_per_year must be >= 4");
    if (concepts_per_community < 3) throw ConfigError("synthetic: concepts_per_community must be >= 3");
    if (drifters_per_wave < 1) throw ConfigError("synthetic: drifters_per_wave must be >= 1");
    if (late_concepts < 0 || 2 * drifters_per_wave + late_concepts > concepts_per_community) {
        throw ConfigError("synthetic: not enough concepts for two waves plus late concepts");
    }
    if (lead_years < 1) throw ConfigError("synthetic: lead_years must be >= 1");
    if (split.train_lambda.first - lead_years < first_year) throw ConfigError("synthetic: lead_years too long");
    if (topic_words < 1 || generic_words < 1 || bridge_words < 1 || body_tokens < 1) {
        throw ConfigError("synthetic: vocabulary sizes must be positive");
    }
    const auto per_year = static_cast<long>(drifters_per_wave) * drifters_per_wave;
    if (per_year > static_cast<long>(docs_per_year) * split.train_lambda.size() ||
        per_year > static_cast<long>(docs_per_year) * split.test_lambda.size()) {
        throw ConfigError("synthetic: too few abstracts for the cross-community links");
    }
}

SyntheticConfig fixture_config() {
    SyntheticConfig cfg;
    cfg.seed = 7;
    cfg.first_year = 2000;
    cfg.split = {{2000, 2005}, {2006, 2007}, {2000, 2007}, {2008, 2009}};
    cfg.docs_per_year = 20;
    cfg.concepts_per_community = 8;
    cfg.drifters_per_wave = 2;
    cfg.late_concepts = 1;
    cfg.lead_years = 2;
    cfg.topic_words = 20;
    cfg.generic_words = 15;
    cfg.bridge_words = 5;
    cfg.body_tokens = 30;
    return cfg;
}

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, 0x5e7));
    const int m = cfg.concepts_per_community;
    const int n_concepts = 2 * m;

    SyntheticCorpus out;
    for (int c = 0; c < n_concepts; ++c) {
        out.lexicon.push_back(pseudo_word(kConceptBlock + static_cast<std::size_t>(c)) + " " +
                              kHeads[static_cast<std::size_t>(c) % std::size(kHeads)]);
        out.community.push_back(c < m ? 0 : 1);
    }

    // Per community: shuffle the regular concepts, the first block drifts in
    // the train wave, the next in the test wave. The last `late_concepts`
    // ids of each community appear from the third year on.
    const int regular = m - cfg.late_concepts;
    std::array<std::vector<int>, 2> order;
    for (int side = 0; side < 2; ++side) {
        order[side].resize(static_cast<std::size_t>(regular));
        std::iota(order[side].begin(), order[side].end(), side * m);
        shuffle(order[side], rng);
    }
    auto wave_members = [&](int side, int wave) {
        auto begin = order[side].begin() + wave * cfg.drifters_per_wave;
        return std::vector<int>(begin, begin + cfg.drifters_per_wave);
    };
    std::array<YearRange, 2> link_windows{cfg.split.train_lambda, cfg.split.test_lambda};
    // drift_wave[c] = wave whose lead years make concept c borrow bridge words
    std::vector<int> drift_wave(static_cast<std::size_t>(n_concepts), -1);
    std::vector<std::vector<std::pair<int, int>>> cross_by_year(static_cast<std::size_t>(cfg.last_year() - cfg.first_year + 1));
    for (int wave = 0; wave < 2; ++wave) {
        auto a = wave_members(0, wave);
        auto b = wave_members(1, wave);
        SyntheticWave& w = wave == 0 ? out.train_wave : out.test_wave;
        w.link_window = link_windows[wave];
        int k = 0;
        for (int x : a) {
            drift_wave[static_cast<std::size_t>(x)] = wave;
            for (int y : b) {
                drift_wave[static_cast<std::size_t>(y)] = wave;
                w.pairs.emplace_back(std::min(x, y), std::max(x, y));
                int year = w.link_window.first + k % w.link_window.size();
                cross_by_year[static_cast<std::size_t>(year - cfg.first_year)].emplace_back(x, y);
                ++k;
            }
        }
        std::sort(w.pairs.begin(), w.pairs.end());
    }

    auto topic_word = [&](int side) {
        // Skewed toward low indices, roughly Zipf-like.
        double u = uniform01(rng);
        auto i = static_cast<std::size_t>(u * u * cfg.topic_words);
        return pseudo_word(kTopicBlock + static_cast<std::size_t>(side) * 1000 + i);
    };
    auto generic_word = [&] {
        return pseudo_word(kGenericBlock + uniform_index(rng, static_cast<std::size_t>(cfg.generic_words)));
    };
    auto bridge_word = [&] {
        return pseudo_word(kBridgeBlock + uniform_index(rng, static_cast<std::size_t>(cfg.bridge_words)));
    };
    // Bridge words attached to a mention of `c` in `year`; ramps up toward the
    // wave's link window.
    auto bridge_count = [&](int c, int year) {
        int wave = drift_wave[static_cast<std::size_t>(c)];
        if (wave < 0) return 0;
        int start = link_windows[wave].first - cfg.lead_years;
        if (year < start || year >= link_windows[wave].first) return 0;
        return 2 * (year - start + 1);
    };

    auto render = [&](std::vector<std::string> body, const std::vector<int>& concepts, int year) {
        // Mentions go to random positions; bridge words follow the phrase.
        for (int c : concepts) {
            std::vector<std::string> mention{out.lexicon[static_cast<std::size_t>(c)]};
            for (int i = bridge_count(c, year); i > 0; --i) mention.push_back(bridge_word());
            auto pos = static_cast<std::ptrdiff_t>(uniform_index(rng, body.size() + 1));
            body.insert(body.begin() + pos, mention.begin(), mention.end());
        }
        std::string text;
        for (std::size_t i = 0; i < body.size(); ++i) {
            if (i > 0) text += (i % 12 == 0) ? ". " : " ";
            std::string w = body[i];
            if (i == 0 || i % 12 == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
            text += w;
        }
        return text + ".";
    };

    for (int year = cfg.first_year; year <= cfg.last_year(); ++year) {
        const auto& cross = cross_by_year[static_cast<std::size_t>(year - cfg.first_year)];
        for (int d = 0; d < cfg.docs_per_year; ++d) {
            std::vector<std::string> body;
            std::vector<int> concepts;
            if (static_cast<std::size_t>(d) < cross.size()) {
                auto [x, y] = cross[static_cast<std::size_t>(d)];
                concepts = {x, y};
                for (int t = 0; t < cfg.body_tokens; ++t) {
                    double u = uniform01(rng);
                    body.push_back(u < 0.35 ? topic_word(0) : u < 0.7 ? topic_word(1) : u < 0.8 ? bridge_word()
                                                                                         : generic_word());
                }
            } else {
                const int side = static_cast<int>(uniform_index(rng, 2));
                std::vector<int> pool;
                for (int c = side * m; c < (side + 1) * m; ++c) {
                    bool late = c - side * m >= regular;
                    if (!late || year >= cfg.first_year + 2) pool.push_back(c);
                }
                shuffle(pool, rng);
                const std::size_t k = 2 + uniform_index(rng, 2);
                concepts.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(k, pool.size())));
                for (int t = 0; t < cfg.body_tokens; ++t) {
                    body.push_back(uniform01(rng) < 0.65 ? topic_word(side) : generic_word());
                }
            }
            AbstractRecord rec;
            char id[32];
            std::snprintf(id, sizeof id, "synth-%d-%04d", year, d);
            rec.id = id;
            rec.year = year;
            rec.month = 1 + static_cast<int>(uniform_index(rng, 12));
            rec.text = render(std::move(body), concepts, year);
            out.records.push_back(std::move(rec));
        }
    }
    return out;
}

void write_corpus_jsonl(const std::vector<AbstractRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& r : records) {
        char date[16];
        std::snprintf(date, sizeof date, "%04d-%02d", r.year, r.month);
        nlohmann::ordered_json j;
        j["id"] = r.id;
        j["date"] = date;
        j["abstract"] = r.text;
        out << j.dump() << '\n';
    }
}

void write_lexicon(const std::vector<std::string>& phrases, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& p : phrases) out << p << '\n';
}

} // namespace dynlink
