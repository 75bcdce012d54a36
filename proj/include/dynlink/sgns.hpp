#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dynlink/concepts.hpp"
#include "dynlink/corpus.hpp"

namespace dynlink {

struct TrainConfig {
    int window = 10;
    int dim = 128;
    int negatives = 5;
    int epochs = 5;
    double learning_rate = 0.025;
    // Linear decay stops at learning_rate * min_lr_fraction.
    double min_lr_fraction = 1e-4;
    // Frequent-token downsampling; <= 0 disables it.
    double subsample_threshold = 1e-3;
    double unigram_power = 0.75;
    std::uint64_t seed = 1;
    // 1 = deterministic sequential training; >1 = lock-free shared updates.
    int workers = 1;
    int min_count = 1;

    // Throws ConfigError on window/dim/negatives/epochs < 1 or non-positive learning rate.
    void validate() const;
};

// Row index into the embedding matrices.
using TokenRow = std::int32_t;
using EncodedDoc = std::vector<TokenRow>;

class Vocabulary {
public:
    // Counts tokens over `docs`; tokens rarer than `min_count` are dropped
    // unless they are concept tokens. Rows are ordered by descending count, ties
    // by spelling, so the result does not depend on document order.
    static Vocabulary build(const std::vector<TokenSeq>& docs, int min_count = 1);

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(TokenRow row) const { return tokens_.at(static_cast<std::size_t>(row)); }
    std::optional<TokenRow> row(const std::string& token) const;
    std::uint64_t count(TokenRow row) const { return counts_.at(static_cast<std::size_t>(row)); }

    // Drops out-of-vocabulary tokens.
    EncodedDoc encode(const TokenSeq& doc) const;

    static Vocabulary from_tokens(std::vector<std::string> tokens, std::vector<std::uint64_t> counts);

private:
    std::vector<std::string> tokens_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, TokenRow> index_;
};

// Skip-gram parameters. `w_in` holds the target vectors read out as
// embeddings, `w_out` the context (output layer) vectors. Both row-major.
struct SgnsModel {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> w_in;
    std::vector<double> w_out;

    std::span<double> in_row(TokenRow r) { return {w_in.data() + static_cast<std::size_t>(r) * dim, dim}; }
    std::span<const double> in_row(TokenRow r) const {
        return {w_in.data() + static_cast<std::size_t>(r) * dim, dim};
    }
    std::span<double> out_row(TokenRow r) { return {w_out.data() + static_cast<std::size_t>(r) * dim, dim}; }
    std::span<const double> out_row(TokenRow r) const {
        return {w_out.data() + static_cast<std::size_t>(r) * dim, dim};
    }

    bool operator==(const SgnsModel&) const = default;
};

// W_in uniform in [-0.5/dim, 0.5/dim] from cfg.seed, W_out zero.
SgnsModel init_model(std::size_t vocab_size, const TrainConfig& cfg);

// Negative-sampling loss of one (center, context) pair:
//   -log sigma(u.v) - sum_neg log sigma(-u_neg.v)
// with v = w_in[center], u = w_out[context].
double sgns_loss(const SgnsModel& model, TokenRow center, TokenRow context, std::span<const TokenRow> negatives);

struct SgnsGradient {
    std::vector<double> center;                  // d loss / d w_in[center]
    std::vector<TokenRow> output_rows;           // context, then negatives
    std::vector<std::vector<double>> output;     // d loss / d w_out[row], one per entry above
};

SgnsGradient sgns_gradient(const SgnsModel& model, TokenRow center, TokenRow context,
                           std::span<const TokenRow> negatives);

// One SGD step on the pair; returns the loss before the update. Output rows
// that repeat receive the sum of their gradients.
double sgns_step(SgnsModel& model, TokenRow center, TokenRow context, std::span<const TokenRow> negatives,
                 double lr);

struct YearTrainResult {
    std::vector<double> epoch_loss; // mean loss per positive pair, one per epoch that produced pairs
    std::uint64_t positive_pairs = 0;

    // Mean of epoch losses; nullopt when nothing was trained.
    std::optional<double> mean_loss() const;
};

// Runs cfg.epochs passes of skip-gram over `docs`. Negatives and downsampling
// use this slice's token frequencies. `stream` separates random streams of
// different calls sharing one seed (the year, typically).
YearTrainResult train_year(SgnsModel& model, std::span<const EncodedDoc> docs, const TrainConfig& cfg,
                           std::uint64_t stream = 0);

// Concept vectors per year, float32, rows ordered as `concepts`.
struct EmbeddingTimeline {
    static constexpr std::int32_t kNotSeen = -1;

    YearRange years;
    std::size_t dim = 0;
    std::vector<ConceptId> concepts;
    std::vector<std::int32_t> first_seen;        // per concept row, kNotSeen if never observed
    std::vector<std::vector<float>> snapshots;   // per year: concepts.size() * dim
    std::vector<std::uint8_t> backfilled;        // per (year index, concept row), year-major

    std::size_t concept_count() const { return concepts.size(); }
    std::optional<std::size_t> row_of(ConceptId c) const;
    bool is_backfilled(std::size_t row, int year) const;
    // Whether (row, year) carries a trained or backfilled vector.
    bool has_vector(std::size_t row, int year) const;

    std::span<const float> vector(std::size_t row, int year) const;
    std::span<float> vector(std::size_t row, int year);

    // Throws Error naming the concept when it has no vector for `year`.
    std::span<const float> concept_vector(ConceptId c, int year) const;

    bool operator==(const EmbeddingTimeline&) const = default;

private:
    std::size_t year_index(int year) const;
};

struct DynamicCorpus {
    Vocabulary vocab;
    std::map<int, std::vector<EncodedDoc>> slices; // contiguous years
    std::vector<ConceptId> concepts;                // concepts present in vocab
    std::vector<TokenRow> concept_rows;             // vocab row of each entry above
    FirstSeen first_seen;
};

// Builds the shared vocabulary over all years and encodes each slice.
DynamicCorpus prepare_dynamic_corpus(const std::vector<TokenizedDoc>& docs, YearRange range, int min_count = 1);

enum class YearPhase { start, end };
using YearObserver = std::function<void(int year, YearPhase phase, const SgnsModel& model)>;

struct DynamicResult {
    EmbeddingTimeline timeline;
    SgnsModel final_model;
    std::map<int, YearTrainResult> per_year;
};

// Sequential yearly training, each year warm-started from the previous
// year's final model. Snapshots are stored before backfill.
DynamicResult train_dynamic(const DynamicCorpus& corpus, const TrainConfig& cfg, const YearObserver& observer = {});

// Single-run model over every document of years <= `through`, stored as a
// one-year timeline keyed by `through`.
EmbeddingTimeline train_static(const DynamicCorpus& corpus, int through, const TrainConfig& cfg);

struct BackfillReport {
    std::vector<ConceptId> absent; // no vector in any year of the range
    std::size_t filled = 0;
};

// Copies each concept's first-seen-year vector into all earlier years.
BackfillReport backfill_timeline(EmbeddingTimeline& timeline);

// Binary little-endian "DWEB" format, see docs in README.
inline constexpr std::uint32_t kTimelineVersion = 1;
std::uint64_t timeline_file_size(std::uint64_t concepts, std::uint64_t dim, std::uint64_t years);
void save_timeline(const EmbeddingTimeline& timeline, const std::filesystem::path& path);
EmbeddingTimeline load_timeline(const std::filesystem::path& path);

} // namespace dynlink
