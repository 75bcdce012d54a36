#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dynlink/concepts.hpp"
#include "dynlink/corpus.hpp"
#include "dynlink/graph.hpp"
#include "dynlink/sgns.hpp"

namespace dynlink {

// Training window (delta) and label window (lambda) for the train and test
// splits. Each lambda starts the year after its delta ends; the test windows
// are the train windows shifted forward.
struct SplitSpec {
    YearRange train_delta{1994, 2017};
    YearRange train_lambda{2018, 2020};
    YearRange test_delta{1994, 2020};
    YearRange test_lambda{2021, 2023};

    // Years between the train and test windows.
    int shift() const { return test_delta.last - train_delta.last; }
    // Throws ConfigError if the windows are inconsistent.
    void validate() const;

    bool operator==(const SplitSpec&) const = default;
};

using ConceptPair = std::pair<ConceptId, ConceptId>;

// Unordered pairs (first < second) of concepts with degree >= min_degree that
// share no edge in `delta_graph`, in lexicographic order.
std::vector<ConceptPair> enumerate_candidate_pairs(const CoocGraph& delta_graph, std::span<const ConceptId> concepts,
                                                   int min_degree);

struct LabeledPair {
    ConceptPair pair;
    int label = 0;
    bool operator==(const LabeledPair&) const = default;
};

// Label 1 iff the pair has an edge in `lambda_graph`. All positives are kept
// and negatives are sampled uniformly without replacement down to the
// positive count. Output is positives then negatives, each in input order.
// Throws if there is no positive.
std::vector<LabeledPair> label_and_balance(std::span<const ConceptPair> pairs, const CoocGraph& lambda_graph,
                                           std::uint64_t seed);

enum class FeatureSource { word_dynamic, word_static, word_hand, knowledge_hand, knowledge_node };

std::string_view to_string(FeatureSource s);
std::optional<FeatureSource> parse_feature_source(std::string_view s);
inline constexpr FeatureSource kAllSources[] = {FeatureSource::word_dynamic, FeatureSource::word_static,
                                                FeatureSource::word_hand, FeatureSource::knowledge_hand,
                                                FeatureSource::knowledge_node};

// Whatever representations a feature source may need. Unused members may be null.
struct FeatureInputs {
    int year = 0;                                  // end of the delta window
    const EmbeddingTimeline* dynamic = nullptr;    // word-dynamic
    const EmbeddingTimeline* static_model = nullptr; // word-static, word-hand
    const HandcraftedExtractor* handcrafted = nullptr; // knowledge-hand
    const EmbeddingTimeline* node = nullptr;       // knowledge-node
};

struct PairSample {
    ConceptId c1 = 0;
    ConceptId c2 = 0;
    int label = 0;
    std::vector<double> features;
    FeatureSource source = FeatureSource::word_dynamic;
};

std::size_t feature_width(FeatureSource source, std::size_t embedding_dim);

// Feature vector of the ordered pair (a, b). Throws naming a concept that has
// no vector.
std::vector<double> pair_features(FeatureSource source, const FeatureInputs& inputs, ConceptId a, ConceptId b);

// With `both_orders`, each pair is emitted as (c1,c2) followed by (c2,c1).
std::vector<PairSample> assemble_feature_vectors(std::span<const LabeledPair> pairs, FeatureSource source,
                                                 const FeatureInputs& inputs, bool both_orders);

struct TrainValSplit {
    std::vector<LabeledPair> train;
    std::vector<LabeledPair> val;
};

// Seeded shuffle, then the first `train_fraction` of pairs go to train.
TrainValSplit split_train_val(std::span<const LabeledPair> pairs, double train_fraction, std::uint64_t seed);

struct PairDataset {
    std::vector<LabeledPair> train;
    std::vector<LabeledPair> val;
    std::vector<LabeledPair> test;
};

// Candidate enumeration, labeling and balancing for both windows of `split`.
// The balanced train-window pairs are split into train and validation.
PairDataset build_pair_dataset(const std::vector<TokenizedDoc>& docs, const SplitSpec& split, int min_degree,
                               std::uint64_t seed, double train_fraction = 0.8);

// CSV `c1,c2,label,source_tag` plus a binary sidecar holding the features in
// the same row order ("FEAT", version, rows u64, cols u32, float64 row-major).
void write_samples(const std::vector<PairSample>& samples, const std::filesystem::path& csv_path,
                   const std::filesystem::path& feature_path);
std::vector<PairSample> read_samples(const std::filesystem::path& csv_path, const std::filesystem::path& feature_path);

void write_pairs_csv(const std::vector<LabeledPair>& pairs, const std::filesystem::path& path);
std::vector<LabeledPair> read_pairs_csv(const std::filesystem::path& path);

} // namespace dynlink
