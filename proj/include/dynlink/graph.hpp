#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "dynlink/concepts.hpp"
#include "dynlink/corpus.hpp"
#include "dynlink/sgns.hpp"

namespace dynlink {

// Weighted, undirected concept co-occurrence graph. Edge weight is the number
// of abstracts in which both endpoints appear.
class CoocGraph {
public:
    struct Edge {
        ConceptId to = 0;
        std::uint32_t weight = 0;
        bool operator==(const Edge&) const = default;
    };

    CoocGraph() = default;
    explicit CoocGraph(int year) : year_(year) {}

    int year() const { return year_; }
    // One past the largest node id that may carry edges.
    std::size_t node_bound() const { return adj_.size(); }

    // Neighbors sorted by id; empty for unknown nodes.
    std::span<const Edge> neighbors(ConceptId v) const;
    std::size_t degree(ConceptId v) const { return neighbors(v).size(); }
    std::uint32_t weight(ConceptId a, ConceptId b) const;
    bool connected(ConceptId a, ConceptId b) const { return weight(a, b) > 0; }
    std::size_t edge_count() const;

    // Adds `w` to the weight of edge {a, b}. Self-loops are ignored.
    void add(ConceptId a, ConceptId b, std::uint32_t w = 1);

    bool operator==(const CoocGraph&) const = default;

private:
    int year_ = 0;
    std::vector<std::vector<Edge>> adj_;
};

// Every unordered pair of distinct concepts in an abstract with year in
// `years` increments that edge by one. Repeated mentions count once.
CoocGraph build_cooc_graph(const std::vector<TokenizedDoc>& docs, YearRange years);
// Cumulative graph over all documents with year <= up_to_year.
CoocGraph build_cooc_graph(const std::vector<TokenizedDoc>& docs, int up_to_year);

// CSV `concept_a,concept_b,weight,year`, one row per edge with a < b.
void write_graph_csv(const std::vector<CoocGraph>& graphs, const std::filesystem::path& path);

// Order: deg(v1), deg(v2) for years y, y-1, y-2; second-order degree of v1, v2
// for the same years; |N(v1) & N(v2)| for the same years.
struct PairFeatures15 {
    std::array<double, 15> values{};

    static const std::array<std::string_view, 15>& names();
};

// Per-node statistics of the three graphs, computed once and shared across pairs.
class HandcraftedExtractor {
public:
    HandcraftedExtractor(const CoocGraph& current, const CoocGraph& prev1, const CoocGraph& prev2);

    PairFeatures15 operator()(ConceptId v1, ConceptId v2) const;

private:
    std::array<const CoocGraph*, 3> graphs_;
    std::array<std::vector<std::uint32_t>, 3> second_order_;
};

PairFeatures15 handcrafted_features(const CoocGraph& current, const CoocGraph& prev1, const CoocGraph& prev2,
                                    ConceptId v1, ConceptId v2);

// Distinct vertices within distance 2 of v, excluding v.
std::size_t second_order_degree(const CoocGraph& g, ConceptId v);
std::size_t shared_neighbors(const CoocGraph& g, ConceptId a, ConceptId b);

// w1.w2 / (|w1| |w2|), 0 when either norm is 0. Throws on dimension mismatch.
double cosine_feature(std::span<const float> w1, std::span<const float> w2);

struct Node2VecConfig {
    double p = 1.0;
    double q = 1.0;
    int walk_length = 80;
    int walks_per_node = 10;
    std::uint64_t seed = 1;
};

using WalkCorpus = std::vector<std::vector<ConceptId>>;

// Second-order biased walks; nodes without neighbors are skipped. From edge
// (t -> v) the next node x is drawn with weight w(v,x) * (1/p if x == t, 1 if
// x is adjacent to t, 1/q otherwise).
WalkCorpus node2vec_walk_corpus(const CoocGraph& graph, const Node2VecConfig& cfg);

// Skip-gram node vectors trained on the walk corpus, as a one-year timeline
// keyed by the graph's year.
EmbeddingTimeline node2vec_embeddings(const CoocGraph& graph, const Node2VecConfig& walk_cfg,
                                      const TrainConfig& train_cfg);

} // namespace dynlink
