#include "dynlink/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dynlink/error.hpp"
#include "dynlink/random.hpp"

namespace dynlink {

std::span<const CoocGraph::Edge> CoocGraph::neighbors(ConceptId v) const {
    if (v < 0 || static_cast<std::size_t>(v) >= adj_.size()) return {};
    return adj_[static_cast<std::size_t>(v)];
}

std::uint32_t CoocGraph::weight(ConceptId a, ConceptId b) const {
    auto nb = neighbors(a);
    auto it = std::lower_bound(nb.begin(), nb.end(), b, [](const Edge& e, ConceptId id) { return e.to < id; });
    return (it != nb.end() && it->to == b) ? it->weight : 0;
}

std::size_t CoocGraph::edge_count() const {
    std::size_t n = 0;
    for (const auto& nb : adj_) n += nb.size();
    return n / 2;
}

void CoocGraph::add(ConceptId a, ConceptId b, std::uint32_t w) {
    if (a == b || w == 0) return;
    if (a < 0 || b < 0) throw Error("graph: negative concept id");
    auto need = static_cast<std::size_t>(std::max(a, b)) + 1;
    if (adj_.size() < need) adj_.resize(need);
    auto bump = [&](ConceptId from, ConceptId to) {
        auto& nb = adj_[static_cast<std::size_t>(from)];
        auto it = std::lower_bound(nb.begin(), nb.end(), to, [](const Edge& e, ConceptId id) { return e.to < id; });
        if (it != nb.end() && it->to == to) {
            it->weight += w;
        } else {
            nb.insert(it, Edge{to, w});
        }
    };
    bump(a, b);
    bump(b, a);
}

CoocGraph build_cooc_graph(const std::vector<TokenizedDoc>& docs, YearRange years) {
    CoocGraph g(years.last);
    std::vector<ConceptId> present;
    for (const auto& d : docs) {
        if (!years.contains(d.year)) continue;
        present.clear();
        for (const auto& cp : d.concept_positions) present.push_back(cp.concept_id);
        std::sort(present.begin(), present.end());
        present.erase(std::unique(present.begin(), present.end()), present.end());
        for (std::size_t i = 0; i < present.size(); ++i) {
            for (std::size_t j = i + 1; j < present.size(); ++j) g.add(present[i], present[j]);
        }
    }
    return g;
}

CoocGraph build_cooc_graph(const std::vector<TokenizedDoc>& docs, int up_to_year) {
    int first = up_to_year;
    for (const auto& d : docs) first = std::min(first, d.year);
    return build_cooc_graph(docs, YearRange{first, up_to_year});
}

void write_graph_csv(const std::vector<CoocGraph>& graphs, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "concept_a,concept_b,weight,year\n";
    for (const auto& g : graphs) {
        for (std::size_t a = 0; a < g.node_bound(); ++a) {
            for (const auto& e : g.neighbors(static_cast<ConceptId>(a))) {
                if (static_cast<std::size_t>(e.to) > a) out << a << ',' << e.to << ',' << e.weight << ',' << g.year() << '\n';
            }
        }
    }
}

// ---------------------------------------------------------------- features

const std::array<std::string_view, 15>& PairFeatures15::names() {
    static const std::array<std::string_view, 15> kNames = {
        "deg1_y0",  "deg2_y0",  "deg1_y1",  "deg2_y1",  "deg1_y2",  "deg2_y2",  "sdeg1_y0", "sdeg2_y0",
        "sdeg1_y1", "sdeg2_y1", "sdeg1_y2", "sdeg2_y2", "shared_y0", "shared_y1", "shared_y2"};
    return kNames;
}

std::size_t second_order_degree(const CoocGraph& g, ConceptId v) {
    std::vector<ConceptId> reach;
    for (const auto& e : g.neighbors(v)) {
        reach.push_back(e.to);
        for (const auto& e2 : g.neighbors(e.to)) {
            if (e2.to != v) reach.push_back(e2.to);
        }
    }
    std::sort(reach.begin(), reach.end());
    return static_cast<std::size_t>(std::unique(reach.begin(), reach.end()) - reach.begin());
}

std::size_t shared_neighbors(const CoocGraph& g, ConceptId a, ConceptId b) {
    auto na = g.neighbors(a);
    auto nb = g.neighbors(b);
    std::size_t i = 0, j = 0, n = 0;
    while (i < na.size() && j < nb.size()) {
        if (na[i].to < nb[j].to) {
            ++i;
        } else if (nb[j].to < na[i].to) {
            ++j;
        } else {
            ++n;
            ++i;
            ++j;
        }
    }
    return n;
}

namespace {

std::vector<std::uint32_t> all_second_order(const CoocGraph& g) {
    const std::size_t n = g.node_bound();
    std::vector<std::uint32_t> out(n, 0);
    std::vector<std::uint32_t> mark(n, 0);
    std::uint32_t stamp = 0;
    for (std::size_t v = 0; v < n; ++v) {
        ++stamp;
        mark[v] = stamp;
        std::uint32_t count = 0;
        for (const auto& e : g.neighbors(static_cast<ConceptId>(v))) {
            auto x = static_cast<std::size_t>(e.to);
            if (mark[x] != stamp) {
                mark[x] = stamp;
                ++count;
            }
            for (const auto& e2 : g.neighbors(e.to)) {
                auto y = static_cast<std::size_t>(e2.to);
                if (mark[y] != stamp) {
                    mark[y] = stamp;
                    ++count;
                }
            }
        }
        out[v] = count;
    }
    return out;
}

} // namespace

HandcraftedExtractor::HandcraftedExtractor(const CoocGraph& current, const CoocGraph& prev1, const CoocGraph& prev2)
    : graphs_{&current, &prev1, &prev2} {
    for (std::size_t i = 0; i < 3; ++i) second_order_[i] = all_second_order(*graphs_[i]);
}

PairFeatures15 HandcraftedExtractor::operator()(ConceptId v1, ConceptId v2) const {
    if (v1 == v2) throw Error("handcrafted features need two distinct concepts");
    PairFeatures15 f;
    auto sdeg = [&](std::size_t i, ConceptId v) -> double {
        const auto& s = second_order_[i];
        return (v >= 0 && static_cast<std::size_t>(v) < s.size()) ? s[static_cast<std::size_t>(v)] : 0.0;
    };
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& g = *graphs_[i];
        f.values[2 * i] = static_cast<double>(g.degree(v1));
        f.values[2 * i + 1] = static_cast<double>(g.degree(v2));
        f.values[6 + 2 * i] = sdeg(i, v1);
        f.values[6 + 2 * i + 1] = sdeg(i, v2);
        f.values[12 + i] = static_cast<double>(shared_neighbors(g, v1, v2));
    }
    return f;
}

PairFeatures15 handcrafted_features(const CoocGraph& current, const CoocGraph& prev1, const CoocGraph& prev2,
                                    ConceptId v1, ConceptId v2) {
    if (v1 == v2) throw Error("handcrafted features need two distinct concepts");
    PairFeatures15 f;
    const std::array<const CoocGraph*, 3> graphs{&current, &prev1, &prev2};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& g = *graphs[i];
        f.values[2 * i] = static_cast<double>(g.degree(v1));
        f.values[2 * i + 1] = static_cast<double>(g.degree(v2));
        f.values[6 + 2 * i] = static_cast<double>(second_order_degree(g, v1));
        f.values[6 + 2 * i + 1] = static_cast<double>(second_order_degree(g, v2));
        f.values[12 + i] = static_cast<double>(shared_neighbors(g, v1, v2));
    }
    return f;
}

double cosine_feature(std::span<const float> w1, std::span<const float> w2) {
    if (w1.size() != w2.size()) throw Error("cosine_feature: dimension mismatch");
    double dot = 0, n1 = 0, n2 = 0;
    for (std::size_t i = 0; i < w1.size(); ++i) {
        dot += static_cast<double>(w1[i]) * w2[i];
        n1 += static_cast<double>(w1[i]) * w1[i];
        n2 += static_cast<double>(w2[i]) * w2[i];
    }
    if (n1 == 0 || n2 == 0) return 0.0;
    return std::clamp(dot / (std::sqrt(n1) * std::sqrt(n2)), -1.0, 1.0);
}

// ---------------------------------------------------------------- node2vec

WalkCorpus node2vec_walk_corpus(const CoocGraph& graph, const Node2VecConfig& cfg) {
    if (!(cfg.p > 0) || !(cfg.q > 0)) throw ConfigError("node2vec p and q must be > 0");
    if (cfg.walk_length < 1 || cfg.walks_per_node < 1) throw ConfigError("node2vec walk sizes must be >= 1");

    std::vector<ConceptId> starts;
    for (std::size_t v = 0; v < graph.node_bound(); ++v) {
        if (graph.degree(static_cast<ConceptId>(v)) > 0) starts.push_back(static_cast<ConceptId>(v));
    }

    Rng rng(derive_seed(cfg.seed, 0x2e7));
    std::vector<double> cdf;
    auto pick = [&](std::span<const CoocGraph::Edge> nb) {
        double x = uniform01(rng) * cdf.back();
        auto it = std::upper_bound(cdf.begin(), cdf.end(), x);
        if (it == cdf.end()) --it;
        return nb[static_cast<std::size_t>(it - cdf.begin())].to;
    };

    WalkCorpus walks;
    walks.reserve(starts.size() * static_cast<std::size_t>(cfg.walks_per_node));
    for (int round = 0; round < cfg.walks_per_node; ++round) {
        auto order = starts;
        shuffle(order, rng);
        for (auto start : order) {
            std::vector<ConceptId> walk{start};
            while (walk.size() < static_cast<std::size_t>(cfg.walk_length)) {
                ConceptId cur = walk.back();
                auto nb = graph.neighbors(cur);
                if (nb.empty()) break;
                cdf.clear();
                double acc = 0;
                if (walk.size() == 1) {
                    for (const auto& e : nb) cdf.push_back(acc += e.weight);
                } else {
                    ConceptId prev = walk[walk.size() - 2];
                    for (const auto& e : nb) {
                        double bias = e.to == prev ? 1.0 / cfg.p : graph.connected(prev, e.to) ? 1.0 : 1.0 / cfg.q;
                        cdf.push_back(acc += e.weight * bias);
                    }
                }
                walk.push_back(pick(nb));
            }
            walks.push_back(std::move(walk));
        }
    }
    return walks;
}

EmbeddingTimeline node2vec_embeddings(const CoocGraph& graph, const Node2VecConfig& walk_cfg,
                                      const TrainConfig& train_cfg) {
    auto walks = node2vec_walk_corpus(graph, walk_cfg);
    std::vector<TokenizedDoc> docs;
    docs.reserve(walks.size());
    for (const auto& walk : walks) {
        TokenizedDoc d;
        d.year = graph.year();
        for (auto c : walk) {
            d.concept_positions.push_back({d.tokens.size(), c});
            d.tokens.push_back(concept_token(c));
        }
        docs.push_back(std::move(d));
    }
    if (docs.empty()) throw Error("node2vec: graph has no edges");
    auto corpus = prepare_dynamic_corpus(docs, {graph.year(), graph.year()}, 1);
    return train_static(corpus, graph.year(), train_cfg);
}

} // namespace dynlink
