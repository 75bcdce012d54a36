#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <random>
#include <set>

#include "dynlink/dataset.hpp"
#include "dynlink/error.hpp"
#include "dynlink/log.hpp"
#include "dynlink/random.hpp"
#include "dynlink/synthetic.hpp"
#include "test_support.hpp"

using namespace dynlink;
using testing::TempDir;

namespace {

std::vector<TokenizedDoc> fixture_docs(const SyntheticConfig& cfg) {
    auto corpus = generate_synthetic(cfg);
    ConceptLexicon lex;
    for (const auto& p : corpus.lexicon) lex.add(normalize_text(p));
    PhraseMatcher m(lex);
    std::vector<TokenizedDoc> docs;
    for (const auto& r : corpus.records) docs.push_back(m.replace(normalize_text(r.text), r.year, r.id));
    return docs;
}

EmbeddingTimeline one_year(std::vector<ConceptId> ids, std::vector<std::vector<float>> vecs, int year) {
    EmbeddingTimeline tl;
    tl.years = {year, year};
    tl.dim = vecs.front().size();
    tl.concepts = std::move(ids);
    std::vector<float> flat;
    for (const auto& v : vecs) flat.insert(flat.end(), v.begin(), v.end());
    tl.snapshots = {flat};
    tl.first_seen.assign(tl.concepts.size(), year);
    tl.backfilled.assign(tl.concepts.size(), 0);
    return tl;
}

} // namespace

TEST_CASE("SplitSpec defaults and validation") {
    SplitSpec s;
    CHECK(s.train_delta == YearRange{1994, 2017});
    CHECK(s.train_lambda == YearRange{2018, 2020});
    CHECK(s.test_delta == YearRange{1994, 2020});
    CHECK(s.test_lambda == YearRange{2021, 2023});
    CHECK(s.shift() == 3);
    CHECK_NOTHROW(s.validate());

    auto gap = s;
    gap.train_lambda = {2019, 2020};
    CHECK_THROWS_AS(gap.validate(), ConfigError);
    auto uneven = s;
    uneven.test_lambda = {2021, 2022};
    CHECK_THROWS_AS(uneven.validate(), ConfigError);
}

TEST_CASE("candidate pairs of a complete graph and an edgeless graph") {
    CoocGraph k3;
    k3.add(0, 1);
    k3.add(0, 2);
    k3.add(1, 2);
    std::vector<ConceptId> abc{0, 1, 2};
    CHECK(enumerate_candidate_pairs(k3, abc, 1).empty());

    CoocGraph none;
    std::vector<ConceptId> four{3, 0, 2, 1};
    auto pairs = enumerate_candidate_pairs(none, four, 0);
    CHECK(pairs == std::vector<ConceptPair>{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    CHECK(enumerate_candidate_pairs(none, four, 1).empty());
}

TEST_CASE("candidate pairs equal the complement graph") {
    std::mt19937_64 rng(30);
    for (int trial = 0; trial < 20; ++trial) {
        CoocGraph g;
        std::bernoulli_distribution edge(0.2);
        for (int a = 0; a < 30; ++a) {
            for (int b = a + 1; b < 30; ++b) {
                if (edge(rng)) g.add(a, b);
            }
        }
        std::vector<ConceptId> nodes(30);
        for (int i = 0; i < 30; ++i) nodes[static_cast<std::size_t>(i)] = i;
        const int min_degree = static_cast<int>(trial % 4);
        std::vector<ConceptPair> oracle;
        for (int a = 0; a < 30; ++a) {
            for (int b = a + 1; b < 30; ++b) {
                if (static_cast<int>(g.degree(a)) >= min_degree && static_cast<int>(g.degree(b)) >= min_degree &&
                    !g.connected(a, b)) {
                    oracle.emplace_back(a, b);
                }
            }
        }
        CHECK(enumerate_candidate_pairs(g, nodes, min_degree) == oracle);
    }
}

TEST_CASE("label_and_balance keeps all positives and samples as many negatives") {
    std::vector<ConceptPair> pairs;
    for (int i = 0; i < 20; ++i) pairs.emplace_back(i, 100 + i);
    CoocGraph lambda;
    lambda.add(2, 102);
    lambda.add(7, 107);
    lambda.add(15, 115);
    auto out = label_and_balance(pairs, lambda, 42);
    REQUIRE(out.size() == 6);
    CHECK(out[0] == LabeledPair{{2, 102}, 1});
    CHECK(out[1] == LabeledPair{{7, 107}, 1});
    CHECK(out[2] == LabeledPair{{15, 115}, 1});

    // Replay of the seeded sampler: partial Fisher-Yates over negative indices.
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < 20; ++i) {
        if (i != 2 && i != 7 && i != 15) neg.push_back(i);
    }
    Rng rng(derive_seed(42, 0xba1));
    for (std::size_t i = 0; i < 3; ++i) std::swap(neg[i], neg[i + uniform_index(rng, neg.size() - i)]);
    neg.resize(3);
    std::sort(neg.begin(), neg.end());
    for (std::size_t k = 0; k < 3; ++k) CHECK(out[3 + k] == LabeledPair{pairs[neg[k]], 0});

    CHECK(label_and_balance(pairs, lambda, 42) == out);
    CHECK_THROWS_AS(label_and_balance(pairs, CoocGraph{}, 42), Error);
}

TEST_CASE("negative sampling is uniform across seeds") {
    std::vector<ConceptPair> pairs;
    for (int i = 0; i < 10; ++i) pairs.emplace_back(i, 50 + i);
    CoocGraph lambda;
    lambda.add(0, 50);
    lambda.add(1, 51);
    std::map<ConceptPair, int> picks;
    const int runs = 9000;
    for (int s = 0; s < runs; ++s) {
        for (const auto& lp : label_and_balance(pairs, lambda, static_cast<std::uint64_t>(s))) {
            if (lp.label == 0) ++picks[lp.pair];
        }
    }
    CHECK(picks.size() == 8);
    for (const auto& [p, n] : picks) {
        // Each of 8 negatives is chosen with probability 2/8.
        CHECK(std::abs(n / static_cast<double>(runs) - 0.25) < 0.02);
    }
}

TEST_CASE("fewer negatives than positives keeps all of them") {
    log::level() = log::Level::quiet;
    std::vector<ConceptPair> pairs{{0, 1}, {0, 2}, {1, 2}};
    CoocGraph lambda;
    lambda.add(0, 1);
    lambda.add(0, 2);
    auto out = label_and_balance(pairs, lambda, 1);
    CHECK(out.size() == 3);
    CHECK(out[2] == LabeledPair{{1, 2}, 0});
    log::level() = log::Level::warn;
}

TEST_CASE("feature widths") {
    CHECK(feature_width(FeatureSource::word_dynamic, 128) == 256);
    CHECK(feature_width(FeatureSource::word_static, 128) == 256);
    CHECK(feature_width(FeatureSource::knowledge_node, 64) == 128);
    CHECK(feature_width(FeatureSource::word_hand, 128) == 1);
    CHECK(feature_width(FeatureSource::knowledge_hand, 128) == 15);
    for (auto s : kAllSources) CHECK(parse_feature_source(to_string(s)) == s);
    CHECK_FALSE(parse_feature_source("knowledge-prone").has_value());
}

TEST_CASE("pair features per source") {
    std::vector<float> v(128, 0.25f), w(128, -1.0f);
    v[0] = 2;
    auto dyn = one_year({4, 9}, {v, w}, 2010);
    auto stat = one_year({4, 9, 11}, {v, v, w}, 2010);
    CoocGraph g(2010), g1(2009), g2(2008);
    HandcraftedExtractor hand(g, g1, g2);
    FeatureInputs in{2010, &dyn, &stat, &hand, &dyn};

    auto f = pair_features(FeatureSource::word_dynamic, in, 4, 9);
    REQUIRE(f.size() == 256);
    CHECK(f[0] == 2);
    CHECK(f[128] == -1);
    CHECK(pair_features(FeatureSource::word_dynamic, in, 9, 4)[0] == -1);

    CHECK(pair_features(FeatureSource::word_hand, in, 4, 9) == std::vector<double>{1.0});
    CHECK(pair_features(FeatureSource::word_hand, in, 4, 11)[0] < 0);
    CHECK(pair_features(FeatureSource::knowledge_hand, in, 4, 9) == std::vector<double>(15, 0.0));

    CHECK_THROWS_WITH_AS(pair_features(FeatureSource::word_dynamic, in, 4, 11), doctest::Contains("11"), Error);
    FeatureInputs missing{2010, nullptr, nullptr, nullptr, nullptr};
    CHECK_THROWS_AS(pair_features(FeatureSource::word_static, missing, 4, 9), Error);
}

TEST_CASE("assembly emits both orders on request") {
    std::vector<float> a{1, 0}, b{0, 1};
    auto tl = one_year({1, 2}, {a, b}, 2000);
    FeatureInputs in{2000, &tl, nullptr, nullptr, nullptr};
    std::vector<LabeledPair> pairs{{{1, 2}, 1}};
    auto once = assemble_feature_vectors(pairs, FeatureSource::word_dynamic, in, false);
    REQUIRE(once.size() == 1);
    CHECK(once[0].features == std::vector<double>{1, 0, 0, 1});
    auto twice = assemble_feature_vectors(pairs, FeatureSource::word_dynamic, in, true);
    REQUIRE(twice.size() == 2);
    CHECK(twice[1].c1 == 2);
    CHECK(twice[1].c2 == 1);
    CHECK(twice[1].label == 1);
    CHECK(twice[1].features == std::vector<double>{0, 1, 1, 0});
}

TEST_CASE("train/validation split is a seeded partition") {
    std::vector<LabeledPair> pairs;
    for (int i = 0; i < 50; ++i) pairs.push_back({{i, i + 1}, i % 2});
    auto s = split_train_val(pairs, 0.8, 7);
    CHECK(s.train.size() == 40);
    CHECK(s.val.size() == 10);
    std::set<ConceptPair> seen;
    for (const auto& p : s.train) seen.insert(p.pair);
    for (const auto& p : s.val) CHECK(seen.insert(p.pair).second);
    CHECK(seen.size() == 50);
    CHECK(split_train_val(pairs, 0.8, 7).train == s.train);
    CHECK(split_train_val(pairs, 0.8, 8).train != s.train);
}

TEST_CASE("dataset on the fixture corpus: no leakage, balanced, deterministic") {
    auto cfg = fixture_config();
    auto docs = fixture_docs(cfg);
    const auto& split = cfg.split;
    auto ds = build_pair_dataset(docs, split, 1, 11);
    REQUIRE(!ds.train.empty());
    REQUIRE(!ds.test.empty());

    auto check_window = [&](const std::vector<LabeledPair>& pairs, YearRange delta, YearRange lambda) {
        auto dg = build_cooc_graph(docs, delta);
        auto lg = build_cooc_graph(docs, lambda);
        for (const auto& lp : pairs) {
            CHECK(lp.pair.first < lp.pair.second);
            CHECK_FALSE(dg.connected(lp.pair.first, lp.pair.second));
            CHECK(dg.degree(lp.pair.first) >= 1);
            CHECK(dg.degree(lp.pair.second) >= 1);
            CHECK(lp.label == (lg.connected(lp.pair.first, lp.pair.second) ? 1 : 0));
        }
    };
    std::vector<LabeledPair> train_window = ds.train;
    train_window.insert(train_window.end(), ds.val.begin(), ds.val.end());
    check_window(train_window, split.train_delta, split.train_lambda);
    check_window(ds.test, split.test_delta, split.test_lambda);

    auto positives = [](const std::vector<LabeledPair>& v) {
        return std::count_if(v.begin(), v.end(), [](const LabeledPair& p) { return p.label == 1; });
    };
    CHECK(2 * positives(train_window) == static_cast<std::ptrdiff_t>(train_window.size()));
    CHECK(2 * positives(ds.test) == static_cast<std::ptrdiff_t>(ds.test.size()));
    CHECK(ds.train.size() == static_cast<std::size_t>(0.8 * static_cast<double>(train_window.size()) + 0.5));

    auto again = build_pair_dataset(docs, split, 1, 11);
    CHECK(again.train == ds.train);
    CHECK(again.val == ds.val);
    CHECK(again.test == ds.test);

    auto other = build_pair_dataset(docs, split, 1, 11, 0.5);
    CHECK(other.train.size() == train_window.size() / 2 + train_window.size() % 2);
}

TEST_CASE("samples and pairs round trip through their files") {
    std::vector<PairSample> samples{
        {1, 2, 1, {0.1, -2.5, 1e-300}, FeatureSource::knowledge_node},
        {3, 0, 0, {4, 5, 6}, FeatureSource::knowledge_node},
    };
    TempDir dir;
    write_samples(samples, dir / "s.csv", dir / "s.feat");
    CHECK(testing::read_file(dir / "s.csv") == "c1,c2,label,source_tag\n1,2,1,knowledge-node\n3,0,0,knowledge-node\n");
    auto back = read_samples(dir / "s.csv", dir / "s.feat");
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].c1 == samples[i].c1);
        CHECK(back[i].c2 == samples[i].c2);
        CHECK(back[i].label == samples[i].label);
        CHECK(back[i].source == samples[i].source);
        CHECK(back[i].features == samples[i].features);
    }

    std::vector<LabeledPair> pairs{{{1, 5}, 1}, {{2, 3}, 0}};
    write_pairs_csv(pairs, dir / "p.csv");
    CHECK(read_pairs_csv(dir / "p.csv") == pairs);

    auto feat = testing::read_file(dir / "s.feat");
    testing::write_file(dir / "cut.feat", feat.substr(0, feat.size() - 3));
    CHECK_THROWS_AS(read_samples(dir / "s.csv", dir / "cut.feat"), Error);
}
