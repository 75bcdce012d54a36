#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dynlink/error.hpp"
#include "dynlink/evaluation.hpp"

using namespace dynlink;

namespace {

double pairwise_auc(std::span<const double> s, std::span<const int> y) {
    double wins = 0, total = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (y[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 0) continue;
            total += 1;
            wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    }
    return wins / total;
}

void random_set(std::mt19937_64& rng, std::size_t n, std::vector<double>& s, std::vector<int>& y, bool coarse) {
    std::uniform_real_distribution<double> u(0, 1);
    s.resize(n);
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = u(rng) < 0.4 ? 1 : 0;
        const double base = u(rng) + 0.3 * y[i];
        s[i] = coarse ? std::round(base * 10) / 10 : base;
    }
    y[0] = 1;
    y[1] = 0;
}

TokenizedDoc doc_with(int year, std::vector<ConceptId> concepts) {
    TokenizedDoc d;
    d.year = year;
    for (auto c : concepts) {
        d.concept_positions.push_back({d.tokens.size(), c});
        d.tokens.push_back(concept_token(c));
    }
    return d;
}

// Two concepts whose vectors move linearly from `from` to `to` over the years.
EmbeddingTimeline drifting_timeline(const std::vector<float>& from, const std::vector<float>& to, YearRange years) {
    EmbeddingTimeline tl;
    tl.years = years;
    tl.dim = from.size();
    tl.concepts = {0, 1};
    tl.first_seen = {years.first, years.first};
    tl.backfilled.assign(2 * static_cast<std::size_t>(years.size()), 0);
    for (int y = years.first; y <= years.last; ++y) {
        const float t = static_cast<float>(y - years.first) / static_cast<float>(years.size() - 1);
        std::vector<float> snap;
        for (int c = 0; c < 2; ++c) {
            for (std::size_t i = 0; i < from.size(); ++i) snap.push_back(from[i] + t * (to[i] - from[i]));
        }
        tl.snapshots.push_back(snap);
    }
    return tl;
}

} // namespace

TEST_CASE("roc_auc examples") {
    std::vector<double> s{0.1, 0.4, 0.35, 0.8};
    std::vector<int> y{0, 0, 1, 1};
    auto roc = roc_auc(s, y);
    CHECK(roc.auc == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(rank_auc(s, y) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(pairwise_auc(s, y) == 0.75);

    std::vector<double> sep{0.1, 0.2, 0.8, 0.9};
    CHECK(roc_auc(sep, y).auc == 1.0);
    std::vector<double> tied(4, 0.3);
    CHECK(roc_auc(tied, y).auc == 0.5);

    std::vector<int> one_class{1, 1, 1, 1};
    CHECK_THROWS_AS(roc_auc(s, one_class), Error);
    CHECK_THROWS_AS(rank_auc(s, one_class), Error);
    std::vector<int> short_labels{0, 1};
    CHECK_THROWS_AS(roc_auc(s, short_labels), Error);
}

TEST_CASE("roc curve shape") {
    std::vector<double> s{0.1, 0.4, 0.35, 0.8, 0.4};
    std::vector<int> y{0, 0, 1, 1, 1};
    auto roc = roc_auc(s, y);
    REQUIRE(roc.points.size() == 5); // origin plus 4 distinct scores
    CHECK(roc.points.front().fpr == 0);
    CHECK(roc.points.front().tpr == 0);
    CHECK(roc.points.back().fpr == 1);
    CHECK(roc.points.back().tpr == 1);
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
        CHECK(roc.points[i].threshold < roc.points[i - 1].threshold);
        CHECK(roc.points[i].fpr >= roc.points[i - 1].fpr);
        CHECK(roc.points[i].tpr >= roc.points[i - 1].tpr);
    }
}

TEST_CASE("threshold sweep equals the pairwise statistic on random sets") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> s;
        std::vector<int> y;
        random_set(rng, 2 + rng() % 499, s, y, trial % 2 == 0);
        const double oracle = pairwise_auc(s, y);
        const double sweep = roc_auc(s, y).auc;
        CHECK(std::abs(sweep - oracle) < 1e-9);
        CHECK(std::abs(rank_auc(s, y) - oracle) < 1e-9);
        CHECK(sweep >= 0);
        CHECK(sweep <= 1);
    }
}

TEST_CASE("AUC is unchanged by strictly increasing transforms") {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s;
        std::vector<int> y;
        random_set(rng, 100, s, y, trial % 2 == 1);
        std::vector<double> t;
        for (double v : s) t.push_back(std::exp(3 * v) - 7);
        CHECK(roc_auc(t, y).auc == doctest::Approx(roc_auc(s, y).auc).epsilon(1e-12));
    }
}

TEST_CASE("calibration with constant scores") {
    std::vector<double> s(10, 0.5);
    std::vector<int> y{1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
    auto table = calibration_table(s, y);
    REQUIRE(table.size() == 10);
    for (std::size_t b = 0; b < 10; ++b) {
        CHECK(table[b].lower == doctest::Approx(0.1 * static_cast<double>(b)));
        CHECK(table[b].count == (b == 5 ? 10u : 0u));
    }
    CHECK(table[5].positive_rate == 0.5);
    CHECK(table[5].mean_predicted == 0.5);
    CHECK_THROWS_AS(calibration_table(s, y, 1), Error);
}

TEST_CASE("calibration table matches a brute-force recount") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> s(100);
    std::vector<int> y(100);
    for (std::size_t i = 0; i < 100; ++i) {
        s[i] = u(rng);
        y[i] = u(rng) < s[i] ? 1 : 0;
    }
    s[0] = 1.0; // closed last bin
    s[1] = 0.0;
    s[2] = 0.3;
    for (int bins : {2, 5, 10, 7}) {
        auto table = calibration_table(s, y, bins);
        REQUIRE(table.size() == static_cast<std::size_t>(bins));
        std::size_t total = 0;
        double positives = 0;
        for (int b = 0; b < bins; ++b) {
            std::size_t count = 0, pos = 0;
            double sum = 0;
            for (std::size_t i = 0; i < 100; ++i) {
                int idx = std::min(static_cast<int>(s[i] * bins), bins - 1);
                if (idx != b) continue;
                ++count;
                pos += static_cast<std::size_t>(y[i]);
                sum += s[i];
            }
            const auto& bin = table[static_cast<std::size_t>(b)];
            CHECK(bin.count == count);
            CHECK(bin.positives == pos);
            if (count > 0) {
                CHECK(bin.mean_predicted == doctest::Approx(sum / static_cast<double>(count)));
                CHECK(bin.positive_rate == doctest::Approx(static_cast<double>(pos) / static_cast<double>(count)));
            }
            CHECK(bin.positive_rate >= 0);
            CHECK(bin.positive_rate <= 1);
            total += bin.count;
            positives += static_cast<double>(bin.count) * bin.positive_rate;
        }
        CHECK(total == 100);
        CHECK(positives == doctest::Approx(std::accumulate(y.begin(), y.end(), 0.0)));
    }
}

TEST_CASE("default discard grid") {
    auto f = default_discard_fractions();
    REQUIRE(f.size() == 11);
    CHECK(f.front() == 0);
    CHECK(f.back() == doctest::Approx(0.5));
    CHECK(f[4] == doctest::Approx(0.2));
}

TEST_CASE("confident subset equals a sort-and-drop oracle") {
    std::mt19937_64 rng(34);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> s(20);
        for (auto& v : s) v = std::round(u(rng) * 20) / 20; // plenty of ties
        for (double f : {0.0, 0.05, 0.2, 0.35, 0.5}) {
            std::vector<std::size_t> idx(20);
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(),
                             [&](std::size_t a, std::size_t b) { return std::abs(s[a] - 0.5) < std::abs(s[b] - 0.5); });
            const auto drop = static_cast<std::size_t>(std::floor(f * 20 + 1e-9));
            std::vector<std::size_t> keep(idx.begin() + static_cast<std::ptrdiff_t>(drop), idx.end());
            std::sort(keep.begin(), keep.end());
            CHECK(confident_subset(s, f) == keep);
            CHECK(keep.size() == static_cast<std::size_t>(std::ceil((1 - f) * 20 - 1e-9)));
        }
    }
    CHECK_THROWS_AS(confident_subset(std::vector<double>{0.1}, 1.0), Error);
}

TEST_CASE("confidence curve") {
    std::mt19937_64 rng(35);
    std::vector<double> s;
    std::vector<int> y;
    random_set(rng, 200, s, y, false);
    auto fractions = default_discard_fractions();
    auto curve = confidence_filter_curve(s, y, fractions);
    REQUIRE(curve.size() == fractions.size());
    REQUIRE(curve[0].auc.has_value());
    CHECK(*curve[0].auc == roc_auc(s, y).auc);
    CHECK(curve[0].retained == 200);
    for (const auto& p : curve) {
        CHECK(p.retained == static_cast<std::size_t>(std::ceil((1 - p.fraction) * 200 - 1e-9)));
    }

    // Only confident negatives survive: one class left, point undefined.
    std::vector<double> s2{0.01, 0.02, 0.55, 0.45};
    std::vector<int> y2{0, 0, 1, 1};
    std::vector<double> half{0.5};
    auto c2 = confidence_filter_curve(s2, y2, half);
    REQUIRE(c2.size() == 1);
    CHECK(c2[0].retained == 2);
    CHECK_FALSE(c2[0].auc.has_value());
}

TEST_CASE("first co-occurrence year") {
    std::vector<TokenizedDoc> docs{doc_with(2003, {1, 2}), doc_with(2001, {1, 3}), doc_with(2002, {2, 1, 5})};
    CHECK(first_cooccurrence_year(docs, {1, 2}) == 2002);
    CHECK(first_cooccurrence_year(docs, {2, 1}) == 2002);
    CHECK_FALSE(first_cooccurrence_year(docs, {3, 5}).has_value());
}

TEST_CASE("identical embeddings across years give a constant trajectory") {
    std::vector<float> v{0.3f, -0.2f, 0.7f};
    auto tl = drifting_timeline(v, v, {2000, 2005});
    MlpConfig cfg;
    cfg.hidden = {4};
    Mlp m(6, cfg, 2);
    std::vector<int> years{2000, 2001, 2002, 2003, 2004, 2005};
    auto t = prediction_trajectory(m, tl, {0, 1}, years);
    REQUIRE(t.points.size() == 6);
    for (const auto& [year, p] : t.points) CHECK(p == t.points.front().second);
    CHECK(t.points[3].first == 2003);
    CHECK_THROWS_AS(prediction_trajectory(m, tl, {0, 9}, years), Error);
}

TEST_CASE("drifting toward the positive class raises the trajectory (median of 5 seeds)") {
    const std::vector<float> neg{0, 1, 0, 0}, pos{1, 0, 0, 0};
    auto tl = drifting_timeline(neg, pos, {2000, 2009});
    std::vector<int> years(10);
    std::iota(years.begin(), years.end(), 2000);

    std::vector<std::vector<double>> runs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0, 0.15);
        auto make = [&](int n, Matrix& x, std::vector<double>& y) {
            x.resize(n, 8);
            y.resize(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                const bool positive = i % 2 == 0;
                const auto& c = positive ? pos : neg;
                for (int j = 0; j < 8; ++j) x(i, j) = c[static_cast<std::size_t>(j % 4)] + noise(rng);
                y[static_cast<std::size_t>(i)] = positive ? 1 : 0;
            }
        };
        Matrix xt, xv;
        std::vector<double> yt, yv;
        make(200, xt, yt);
        make(50, xv, yv);
        MlpConfig cfg;
        cfg.hidden = {8, 4};
        FitConfig fc;
        fc.batch_size = 20;
        fc.learning_rate = 1e-2;
        fc.seed = seed;
        Mlp m(8, cfg, seed);
        fit(m, xt, yt, xv, yv, fc);
        auto t = prediction_trajectory(m, tl, {0, 1}, years);
        std::vector<double> p;
        for (const auto& pt : t.points) p.push_back(pt.second);
        runs.push_back(p);
    }
    std::vector<double> median;
    for (std::size_t k = 0; k < years.size(); ++k) {
        std::vector<double> v;
        for (const auto& r : runs) v.push_back(r[k]);
        std::sort(v.begin(), v.end());
        median.push_back(v[2]);
    }
    for (std::size_t k = 1; k < median.size(); ++k) CHECK(median[k] >= median[k - 1]);
    CHECK(median.front() < 0.5);
    CHECK(median.back() > 0.5);
}
