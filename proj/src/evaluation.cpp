#include "dynlink/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dynlink/error.hpp"

namespace dynlink {

namespace {

std::pair<std::size_t, std::size_t> class_counts(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("scores and labels differ in length");
    std::size_t pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw Error("labels must be 0 or 1");
        pos += static_cast<std::size_t>(l);
    }
    return {pos, labels.size() - pos};
}

} // namespace

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
    auto [pos, neg] = class_counts(scores, labels);
    if (pos == 0 || neg == 0) throw Error("roc_auc needs both classes");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    double area2 = 0.0; // twice the area, in units of (neg * pos)
    for (std::size_t i = 0; i < order.size();) {
        const double t = scores[order[i]];
        std::size_t tp0 = tp, fp0 = fp;
        for (; i < order.size() && scores[order[i]] == t; ++i) {
            if (labels[order[i]]) {
                ++tp;
            } else {
                ++fp;
            }
        }
        area2 += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0);
        curve.points.push_back({t, static_cast<double>(fp) / static_cast<double>(neg),
                                static_cast<double>(tp) / static_cast<double>(pos)});
    }
    curve.auc = area2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
    return curve;
}

double rank_auc(std::span<const double> scores, std::span<const int> labels) {
    auto [pos, neg] = class_counts(scores, labels);
    if (pos == 0 || neg == 0) throw Error("rank_auc needs both classes");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) rank_sum += mid;
        }
        i = j;
    }
    const double p = static_cast<double>(pos);
    return (rank_sum - p * (p + 1) / 2.0) / (p * static_cast<double>(neg));
}

std::vector<CalibrationBin> calibration_table(std::span<const double> scores, std::span<const int> labels, int bins) {
    class_counts(scores, labels);
    if (bins < 2) throw Error("calibration_table needs at least 2 bins");
    std::vector<CalibrationBin> table(static_cast<std::size_t>(bins));
    std::vector<double> sum(table.size(), 0.0);
    for (std::size_t i = 0; i < table.size(); ++i) {
        table[i].lower = static_cast<double>(i) / bins;
        table[i].upper = static_cast<double>(i + 1) / bins;
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        double s = std::clamp(scores[i], 0.0, 1.0);
        auto b = std::min(static_cast<std::size_t>(s * bins), table.size() - 1);
        table[b].count += 1;
        table[b].positives += static_cast<std::size_t>(labels[i]);
        sum[b] += scores[i];
    }
    for (std::size_t b = 0; b < table.size(); ++b) {
        if (table[b].count == 0) continue;
        const auto c = static_cast<double>(table[b].count);
        table[b].mean_predicted = sum[b] / c;
        table[b].positive_rate = static_cast<double>(table[b].positives) / c;
    }
    return table;
}

std::vector<double> default_discard_fractions() {
    std::vector<double> f;
    for (int i = 0; i <= 10; ++i) f.push_back(0.05 * i);
    return f;
}

std::vector<std::size_t> confident_subset(std::span<const double> scores, double fraction) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw Error("discard fraction must be in [0,1)");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(scores[a] - 0.5) < std::abs(scores[b] - 0.5);
    });
    // Guard against 0.3 * 10 evaluating to 2.9999...
    auto drop = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(scores.size()) + 1e-9));
    std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(drop), order.end());
    std::sort(kept.begin(), kept.end());
    return kept;
}

std::vector<ConfidencePoint> confidence_filter_curve(std::span<const double> scores, std::span<const int> labels,
                                                     std::span<const double> fractions) {
    class_counts(scores, labels);
    std::vector<ConfidencePoint> curve;
    std::vector<double> s;
    std::vector<int> l;
    for (double f : fractions) {
        auto kept = confident_subset(scores, f);
        s.clear();
        l.clear();
        std::size_t pos = 0;
        for (auto i : kept) {
            s.push_back(scores[i]);
            l.push_back(labels[i]);
            pos += static_cast<std::size_t>(labels[i]);
        }
        ConfidencePoint pt{f, kept.size(), std::nullopt};
        if (pos > 0 && pos < kept.size()) pt.auc = roc_auc(s, l).auc;
        curve.push_back(pt);
    }
    return curve;
}

std::optional<int> first_cooccurrence_year(const std::vector<TokenizedDoc>& docs, ConceptPair pair) {
    std::optional<int> first;
    for (const auto& d : docs) {
        bool a = false, b = false;
        for (const auto& cp : d.concept_positions) {
            a = a || cp.concept_id == pair.first;
            b = b || cp.concept_id == pair.second;
        }
        if (a && b && (!first || d.year < *first)) first = d.year;
    }
    return first;
}

Trajectory prediction_trajectory(const Mlp& model, const EmbeddingTimeline& timeline, ConceptPair pair,
                                 std::span<const int> years) {
    Trajectory t;
    t.pair = pair;
    if (!timeline.row_of(pair.first)) throw Error("unknown concept " + std::to_string(pair.first));
    if (!timeline.row_of(pair.second)) throw Error("unknown concept " + std::to_string(pair.second));
    Matrix x(1, static_cast<Eigen::Index>(2 * timeline.dim));
    for (int year : years) {
        FeatureInputs in;
        in.year = year;
        in.dynamic = &timeline;
        auto f = pair_features(FeatureSource::word_dynamic, in, pair.first, pair.second);
        for (std::size_t i = 0; i < f.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = f[i];
        t.points.emplace_back(year, model.predict_proba(x)[0]);
    }
    return t;
}

} // namespace dynlink
