#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dynlink/concepts.hpp"
#include "dynlink/dataset.hpp"
#include "dynlink/mlp.hpp"
#include "dynlink/sgns.hpp"

namespace dynlink {

struct RocPoint {
    double threshold = 0; // scores >= threshold are called positive
    double fpr = 0;
    double tpr = 0;
};

struct RocCurve {
    std::vector<RocPoint> points; // thresholds descending, starting at (0,0)
    double auc = 0;               // trapezoidal area under `points`
};

// Threshold sweep over the distinct scores. Tied scores enter together, which
// gives ties half credit. Throws unless both classes are present.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

// Mann-Whitney statistic with mid-ranks for ties.
double rank_auc(std::span<const double> scores, std::span<const int> labels);

struct CalibrationBin {
    double lower = 0;
    double upper = 0;
    double mean_predicted = 0; // 0 for empty bins
    double positive_rate = 0;  // 0 for empty bins
    std::size_t count = 0;
    std::size_t positives = 0;
};

// Equal-width bins [i/B, (i+1)/B), the last one closed.
std::vector<CalibrationBin> calibration_table(std::span<const double> scores, std::span<const int> labels, int bins = 10);

struct ConfidencePoint {
    double fraction = 0;
    std::size_t retained = 0;
    std::optional<double> auc; // nullopt when the retained set has one class
};

std::vector<double> default_discard_fractions();

// Indices kept after discarding the floor(f*N) samples closest to 0.5 (ties
// resolved by input order).
std::vector<std::size_t> confident_subset(std::span<const double> scores, double fraction);

std::vector<ConfidencePoint> confidence_filter_curve(std::span<const double> scores, std::span<const int> labels,
                                                     std::span<const double> fractions);

struct Trajectory {
    ConceptPair pair;
    std::vector<std::pair<int, double>> points; // (year, probability)
    std::optional<int> first_cooccurrence;
};

// Earliest year in which both concepts appear in one abstract.
std::optional<int> first_cooccurrence_year(const std::vector<TokenizedDoc>& docs, ConceptPair pair);

// Scores the pair with a fixed model on each year's dynamic snapshot.
Trajectory prediction_trajectory(const Mlp& model, const EmbeddingTimeline& timeline, ConceptPair pair,
                                 std::span<const int> years);

} // namespace dynlink
