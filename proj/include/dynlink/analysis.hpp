#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynlink/corpus.hpp"
#include "dynlink/evaluation.hpp"
#include "dynlink/mlp.hpp"

namespace dynlink {

struct Projection2D {
    std::vector<std::array<double, 2>> points; // one per input row, same order
    std::string method = "pca";
    std::array<double, 2> explained_variance{0, 0};
    std::array<Vector, 2> axes;
    Vector mean;
};

// Top-2 principal axes by power iteration with deflation. The second axis is
// kept orthogonal to the first and the pair is rotated to diagonalize the
// projected covariance. Each axis is signed so its largest-magnitude loading
// is positive. Throws on fewer than 2 rows or zero variance.
Projection2D pca_project(const Matrix& data, double tol = 1e-9, int max_iter = 1000);

struct ClusterReport {
    int k = 0;
    std::vector<int> assignment; // cluster per row
    Matrix centroids;            // k x dim
    double wcss = 0;
    std::vector<double> wcss_history; // after each Lloyd update of the winning restart
    std::vector<std::vector<std::size_t>> top; // per cluster, key rows best first
};

double within_cluster_ss(const Matrix& points, std::span<const int> assignment, const Matrix& centroids);

// Lloyd iterations from a D^2-seeded start, best of `restarts` by WCSS.
// Throws when k exceeds the number of distinct points.
ClusterReport kmeans_cluster(const Matrix& points, int k, std::uint64_t seed, int restarts = 10, int max_iter = 300);

// Fills report.top: per cluster, members ranked by rank(distance to centroid)
// + rank(frequency, descending). Ties go to the closer member, then row order.
void cluster_report(ClusterReport& report, const Matrix& points, std::span<const double> frequencies, int m = 3);

// Shortest round-trip decimal form.
std::string format_number(double v);

struct PlotArtifacts {
    // Scatter
    const Projection2D* projection = nullptr;
    const ClusterReport* clusters = nullptr;
    std::vector<ConceptId> concept_ids; // row labels for the scatter and key tables
    std::vector<std::string> concept_names;
    // Curves, one ROC per named method
    std::vector<std::pair<std::string, RocCurve>> rocs;
    std::vector<CalibrationBin> calibration;
    std::vector<ConfidencePoint> confidence;
    // Written whenever set, so an empty list gives a header-only CSV.
    std::optional<std::vector<Trajectory>> trajectories;
    const CorpusStats* stats = nullptr;
};

// Writes a CSV and a standalone SVG for every artifact class present. Returns
// the written file names, sorted.
std::vector<std::string> emit_plots(const PlotArtifacts& artifacts, const std::filesystem::path& out_dir);

void write_scatter_csv(const Projection2D& proj, const ClusterReport* clusters, std::span<const ConceptId> ids,
                       const std::filesystem::path& path);
void write_cluster_table_csv(const ClusterReport& report, std::span<const ConceptId> ids,
                             std::span<const std::string> names, const std::filesystem::path& path);
void write_roc_csv(const std::vector<std::pair<std::string, RocCurve>>& rocs, const std::filesystem::path& path);
void write_calibration_csv(const std::vector<CalibrationBin>& table, const std::filesystem::path& path);
void write_confidence_csv(const std::vector<ConfidencePoint>& curve, const std::filesystem::path& path);
void write_trajectories_csv(const std::vector<Trajectory>& trajectories, const std::filesystem::path& path);

} // namespace dynlink
