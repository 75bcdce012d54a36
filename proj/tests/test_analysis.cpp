#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "dynlink/analysis.hpp"
#include "dynlink/error.hpp"
#include "test_support.hpp"

using namespace dynlink;
using testing::TempDir;

namespace {

Matrix to_matrix(const Projection2D& p) {
    Matrix m(static_cast<Eigen::Index>(p.points.size()), 2);
    for (std::size_t i = 0; i < p.points.size(); ++i) {
        m(static_cast<Eigen::Index>(i), 0) = p.points[i][0];
        m(static_cast<Eigen::Index>(i), 1) = p.points[i][1];
    }
    return m;
}

Matrix blobs(std::mt19937_64& rng, int per_blob, std::vector<int>& truth) {
    const double centers[3][2] = {{0, 0}, {20, 0}, {0, 20}};
    std::normal_distribution<double> nd(0, 1);
    Matrix m(3 * per_blob, 2);
    truth.clear();
    for (int b = 0; b < 3; ++b) {
        for (int i = 0; i < per_blob; ++i) {
            const auto r = static_cast<Eigen::Index>(b * per_blob + i);
            m(r, 0) = centers[b][0] + nd(rng);
            m(r, 1) = centers[b][1] + nd(rng);
            truth.push_back(b);
        }
    }
    return m;
}

double choose2(double n) { return n * (n - 1) / 2; }

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1;
        ra[a[i]] += 1;
        rb[b[i]] += 1;
    }
    double index = 0, sa = 0, sb = 0;
    for (const auto& [k, n] : joint) index += choose2(n);
    for (const auto& [k, n] : ra) sa += choose2(n);
    for (const auto& [k, n] : rb) sb += choose2(n);
    const double expected = sa * sb / choose2(static_cast<double>(a.size()));
    return (index - expected) / ((sa + sb) / 2 - expected);
}

} // namespace

TEST_CASE("points in a plane are reconstructed exactly") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> nd;
    const int dim = 12;
    Vector u(dim), v(dim), c(dim);
    for (int i = 0; i < dim; ++i) {
        u[i] = nd(rng);
        v[i] = nd(rng);
        c[i] = nd(rng);
    }
    Matrix data(40, dim);
    for (int r = 0; r < 40; ++r) data.row(r) = (c + 3 * nd(rng) * u + nd(rng) * v).transpose();

    auto p = pca_project(data);
    CHECK(p.method == "pca");
    REQUIRE(p.points.size() == 40);
    double worst = 0;
    for (int r = 0; r < 40; ++r) {
        Vector rec = p.mean + p.points[static_cast<std::size_t>(r)][0] * p.axes[0] +
                     p.points[static_cast<std::size_t>(r)][1] * p.axes[1];
        worst = std::max(worst, (rec - data.row(r).transpose()).norm());
    }
    CHECK(worst < 1e-8);
    CHECK(std::abs(p.axes[0].norm() - 1) < 1e-12);
    CHECK(std::abs(p.axes[0].dot(p.axes[1])) < 1e-10);
}

TEST_CASE("the first axis follows the stretched direction within one degree") {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> nd;
    const double theta = 0.6;
    Matrix data(5000, 2);
    for (int r = 0; r < 5000; ++r) {
        const double a = 5 * nd(rng), b = nd(rng);
        data(r, 0) = a * std::cos(theta) - b * std::sin(theta) + 1;
        data(r, 1) = a * std::sin(theta) + b * std::cos(theta) - 2;
    }
    auto p = pca_project(data);
    const double cosang = std::abs(p.axes[0][0] * std::cos(theta) + p.axes[0][1] * std::sin(theta));
    CHECK(std::acos(std::min(1.0, cosang)) < std::numbers::pi / 180);
}

TEST_CASE("projected covariance is diagonal and variances are ordered") {
    std::mt19937_64 rng(43);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 10; ++trial) {
        Matrix data(60, 8);
        for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = nd(rng) * (1 + static_cast<double>(i % 8));
        auto p = pca_project(data);
        Matrix pts = to_matrix(p);
        Matrix centered = pts.rowwise() - pts.colwise().mean();
        Matrix cov = centered.transpose() * centered / 60.0;
        CHECK(std::abs(cov(0, 1)) < 1e-6 * cov(0, 0));
        CHECK(p.explained_variance[0] >= p.explained_variance[1]);
        CHECK(p.explained_variance[1] >= 0);
        for (auto a : p.axes) {
            Eigen::Index at;
            a.cwiseAbs().maxCoeff(&at);
            CHECK(a[at] > 0);
        }
        for (const auto& q : p.points) {
            CHECK(std::isfinite(q[0]));
            CHECK(std::isfinite(q[1]));
        }
    }
}

TEST_CASE("pca rejects degenerate input") {
    Matrix one(1, 3);
    one << 1, 2, 3;
    CHECK_THROWS_AS(pca_project(one), Error);
    Matrix same(4, 3);
    same.rowwise() = Eigen::RowVector3d(1, 2, 3);
    CHECK_THROWS_AS(pca_project(same), Error);
}

TEST_CASE("k = 1 gives the mean and the total sum of squares") {
    std::mt19937_64 rng(44);
    std::vector<int> truth;
    auto pts = blobs(rng, 10, truth);
    auto r = kmeans_cluster(pts, 1, 3);
    Eigen::RowVectorXd mean = pts.colwise().mean();
    CHECK((r.centroids.row(0) - mean).norm() < 1e-12);
    const double total = (pts.rowwise() - mean).squaredNorm();
    CHECK(r.wcss == doctest::Approx(total).epsilon(1e-12));
    for (int a : r.assignment) CHECK(a == 0);
}

TEST_CASE("three separated blobs are recovered exactly") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 rng(seed);
        std::vector<int> truth;
        auto pts = blobs(rng, 30, truth);
        auto r = kmeans_cluster(pts, 3, seed);
        CHECK(adjusted_rand_index(r.assignment, truth) == doctest::Approx(1.0));
    }
}

TEST_CASE("k-means invariants") {
    std::mt19937_64 rng(45);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 10; ++trial) {
        Matrix pts(80, 2);
        for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = nd(rng);
        const int k = 2 + trial % 6;
        auto r = kmeans_cluster(pts, k, static_cast<std::uint64_t>(trial));
        REQUIRE(r.assignment.size() == 80);
        REQUIRE(!r.wcss_history.empty());
        for (std::size_t i = 1; i < r.wcss_history.size(); ++i) {
            CHECK(r.wcss_history[i] <= r.wcss_history[i - 1] + 1e-12);
        }
        CHECK(r.wcss == doctest::Approx(r.wcss_history.back()));
        CHECK(r.wcss == doctest::Approx(within_cluster_ss(pts, r.assignment, r.centroids)));
        for (int c = 0; c < k; ++c) {
            Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(2);
            int n = 0;
            for (std::size_t i = 0; i < 80; ++i) {
                if (r.assignment[i] == c) {
                    sum += pts.row(static_cast<Eigen::Index>(i));
                    ++n;
                }
            }
            REQUIRE(n > 0);
            CHECK((r.centroids.row(c) - sum / n).norm() < 1e-9);
        }
        CHECK(kmeans_cluster(pts, k, static_cast<std::uint64_t>(trial)).assignment == r.assignment);
    }
}

TEST_CASE("k larger than the distinct point count is an error") {
    Matrix pts(4, 2);
    pts << 0, 0, 0, 0, 1, 1, 1, 1;
    CHECK_THROWS_AS(kmeans_cluster(pts, 3, 1), Error);
    CHECK_NOTHROW(kmeans_cluster(pts, 2, 1));
}

TEST_CASE("key concepts by rank sum, by hand") {
    // Centroid at the origin. Distances 1, 2, 3, sqrt(10) give proximity ranks
    // A1 B2 C3 D4; frequencies 5, 50, 100, 10 give C1 B2 D3 A4. Sums: A5 B4 C4
    // D7, and B beats C on proximity.
    Matrix pts(4, 2);
    pts << 1, 0, -2, 0, 0, 3, 1, -3;
    ClusterReport r;
    r.k = 1;
    r.assignment = {0, 0, 0, 0};
    r.centroids = Matrix::Zero(1, 2);
    std::vector<double> freq{5, 50, 100, 10};
    cluster_report(r, pts, freq, 3);
    REQUIRE(r.top.size() == 1);
    CHECK(r.top[0] == std::vector<std::size_t>{1, 2, 0});

    ClusterReport single;
    single.k = 2;
    single.assignment = {0, 1, 1, 1};
    single.centroids = Matrix::Zero(2, 2);
    single.centroids.row(0) = pts.row(0);
    cluster_report(single, pts, freq, 3);
    CHECK(single.top[0] == std::vector<std::size_t>{0});
    CHECK(single.top[1].size() == 3);
}

TEST_CASE("format_number is shortest round trip") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(-2.5e-10) == "-2.5e-10");
    CHECK(std::stod(format_number(1.0 / 3)) == 1.0 / 3);
}

TEST_CASE("emit_plots writes deterministic CSV and SVG files") {
    std::mt19937_64 rng(46);
    std::vector<int> truth;
    auto pts = blobs(rng, 5, truth);
    Matrix high(15, 4);
    high << pts, pts * 0.5;
    auto proj = pca_project(high);
    auto clusters = kmeans_cluster(to_matrix(proj), 3, 1);
    std::vector<double> freq(15, 1.0);
    cluster_report(clusters, to_matrix(proj), freq, 3);

    CorpusStats stats;
    stats.papers_per_year = {{2000, 3}, {2001, 5}};
    stats.tokens_per_year = {{2000, 30}, {2001, 50}};
    std::vector<double> s{0.2, 0.7, 0.4, 0.9};
    std::vector<int> y{0, 1, 0, 1};

    PlotArtifacts art;
    art.projection = &proj;
    art.clusters = &clusters;
    for (int i = 0; i < 15; ++i) {
        art.concept_ids.push_back(100 + i);
        art.concept_names.push_back("concept " + std::to_string(i));
    }
    art.rocs = {{"word-dynamic", roc_auc(s, y)}};
    art.calibration = calibration_table(s, y);
    art.confidence = confidence_filter_curve(s, y, default_discard_fractions());
    art.trajectories = std::vector<Trajectory>{};
    art.stats = &stats;

    TempDir a, b;
    auto files = emit_plots(art, a.path());
    auto files_b = emit_plots(art, b.path());
    CHECK(files == files_b);
    CHECK(std::is_sorted(files.begin(), files.end()));
    for (const char* stem : {"scatter", "cluster_key_concepts", "roc", "calibration", "confidence", "trajectories",
                             "papers_per_year"}) {
        CHECK(std::find(files.begin(), files.end(), std::string(stem) + ".csv") != files.end());
    }
    for (const auto& f : files) {
        CHECK(testing::read_file(a / f) == testing::read_file(b / f));
        if (f.ends_with(".svg")) CHECK(testing::read_file(a / f).starts_with("<svg"));
    }

    CHECK(testing::read_file(a / "trajectories.csv") == "c1,c2,year,probability,first_cooccurrence\n");
    auto scatter = testing::read_file(a / "scatter.csv");
    CHECK(std::count(scatter.begin(), scatter.end(), '\n') == 16);
    CHECK(scatter.starts_with("concept_id,x,y,cluster\n100,"));
    auto table = testing::read_file(a / "cluster_key_concepts.csv");
    CHECK(table.starts_with("cluster,rank,concept_id,concept\n"));
    CHECK(std::count(table.begin(), table.end(), '\n') == 10);

    PlotArtifacts only_stats;
    only_stats.stats = &stats;
    TempDir c;
    CHECK(emit_plots(only_stats, c.path()) == std::vector<std::string>{"papers_per_year.csv", "papers_per_year.svg"});

    testing::write_file(c / "blocker", "x");
    CHECK_THROWS_AS(emit_plots(only_stats, c / "blocker"), Error);
}
