#include "dynlink/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "dynlink/error.hpp"
#include "dynlink/random.hpp"

namespace dynlink {

namespace {

// Power iteration on a symmetric PSD matrix. `against` (if non-empty) is
// projected out every step.
std::pair<Vector, double> dominant_axis(const Matrix& c, const Vector* against, double tol, int max_iter) {
    const auto n = c.rows();
    Vector v = Vector::Zero(n);
    // Start from the column with the largest norm; it lies in the range of c.
    double best_norm = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
        Vector col = c.col(j);
        if (against) col -= against->dot(col) * *against;
        if (col.norm() > best_norm) {
            best_norm = col.norm();
            v = col;
        }
    }
    if (best_norm <= std::numeric_limits<double>::min()) {
        // Nothing left: any unit vector orthogonal to `against`.
        for (Eigen::Index j = 0; j < n; ++j) {
            Vector e = Vector::Unit(n, j);
            if (against) e -= against->dot(e) * *against;
            if (e.norm() > 0.5) return {e.normalized(), 0.0};
        }
        return {Vector::Unit(n, 0), 0.0};
    }
    v.normalize();
    for (int it = 0; it < max_iter; ++it) {
        Vector w = c * v;
        if (against) w -= against->dot(w) * *against;
        const double norm = w.norm();
        if (norm <= std::numeric_limits<double>::min()) break;
        w /= norm;
        const double delta = (w - v).norm();
        v = w;
        if (delta < tol) break;
    }
    return {v, v.dot(c * v)};
}

void fix_sign(Vector& v) {
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (v[idx] < 0) v = -v;
}

} // namespace

Projection2D pca_project(const Matrix& data, double tol, int max_iter) {
    const auto rows = data.rows();
    const auto dim = data.cols();
    if (rows < 2) throw Error("pca_project needs at least 2 rows");
    if (dim < 1) throw Error("pca_project needs at least 1 column");

    Projection2D proj;
    proj.mean = data.colwise().mean().transpose();
    Matrix centered = data.rowwise() - proj.mean.transpose();
    Matrix cov = (centered.transpose() * centered) / static_cast<double>(rows - 1);
    if (cov.trace() <= 0.0) throw Error("pca_project: data has zero variance");

    auto [a1, l1] = dominant_axis(cov, nullptr, tol, max_iter);
    Matrix deflated = cov - l1 * a1 * a1.transpose();
    auto [a2, l2] = dim >= 2 ? dominant_axis(deflated, &a1, tol, max_iter) : std::pair{Vector::Zero(dim).eval(), 0.0};

    if (dim >= 2) {
        // Rotate within span{a1, a2} so the projected covariance is diagonal.
        Eigen::Matrix2d b;
        b(0, 0) = a1.dot(cov * a1);
        b(1, 1) = a2.dot(cov * a2);
        b(0, 1) = b(1, 0) = a1.dot(cov * a2);
        const double theta = 0.5 * std::atan2(2.0 * b(0, 1), b(0, 0) - b(1, 1));
        const double cs = std::cos(theta), sn = std::sin(theta);
        Vector r1 = cs * a1 + sn * a2;
        Vector r2 = -sn * a1 + cs * a2;
        a1 = r1.normalized();
        a2 = (r2 - a1.dot(r2) * a1).normalized();
        l1 = a1.dot(cov * a1);
        l2 = a2.dot(cov * a2);
        if (l2 > l1) {
            std::swap(a1, a2);
            std::swap(l1, l2);
        }
        fix_sign(a2);
    }
    fix_sign(a1);

    proj.axes = {a1, a2};
    proj.explained_variance = {std::max(l1, 0.0), std::max(l2, 0.0)};
    proj.points.resize(static_cast<std::size_t>(rows));
    for (Eigen::Index i = 0; i < rows; ++i) {
        Vector row = centered.row(i).transpose();
        proj.points[static_cast<std::size_t>(i)] = {row.dot(a1), dim >= 2 ? row.dot(a2) : 0.0};
    }
    return proj;
}

double within_cluster_ss(const Matrix& points, std::span<const int> assignment, const Matrix& centroids) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        s += (points.row(i) - centroids.row(assignment[static_cast<std::size_t>(i)])).squaredNorm();
    }
    return s;
}

namespace {

struct KMeansRun {
    std::vector<int> assignment;
    Matrix centroids;
    std::vector<double> history;
    double wcss = 0;
};

KMeansRun kmeans_once(const Matrix& x, int k, Rng& rng, int max_iter) {
    const auto n = static_cast<std::size_t>(x.rows());
    KMeansRun run;
    run.centroids.resize(k, x.cols());

    // D^2 seeding: each new center is drawn with probability proportional to
    // its squared distance from the nearest chosen center.
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::size_t first = uniform_index(rng, n);
    run.centroids.row(0) = x.row(static_cast<Eigen::Index>(first));
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], (x.row(static_cast<Eigen::Index>(i)) - run.centroids.row(c - 1)).squaredNorm());
            total += d2[i];
        }
        double r = uniform01(rng) * total;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) continue;
            pick = i;
            r -= d2[i];
            if (r < 0.0) break;
        }
        run.centroids.row(c) = x.row(static_cast<Eigen::Index>(pick));
    }

    run.assignment.assign(n, -1);
    for (int it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = x.row(static_cast<Eigen::Index>(i));
            int best = run.assignment[i] < 0 ? 0 : run.assignment[i];
            double best_d = (row - run.centroids.row(best)).squaredNorm();
            for (int c = 0; c < k; ++c) {
                double d = (row - run.centroids.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (best != run.assignment[i]) {
                run.assignment[i] = best;
                changed = true;
            }
        }
        if (!changed && it > 0) break;

        std::vector<std::size_t> size(static_cast<std::size_t>(k), 0);
        run.centroids.setZero();
        for (std::size_t i = 0; i < n; ++i) {
            run.centroids.row(run.assignment[i]) += x.row(static_cast<Eigen::Index>(i));
            ++size[static_cast<std::size_t>(run.assignment[i])];
        }
        for (int c = 0; c < k; ++c) {
            if (size[static_cast<std::size_t>(c)] > 0) run.centroids.row(c) /= static_cast<double>(size[static_cast<std::size_t>(c)]);
        }
        // An empty cluster takes the point farthest from its centroid, which
        // can only lower the objective.
        for (int c = 0; c < k; ++c) {
            if (size[static_cast<std::size_t>(c)] > 0) continue;
            std::size_t far = 0;
            double far_d = -1;
            for (std::size_t i = 0; i < n; ++i) {
                if (size[static_cast<std::size_t>(run.assignment[i])] < 2) continue;
                double d = (x.row(static_cast<Eigen::Index>(i)) - run.centroids.row(run.assignment[i])).squaredNorm();
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            const int from = run.assignment[far];
            const auto m = static_cast<double>(size[static_cast<std::size_t>(from)]);
            run.centroids.row(from) = (run.centroids.row(from) * m - x.row(static_cast<Eigen::Index>(far))) / (m - 1);
            --size[static_cast<std::size_t>(from)];
            run.assignment[far] = c;
            run.centroids.row(c) = x.row(static_cast<Eigen::Index>(far));
            size[static_cast<std::size_t>(c)] = 1;
        }
        run.history.push_back(within_cluster_ss(x, run.assignment, run.centroids));
    }
    run.wcss = within_cluster_ss(x, run.assignment, run.centroids);
    return run;
}

} // namespace

ClusterReport kmeans_cluster(const Matrix& points, int k, std::uint64_t seed, int restarts, int max_iter) {
    if (k < 1) throw Error("k must be positive");
    if (restarts < 1) throw Error("restarts must be positive");
    std::set<std::vector<double>> distinct;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        distinct.insert(std::vector<double>(points.row(i).begin(), points.row(i).end()));
        if (distinct.size() >= static_cast<std::size_t>(k)) break;
    }
    if (distinct.size() < static_cast<std::size_t>(k)) {
        throw Error("k=" + std::to_string(k) + " exceeds the number of distinct points");
    }

    KMeansRun best;
    bool have = false;
    for (int r = 0; r < restarts; ++r) {
        Rng rng(derive_seed(seed, 0x6b6d, static_cast<std::uint64_t>(r)));
        auto run = kmeans_once(points, k, rng, max_iter);
        if (!have || run.wcss < best.wcss) {
            best = std::move(run);
            have = true;
        }
    }
    ClusterReport rep;
    rep.k = k;
    rep.assignment = std::move(best.assignment);
    rep.centroids = std::move(best.centroids);
    rep.wcss = best.wcss;
    rep.wcss_history = std::move(best.history);
    return rep;
}

void cluster_report(ClusterReport& report, const Matrix& points, std::span<const double> frequencies, int m) {
    if (frequencies.size() != static_cast<std::size_t>(points.rows())) throw Error("one frequency per point required");
    report.top.assign(static_cast<std::size_t>(report.k), {});
    for (int c = 0; c < report.k; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < report.assignment.size(); ++i) {
            if (report.assignment[i] == c) members.push_back(i);
        }
        std::vector<double> dist(points.rows());
        for (auto i : members) {
            dist[i] = (points.row(static_cast<Eigen::Index>(i)) - report.centroids.row(c)).norm();
        }
        auto by_dist = members;
        std::stable_sort(by_dist.begin(), by_dist.end(), [&](auto a, auto b) { return dist[a] < dist[b]; });
        auto by_freq = members;
        std::stable_sort(by_freq.begin(), by_freq.end(),
                         [&](auto a, auto b) { return frequencies[a] > frequencies[b]; });
        std::vector<std::size_t> score(points.rows(), 0), prox_rank(points.rows(), 0);
        for (std::size_t r = 0; r < by_dist.size(); ++r) {
            score[by_dist[r]] += r;
            prox_rank[by_dist[r]] = r;
        }
        for (std::size_t r = 0; r < by_freq.size(); ++r) score[by_freq[r]] += r;
        std::sort(members.begin(), members.end(), [&](auto a, auto b) {
            if (score[a] != score[b]) return score[a] < score[b];
            return prox_rank[a] < prox_rank[b];
        });
        if (members.size() > static_cast<std::size_t>(m)) members.resize(static_cast<std::size_t>(m));
        report.top[static_cast<std::size_t>(c)] = std::move(members);
    }
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

} // namespace

void write_scatter_csv(const Projection2D& proj, const ClusterReport* clusters, std::span<const ConceptId> ids,
                       const std::filesystem::path& path) {
    if (ids.size() != proj.points.size()) throw Error("scatter: one concept id per point required");
    auto out = open_out(path);
    out << "concept_id,x,y,cluster\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out << ids[i] << ',' << format_number(proj.points[i][0]) << ',' << format_number(proj.points[i][1]) << ','
            << (clusters ? clusters->assignment.at(i) : -1) << '\n';
    }
}

void write_cluster_table_csv(const ClusterReport& report, std::span<const ConceptId> ids,
                             std::span<const std::string> names, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "cluster,rank,concept_id,concept\n";
    for (std::size_t c = 0; c < report.top.size(); ++c) {
        for (std::size_t r = 0; r < report.top[c].size(); ++r) {
            const auto row = report.top[c][r];
            std::string name = row < names.size() ? names[row] : "";
            out << c << ',' << r + 1 << ',' << ids[row] << ',' << name << '\n';
        }
    }
}

void write_roc_csv(const std::vector<std::pair<std::string, RocCurve>>& rocs, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "method,threshold,fpr,tpr\n";
    for (const auto& [name, curve] : rocs) {
        for (const auto& p : curve.points) {
            out << name << ',' << format_number(p.threshold) << ',' << format_number(p.fpr) << ','
                << format_number(p.tpr) << '\n';
        }
    }
}

void write_calibration_csv(const std::vector<CalibrationBin>& table, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "bin_lower,bin_upper,count,positives,mean_predicted,positive_rate\n";
    for (const auto& b : table) {
        out << format_number(b.lower) << ',' << format_number(b.upper) << ',' << b.count << ',' << b.positives << ','
            << format_number(b.mean_predicted) << ',' << format_number(b.positive_rate) << '\n';
    }
}

void write_confidence_csv(const std::vector<ConfidencePoint>& curve, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "fraction,retained,auc\n";
    for (const auto& p : curve) {
        out << format_number(p.fraction) << ',' << p.retained << ',' << (p.auc ? format_number(*p.auc) : "") << '\n';
    }
}

void write_trajectories_csv(const std::vector<Trajectory>& trajectories, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "c1,c2,year,probability,first_cooccurrence\n";
    for (const auto& t : trajectories) {
        const std::string first = t.first_cooccurrence ? std::to_string(*t.first_cooccurrence) : "";
        for (const auto& [year, p] : t.points) {
            out << t.pair.first << ',' << t.pair.second << ',' << year << ',' << format_number(p) << ',' << first
                << '\n';
        }
    }
}

namespace {

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string tick_auc(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 3);
    return std::string(buf, res.ptr);
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

struct Series {
    std::string name;
    std::vector<std::array<double, 2>> points;
    bool markers_only = false;
    std::vector<std::size_t> colors; // per point, markers only
};

struct Frame {
    double x0, x1, y0, y1;
};

// Fixed-size chart: 480x360 with a 60px left and 40px bottom margin.
class Svg {
public:
    Svg(std::string title, std::string xlabel, std::string ylabel, Frame f)
        : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)), f_(f) {
        if (f_.x1 <= f_.x0) f_.x1 = f_.x0 + 1;
        if (f_.y1 <= f_.y0) f_.y1 = f_.y0 + 1;
    }

    void add(Series s) { series_.push_back(std::move(s)); }
    void mark(double x, double y, const std::string& col) { stars_.push_back({x, y, col}); }

    std::string render() const {
        std::ostringstream o;
        o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
          << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n";
        o << "<rect x=\"0\" y=\"0\" width=\"" << kW << "\" height=\"" << kH << "\" style=\"fill:#ffffff\"/>\n";
        o << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << kW - kL - kR << "\" height=\""
          << kH - kT - kB << "\" style=\"fill:none;stroke:#333333;stroke-width:1\"/>\n";
        text(o, kW / 2.0, 18, title_, "middle", 14);
        text(o, kW / 2.0, kH - 8, xlabel_, "middle", 12);
        o << "<text x=\"14\" y=\"" << kH / 2.0 << "\" transform=\"rotate(-90 14 " << kH / 2.0
          << ")\" style=\"font-family:sans-serif;font-size:12px;text-anchor:middle\">" << escape_xml(ylabel_)
          << "</text>\n";
        for (int i = 0; i <= 4; ++i) {
            double xv = f_.x0 + (f_.x1 - f_.x0) * i / 4.0;
            double yv = f_.y0 + (f_.y1 - f_.y0) * i / 4.0;
            text(o, px(xv), kH - kB + 14, tick(xv), "middle", 10);
            text(o, kL - 4, py(yv) + 3, tick(yv), "end", 10);
        }
        for (std::size_t s = 0; s < series_.size(); ++s) {
            const auto& ser = series_[s];
            if (ser.markers_only) {
                for (std::size_t i = 0; i < ser.points.size(); ++i) {
                    auto c = ser.colors.empty() ? color(s) : color(ser.colors[i]);
                    o << "<circle cx=\"" << num(px(ser.points[i][0])) << "\" cy=\"" << num(py(ser.points[i][1]))
                      << "\" r=\"2.5\" style=\"fill:" << c << ";stroke:none\"/>\n";
                }
            } else if (!ser.points.empty()) {
                o << "<polyline style=\"fill:none;stroke:" << color(s) << ";stroke-width:1.5\" points=\"";
                for (std::size_t i = 0; i < ser.points.size(); ++i) {
                    if (i) o << ' ';
                    o << num(px(ser.points[i][0])) << ',' << num(py(ser.points[i][1]));
                }
                o << "\"/>\n";
            }
            if (!ser.name.empty()) {
                double ly = kT + 14 + 14 * static_cast<double>(s);
                o << "<rect x=\"" << kL + 8 << "\" y=\"" << num(ly - 8) << "\" width=\"10\" height=\"3\" style=\"fill:"
                  << color(s) << "\"/>\n";
                text(o, kL + 22, ly - 4, ser.name, "start", 10);
            }
        }
        for (const auto& st : stars_) {
            o << "<text x=\"" << num(px(st.x)) << "\" y=\"" << num(py(st.y) + 5)
              << "\" style=\"font-family:sans-serif;font-size:14px;text-anchor:middle;fill:" << st.col
              << "\">*</text>\n";
        }
        o << "</svg>\n";
        return o.str();
    }

private:
    static constexpr double kW = 480, kH = 360, kL = 60, kR = 20, kT = 30, kB = 40;

    struct Star {
        double x, y;
        std::string col;
    };

    double px(double x) const { return kL + (x - f_.x0) / (f_.x1 - f_.x0) * (kW - kL - kR); }
    double py(double y) const { return kH - kB - (y - f_.y0) / (f_.y1 - f_.y0) * (kH - kT - kB); }
    static std::string num(double v) {
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
        return std::string(buf, res.ptr);
    }
    static std::string tick(double v) {
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 4);
        return std::string(buf, res.ptr);
    }
    static void text(std::ostringstream& o, double x, double y, const std::string& s, const char* anchor, int size) {
        o << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" style=\"font-family:sans-serif;font-size:" << size
          << "px;text-anchor:" << anchor << "\">" << escape_xml(s) << "</text>\n";
    }

    std::string title_, xlabel_, ylabel_;
    Frame f_;
    std::vector<Series> series_;
    std::vector<Star> stars_;
};

void save_svg(const Svg& svg, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << svg.render();
}

Frame bounds(const std::vector<std::array<double, 2>>& pts) {
    if (pts.empty()) return {0, 1, 0, 1};
    Frame f{pts[0][0], pts[0][0], pts[0][1], pts[0][1]};
    for (const auto& p : pts) {
        f.x0 = std::min(f.x0, p[0]);
        f.x1 = std::max(f.x1, p[0]);
        f.y0 = std::min(f.y0, p[1]);
        f.y1 = std::max(f.y1, p[1]);
    }
    const double px = (f.x1 - f.x0) * 0.05, py = (f.y1 - f.y0) * 0.05;
    return {f.x0 - px, f.x1 + px, f.y0 - py, f.y1 + py};
}

} // namespace

std::vector<std::string> emit_plots(const PlotArtifacts& a, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) throw Error("cannot create " + out_dir.string());
    std::vector<std::string> written;
    auto emit = [&](const std::string& name) {
        written.push_back(name);
        return out_dir / name;
    };

    if (a.projection) {
        write_scatter_csv(*a.projection, a.clusters, a.concept_ids, emit("scatter.csv"));
        Series s{"", a.projection->points, true, {}};
        if (a.clusters) {
            for (int c : a.clusters->assignment) s.colors.push_back(static_cast<std::size_t>(c));
        }
        Svg svg("Concept embeddings (" + a.projection->method + ")", "axis 1", "axis 2", bounds(s.points));
        svg.add(std::move(s));
        save_svg(svg, emit("scatter.svg"));
        if (a.clusters && !a.clusters->top.empty()) {
            write_cluster_table_csv(*a.clusters, a.concept_ids, a.concept_names, emit("cluster_key_concepts.csv"));
        }
    }
    if (!a.rocs.empty()) {
        write_roc_csv(a.rocs, emit("roc.csv"));
        Svg svg("ROC", "false positive rate", "true positive rate", {0, 1, 0, 1});
        svg.add({"", {{0, 0}, {1, 1}}, false, {}});
        for (const auto& [name, curve] : a.rocs) {
            Series s{name + " (AUC " + tick_auc(curve.auc) + ")", {}, false, {}};
            for (const auto& p : curve.points) s.points.push_back({p.fpr, p.tpr});
            svg.add(std::move(s));
        }
        save_svg(svg, emit("roc.svg"));
    }
    if (!a.calibration.empty()) {
        write_calibration_csv(a.calibration, emit("calibration.csv"));
        Svg svg("Calibration", "predicted probability", "fraction positive", {0, 1, 0, 1});
        svg.add({"", {{0, 0}, {1, 1}}, false, {}});
        Series s{"model", {}, false, {}};
        for (const auto& b : a.calibration) {
            if (b.count > 0) s.points.push_back({b.mean_predicted, b.positive_rate});
        }
        svg.add(std::move(s));
        save_svg(svg, emit("calibration.svg"));
    }
    if (!a.confidence.empty()) {
        write_confidence_csv(a.confidence, emit("confidence.csv"));
        Series s{"AUC", {}, false, {}};
        for (const auto& p : a.confidence) {
            if (p.auc) s.points.push_back({p.fraction, *p.auc});
        }
        Frame f = bounds(s.points);
        Svg svg("Confidence filtering", "fraction discarded", "AUC", {0, std::max(f.x1, 0.5), std::min(f.y0, 0.5), 1});
        svg.add(std::move(s));
        save_svg(svg, emit("confidence.svg"));
    }
    if (a.trajectories) {
        const auto& trajectories = *a.trajectories;
        write_trajectories_csv(trajectories, emit("trajectories.csv"));
        std::vector<std::array<double, 2>> all;
        for (const auto& t : trajectories) {
            for (auto [y, p] : t.points) all.push_back({static_cast<double>(y), p});
        }
        Frame f = bounds(all);
        Svg svg("Prediction trajectories", "year", "probability", {f.x0, f.x1, 0, 1});
        for (std::size_t i = 0; i < trajectories.size(); ++i) {
            const auto& t = trajectories[i];
            Series s{std::to_string(t.pair.first) + "-" + std::to_string(t.pair.second), {}, false, {}};
            for (auto [y, p] : t.points) s.points.push_back({static_cast<double>(y), p});
            svg.add(std::move(s));
            if (t.first_cooccurrence) {
                for (auto [y, p] : t.points) {
                    if (y == *t.first_cooccurrence) svg.mark(y, p, color(i));
                }
            }
        }
        save_svg(svg, emit("trajectories.svg"));
    }
    if (a.stats) {
        auto out = open_out(emit("papers_per_year.csv"));
        out << "year,papers\n";
        Series s{"", {}, false, {}};
        for (auto [year, n] : a.stats->papers_per_year) {
            out << year << ',' << n << '\n';
            s.points.push_back({static_cast<double>(year), static_cast<double>(n)});
        }
        out.close();
        Frame f = bounds(s.points);
        Svg svg("Papers per year", "year", "papers", {f.x0, f.x1, 0, std::max(f.y1, 1.0)});
        svg.add(std::move(s));
        save_svg(svg, emit("papers_per_year.svg"));
    }
    std::sort(written.begin(), written.end());
    return written;
}

} // namespace dynlink
