#include "dynlink/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <Eigen/Core>

#include "dynlink/analysis.hpp"
#include "dynlink/concepts.hpp"
#include "dynlink/corpus.hpp"
#include "dynlink/error.hpp"
#include "dynlink/evaluation.hpp"
#include "dynlink/log.hpp"
#include "dynlink/random.hpp"

namespace dynlink {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config schema

namespace {

// Walks one JSON object, remembering which keys were consumed so leftovers can
// be reported.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* take(const std::string& key) {
        auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        seen_.insert(key);
        return &*it;
    }

    void get(const std::string& key, int& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
            auto x = v->get<long long>();
            if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(field(key) + ": out of range");
            out = static_cast<int>(x);
        }
    }
    void get(const std::string& key, double& out) {
        if (const json* v = take(key)) {
            if (!v->is_number()) throw ConfigError(field(key) + ": expected a number");
            out = v->get<double>();
        }
    }
    void get(const std::string& key, bool& out) {
        if (const json* v = take(key)) {
            if (!v->is_boolean()) throw ConfigError(field(key) + ": expected true or false");
            out = v->get<bool>();
        }
    }
    void get(const std::string& key, std::uint64_t& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned()) throw ConfigError(field(key) + ": expected a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void get(const std::string& key, fs::path& out) {
        if (const json* v = take(key)) {
            if (!v->is_string()) throw ConfigError(field(key) + ": expected a string");
            out = v->get<std::string>();
        }
    }
    void get(const std::string& key, YearRange& out) {
        if (const json* v = take(key)) {
            if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number_integer() || !(*v)[1].is_number_integer()) {
                throw ConfigError(field(key) + ": expected [first_year, last_year]");
            }
            out = {(*v)[0].get<int>(), (*v)[1].get<int>()};
        }
    }

    template <class F>
    void child(const std::string& key, F&& fn) {
        if (const json* v = take(key)) {
            Reader r(*v, field(key));
            fn(r);
            r.finish();
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown field");
        }
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_train(Reader& r, TrainConfig& t) {
    r.get("window", t.window);
    r.get("dim", t.dim);
    r.get("negatives", t.negatives);
    r.get("epochs", t.epochs);
    r.get("learning_rate", t.learning_rate);
    r.get("min_lr_fraction", t.min_lr_fraction);
    r.get("subsample_threshold", t.subsample_threshold);
    r.get("unigram_power", t.unigram_power);
    r.get("min_count", t.min_count);
}

json train_json(const TrainConfig& t) {
    return {{"window", t.window},
            {"dim", t.dim},
            {"negatives", t.negatives},
            {"epochs", t.epochs},
            {"learning_rate", t.learning_rate},
            {"min_lr_fraction", t.min_lr_fraction},
            {"subsample_threshold", t.subsample_threshold},
            {"unigram_power", t.unigram_power},
            {"min_count", t.min_count}};
}

json range_json(YearRange r) { return json::array({r.first, r.last}); }

void check(bool ok, const std::string& field, const std::string& msg) {
    if (!ok) throw ConfigError(field + ": " + msg);
}

void check_train(const TrainConfig& t, const std::string& prefix) {
    check(t.window >= 1, prefix + ".window", "must be >= 1");
    check(t.dim >= 1, prefix + ".dim", "must be >= 1");
    check(t.negatives >= 1, prefix + ".negatives", "must be >= 1");
    check(t.epochs >= 1, prefix + ".epochs", "must be >= 1");
    check(t.learning_rate > 0, prefix + ".learning_rate", "must be > 0");
    check(t.min_lr_fraction >= 0 && t.min_lr_fraction <= 1, prefix + ".min_lr_fraction", "must be in [0,1]");
    check(t.unigram_power >= 0, prefix + ".unigram_power", "must be >= 0");
    check(t.min_count >= 1, prefix + ".min_count", "must be >= 1");
}

} // namespace

bool RunConfig::uses(FeatureSource s) const { return std::find(sources.begin(), sources.end(), s) != sources.end(); }

int RunConfig::effective_workers() const { return deterministic ? 1 : workers; }

void RunConfig::validate() const {
    check(years.first <= years.last, "years", "first year after last year");
    check_train(embedding, "embedding");
    check_train(node_embedding, "node2vec");
    check(node2vec.p > 0, "node2vec.p", "must be > 0");
    check(node2vec.q > 0, "node2vec.q", "must be > 0");
    check(node2vec.walk_length >= 2, "node2vec.walk_length", "must be >= 2");
    check(node2vec.walks_per_node >= 1, "node2vec.walks_per_node", "must be >= 1");
    try {
        split.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("split: ") + e.what());
    }
    check(years.contains(split.train_delta.first) && years.contains(split.test_lambda.last), "split",
          "windows must lie inside years");
    check(min_degree >= 0, "dataset.min_degree", "must be >= 0");
    check(train_fraction > 0 && train_fraction < 1, "dataset.train_fraction", "must be in (0,1)");
    check(!sources.empty(), "dataset.sources", "must name at least one feature source");
    for (std::size_t i = 0; i < mlp.hidden.size(); ++i) {
        check(mlp.hidden[i] >= 1, "classifier.hidden[" + std::to_string(i) + "]", "must be >= 1");
    }
    check(mlp.dropout >= 0 && mlp.dropout < 1, "classifier.dropout", "must be in [0,1)");
    check(mlp.bn_eps > 0, "classifier.bn_eps", "must be > 0");
    check(mlp.bn_momentum > 0 && mlp.bn_momentum <= 1, "classifier.bn_momentum", "must be in (0,1]");
    check(fit.max_epochs >= 1, "classifier.max_epochs", "must be >= 1");
    check(fit.batch_size >= 2, "classifier.batch_size", "must be >= 2");
    check(fit.learning_rate > 0, "classifier.learning_rate", "must be > 0");
    check(fit.beta1 >= 0 && fit.beta1 < 1, "classifier.beta1", "must be in [0,1)");
    check(fit.beta2 >= 0 && fit.beta2 < 1, "classifier.beta2", "must be in [0,1)");
    check(fit.adam_eps > 0, "classifier.adam_eps", "must be > 0");
    check(fit.lr_decay > 0 && fit.lr_decay <= 1, "classifier.lr_decay", "must be in (0,1]");
    check(fit.patience_lr >= 1, "classifier.patience_lr", "must be >= 1");
    check(fit.patience_stop >= 1, "classifier.patience_stop", "must be >= 1");
    check(analysis.clusters >= 1, "analysis.clusters", "must be >= 1");
    check(analysis.key_concepts >= 1, "analysis.key_concepts", "must be >= 1");
    check(analysis.restarts >= 1, "analysis.restarts", "must be >= 1");
    check(analysis.calibration_bins >= 2, "analysis.calibration_bins", "must be >= 2");
    check(analysis.trajectory_count >= 0, "analysis.trajectory_count", "must be >= 0");
    if (analysis.cluster_year) check(years.contains(*analysis.cluster_year), "analysis.cluster_year", "outside years");
    for (double f : analysis.discard_fractions) {
        check(f >= 0 && f < 1, "analysis.discard_fractions", "values must be in [0,1)");
    }
    check(workers >= 1, "workers", "must be >= 1");
}

RunConfig config_from_json(const json& j) {
    RunConfig cfg;
    Reader root(j, "");
    int version = 0;
    if (!root.take("schema_version")) throw ConfigError("schema_version: missing");
    root.get("schema_version", version);
    if (version != kConfigSchemaVersion) {
        throw ConfigError("schema_version: expected " + std::to_string(kConfigSchemaVersion) + ", got " +
                          std::to_string(version));
    }
    root.child("paths", [&](Reader& r) {
        r.get("corpus", cfg.corpus);
        r.get("lexicon", cfg.lexicon);
        r.get("out_dir", cfg.out_dir);
    });
    root.get("years", cfg.years);
    root.get("seed", cfg.seed);
    root.get("deterministic", cfg.deterministic);
    root.get("workers", cfg.workers);
    root.child("embedding", [&](Reader& r) { read_train(r, cfg.embedding); });
    root.child("node2vec", [&](Reader& r) {
        r.get("p", cfg.node2vec.p);
        r.get("q", cfg.node2vec.q);
        r.get("walk_length", cfg.node2vec.walk_length);
        r.get("walks_per_node", cfg.node2vec.walks_per_node);
        read_train(r, cfg.node_embedding);
    });
    root.child("split", [&](Reader& r) {
        r.get("train_delta", cfg.split.train_delta);
        r.get("train_lambda", cfg.split.train_lambda);
        r.get("test_delta", cfg.split.test_delta);
        r.get("test_lambda", cfg.split.test_lambda);
    });
    root.child("dataset", [&](Reader& r) {
        r.get("min_degree", cfg.min_degree);
        r.get("train_fraction", cfg.train_fraction);
        r.get("augment_both_orders", cfg.augment);
        if (const json* v = r.take("sources")) {
            if (!v->is_array()) throw ConfigError("dataset.sources: expected an array of names");
            cfg.sources.clear();
            for (const auto& s : *v) {
                auto src = s.is_string() ? parse_feature_source(s.get<std::string>()) : std::nullopt;
                if (!src) throw ConfigError("dataset.sources: unknown feature source " + s.dump());
                if (!cfg.uses(*src)) cfg.sources.push_back(*src);
            }
        }
    });
    root.child("classifier", [&](Reader& r) {
        if (const json* v = r.take("hidden")) {
            if (!v->is_array()) throw ConfigError("classifier.hidden: expected an array of layer widths");
            cfg.mlp.hidden.clear();
            for (const auto& w : *v) {
                if (!w.is_number_integer()) throw ConfigError("classifier.hidden: expected integers");
                cfg.mlp.hidden.push_back(w.get<int>());
            }
        }
        r.get("dropout", cfg.mlp.dropout);
        r.get("head_relu", cfg.mlp.head_relu);
        r.get("prelu_init", cfg.mlp.prelu_init);
        r.get("bn_eps", cfg.mlp.bn_eps);
        r.get("bn_momentum", cfg.mlp.bn_momentum);
        r.get("max_epochs", cfg.fit.max_epochs);
        r.get("batch_size", cfg.fit.batch_size);
        r.get("learning_rate", cfg.fit.learning_rate);
        r.get("beta1", cfg.fit.beta1);
        r.get("beta2", cfg.fit.beta2);
        r.get("adam_eps", cfg.fit.adam_eps);
        r.get("lr_decay", cfg.fit.lr_decay);
        r.get("patience_lr", cfg.fit.patience_lr);
        r.get("patience_stop", cfg.fit.patience_stop);
    });
    root.child("analysis", [&](Reader& r) {
        r.get("clusters", cfg.analysis.clusters);
        r.get("key_concepts", cfg.analysis.key_concepts);
        r.get("restarts", cfg.analysis.restarts);
        if (const json* v = r.take("cluster_year")) {
            if (v->is_null()) {
                cfg.analysis.cluster_year.reset();
            } else if (v->is_number_integer()) {
                cfg.analysis.cluster_year = v->get<int>();
            } else {
                throw ConfigError("analysis.cluster_year: expected an integer or null");
            }
        }
        r.get("calibration_bins", cfg.analysis.calibration_bins);
        if (const json* v = r.take("discard_fractions")) {
            if (!v->is_array()) throw ConfigError("analysis.discard_fractions: expected an array");
            cfg.analysis.discard_fractions.clear();
            for (const auto& f : *v) {
                if (!f.is_number()) throw ConfigError("analysis.discard_fractions: expected numbers");
                cfg.analysis.discard_fractions.push_back(f.get<double>());
            }
        }
        if (const json* v = r.take("trajectory_pairs")) {
            if (!v->is_array()) throw ConfigError("analysis.trajectory_pairs: expected an array of [c1, c2]");
            cfg.analysis.trajectory_pairs.clear();
            for (const auto& p : *v) {
                if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
                    throw ConfigError("analysis.trajectory_pairs: expected an array of [c1, c2]");
                }
                cfg.analysis.trajectory_pairs.emplace_back(p[0].get<ConceptId>(), p[1].get<ConceptId>());
            }
        }
        r.get("trajectory_count", cfg.analysis.trajectory_count);
    });
    root.finish();
    cfg.validate();
    return cfg;
}

json config_to_json(const RunConfig& c) {
    json sources = json::array();
    for (auto s : c.sources) sources.push_back(std::string(to_string(s)));
    json pairs = json::array();
    for (auto [a, b] : c.analysis.trajectory_pairs) pairs.push_back({a, b});
    json node = train_json(c.node_embedding);
    node["p"] = c.node2vec.p;
    node["q"] = c.node2vec.q;
    node["walk_length"] = c.node2vec.walk_length;
    node["walks_per_node"] = c.node2vec.walks_per_node;
    return {
        {"schema_version", kConfigSchemaVersion},
        {"paths", {{"corpus", c.corpus.generic_string()}, {"lexicon", c.lexicon.generic_string()},
                   {"out_dir", c.out_dir.generic_string()}}},
        {"years", range_json(c.years)},
        {"seed", c.seed},
        {"deterministic", c.deterministic},
        {"workers", c.workers},
        {"embedding", train_json(c.embedding)},
        {"node2vec", node},
        {"split", {{"train_delta", range_json(c.split.train_delta)}, {"train_lambda", range_json(c.split.train_lambda)},
                   {"test_delta", range_json(c.split.test_delta)}, {"test_lambda", range_json(c.split.test_lambda)}}},
        {"dataset", {{"min_degree", c.min_degree}, {"train_fraction", c.train_fraction},
                     {"augment_both_orders", c.augment}, {"sources", sources}}},
        {"classifier", {{"hidden", c.mlp.hidden}, {"dropout", c.mlp.dropout}, {"head_relu", c.mlp.head_relu},
                        {"prelu_init", c.mlp.prelu_init}, {"bn_eps", c.mlp.bn_eps},
                        {"bn_momentum", c.mlp.bn_momentum}, {"max_epochs", c.fit.max_epochs},
                        {"batch_size", c.fit.batch_size}, {"learning_rate", c.fit.learning_rate},
                        {"beta1", c.fit.beta1}, {"beta2", c.fit.beta2}, {"adam_eps", c.fit.adam_eps},
                        {"lr_decay", c.fit.lr_decay}, {"patience_lr", c.fit.patience_lr},
                        {"patience_stop", c.fit.patience_stop}}},
        {"analysis", {{"clusters", c.analysis.clusters}, {"key_concepts", c.analysis.key_concepts},
                      {"restarts", c.analysis.restarts},
                      {"cluster_year", c.analysis.cluster_year ? json(*c.analysis.cluster_year) : json(nullptr)},
                      {"calibration_bins", c.analysis.calibration_bins},
                      {"discard_fractions", c.analysis.discard_fractions}, {"trajectory_pairs", pairs},
                      {"trajectory_count", c.analysis.trajectory_count}}},
    };
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    return config_from_json(j);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

namespace {

// The output location does not influence any artifact, so manifests and the
// hash leave it out; identical runs into different directories then match.
json manifest_config(const RunConfig& cfg) {
    json j = config_to_json(cfg);
    j["paths"].erase("out_dir");
    return j;
}

} // namespace

std::string config_hash(const RunConfig& cfg) { return hex64(fnv1a64(manifest_config(cfg).dump())); }

// ---------------------------------------------------------------------------
// Stages

std::string_view to_string(Stage s) {
    switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::match: return "match";
    case Stage::embed: return "embed";
    case Stage::graph: return "graph";
    case Stage::dataset: return "dataset";
    case Stage::train: return "train";
    case Stage::eval: return "eval";
    case Stage::cluster: return "cluster";
    case Stage::trajectory: return "trajectory";
    }
    return "?";
}

std::optional<Stage> parse_stage(std::string_view s) {
    for (auto st : kAllStages) {
        if (to_string(st) == s) return st;
    }
    return std::nullopt;
}

std::vector<Stage> stage_dependencies(Stage s) {
    switch (s) {
    case Stage::ingest: return {};
    case Stage::match: return {Stage::ingest};
    case Stage::embed: return {Stage::match};
    case Stage::graph: return {Stage::match};
    case Stage::dataset: return {Stage::match, Stage::embed, Stage::graph};
    case Stage::train: return {Stage::dataset};
    case Stage::eval: return {Stage::dataset, Stage::train};
    case Stage::cluster: return {Stage::match, Stage::embed};
    case Stage::trajectory: return {Stage::match, Stage::embed, Stage::dataset, Stage::train};
    }
    return {};
}

namespace {

// Seeds for every randomized component, derived from the master seed.
struct Seeds {
    std::uint64_t embedding, static_embedding, node2vec_walks, node2vec_train, dataset, classifier, kmeans;

    explicit Seeds(std::uint64_t master)
        : embedding(derive_seed(master, 0xe1)), static_embedding(derive_seed(master, 0xe2)),
          node2vec_walks(derive_seed(master, 0x21)), node2vec_train(derive_seed(master, 0x22)),
          dataset(derive_seed(master, 0xd5)), classifier(derive_seed(master, 0xc1)), kmeans(derive_seed(master, 0xc2)) {}

    json to_json() const {
        return {{"embedding", embedding},         {"static_embedding", static_embedding},
                {"node2vec_walks", node2vec_walks}, {"node2vec_train", node2vec_train},
                {"dataset", dataset},             {"classifier", classifier},
                {"kmeans", kmeans}};
    }
};

fs::path stage_dir(const RunConfig& cfg, Stage s) { return cfg.out_dir / std::string(to_string(s)); }

void require(const RunConfig& cfg, Stage needed, Stage by) {
    const auto manifest = stage_dir(cfg, needed) / "manifest.json";
    if (!fs::exists(manifest)) {
        throw DependencyError("stage '" + std::string(to_string(by)) + "' requires artifacts from stage '" +
                              std::string(to_string(needed)) + "' (missing " + manifest.string() +
                              "); run `" + std::string(to_string(needed)) + "` first");
    }
    std::ifstream in(manifest);
    try {
        auto m = json::parse(in);
        if (m.value("config_hash", "") != config_hash(cfg)) {
            log::warn("stage '" + std::string(to_string(needed)) + "' artifacts were produced with a different config");
        }
    } catch (const json::exception&) {
        throw DependencyError("unreadable manifest for stage '" + std::string(to_string(needed)) + "': " +
                              manifest.string());
    }
}

fs::path need_file(const RunConfig& cfg, Stage from, const std::string& name, Stage by) {
    auto p = stage_dir(cfg, from) / name;
    if (!fs::exists(p)) {
        throw DependencyError("stage '" + std::string(to_string(by)) + "' needs " + p.string() + " from stage '" +
                              std::string(to_string(from)) + "'");
    }
    return p;
}

std::string file_hash(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return hex64(fnv1a64(bytes));
}

// Owns a stage's output directory and writes its manifest on finish().
class StageRun {
public:
    StageRun(const RunConfig& cfg, Stage stage) : cfg_(cfg), stage_(stage), start_(std::chrono::steady_clock::now()) {
        for (auto dep : stage_dependencies(stage)) require(cfg, dep, stage);
        dir_ = stage_dir(cfg, stage);
        std::error_code ec;
        fs::remove_all(dir_, ec);
        fs::create_directories(dir_, ec);
        if (ec) throw Error("cannot create " + dir_.string() + ": " + ec.message());
        log::info("[" + std::string(to_string(stage)) + "] start");
    }

    const fs::path& dir() const { return dir_; }
    fs::path file(const std::string& name) const { return dir_ / name; }
    json& extra() { return extra_; }

    void finish() {
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::vector<std::string> names;
        for (const auto& e : fs::recursive_directory_iterator(dir_)) {
            if (e.is_regular_file()) names.push_back(fs::relative(e.path(), dir_).generic_string());
        }
        std::sort(names.begin(), names.end());
        json artifacts = json::array();
        for (const auto& n : names) {
            artifacts.push_back({{"file", n}, {"bytes", fs::file_size(dir_ / n)}, {"fnv1a64", file_hash(dir_ / n)}});
        }
        json m = {{"stage", std::string(to_string(stage_))},
                  {"config_hash", config_hash(cfg_)},
                  {"config", manifest_config(cfg_)},
                  {"seeds", Seeds(cfg_.seed).to_json()},
                  {"deterministic", cfg_.deterministic},
                  {"workers", cfg_.effective_workers()},
                  {"versions", {{"dynlink", std::string(kVersion)},
                                {"config_schema", kConfigSchemaVersion},
                                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                              "." + std::to_string(EIGEN_MINOR_VERSION)},
                                {"compiler", __VERSION__}}},
                  {"artifacts", artifacts},
                  {"details", extra_}};
        // Wall time breaks byte-identical reruns, so deterministic runs only log it.
        m["wall_time_seconds"] = cfg_.deterministic ? json(nullptr) : json(seconds);
        std::ofstream out(file("manifest.json"));
        if (!out) throw Error("cannot write manifest in " + dir_.string());
        out << m.dump(2) << '\n';
        log::info("[" + std::string(to_string(stage_)) + "] done in " + format_number(seconds) + " s");
    }

private:
    const RunConfig& cfg_;
    Stage stage_;
    fs::path dir_;
    std::chrono::steady_clock::time_point start_;
    json extra_ = json::object();
};

TrainConfig word_config(const RunConfig& cfg, std::uint64_t seed) {
    TrainConfig t = cfg.embedding;
    t.seed = seed;
    t.workers = cfg.effective_workers();
    return t;
}

TrainConfig node_config(const RunConfig& cfg) {
    TrainConfig t = cfg.node_embedding;
    t.seed = Seeds(cfg.seed).node2vec_train;
    t.workers = cfg.effective_workers();
    return t;
}

Node2VecConfig walk_config(const RunConfig& cfg) {
    Node2VecConfig n = cfg.node2vec;
    n.seed = Seeds(cfg.seed).node2vec_walks;
    return n;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

std::vector<TokenizedDoc> read_docs(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<TokenizedDoc> docs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = json::parse(line);
        TokenizedDoc d;
        d.id = j.at("id").get<std::string>();
        d.year = j.at("year").get<int>();
        d.tokens = j.at("tokens").get<TokenSeq>();
        for (std::size_t i = 0; i < d.tokens.size(); ++i) {
            if (auto c = parse_concept_token(d.tokens[i])) d.concept_positions.push_back({i, *c});
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

std::map<ConceptId, std::string> read_concept_names(const fs::path& path) {
    std::ifstream in(path);
    std::map<ConceptId, std::string> names;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        names[std::stoi(line.substr(0, comma))] = line.substr(comma + 1);
    }
    return names;
}

struct SplitInputs {
    std::optional<EmbeddingTimeline> static_model;
    std::optional<EmbeddingTimeline> node;
    std::array<std::optional<CoocGraph>, 3> graphs;
    std::optional<HandcraftedExtractor> handcrafted;
};

std::string split_tag(bool test) { return test ? "test" : "train"; }

// ---- individual stages

void stage_ingest(const RunConfig& cfg) {
    if (cfg.corpus.empty()) throw ConfigError("paths.corpus: not set");
    if (!fs::exists(cfg.corpus)) throw ConfigError("paths.corpus: file not found: " + cfg.corpus.string());
    StageRun run(cfg, Stage::ingest);
    auto loaded = load_corpus(cfg.corpus);
    std::vector<AbstractRecord> kept;
    std::size_t out_of_range = 0;
    for (auto& r : loaded.records) {
        if (cfg.years.contains(r.year)) {
            kept.push_back(std::move(r));
        } else {
            ++out_of_range;
        }
    }
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        return std::pair(a.year, a.month) < std::pair(b.year, b.month);
    });
    std::ofstream out(run.file("records.jsonl"));
    for (const auto& r : kept) {
        std::string text;
        for (const auto& t : normalize_text(r.text)) {
            if (!text.empty()) text += ' ';
            text += t;
        }
        json j = {{"id", r.id}, {"year", r.year}, {"month", r.month}, {"text", text}};
        out << j.dump() << '\n';
    }
    out.close();
    auto stats = corpus_stats(kept, cfg.years);
    write_stats_csv(stats, run.file("stats.csv"));
    PlotArtifacts plots;
    plots.stats = &stats;
    emit_plots(plots, run.dir());
    run.extra() = {{"records", kept.size()}, {"skipped_malformed", loaded.skipped}, {"out_of_range", out_of_range}};
    run.finish();
}

void stage_match(const RunConfig& cfg) {
    if (cfg.lexicon.empty()) throw ConfigError("paths.lexicon: not set");
    if (!fs::exists(cfg.lexicon)) throw ConfigError("paths.lexicon: file not found: " + cfg.lexicon.string());
    auto records_path = need_file(cfg, Stage::ingest, "records.jsonl", Stage::match);
    StageRun run(cfg, Stage::match);
    auto lex = load_lexicon(cfg.lexicon);
    PhraseMatcher matcher(lex.lexicon);

    std::ifstream in(records_path);
    std::ofstream out(run.file("docs.jsonl"));
    std::vector<TokenizedDoc> docs;
    std::string line;
    std::size_t mentions = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = json::parse(line);
        auto doc = matcher.replace(split_ws(j.at("text").get<std::string>()), j.at("year").get<int>(),
                                   j.at("id").get<std::string>());
        mentions += doc.concept_positions.size();
        out << json{{"id", doc.id}, {"year", doc.year}, {"tokens", doc.tokens}}.dump() << '\n';
        docs.push_back(std::move(doc));
    }
    out.close();
    std::ofstream names(run.file("concepts.csv"));
    names << "concept_id,phrase\n";
    for (std::size_t c = 0; c < lex.lexicon.size(); ++c) {
        names << c << ',' << lex.lexicon.display(static_cast<ConceptId>(c)) << '\n';
    }
    names.close();
    auto first = first_occurrences(docs);
    write_first_seen_csv(first, run.file("first_seen.csv"));
    run.extra() = {{"documents", docs.size()},
                   {"lexicon_size", lex.lexicon.size()},
                   {"lexicon_duplicates_merged", lex.merged},
                   {"concept_mentions", mentions},
                   {"concepts_observed", first.size()}};
    run.finish();
}

void write_loss_csv(const std::map<int, YearTrainResult>& per_year, const fs::path& path) {
    std::ofstream out(path);
    out << "year,epoch,loss,positive_pairs\n";
    for (const auto& [year, r] : per_year) {
        for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
            out << year << ',' << e + 1 << ',' << format_number(r.epoch_loss[e]) << ',' << r.positive_pairs << '\n';
        }
    }
}

void stage_embed(const RunConfig& cfg) {
    auto docs_path = need_file(cfg, Stage::match, "docs.jsonl", Stage::embed);
    StageRun run(cfg, Stage::embed);
    const Seeds seeds(cfg.seed);
    auto docs = read_docs(docs_path);
    auto corpus = prepare_dynamic_corpus(docs, cfg.years, cfg.embedding.min_count);

    auto dyn = train_dynamic(corpus, word_config(cfg, seeds.embedding));
    auto report = backfill_timeline(dyn.timeline);
    save_timeline(dyn.timeline, run.file("dynamic.dweb"));
    write_loss_csv(dyn.per_year, run.file("loss.csv"));
    json extra = {{"concepts", dyn.timeline.concept_count()},
                  {"vocabulary", corpus.vocab.size()},
                  {"backfilled_cells", report.filled},
                  {"absent_concepts", report.absent}};

    if (cfg.uses(FeatureSource::word_static) || cfg.uses(FeatureSource::word_hand)) {
        for (bool test : {false, true}) {
            const int through = test ? cfg.split.test_delta.last : cfg.split.train_delta.last;
            auto tl = train_static(corpus, through, word_config(cfg, derive_seed(seeds.static_embedding, test)));
            save_timeline(tl, run.file("static_" + split_tag(test) + ".dweb"));
        }
    }
    run.extra() = extra;
    run.finish();
}

void stage_graph(const RunConfig& cfg) {
    auto docs_path = need_file(cfg, Stage::match, "docs.jsonl", Stage::graph);
    StageRun run(cfg, Stage::graph);
    auto docs = read_docs(docs_path);
    std::vector<CoocGraph> yearly;
    std::size_t edges = 0;
    for (int y = cfg.years.first; y <= cfg.years.last; ++y) {
        yearly.push_back(build_cooc_graph(docs, YearRange{y, y}));
        edges += yearly.back().edge_count();
    }
    write_graph_csv(yearly, run.file("edges.csv"));
    json extra = {{"yearly_edges", edges}};
    if (cfg.uses(FeatureSource::knowledge_node)) {
        for (bool test : {false, true}) {
            const auto delta = test ? cfg.split.test_delta : cfg.split.train_delta;
            auto g = build_cooc_graph(docs, delta);
            auto tl = node2vec_embeddings(g, walk_config(cfg), node_config(cfg));
            save_timeline(tl, run.file("node2vec_" + split_tag(test) + ".dweb"));
            extra["node2vec_" + split_tag(test) + "_nodes"] = tl.concept_count();
        }
    }
    run.extra() = extra;
    run.finish();
}

// The 15 graph features with their column names, for inspection.
void write_named_features(const std::vector<PairSample>& samples, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "c1,c2,label";
    for (auto n : PairFeatures15::names()) out << ',' << n;
    out << '\n';
    for (const auto& s : samples) {
        out << s.c1 << ',' << s.c2 << ',' << s.label;
        for (double v : s.features) out << ',' << format_number(v);
        out << '\n';
    }
}

void stage_dataset(const RunConfig& cfg) {
    auto docs_path = need_file(cfg, Stage::match, "docs.jsonl", Stage::dataset);
    auto dyn_path = need_file(cfg, Stage::embed, "dynamic.dweb", Stage::dataset);
    StageRun run(cfg, Stage::dataset);
    const Seeds seeds(cfg.seed);
    auto docs = read_docs(docs_path);
    auto ds = build_pair_dataset(docs, cfg.split, cfg.min_degree, seeds.dataset, cfg.train_fraction);
    write_pairs_csv(ds.train, run.file("pairs_train.csv"));
    write_pairs_csv(ds.val, run.file("pairs_val.csv"));
    write_pairs_csv(ds.test, run.file("pairs_test.csv"));

    auto dynamic = load_timeline(dyn_path);
    std::array<SplitInputs, 2> inputs;
    for (bool test : {false, true}) {
        auto& in = inputs[test];
        const int end = test ? cfg.split.test_delta.last : cfg.split.train_delta.last;
        if (cfg.uses(FeatureSource::word_static) || cfg.uses(FeatureSource::word_hand)) {
            in.static_model = load_timeline(need_file(cfg, Stage::embed, "static_" + split_tag(test) + ".dweb", Stage::dataset));
        }
        if (cfg.uses(FeatureSource::knowledge_node)) {
            in.node = load_timeline(need_file(cfg, Stage::graph, "node2vec_" + split_tag(test) + ".dweb", Stage::dataset));
        }
        if (cfg.uses(FeatureSource::knowledge_hand)) {
            for (int k = 0; k < 3; ++k) in.graphs[k] = build_cooc_graph(docs, YearRange{cfg.years.first, end - k});
            in.handcrafted.emplace(*in.graphs[0], *in.graphs[1], *in.graphs[2]);
        }
    }
    auto feature_inputs = [&](bool test) {
        FeatureInputs fi;
        fi.year = test ? cfg.split.test_delta.last : cfg.split.train_delta.last;
        fi.dynamic = &dynamic;
        fi.static_model = inputs[test].static_model ? &*inputs[test].static_model : nullptr;
        fi.node = inputs[test].node ? &*inputs[test].node : nullptr;
        fi.handcrafted = inputs[test].handcrafted ? &*inputs[test].handcrafted : nullptr;
        return fi;
    };
    json counts = json::object();
    for (auto source : cfg.sources) {
        const std::string name(to_string(source));
        auto train = assemble_feature_vectors(ds.train, source, feature_inputs(false), cfg.augment);
        auto val = assemble_feature_vectors(ds.val, source, feature_inputs(false), false);
        auto test = assemble_feature_vectors(ds.test, source, feature_inputs(true), false);
        write_samples(train, run.file(name + "_train.csv"), run.file(name + "_train.feat"));
        write_samples(val, run.file(name + "_val.csv"), run.file(name + "_val.feat"));
        write_samples(test, run.file(name + "_test.csv"), run.file(name + "_test.feat"));
        counts[name] = {{"train", train.size()}, {"val", val.size()}, {"test", test.size()}};
        if (source == FeatureSource::knowledge_hand) {
            write_named_features(train, run.file(name + "_train_features.csv"));
            write_named_features(val, run.file(name + "_val_features.csv"));
            write_named_features(test, run.file(name + "_test_features.csv"));
        }
    }
    auto positives = [](const std::vector<LabeledPair>& v) {
        return std::count_if(v.begin(), v.end(), [](const auto& p) { return p.label == 1; });
    };
    run.extra() = {{"pairs", {{"train", ds.train.size()}, {"val", ds.val.size()}, {"test", ds.test.size()}}},
                   {"positives", {{"train", positives(ds.train)}, {"val", positives(ds.val)}, {"test", positives(ds.test)}}},
                   {"samples", counts}};
    run.finish();
}

struct Xy {
    Matrix x;
    std::vector<double> y;
    std::vector<int> labels;
    std::vector<ConceptPair> pairs;
};

Xy load_xy(const RunConfig& cfg, FeatureSource source, const std::string& part, Stage by) {
    const std::string name(to_string(source));
    auto samples = read_samples(need_file(cfg, Stage::dataset, name + "_" + part + ".csv", by),
                                need_file(cfg, Stage::dataset, name + "_" + part + ".feat", by));
    Xy out;
    const auto cols = samples.empty() ? 0 : samples.front().features.size();
    out.x.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (std::size_t j = 0; j < cols; ++j) out.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = samples[i].features[j];
        out.y.push_back(samples[i].label);
        out.labels.push_back(samples[i].label);
        out.pairs.emplace_back(samples[i].c1, samples[i].c2);
    }
    return out;
}

void stage_train(const RunConfig& cfg) {
    StageRun run(cfg, Stage::train);
    const Seeds seeds(cfg.seed);
    json summary = json::object();
    for (std::size_t s = 0; s < cfg.sources.size(); ++s) {
        const auto source = cfg.sources[s];
        const std::string name(to_string(source));
        auto train = load_xy(cfg, source, "train", Stage::train);
        auto val = load_xy(cfg, source, "val", Stage::train);
        if (train.x.rows() < 2 || val.x.rows() < 1) {
            throw Error("not enough " + name + " samples to train (train " + std::to_string(train.x.rows()) +
                        ", val " + std::to_string(val.x.rows()) + ")");
        }
        Mlp model(static_cast<int>(train.x.cols()), cfg.mlp, derive_seed(seeds.classifier, s, 0));
        FitConfig fc = cfg.fit;
        fc.seed = derive_seed(seeds.classifier, s, 1);
        auto result = fit(model, train.x, train.y, val.x, val.y, fc);
        model.save(run.file(name + ".mlpc"));
        write_history_csv(result.history, run.file(name + "_history.csv"));
        summary[name] = {{"best_epoch", result.best_epoch},
                         {"best_val_loss", result.best_val_loss},
                         {"epochs_run", result.history.size()}};
    }
    run.extra() = summary;
    run.finish();
}

void stage_eval(const RunConfig& cfg) {
    StageRun run(cfg, Stage::eval);
    const auto fractions =
        cfg.analysis.discard_fractions.empty() ? default_discard_fractions() : cfg.analysis.discard_fractions;
    PlotArtifacts plots;
    std::ofstream auc_out(run.file("auc.csv"));
    auc_out << "source,auc,test_samples\n";
    json summary = json::object();
    bool primary_done = false;
    for (auto source : cfg.sources) {
        const std::string name(to_string(source));
        auto model = Mlp::load(need_file(cfg, Stage::train, name + ".mlpc", Stage::eval));
        auto test = load_xy(cfg, source, "test", Stage::eval);
        auto scores = model.predict_proba(test.x);
        {
            std::ofstream pred(run.file(name + "_predictions.csv"));
            pred << "c1,c2,label,probability\n";
            for (std::size_t i = 0; i < scores.size(); ++i) {
                pred << test.pairs[i].first << ',' << test.pairs[i].second << ',' << test.labels[i] << ','
                     << format_number(scores[i]) << '\n';
            }
        }
        auto roc = roc_auc(scores, test.labels);
        auc_out << name << ',' << format_number(roc.auc) << ',' << scores.size() << '\n';
        auto calib = calibration_table(scores, test.labels, cfg.analysis.calibration_bins);
        auto conf = confidence_filter_curve(scores, test.labels, fractions);
        write_calibration_csv(calib, run.file(name + "_calibration.csv"));
        write_confidence_csv(conf, run.file(name + "_confidence.csv"));
        summary[name] = roc.auc;
        plots.rocs.emplace_back(name, std::move(roc));
        // Calibration and confidence plots follow the first listed source.
        if (!primary_done) {
            plots.calibration = std::move(calib);
            plots.confidence = std::move(conf);
            primary_done = true;
        }
    }
    auc_out.close();
    emit_plots(plots, run.dir());
    run.extra() = {{"auc", summary}, {"plotted_source", std::string(to_string(cfg.sources.front()))}};
    run.finish();
}

void stage_cluster(const RunConfig& cfg) {
    auto docs_path = need_file(cfg, Stage::match, "docs.jsonl", Stage::cluster);
    auto dyn_path = need_file(cfg, Stage::embed, "dynamic.dweb", Stage::cluster);
    auto names_path = need_file(cfg, Stage::match, "concepts.csv", Stage::cluster);
    StageRun run(cfg, Stage::cluster);
    const Seeds seeds(cfg.seed);
    const int year = cfg.analysis.cluster_year.value_or(cfg.split.test_delta.last);
    auto timeline = load_timeline(dyn_path);
    auto docs = read_docs(docs_path);
    auto names = read_concept_names(names_path);

    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < timeline.concept_count(); ++r) {
        if (timeline.has_vector(r, year)) rows.push_back(r);
    }
    if (rows.size() < 2) throw Error("cluster: fewer than 2 concepts have vectors in " + std::to_string(year));
    Matrix data(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(timeline.dim));
    std::vector<ConceptId> ids;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto v = timeline.vector(rows[i], year);
        for (std::size_t j = 0; j < v.size(); ++j) data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
        ids.push_back(timeline.concepts[rows[i]]);
        labels.push_back(names.count(ids.back()) ? names[ids.back()] : concept_token(ids.back()));
    }
    std::map<ConceptId, double> freq_by_id;
    for (const auto& d : docs) {
        if (d.year != year) continue;
        for (const auto& cp : d.concept_positions) freq_by_id[cp.concept_id] += 1;
    }
    std::vector<double> freq;
    for (auto id : ids) freq.push_back(freq_by_id.count(id) ? freq_by_id[id] : 0.0);

    auto proj = pca_project(data);
    Matrix points(static_cast<Eigen::Index>(rows.size()), 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        points(static_cast<Eigen::Index>(i), 0) = proj.points[i][0];
        points(static_cast<Eigen::Index>(i), 1) = proj.points[i][1];
    }
    auto clusters = kmeans_cluster(points, cfg.analysis.clusters, seeds.kmeans, cfg.analysis.restarts);
    cluster_report(clusters, points, freq, cfg.analysis.key_concepts);

    PlotArtifacts plots;
    plots.projection = &proj;
    plots.clusters = &clusters;
    plots.concept_ids = ids;
    plots.concept_names = labels;
    emit_plots(plots, run.dir());
    run.extra() = {{"year", year},
                   {"concepts", rows.size()},
                   {"projection", proj.method},
                   {"projection_note", "principal-axis projection used in place of UMAP"},
                   {"explained_variance", {proj.explained_variance[0], proj.explained_variance[1]}},
                   {"clusters", clusters.k},
                   {"wcss", clusters.wcss}};
    run.finish();
}

void stage_trajectory(const RunConfig& cfg) {
    if (!cfg.uses(FeatureSource::word_dynamic)) {
        throw ConfigError("dataset.sources: trajectories need the word-dynamic source");
    }
    auto docs_path = need_file(cfg, Stage::match, "docs.jsonl", Stage::trajectory);
    auto dyn_path = need_file(cfg, Stage::embed, "dynamic.dweb", Stage::trajectory);
    auto model_path = need_file(cfg, Stage::train, "word-dynamic.mlpc", Stage::trajectory);
    auto pairs_path = need_file(cfg, Stage::dataset, "pairs_test.csv", Stage::trajectory);
    StageRun run(cfg, Stage::trajectory);
    auto timeline = load_timeline(dyn_path);
    auto model = Mlp::load(model_path);
    auto docs = read_docs(docs_path);

    auto pairs = cfg.analysis.trajectory_pairs;
    if (pairs.empty()) {
        for (const auto& lp : read_pairs_csv(pairs_path)) {
            if (lp.label == 1 && pairs.size() < static_cast<std::size_t>(cfg.analysis.trajectory_count)) {
                pairs.push_back(lp.pair);
            }
        }
    }
    std::vector<int> years;
    for (int y = timeline.years.first; y <= timeline.years.last; ++y) years.push_back(y);
    PlotArtifacts plots;
    plots.trajectories.emplace();
    for (auto pair : pairs) {
        auto t = prediction_trajectory(model, timeline, pair, years);
        t.first_cooccurrence = first_cooccurrence_year(docs, pair);
        plots.trajectories->push_back(std::move(t));
    }
    emit_plots(plots, run.dir());
    run.extra() = {{"pairs", plots.trajectories->size()}};
    run.finish();
}

} // namespace

void run_stage(const RunConfig& cfg, Stage stage) {
    cfg.validate();
    switch (stage) {
    case Stage::ingest: stage_ingest(cfg); break;
    case Stage::match: stage_match(cfg); break;
    case Stage::embed: stage_embed(cfg); break;
    case Stage::graph: stage_graph(cfg); break;
    case Stage::dataset: stage_dataset(cfg); break;
    case Stage::train: stage_train(cfg); break;
    case Stage::eval: stage_eval(cfg); break;
    case Stage::cluster: stage_cluster(cfg); break;
    case Stage::trajectory: stage_trajectory(cfg); break;
    }
}

void run_all(const RunConfig& cfg) {
    for (auto stage : kAllStages) {
        if (stage == Stage::trajectory && !cfg.uses(FeatureSource::word_dynamic)) {
            log::info("[trajectory] skipped: word-dynamic is not among the feature sources");
            continue;
        }
        run_stage(cfg, stage);
    }
}

std::vector<std::pair<FeatureSource, double>> read_auc_table(const fs::path& out_dir) {
    const auto path = out_dir / "eval" / "auc.csv";
    std::ifstream in(path);
    if (!in) throw DependencyError("missing " + path.string() + "; run `eval` first");
    std::vector<std::pair<FeatureSource, double>> out;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        auto a = line.find(',');
        auto b = line.find(',', a + 1);
        auto src = parse_feature_source(line.substr(0, a));
        if (!src) throw FormatError("bad source in " + path.string());
        out.emplace_back(*src, std::stod(line.substr(a + 1, b - a - 1)));
    }
    return out;
}

} // namespace dynlink
