#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dynlink/dataset.hpp"
#include "dynlink/graph.hpp"
#include "dynlink/mlp.hpp"
#include "dynlink/sgns.hpp"

namespace dynlink {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr std::string_view kVersion = "1.0.0";

struct AnalysisConfig {
    int clusters = 9;
    int key_concepts = 3;
    int restarts = 10;
    std::optional<int> cluster_year; // default: end of the test delta window
    int calibration_bins = 10;
    std::vector<double> discard_fractions; // empty: 0, 0.05, ..., 0.5
    std::vector<ConceptPair> trajectory_pairs; // empty: first test positives
    int trajectory_count = 3;
};

struct RunConfig {
    std::filesystem::path corpus;
    std::filesystem::path lexicon;
    std::filesystem::path out_dir = "out";
    YearRange years{1994, 2023};

    TrainConfig embedding;
    Node2VecConfig node2vec;
    TrainConfig node_embedding;

    SplitSpec split;
    int min_degree = 1;
    double train_fraction = 0.8;
    bool augment = true; // train on (c1,c2) and (c2,c1)
    std::vector<FeatureSource> sources{std::begin(kAllSources), std::end(kAllSources)};

    MlpConfig mlp;
    FitConfig fit;
    AnalysisConfig analysis;

    std::uint64_t seed = 1;
    bool deterministic = false;
    int workers = 1;

    bool uses(FeatureSource s) const;
    // Worker count after --deterministic.
    int effective_workers() const;
    // Throws ConfigError with a field path, e.g. "embedding.dim: must be >= 1".
    void validate() const;
};

// Strict reader: unknown keys, wrong types and a missing or different
// schema_version are ConfigErrors naming the field.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);
// Hex FNV-1a of the canonical JSON form, without the output directory.
std::string config_hash(const RunConfig& cfg);

enum class Stage { ingest, match, embed, graph, dataset, train, eval, cluster, trajectory };
inline constexpr Stage kAllStages[] = {Stage::ingest,  Stage::match, Stage::embed,   Stage::graph,     Stage::dataset,
                                       Stage::train,   Stage::eval,  Stage::cluster, Stage::trajectory};

std::string_view to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view s);
std::vector<Stage> stage_dependencies(Stage s);

// Runs one stage, reading upstream artifacts from cfg.out_dir. Throws
// DependencyError naming the missing stage.
void run_stage(const RunConfig& cfg, Stage stage);
// Every stage in order. Trajectories are skipped without word-dynamic.
void run_all(const RunConfig& cfg);

// Test AUC per feature source from <out>/eval/auc.csv.
std::vector<std::pair<FeatureSource, double>> read_auc_table(const std::filesystem::path& out_dir);

} // namespace dynlink
