// Command-line driver for the staged pipeline.
//
//   dynlink --config configs/fixture.json all
//   dynlink --corpus c.jsonl --lexicon l.txt --out out ingest
//   dynlink synth --dir data/fixture

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "dynlink/error.hpp"
#include "dynlink/log.hpp"
#include "dynlink/pipeline.hpp"
#include "dynlink/synthetic.hpp"

namespace fs = std::filesystem;
using namespace dynlink;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDependency = 3;
constexpr int kExitRuntime = 4;

struct GlobalOptions {
    std::string config;
    std::string corpus, lexicon, out;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    bool deterministic = false;
    bool verbose = false;
    bool quiet = false;
};

// Config file, then environment, then flags.
RunConfig resolve_config(const GlobalOptions& g) {
    RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
    if (const char* v = std::getenv("DYNLINK_CORPUS")) cfg.corpus = v;
    if (const char* v = std::getenv("DYNLINK_LEXICON")) cfg.lexicon = v;
    if (const char* v = std::getenv("DYNLINK_OUT")) cfg.out_dir = v;
    if (!g.corpus.empty()) cfg.corpus = g.corpus;
    if (!g.lexicon.empty()) cfg.lexicon = g.lexicon;
    if (!g.out.empty()) cfg.out_dir = g.out;
    if (g.seed) cfg.seed = *g.seed;
    if (g.workers) cfg.workers = *g.workers;
    if (g.deterministic) cfg.deterministic = true;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Concept-pair link forecasting from dynamic word embeddings"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("-c,--config", g.config, "JSON run configuration");
    app.add_option("--corpus", g.corpus, "Abstract corpus (JSON lines); overrides config and DYNLINK_CORPUS");
    app.add_option("--lexicon", g.lexicon, "Concept list, one phrase per line; overrides DYNLINK_LEXICON");
    app.add_option("-o,--out", g.out, "Output directory; overrides DYNLINK_OUT");
    app.add_option("--seed", g.seed, "Master seed");
    app.add_option("--workers", g.workers, "Worker threads for embedding training")->check(CLI::PositiveNumber);
    app.add_flag("--deterministic", g.deterministic, "Single worker, fully seeded, byte-identical reruns");
    app.add_flag("-v,--verbose", g.verbose, "Progress messages on stderr");
    app.add_flag("-q,--quiet", g.quiet, "Suppress warnings");

    std::optional<Stage> chosen;
    bool run_everything = false;
    for (auto stage : kAllStages) {
        const std::string name(to_string(stage));
        app.add_subcommand(name, "Run the " + name + " stage")->callback([&chosen, stage] { chosen = stage; });
    }
    app.add_subcommand("all", "Run every stage in order")->callback([&] { run_everything = true; });

    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus and lexicon");
    std::string synth_dir = "data/fixture";
    bool synth_full = false;
    std::uint64_t synth_seed = 0;
    synth->add_option("--dir", synth_dir, "Destination directory");
    synth->add_flag("--benchmark", synth_full, "Benchmark size instead of the 200-abstract fixture");
    synth->add_option("--synth-seed", synth_seed, "Generator seed (0 keeps the preset)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    log::level() = g.quiet ? log::Level::quiet : g.verbose ? log::Level::info : log::Level::warn;

    try {
        if (synth->parsed()) {
            SyntheticConfig sc = synth_full ? SyntheticConfig{} : fixture_config();
            if (synth_seed != 0) sc.seed = synth_seed;
            auto corpus = generate_synthetic(sc);
            fs::create_directories(synth_dir);
            write_corpus_jsonl(corpus.records, fs::path(synth_dir) / "corpus.jsonl");
            write_lexicon(corpus.lexicon, fs::path(synth_dir) / "lexicon.txt");
            std::cout << corpus.records.size() << " abstracts, " << corpus.lexicon.size() << " concepts -> "
                      << synth_dir << '\n';
            return 0;
        }
        auto cfg = resolve_config(g);
        if (run_everything) {
            run_all(cfg);
        } else {
            run_stage(cfg, *chosen);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << '\n';
        return kExitDependency;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
