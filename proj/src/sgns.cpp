#include "dynlink/sgns.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include "dynlink/error.hpp"
#include "dynlink/random.hpp"

namespace dynlink {

void TrainConfig::validate() const {
    if (window < 1) throw ConfigError("embedding.window must be >= 1");
    if (dim < 1) throw ConfigError("embedding.dim must be >= 1");
    if (negatives < 1) throw ConfigError("embedding.negatives must be >= 1");
    if (epochs < 1) throw ConfigError("embedding.epochs must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("embedding.learning_rate must be > 0");
    if (min_lr_fraction < 0 || min_lr_fraction > 1) throw ConfigError("embedding.min_lr_fraction must be in [0,1]");
    if (unigram_power < 0) throw ConfigError("embedding.unigram_power must be >= 0");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (min_count < 1) throw ConfigError("embedding.min_count must be >= 1");
}

// ---------------------------------------------------------------- vocabulary

Vocabulary Vocabulary::build(const std::vector<TokenSeq>& docs, int min_count) {
    std::unordered_map<std::string, std::uint64_t> counts;
    for (const auto& d : docs) {
        for (const auto& t : d) ++counts[t];
    }
    std::vector<std::pair<std::string, std::uint64_t>> entries;
    entries.reserve(counts.size());
    for (auto& [tok, n] : counts) {
        if (n >= static_cast<std::uint64_t>(min_count) || parse_concept_token(tok)) entries.emplace_back(tok, n);
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> tokens;
    std::vector<std::uint64_t> freq;
    for (auto& [tok, n] : entries) {
        tokens.push_back(std::move(tok));
        freq.push_back(n);
    }
    return from_tokens(std::move(tokens), std::move(freq));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, std::vector<std::uint64_t> counts) {
    if (tokens.size() != counts.size()) throw Error("vocabulary: token/count size mismatch");
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    v.counts_ = std::move(counts);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        if (!v.index_.emplace(v.tokens_[i], static_cast<TokenRow>(i)).second) {
            throw Error("vocabulary: duplicate token '" + v.tokens_[i] + "'");
        }
    }
    return v;
}

std::optional<TokenRow> Vocabulary::row(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

EncodedDoc Vocabulary::encode(const TokenSeq& doc) const {
    EncodedDoc out;
    out.reserve(doc.size());
    for (const auto& t : doc) {
        if (auto r = row(t)) out.push_back(*r);
    }
    return out;
}

// ---------------------------------------------------------------- model

SgnsModel init_model(std::size_t vocab_size, const TrainConfig& cfg) {
    if (cfg.dim < 1) throw ConfigError("embedding dimension must be >= 1");
    if (vocab_size == 0) throw Error("cannot initialize a model over an empty vocabulary");
    SgnsModel m;
    m.rows = vocab_size;
    m.dim = static_cast<std::size_t>(cfg.dim);
    m.w_in.resize(m.rows * m.dim);
    m.w_out.assign(m.rows * m.dim, 0.0);
    Rng rng(derive_seed(cfg.seed, 0x1417));
    const double scale = 1.0 / static_cast<double>(m.dim);
    for (auto& x : m.w_in) x = (uniform01(rng) - 0.5) * scale;
    return m;
}

namespace {

double sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 + e^x)
double softplus(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <bool Shared>
double load(const double& x) {
    if constexpr (Shared) {
        return std::atomic_ref<const double>(x).load(std::memory_order_relaxed);
    } else {
        return x;
    }
}

template <bool Shared>
void store(double& x, double v) {
    if constexpr (Shared) {
        std::atomic_ref<double>(x).store(v, std::memory_order_relaxed);
    } else {
        x = v;
    }
}

struct Scratch {
    std::vector<double> dv;
    std::vector<double> v;
    std::vector<double> coeff;
};

void check_row(const SgnsModel& m, TokenRow r) {
    if (r < 0 || static_cast<std::size_t>(r) >= m.rows) throw Error("sgns: token row out of range");
}

// Applies one pair update and returns the pre-update loss. All dot products
// and the center gradient use pre-update values.
template <bool Shared>
double pair_update(double* w_in, double* w_out, std::size_t dim, TokenRow center, TokenRow context,
                   std::span<const TokenRow> negatives, double lr, Scratch& s) {
    double* v = w_in + static_cast<std::size_t>(center) * dim;
    const std::size_t outputs = 1 + negatives.size();
    s.dv.assign(dim, 0.0);
    s.v.resize(dim);
    s.coeff.resize(outputs);
    for (std::size_t d = 0; d < dim; ++d) s.v[d] = load<Shared>(v[d]);

    double loss = 0.0;
    for (std::size_t j = 0; j < outputs; ++j) {
        TokenRow row = j == 0 ? context : negatives[j - 1];
        const double* u = w_out + static_cast<std::size_t>(row) * dim;
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += load<Shared>(u[d]) * s.v[d];
        double g;
        if (j == 0) {
            loss += softplus(-dot);
            g = sigmoid(dot) - 1.0;
        } else {
            loss += softplus(dot);
            g = sigmoid(dot);
        }
        s.coeff[j] = g;
        for (std::size_t d = 0; d < dim; ++d) s.dv[d] += g * load<Shared>(u[d]);
    }
    for (std::size_t j = 0; j < outputs; ++j) {
        TokenRow row = j == 0 ? context : negatives[j - 1];
        double* u = w_out + static_cast<std::size_t>(row) * dim;
        const double step = lr * s.coeff[j];
        for (std::size_t d = 0; d < dim; ++d) store<Shared>(u[d], load<Shared>(u[d]) - step * s.v[d]);
    }
    for (std::size_t d = 0; d < dim; ++d) store<Shared>(v[d], load<Shared>(v[d]) - lr * s.dv[d]);
    return loss;
}

} // namespace

double sgns_loss(const SgnsModel& model, TokenRow center, TokenRow context, std::span<const TokenRow> negatives) {
    check_row(model, center);
    check_row(model, context);
    auto v = model.in_row(center);
    auto dot = [&](TokenRow r) {
        auto u = model.out_row(r);
        return std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
    };
    double loss = softplus(-dot(context));
    for (auto n : negatives) {
        check_row(model, n);
        loss += softplus(dot(n));
    }
    return loss;
}

SgnsGradient sgns_gradient(const SgnsModel& model, TokenRow center, TokenRow context,
                           std::span<const TokenRow> negatives) {
    check_row(model, center);
    check_row(model, context);
    for (auto n : negatives) check_row(model, n);
    SgnsGradient g;
    auto v = model.in_row(center);
    g.center.assign(model.dim, 0.0);
    g.output_rows.push_back(context);
    g.output_rows.insert(g.output_rows.end(), negatives.begin(), negatives.end());
    for (std::size_t j = 0; j < g.output_rows.size(); ++j) {
        auto u = model.out_row(g.output_rows[j]);
        double dot = std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
        double coeff = j == 0 ? sigmoid(dot) - 1.0 : sigmoid(dot);
        std::vector<double> du(model.dim);
        for (std::size_t d = 0; d < model.dim; ++d) {
            g.center[d] += coeff * u[d];
            du[d] = coeff * v[d];
        }
        g.output.push_back(std::move(du));
    }
    return g;
}

double sgns_step(SgnsModel& model, TokenRow center, TokenRow context, std::span<const TokenRow> negatives,
                 double lr) {
    check_row(model, center);
    check_row(model, context);
    for (auto n : negatives) check_row(model, n);
    Scratch s;
    return pair_update<false>(model.w_in.data(), model.w_out.data(), model.dim, center, context, negatives, lr, s);
}

std::optional<double> YearTrainResult::mean_loss() const {
    if (epoch_loss.empty()) return std::nullopt;
    return std::accumulate(epoch_loss.begin(), epoch_loss.end(), 0.0) / static_cast<double>(epoch_loss.size());
}

// ---------------------------------------------------------------- training

namespace {

// Unigram^power sampling table over the tokens of one slice.
class NegativeSampler {
public:
    NegativeSampler(const std::vector<std::uint64_t>& counts, double power) {
        double acc = 0.0;
        for (std::size_t r = 0; r < counts.size(); ++r) {
            if (counts[r] == 0) continue;
            acc += std::pow(static_cast<double>(counts[r]), power);
            rows_.push_back(static_cast<TokenRow>(r));
            cdf_.push_back(acc);
        }
    }

    bool empty() const { return rows_.empty(); }

    TokenRow draw(Rng& rng) const {
        double x = uniform01(rng) * cdf_.back();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), x);
        if (it == cdf_.end()) --it;
        return rows_[static_cast<std::size_t>(it - cdf_.begin())];
    }

private:
    std::vector<TokenRow> rows_;
    std::vector<double> cdf_;
};

struct SliceContext {
    const TrainConfig& cfg;
    NegativeSampler sampler;
    std::vector<double> keep_prob; // per row
    std::uint64_t total_centers = 0;
};

struct WorkerTotals {
    double loss = 0.0;
    std::uint64_t pairs = 0;
};

template <bool Shared>
WorkerTotals run_docs(SgnsModel& model, std::span<const EncodedDoc> docs, const SliceContext& ctx,
                      std::atomic<std::uint64_t>& progress, Rng& rng) {
    const auto& cfg = ctx.cfg;
    WorkerTotals totals;
    Scratch scratch;
    std::vector<TokenRow> kept;
    std::vector<TokenRow> negs;
    const double lr0 = cfg.learning_rate;
    const double floor = lr0 * cfg.min_lr_fraction;
    const double total = static_cast<double>(std::max<std::uint64_t>(ctx.total_centers, 1));

    for (const auto& doc : docs) {
        kept.clear();
        for (auto r : doc) {
            double p = ctx.keep_prob[static_cast<std::size_t>(r)];
            if (p >= 1.0 || uniform01(rng) < p) kept.push_back(r);
        }
        const std::size_t n = kept.size();
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t done = progress.fetch_add(1, std::memory_order_relaxed);
            double lr = std::max(floor, lr0 * (1.0 - static_cast<double>(done) / total));
            auto b = static_cast<std::size_t>(1 + rng() % static_cast<std::uint64_t>(cfg.window));
            std::size_t lo = i >= b ? i - b : 0;
            std::size_t hi = std::min(n - 1, i + b);
            for (std::size_t j = lo; j <= hi; ++j) {
                if (j == i) continue;
                negs.clear();
                for (int k = 0; k < cfg.negatives; ++k) {
                    TokenRow neg = ctx.sampler.draw(rng);
                    if (neg != kept[j]) negs.push_back(neg);
                }
                totals.loss += pair_update<Shared>(model.w_in.data(), model.w_out.data(), model.dim, kept[i],
                                                   kept[j], negs, lr, scratch);
                ++totals.pairs;
            }
        }
    }
    return totals;
}

} // namespace

YearTrainResult train_year(SgnsModel& model, std::span<const EncodedDoc> docs, const TrainConfig& cfg,
                           std::uint64_t stream) {
    cfg.validate();
    YearTrainResult result;

    std::vector<std::uint64_t> counts(model.rows, 0);
    std::uint64_t tokens = 0;
    for (const auto& d : docs) {
        for (auto r : d) {
            if (r < 0 || static_cast<std::size_t>(r) >= model.rows) throw Error("train_year: token row out of range");
            ++counts[static_cast<std::size_t>(r)];
        }
        tokens += d.size();
    }
    if (tokens == 0) return result;

    SliceContext ctx{cfg, NegativeSampler(counts, cfg.unigram_power), std::vector<double>(model.rows, 1.0), 0};
    if (cfg.subsample_threshold > 0) {
        const double t = cfg.subsample_threshold * static_cast<double>(tokens);
        for (std::size_t r = 0; r < model.rows; ++r) {
            if (counts[r] == 0) continue;
            double c = static_cast<double>(counts[r]);
            ctx.keep_prob[r] = (std::sqrt(c / t) + 1.0) * t / c;
        }
    }
    ctx.total_centers = tokens * static_cast<std::uint64_t>(cfg.epochs);

    std::atomic<std::uint64_t> progress{0};
    const auto workers = static_cast<std::size_t>(std::max(1, cfg.workers));
    std::vector<Rng> rngs;
    for (std::size_t w = 0; w < workers; ++w) rngs.emplace_back(derive_seed(cfg.seed, stream, w + 1));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        WorkerTotals sum;
        if (workers == 1 || docs.size() < 2) {
            sum = run_docs<false>(model, docs, ctx, progress, rngs[0]);
        } else {
            std::vector<WorkerTotals> parts(workers);
            std::vector<std::thread> threads;
            const std::size_t chunk = (docs.size() + workers - 1) / workers;
            for (std::size_t w = 0; w < workers; ++w) {
                std::size_t lo = std::min(docs.size(), w * chunk);
                std::size_t hi = std::min(docs.size(), lo + chunk);
                threads.emplace_back([&, w, lo, hi] {
                    parts[w] = run_docs<true>(model, docs.subspan(lo, hi - lo), ctx, progress, rngs[w]);
                });
            }
            for (auto& t : threads) t.join();
            for (const auto& p : parts) {
                sum.loss += p.loss;
                sum.pairs += p.pairs;
            }
        }
        result.positive_pairs += sum.pairs;
        if (sum.pairs > 0) result.epoch_loss.push_back(sum.loss / static_cast<double>(sum.pairs));
    }
    return result;
}

// ---------------------------------------------------------------- timeline

std::optional<std::size_t> EmbeddingTimeline::row_of(ConceptId c) const {
    auto it = std::lower_bound(concepts.begin(), concepts.end(), c);
    if (it == concepts.end() || *it != c) return std::nullopt;
    return static_cast<std::size_t>(it - concepts.begin());
}

std::size_t EmbeddingTimeline::year_index(int year) const {
    if (!years.contains(year)) throw Error("timeline has no year " + std::to_string(year));
    return static_cast<std::size_t>(year - years.first);
}

bool EmbeddingTimeline::is_backfilled(std::size_t row, int year) const {
    return backfilled[year_index(year) * concepts.size() + row] != 0;
}

bool EmbeddingTimeline::has_vector(std::size_t row, int year) const {
    auto fs = first_seen.at(row);
    if (fs == kNotSeen) return false;
    return year >= fs || is_backfilled(row, year);
}

std::span<const float> EmbeddingTimeline::vector(std::size_t row, int year) const {
    return {snapshots[year_index(year)].data() + row * dim, dim};
}

std::span<float> EmbeddingTimeline::vector(std::size_t row, int year) {
    return {snapshots[year_index(year)].data() + row * dim, dim};
}

std::span<const float> EmbeddingTimeline::concept_vector(ConceptId c, int year) const {
    auto row = row_of(c);
    if (!row || !has_vector(*row, year)) {
        throw Error("no embedding for concept " + std::to_string(c) + " in year " + std::to_string(year));
    }
    return vector(*row, year);
}

DynamicCorpus prepare_dynamic_corpus(const std::vector<TokenizedDoc>& docs, YearRange range, int min_count) {
    if (range.first > range.last) throw Error("inverted year range");
    std::vector<TokenSeq> token_docs;
    std::vector<TokenizedDoc> in_range;
    for (const auto& d : docs) {
        if (!range.contains(d.year)) continue;
        token_docs.push_back(d.tokens);
        in_range.push_back(d);
    }
    DynamicCorpus out;
    out.vocab = Vocabulary::build(token_docs, min_count);
    for (int y = range.first; y <= range.last; ++y) out.slices[y];
    for (const auto& d : in_range) out.slices[d.year].push_back(out.vocab.encode(d.tokens));
    out.first_seen = first_occurrences(in_range);
    for (const auto& [c, year] : out.first_seen) {
        if (auto r = out.vocab.row(concept_token(c))) {
            out.concepts.push_back(c);
            out.concept_rows.push_back(*r);
        }
    }
    return out;
}

namespace {

EmbeddingTimeline empty_timeline(const DynamicCorpus& corpus, YearRange years, std::size_t dim) {
    EmbeddingTimeline tl;
    tl.years = years;
    tl.dim = dim;
    tl.concepts = corpus.concepts;
    for (auto c : tl.concepts) {
        auto it = corpus.first_seen.find(c);
        tl.first_seen.push_back(it == corpus.first_seen.end() ? EmbeddingTimeline::kNotSeen : it->second);
    }
    tl.snapshots.assign(static_cast<std::size_t>(years.size()), std::vector<float>(tl.concepts.size() * dim));
    tl.backfilled.assign(static_cast<std::size_t>(years.size()) * tl.concepts.size(), 0);
    return tl;
}

void take_snapshot(EmbeddingTimeline& tl, const DynamicCorpus& corpus, const SgnsModel& model, int year) {
    for (std::size_t i = 0; i < corpus.concept_rows.size(); ++i) {
        auto src = model.in_row(corpus.concept_rows[i]);
        auto dst = tl.vector(i, year);
        std::transform(src.begin(), src.end(), dst.begin(), [](double x) { return static_cast<float>(x); });
    }
}

} // namespace

DynamicResult train_dynamic(const DynamicCorpus& corpus, const TrainConfig& cfg, const YearObserver& observer) {
    cfg.validate();
    if (corpus.slices.empty()) throw Error("train_dynamic: no years to train");
    YearRange years{corpus.slices.begin()->first, corpus.slices.rbegin()->first};
    if (static_cast<std::size_t>(years.size()) != corpus.slices.size()) {
        throw Error("train_dynamic: years must be contiguous");
    }

    DynamicResult out;
    out.timeline = empty_timeline(corpus, years, static_cast<std::size_t>(cfg.dim));
    SgnsModel model = init_model(corpus.vocab.size(), cfg);
    for (const auto& [year, docs] : corpus.slices) {
        if (observer) observer(year, YearPhase::start, model);
        out.per_year[year] = train_year(model, docs, cfg, static_cast<std::uint64_t>(year));
        if (observer) observer(year, YearPhase::end, model);
        take_snapshot(out.timeline, corpus, model, year);
    }
    out.final_model = std::move(model);
    return out;
}

EmbeddingTimeline train_static(const DynamicCorpus& corpus, int through, const TrainConfig& cfg) {
    cfg.validate();
    std::vector<EncodedDoc> docs;
    for (const auto& [year, slice] : corpus.slices) {
        if (year <= through) docs.insert(docs.end(), slice.begin(), slice.end());
    }
    SgnsModel model = init_model(corpus.vocab.size(), cfg);
    train_year(model, docs, cfg, static_cast<std::uint64_t>(through) ^ 0x5747u);

    auto tl = empty_timeline(corpus, {through, through}, static_cast<std::size_t>(cfg.dim));
    for (auto& fs : tl.first_seen) {
        if (fs > through) fs = EmbeddingTimeline::kNotSeen;
    }
    take_snapshot(tl, corpus, model, through);
    return tl;
}

BackfillReport backfill_timeline(EmbeddingTimeline& tl) {
    BackfillReport report;
    const std::size_t n = tl.concepts.size();
    for (std::size_t row = 0; row < n; ++row) {
        int fs = tl.first_seen[row];
        if (fs == EmbeddingTimeline::kNotSeen || fs > tl.years.last) {
            report.absent.push_back(tl.concepts[row]);
            continue;
        }
        if (fs <= tl.years.first) continue;
        auto src = tl.vector(row, fs);
        std::vector<float> copy(src.begin(), src.end());
        for (int y = tl.years.first; y < fs; ++y) {
            std::copy(copy.begin(), copy.end(), tl.vector(row, y).begin());
            tl.backfilled[static_cast<std::size_t>(y - tl.years.first) * n + row] = 1;
            ++report.filled;
        }
    }
    return report;
}

// ---------------------------------------------------------------- file format

namespace {

constexpr char kMagic[4] = {'D', 'W', 'E', 'B'};
constexpr std::uint64_t kHeaderBytes = 24;

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

} // namespace

std::uint64_t timeline_file_size(std::uint64_t concepts, std::uint64_t dim, std::uint64_t years) {
    return kHeaderBytes + 8 * concepts + (concepts * years + 7) / 8 + 4 * years * concepts * dim;
}

void save_timeline(const EmbeddingTimeline& tl, const std::filesystem::path& path) {
    const std::size_t n = tl.concepts.size();
    const auto years = static_cast<std::size_t>(tl.years.size());
    if (tl.first_seen.size() != n || tl.snapshots.size() != years || tl.backfilled.size() != n * years) {
        throw Error("save_timeline: inconsistent timeline");
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());

    std::string head(kMagic, 4);
    put_u32(head, kTimelineVersion);
    put_u32(head, static_cast<std::uint32_t>(n));
    put_u32(head, static_cast<std::uint32_t>(tl.dim));
    put_u32(head, static_cast<std::uint32_t>(tl.years.first));
    put_u32(head, static_cast<std::uint32_t>(years));
    for (auto c : tl.concepts) put_u32(head, static_cast<std::uint32_t>(c));
    for (auto fs : tl.first_seen) put_u32(head, static_cast<std::uint32_t>(fs));
    std::string bitmap((n * years + 7) / 8, '\0');
    for (std::size_t i = 0; i < tl.backfilled.size(); ++i) {
        if (tl.backfilled[i]) bitmap[i / 8] = static_cast<char>(bitmap[i / 8] | (1u << (i % 8)));
    }
    head += bitmap;
    out.write(head.data(), static_cast<std::streamsize>(head.size()));

    std::string block;
    for (const auto& snap : tl.snapshots) {
        if (snap.size() != n * tl.dim) throw Error("save_timeline: snapshot size mismatch");
        block.clear();
        block.reserve(snap.size() * 4);
        for (float f : snap) put_u32(block, std::bit_cast<std::uint32_t>(f));
        out.write(block.data(), static_cast<std::streamsize>(block.size()));
    }
    if (!out) throw Error("write failed: " + path.string());
}

EmbeddingTimeline load_timeline(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open timeline file: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < kHeaderBytes) throw FormatError(path.string() + ": truncated timeline header");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError(path.string() + ": not a timeline file (bad magic)");
    }
    auto version = get_u32(bytes.data() + 4);
    if (version != kTimelineVersion) {
        throw FormatError(path.string() + ": unsupported timeline version " + std::to_string(version));
    }
    EmbeddingTimeline tl;
    const std::uint64_t n = get_u32(bytes.data() + 8);
    tl.dim = get_u32(bytes.data() + 12);
    tl.years.first = static_cast<int>(get_u32(bytes.data() + 16));
    const std::uint64_t years = get_u32(bytes.data() + 20);
    if (years == 0) throw FormatError(path.string() + ": timeline has no years");
    tl.years.last = tl.years.first + static_cast<int>(years) - 1;
    if (bytes.size() != timeline_file_size(n, tl.dim, years)) {
        throw FormatError(path.string() + ": truncated or oversized timeline (expected " +
                          std::to_string(timeline_file_size(n, tl.dim, years)) + " bytes, found " +
                          std::to_string(bytes.size()) + ")");
    }

    const unsigned char* p = bytes.data() + kHeaderBytes;
    for (std::uint64_t i = 0; i < n; ++i, p += 4) tl.concepts.push_back(static_cast<ConceptId>(get_u32(p)));
    for (std::uint64_t i = 0; i < n; ++i, p += 4) tl.first_seen.push_back(static_cast<std::int32_t>(get_u32(p)));
    tl.backfilled.resize(n * years);
    for (std::size_t i = 0; i < tl.backfilled.size(); ++i) tl.backfilled[i] = (p[i / 8] >> (i % 8)) & 1u;
    p += (n * years + 7) / 8;
    tl.snapshots.resize(years);
    for (auto& snap : tl.snapshots) {
        snap.resize(n * tl.dim);
        for (auto& f : snap) {
            f = std::bit_cast<float>(get_u32(p));
            p += 4;
        }
    }
    if (!std::is_sorted(tl.concepts.begin(), tl.concepts.end())) {
        throw FormatError(path.string() + ": concept table not sorted");
    }
    return tl;
}

} // namespace dynlink
