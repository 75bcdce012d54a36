#include "dynlink/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dynlink/error.hpp"
#include "dynlink/log.hpp"
#include "dynlink/random.hpp"

namespace dynlink {

void SplitSpec::validate() const {
    auto check = [](YearRange r, const char* name) {
        if (r.first > r.last) throw ConfigError(std::string("split.") + name + " is an inverted year range");
    };
    check(train_delta, "train_delta");
    check(train_lambda, "train_lambda");
    check(test_delta, "test_delta");
    check(test_lambda, "test_lambda");
    if (train_lambda.first != train_delta.last + 1) {
        throw ConfigError("split.train_lambda must start the year after split.train_delta ends");
    }
    if (test_lambda.first != test_delta.last + 1) {
        throw ConfigError("split.test_lambda must start the year after split.test_delta ends");
    }
    const int s = shift();
    if (s < 0 || test_delta.first != train_delta.first ||
        test_lambda.first - train_lambda.first != s || test_lambda.last - train_lambda.last != s) {
        throw ConfigError("split: test windows must be the train windows shifted forward by a fixed number of years");
    }
}

std::vector<ConceptPair> enumerate_candidate_pairs(const CoocGraph& delta_graph, std::span<const ConceptId> concepts,
                                                   int min_degree) {
    std::vector<ConceptId> eligible;
    for (auto c : concepts) {
        if (delta_graph.degree(c) >= static_cast<std::size_t>(std::max(0, min_degree))) eligible.push_back(c);
    }
    std::sort(eligible.begin(), eligible.end());
    eligible.erase(std::unique(eligible.begin(), eligible.end()), eligible.end());

    std::vector<ConceptPair> pairs;
    for (std::size_t i = 0; i < eligible.size(); ++i) {
        auto nb = delta_graph.neighbors(eligible[i]);
        auto it = nb.begin();
        for (std::size_t j = i + 1; j < eligible.size(); ++j) {
            ConceptId b = eligible[j];
            while (it != nb.end() && it->to < b) ++it;
            if (it != nb.end() && it->to == b) continue;
            pairs.emplace_back(eligible[i], b);
        }
    }
    return pairs;
}

std::vector<LabeledPair> label_and_balance(std::span<const ConceptPair> pairs, const CoocGraph& lambda_graph,
                                           std::uint64_t seed) {
    std::vector<LabeledPair> positives;
    std::vector<std::size_t> negative_idx;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (lambda_graph.connected(pairs[i].first, pairs[i].second)) {
            positives.push_back({pairs[i], 1});
        } else {
            negative_idx.push_back(i);
        }
    }
    if (positives.empty()) throw Error("no candidate pair becomes connected in the label window");
    if (negative_idx.size() < positives.size()) {
        log::warn("fewer negatives (" + std::to_string(negative_idx.size()) + ") than positives (" +
                  std::to_string(positives.size()) + "); keeping all negatives");
    }

    // Partial Fisher-Yates: the first k slots become a uniform sample.
    Rng rng(derive_seed(seed, 0xba1));
    const std::size_t k = std::min(positives.size(), negative_idx.size());
    for (std::size_t i = 0; i < k; ++i) {
        auto j = i + static_cast<std::size_t>(uniform_index(rng, negative_idx.size() - i));
        std::swap(negative_idx[i], negative_idx[j]);
    }
    negative_idx.resize(k);
    std::sort(negative_idx.begin(), negative_idx.end());

    auto out = std::move(positives);
    for (auto i : negative_idx) out.push_back({pairs[i], 0});
    return out;
}

std::string_view to_string(FeatureSource s) {
    switch (s) {
    case FeatureSource::word_dynamic: return "word-dynamic";
    case FeatureSource::word_static: return "word-static";
    case FeatureSource::word_hand: return "word-hand";
    case FeatureSource::knowledge_hand: return "knowledge-hand";
    case FeatureSource::knowledge_node: return "knowledge-node";
    }
    return "unknown";
}

std::optional<FeatureSource> parse_feature_source(std::string_view s) {
    for (auto src : kAllSources) {
        if (to_string(src) == s) return src;
    }
    return std::nullopt;
}

std::size_t feature_width(FeatureSource source, std::size_t embedding_dim) {
    switch (source) {
    case FeatureSource::word_hand: return 1;
    case FeatureSource::knowledge_hand: return 15;
    default: return 2 * embedding_dim;
    }
}

namespace {

const EmbeddingTimeline& need(const EmbeddingTimeline* tl, FeatureSource s) {
    if (!tl) throw Error(std::string("missing embedding input for feature source ") + std::string(to_string(s)));
    return *tl;
}

// Static and node timelines hold a single year; the dynamic one is indexed by
// the window end.
int lookup_year(const EmbeddingTimeline& tl, int year) {
    return tl.years.size() == 1 ? tl.years.first : year;
}

void append(std::vector<double>& out, std::span<const float> v) {
    out.insert(out.end(), v.begin(), v.end());
}

} // namespace

std::vector<double> pair_features(FeatureSource source, const FeatureInputs& in, ConceptId a, ConceptId b) {
    std::vector<double> f;
    switch (source) {
    case FeatureSource::word_dynamic:
    case FeatureSource::word_static:
    case FeatureSource::knowledge_node: {
        const auto& tl = need(source == FeatureSource::word_dynamic  ? in.dynamic
                              : source == FeatureSource::word_static ? in.static_model
                                                                     : in.node,
                              source);
        int year = lookup_year(tl, in.year);
        append(f, tl.concept_vector(a, year));
        append(f, tl.concept_vector(b, year));
        break;
    }
    case FeatureSource::word_hand: {
        const auto& tl = need(in.static_model, source);
        int year = lookup_year(tl, in.year);
        f.push_back(cosine_feature(tl.concept_vector(a, year), tl.concept_vector(b, year)));
        break;
    }
    case FeatureSource::knowledge_hand: {
        if (!in.handcrafted) throw Error("missing graph input for feature source knowledge-hand");
        auto feats = (*in.handcrafted)(a, b);
        f.assign(feats.values.begin(), feats.values.end());
        break;
    }
    }
    return f;
}

std::vector<PairSample> assemble_feature_vectors(std::span<const LabeledPair> pairs, FeatureSource source,
                                                 const FeatureInputs& inputs, bool both_orders) {
    std::vector<PairSample> out;
    out.reserve(pairs.size() * (both_orders ? 2 : 1));
    for (const auto& lp : pairs) {
        auto [a, b] = lp.pair;
        out.push_back({a, b, lp.label, pair_features(source, inputs, a, b), source});
        if (both_orders) out.push_back({b, a, lp.label, pair_features(source, inputs, b, a), source});
    }
    return out;
}

TrainValSplit split_train_val(std::span<const LabeledPair> pairs, double train_fraction, std::uint64_t seed) {
    std::vector<LabeledPair> all(pairs.begin(), pairs.end());
    Rng rng(derive_seed(seed, 0x5b1));
    shuffle(all, rng);
    auto n_train = static_cast<std::size_t>(train_fraction * static_cast<double>(all.size()) + 0.5);
    n_train = std::min(n_train, all.size());
    TrainValSplit out;
    out.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.val.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
    return out;
}

PairDataset build_pair_dataset(const std::vector<TokenizedDoc>& docs, const SplitSpec& split, int min_degree,
                               std::uint64_t seed, double train_fraction) {
    split.validate();
    auto window = [&](YearRange delta, YearRange lambda, std::uint64_t stream) {
        auto delta_graph = build_cooc_graph(docs, delta);
        auto lambda_graph = build_cooc_graph(docs, lambda);
        std::vector<ConceptId> nodes;
        for (std::size_t v = 0; v < delta_graph.node_bound(); ++v) nodes.push_back(static_cast<ConceptId>(v));
        auto candidates = enumerate_candidate_pairs(delta_graph, nodes, min_degree);
        auto labeled = label_and_balance(candidates, lambda_graph, derive_seed(seed, stream));
        for (const auto& lp : labeled) {
            if (delta_graph.connected(lp.pair.first, lp.pair.second)) throw Error("candidate pair leaks from delta window");
        }
        return labeled;
    };
    PairDataset ds;
    auto train_pairs = window(split.train_delta, split.train_lambda, 1);
    auto tv = split_train_val(train_pairs, train_fraction, derive_seed(seed, 3));
    ds.train = std::move(tv.train);
    ds.val = std::move(tv.val);
    ds.test = window(split.test_delta, split.test_lambda, 2);
    return ds;
}

// ---------------------------------------------------------------- export

namespace {

constexpr char kFeatMagic[4] = {'F', 'E', 'A', 'T'};
constexpr std::uint32_t kFeatVersion = 1;

void put_le(std::string& buf, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

} // namespace

void write_samples(const std::vector<PairSample>& samples, const std::filesystem::path& csv_path,
                   const std::filesystem::path& feature_path) {
    std::ofstream csv(csv_path);
    if (!csv) throw Error("cannot write " + csv_path.string());
    csv << "c1,c2,label,source_tag\n";
    for (const auto& s : samples) csv << s.c1 << ',' << s.c2 << ',' << s.label << ',' << to_string(s.source) << '\n';

    const std::size_t cols = samples.empty() ? 0 : samples.front().features.size();
    std::string buf(kFeatMagic, 4);
    put_le(buf, kFeatVersion, 4);
    put_le(buf, samples.size(), 8);
    put_le(buf, cols, 4);
    for (const auto& s : samples) {
        if (s.features.size() != cols) throw Error("write_samples: ragged feature rows");
        for (double x : s.features) put_le(buf, std::bit_cast<std::uint64_t>(x), 8);
    }
    std::ofstream bin(feature_path, std::ios::binary);
    if (!bin) throw Error("cannot write " + feature_path.string());
    bin.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<PairSample> read_samples(const std::filesystem::path& csv_path, const std::filesystem::path& feature_path) {
    std::ifstream csv(csv_path);
    if (!csv) throw Error("cannot open " + csv_path.string());
    std::vector<PairSample> out;
    std::string line;
    std::getline(csv, line); // header
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string c1, c2, label, tag;
        std::getline(ss, c1, ',');
        std::getline(ss, c2, ',');
        std::getline(ss, label, ',');
        std::getline(ss, tag, ',');
        auto src = parse_feature_source(tag);
        if (!src) throw FormatError(csv_path.string() + ": unknown source tag '" + tag + "'");
        out.push_back({std::stoi(c1), std::stoi(c2), std::stoi(label), {}, *src});
    }

    std::ifstream bin(feature_path, std::ios::binary);
    if (!bin) throw Error("cannot open " + feature_path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    if (bytes.size() < 20 || std::memcmp(bytes.data(), kFeatMagic, 4) != 0) {
        throw FormatError(feature_path.string() + ": not a feature file");
    }
    if (get_le(bytes.data() + 4, 4) != kFeatVersion) throw FormatError(feature_path.string() + ": unsupported version");
    auto rows = get_le(bytes.data() + 8, 8);
    auto cols = get_le(bytes.data() + 16, 4);
    if (rows != out.size()) throw FormatError(feature_path.string() + ": row count differs from " + csv_path.string());
    if (bytes.size() != 20 + rows * cols * 8) throw FormatError(feature_path.string() + ": truncated feature file");
    const unsigned char* p = bytes.data() + 20;
    for (auto& s : out) {
        s.features.resize(cols);
        for (auto& x : s.features) {
            x = std::bit_cast<double>(get_le(p, 8));
            p += 8;
        }
    }
    return out;
}

void write_pairs_csv(const std::vector<LabeledPair>& pairs, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "c1,c2,label\n";
    for (const auto& p : pairs) out << p.pair.first << ',' << p.pair.second << ',' << p.label << '\n';
}

std::vector<LabeledPair> read_pairs_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<LabeledPair> out;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, l;
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        std::getline(ss, l, ',');
        out.push_back({{std::stoi(a), std::stoi(b)}, std::stoi(l)});
    }
    return out;
}

} // namespace dynlink
