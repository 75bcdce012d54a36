#include "dynlink/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "dynlink/error.hpp"

namespace dynlink {

double bce_loss(std::span<const double> y_hat, std::span<const double> y) {
    if (y_hat.size() != y.size()) throw Error("bce_loss: length mismatch");
    if (y.empty()) throw Error("bce_loss: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double p = std::clamp(y_hat[i], kProbEps, 1.0 - kProbEps);
        sum += y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
    }
    return -sum / static_cast<double>(y.size());
}

namespace {

double sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double prelu(double x, double slope) {
    return x > 0 ? x : slope * x;
}

} // namespace

Mlp::Mlp(int input_dim, const MlpConfig& cfg, std::uint64_t seed) : input_dim_(input_dim), cfg_(cfg) {
    if (input_dim < 1) throw ConfigError("classifier input dimension must be >= 1");
    if (cfg.dropout < 0 || cfg.dropout >= 1) throw ConfigError("classifier.dropout must be in [0,1)");
    Rng rng(derive_seed(seed, 0x3197));
    auto uniform = [&](double bound) { return (2.0 * uniform01(rng) - 1.0) * bound; };

    int in = input_dim;
    for (int width : cfg.hidden) {
        if (width < 1) throw ConfigError("classifier hidden widths must be >= 1");
        Hidden h;
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        h.weight.resize(width, in);
        for (Eigen::Index i = 0; i < h.weight.size(); ++i) h.weight.data()[i] = uniform(bound);
        h.bias.resize(width);
        for (Eigen::Index i = 0; i < width; ++i) h.bias[i] = uniform(bound);
        h.gamma = Vector::Ones(width);
        h.beta = Vector::Zero(width);
        h.running_mean = Vector::Zero(width);
        h.running_var = Vector::Ones(width);
        h.slope = cfg.prelu_init;
        hidden_.push_back(std::move(h));
        in = width;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    head_w_.resize(in);
    for (Eigen::Index i = 0; i < in; ++i) head_w_[i] = uniform(bound);
    head_b_ = 0.0;
}

std::vector<double> Mlp::predict_proba(const Matrix& x) const {
    if (x.cols() != input_dim_) throw Error("predict_proba: expected width " + std::to_string(input_dim_) + ", got " +
                                            std::to_string(x.cols()));
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    Vector a;
    Vector z;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        a = x.row(r).transpose();
        for (const auto& h : hidden_) {
            z.noalias() = h.weight * a;
            z += h.bias;
            for (Eigen::Index i = 0; i < z.size(); ++i) {
                double bn = (z[i] - h.running_mean[i]) / std::sqrt(h.running_var[i] + cfg_.bn_eps) * h.gamma[i] + h.beta[i];
                z[i] = prelu(bn, h.slope);
            }
            a.swap(z);
        }
        double pre = head_w_.dot(a) + head_b_;
        if (cfg_.head_relu) pre = std::max(0.0, pre);
        out[static_cast<std::size_t>(r)] = sigmoid(pre);
    }
    return out;
}

std::vector<double> Mlp::forward_train(const Matrix& x, Rng* rng, bool update_running) {
    if (x.cols() != input_dim_) throw Error("forward: expected width " + std::to_string(input_dim_) + ", got " +
                                            std::to_string(x.cols()));
    if (x.rows() < 2) throw Error("forward: train mode needs a batch of at least 2 rows for batch normalization");
    const auto n = static_cast<double>(x.rows());
    cache_.resize(hidden_.size());

    Matrix a = x;
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        auto& h = hidden_[l];
        auto& c = cache_[l];
        c.input = a;
        Matrix z = a * h.weight.transpose();
        z.rowwise() += h.bias.transpose();

        Vector mean = z.colwise().mean().transpose();
        Matrix centered = z.rowwise() - mean.transpose();
        Vector var = centered.colwise().squaredNorm().transpose() / n;
        c.inv_std = (var.array() + cfg_.bn_eps).rsqrt().matrix();
        c.xhat = centered.array().rowwise() * c.inv_std.transpose().array();
        c.bn_out = (c.xhat.array().rowwise() * h.gamma.transpose().array()).rowwise() + h.beta.transpose().array();

        if (update_running) {
            const double m = cfg_.bn_momentum;
            h.running_mean = (1 - m) * h.running_mean + m * mean;
            h.running_var = (1 - m) * h.running_var + m * var * (n / (n - 1));
        }

        Matrix act = c.bn_out.unaryExpr([s = h.slope](double v) { return prelu(v, s); });
        if (rng && cfg_.dropout > 0) {
            const double keep = 1.0 - cfg_.dropout;
            c.mask.resize(act.rows(), act.cols());
            for (Eigen::Index i = 0; i < c.mask.size(); ++i) {
                c.mask.data()[i] = uniform01(*rng) < cfg_.dropout ? 0.0 : 1.0 / keep;
            }
            act = act.cwiseProduct(c.mask);
        } else {
            c.mask.resize(0, 0);
        }
        c.output = act;
        a = std::move(act);
    }

    head_in_ = a;
    head_pre_ = a * head_w_;
    head_pre_.array() += head_b_;
    y_hat_.resize(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < head_pre_.size(); ++i) {
        double pre = cfg_.head_relu ? std::max(0.0, head_pre_[i]) : head_pre_[i];
        y_hat_[static_cast<std::size_t>(i)] = sigmoid(pre);
    }
    return y_hat_;
}

void Mlp::backward(std::span<const double> y) {
    if (y.size() != y_hat_.size()) throw Error("backward: label count does not match the last forward batch");
    const auto rows = static_cast<Eigen::Index>(y.size());
    const double n = static_cast<double>(rows);

    Vector dpre(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        double p = y_hat_[static_cast<std::size_t>(i)];
        double g = (p < kProbEps || p > 1.0 - kProbEps) ? 0.0 : (p - y[static_cast<std::size_t>(i)]) / n;
        if (cfg_.head_relu && head_pre_[i] <= 0) g = 0.0;
        dpre[i] = g;
    }
    grad_head_w_ = head_in_.transpose() * dpre;
    grad_head_b_ = dpre.sum();
    Matrix d = dpre * head_w_.transpose();

    grad_.resize(hidden_.size());
    for (std::size_t l = hidden_.size(); l-- > 0;) {
        const auto& h = hidden_[l];
        const auto& c = cache_[l];
        auto& g = grad_[l];
        if (c.mask.size() > 0) d = d.cwiseProduct(c.mask);

        Matrix dy(d.rows(), d.cols());
        double dslope = 0.0;
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            double v = c.bn_out.data()[i];
            double gi = d.data()[i];
            if (v > 0) {
                dy.data()[i] = gi;
            } else {
                dy.data()[i] = gi * h.slope;
                dslope += gi * v;
            }
        }
        g.slope = dslope;
        g.gamma = dy.cwiseProduct(c.xhat).colwise().sum().transpose();
        g.beta = dy.colwise().sum().transpose();

        Matrix dxhat = dy.array().rowwise() * h.gamma.transpose().array();
        Vector sum_dxhat = dxhat.colwise().sum().transpose();
        Vector sum_dxhat_xhat = dxhat.cwiseProduct(c.xhat).colwise().sum().transpose();
        Matrix dz = (n * dxhat.array() - (c.xhat.array().rowwise() * sum_dxhat_xhat.transpose().array())).rowwise() -
                    sum_dxhat.transpose().array();
        dz = dz.array().rowwise() * (c.inv_std.transpose().array() / n);

        g.weight = dz.transpose() * c.input;
        g.bias = dz.colwise().sum().transpose();
        d = dz * h.weight;
    }
}

std::vector<std::span<double>> Mlp::parameters() {
    std::vector<std::span<double>> out;
    for (auto& h : hidden_) {
        out.emplace_back(h.weight.data(), static_cast<std::size_t>(h.weight.size()));
        out.emplace_back(h.bias.data(), static_cast<std::size_t>(h.bias.size()));
        out.emplace_back(h.gamma.data(), static_cast<std::size_t>(h.gamma.size()));
        out.emplace_back(h.beta.data(), static_cast<std::size_t>(h.beta.size()));
        out.emplace_back(&h.slope, 1);
    }
    out.emplace_back(head_w_.data(), static_cast<std::size_t>(head_w_.size()));
    out.emplace_back(&head_b_, 1);
    return out;
}

std::vector<std::span<double>> Mlp::gradients() {
    if (grad_.size() != hidden_.size()) throw Error("gradients requested before backward");
    std::vector<std::span<double>> out;
    for (auto& g : grad_) {
        out.emplace_back(g.weight.data(), static_cast<std::size_t>(g.weight.size()));
        out.emplace_back(g.bias.data(), static_cast<std::size_t>(g.bias.size()));
        out.emplace_back(g.gamma.data(), static_cast<std::size_t>(g.gamma.size()));
        out.emplace_back(g.beta.data(), static_cast<std::size_t>(g.beta.size()));
        out.emplace_back(&g.slope, 1);
    }
    out.emplace_back(grad_head_w_.data(), static_cast<std::size_t>(grad_head_w_.size()));
    out.emplace_back(&grad_head_b_, 1);
    return out;
}

bool Mlp::operator==(const Mlp& o) const {
    if (input_dim_ != o.input_dim_ || hidden_.size() != o.hidden_.size() || head_b_ != o.head_b_ ||
        head_w_ != o.head_w_ || cfg_.head_relu != o.cfg_.head_relu || cfg_.hidden != o.cfg_.hidden) {
        return false;
    }
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        const auto& a = hidden_[l];
        const auto& b = o.hidden_[l];
        if (a.weight != b.weight || a.bias != b.bias || a.gamma != b.gamma || a.beta != b.beta ||
            a.running_mean != b.running_mean || a.running_var != b.running_var || a.slope != b.slope) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr char kMlpMagic[4] = {'M', 'L', 'P', 'C'};
constexpr std::uint32_t kMlpVersion = 1;

struct Writer {
    std::string buf;
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
    void f64(double x) {
        auto v = std::bit_cast<std::uint64_t>(x);
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
    void block(const double* p, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) f64(p[i]);
    }
};

struct Reader {
    const std::vector<unsigned char>& bytes;
    std::size_t pos = 0;
    std::string name;
    void need(std::size_t n) {
        if (pos + n > bytes.size()) throw FormatError(name + ": truncated classifier checkpoint");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(v);
    }
    void block(double* p, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) p[i] = f64();
    }
};

} // namespace

void Mlp::save(const std::filesystem::path& path) const {
    Writer w;
    w.buf.assign(kMlpMagic, 4);
    w.u32(kMlpVersion);
    w.u32(static_cast<std::uint32_t>(input_dim_));
    w.u32(static_cast<std::uint32_t>(hidden_.size()));
    for (const auto& h : hidden_) w.u32(static_cast<std::uint32_t>(h.weight.rows()));
    w.u32(cfg_.head_relu ? 1 : 0);
    w.f64(cfg_.dropout);
    w.f64(cfg_.prelu_init);
    w.f64(cfg_.bn_eps);
    w.f64(cfg_.bn_momentum);
    for (const auto& h : hidden_) {
        w.block(h.weight.data(), h.weight.size());
        w.block(h.bias.data(), h.bias.size());
        w.block(h.gamma.data(), h.gamma.size());
        w.block(h.beta.data(), h.beta.size());
        w.block(h.running_mean.data(), h.running_mean.size());
        w.block(h.running_var.data(), h.running_var.size());
        w.f64(h.slope);
    }
    w.block(head_w_.data(), head_w_.size());
    w.f64(head_b_);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
}

Mlp Mlp::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r{bytes, 0, path.string()};
    r.need(4);
    if (std::memcmp(bytes.data(), kMlpMagic, 4) != 0) throw FormatError(path.string() + ": not a classifier checkpoint");
    r.pos = 4;
    if (auto v = r.u32(); v != kMlpVersion) {
        throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(v));
    }
    Mlp m;
    m.input_dim_ = static_cast<int>(r.u32());
    auto layers = r.u32();
    if (layers > 64) throw FormatError(path.string() + ": implausible layer count");
    m.cfg_.hidden.clear();
    for (std::uint32_t i = 0; i < layers; ++i) m.cfg_.hidden.push_back(static_cast<int>(r.u32()));
    m.cfg_.head_relu = r.u32() != 0;
    m.cfg_.dropout = r.f64();
    m.cfg_.prelu_init = r.f64();
    m.cfg_.bn_eps = r.f64();
    m.cfg_.bn_momentum = r.f64();
    int in_dim = m.input_dim_;
    for (int width : m.cfg_.hidden) {
        Hidden h;
        h.weight.resize(width, in_dim);
        h.bias.resize(width);
        h.gamma.resize(width);
        h.beta.resize(width);
        h.running_mean.resize(width);
        h.running_var.resize(width);
        r.block(h.weight.data(), h.weight.size());
        r.block(h.bias.data(), width);
        r.block(h.gamma.data(), width);
        r.block(h.beta.data(), width);
        r.block(h.running_mean.data(), width);
        r.block(h.running_var.data(), width);
        h.slope = r.f64();
        m.hidden_.push_back(std::move(h));
        in_dim = width;
    }
    m.head_w_.resize(in_dim);
    r.block(m.head_w_.data(), in_dim);
    m.head_b_ = r.f64();
    if (r.pos != bytes.size()) throw FormatError(path.string() + ": trailing bytes in classifier checkpoint");
    return m;
}

// ---------------------------------------------------------------- training

FitResult fit(Mlp& model, const Matrix& x_train, std::span<const double> y_train, const Matrix& x_val,
              std::span<const double> y_val, const FitConfig& cfg) {
    if (x_train.rows() == 0) throw Error("fit: empty training set");
    if (x_train.rows() < 2) throw Error("fit: training set needs at least 2 rows for batch normalization");
    if (static_cast<std::size_t>(x_train.rows()) != y_train.size()) throw Error("fit: train label count mismatch");
    if (x_val.rows() == 0) throw Error("fit: empty validation set");
    if (static_cast<std::size_t>(x_val.rows()) != y_val.size()) throw Error("fit: validation label count mismatch");
    if (cfg.batch_size < 2) throw ConfigError("classifier.batch_size must be >= 2");

    auto params = model.parameters();
    std::vector<std::vector<double>> m1, m2;
    for (auto p : params) {
        m1.emplace_back(p.size(), 0.0);
        m2.emplace_back(p.size(), 0.0);
    }

    const auto n = static_cast<std::size_t>(x_train.rows());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    // Batch boundaries; a trailing single row joins the previous batch.
    std::vector<std::size_t> bounds;
    for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(cfg.batch_size)) bounds.push_back(b);
    if (n - bounds.back() < 2 && bounds.size() > 1) bounds.pop_back();
    bounds.push_back(n);

    FitResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    Mlp best = model;
    double lr = cfg.learning_rate;
    int since_best = 0;
    int since_lr = 0;
    std::uint64_t step = 0;
    Rng rng(derive_seed(cfg.seed, 0xf17));
    Matrix xb;
    std::vector<double> yb;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle(order, rng);
        double loss_sum = 0.0;
        for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
            const std::size_t lo = bounds[k];
            const std::size_t hi = bounds[k + 1];
            xb.resize(static_cast<Eigen::Index>(hi - lo), x_train.cols());
            yb.resize(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) {
                xb.row(static_cast<Eigen::Index>(i - lo)) = x_train.row(static_cast<Eigen::Index>(order[i]));
                yb[i - lo] = y_train[order[i]];
            }
            auto probs = model.forward_train(xb, &rng, true);
            loss_sum += bce_loss(probs, yb) * static_cast<double>(hi - lo);
            model.backward(yb);

            ++step;
            auto grads = model.gradients();
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t p = 0; p < params.size(); ++p) {
                for (std::size_t i = 0; i < params[p].size(); ++i) {
                    const double g = grads[p][i];
                    m1[p][i] = cfg.beta1 * m1[p][i] + (1 - cfg.beta1) * g;
                    m2[p][i] = cfg.beta2 * m2[p][i] + (1 - cfg.beta2) * g * g;
                    params[p][i] -= lr * (m1[p][i] / c1) / (std::sqrt(m2[p][i] / c2) + cfg.adam_eps);
                }
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n);
        rec.val_loss = bce_loss(model.predict_proba(x_val), y_val);
        rec.lr = lr;
        result.history.push_back(rec);

        if (rec.val_loss < result.best_val_loss) {
            result.best_val_loss = rec.val_loss;
            result.best_epoch = epoch;
            best = model;
            since_best = 0;
            since_lr = 0;
        } else {
            ++since_best;
            ++since_lr;
            if (since_best >= cfg.patience_stop) break;
            if (since_lr >= cfg.patience_lr) {
                lr *= cfg.lr_decay;
                since_lr = 0;
            }
        }
    }
    model = std::move(best);
    return result;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "epoch,train_loss,val_loss,lr\n";
    for (const auto& r : history) out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.lr << '\n';
}

} // namespace dynlink
