#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dynlink/random.hpp"

namespace dynlink {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct MlpConfig {
    std::vector<int> hidden{256, 64};
    double dropout = 0.3;
    // Literal "ReLU then sigmoid" output head; off means sigmoid only.
    bool head_relu = false;
    double prelu_init = 0.25;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;
};

struct FitConfig {
    int max_epochs = 200;
    int batch_size = 256;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double lr_decay = 0.5;
    int patience_lr = 5;
    int patience_stop = 15;
    std::uint64_t seed = 1;
};

inline constexpr double kProbEps = 1e-7;

// Mean binary cross-entropy with predictions clamped to [kProbEps, 1 - kProbEps].
double bce_loss(std::span<const double> y_hat, std::span<const double> y);

// affine -> batch norm -> PReLU -> dropout, repeated per hidden layer, then an
// affine head with an optional rectifier and a sigmoid.
class Mlp {
public:
    struct Hidden {
        Matrix weight;      // out x in
        Vector bias;
        Vector gamma;
        Vector beta;
        Vector running_mean;
        Vector running_var;
        double slope = 0.25;
    };

    Mlp() = default;
    Mlp(int input_dim, const MlpConfig& cfg, std::uint64_t seed);

    int input_dim() const { return input_dim_; }
    const MlpConfig& config() const { return cfg_; }
    const std::vector<Hidden>& hidden() const { return hidden_; }
    std::vector<Hidden>& hidden() { return hidden_; }
    Vector& head_weight() { return head_w_; }
    double& head_bias() { return head_b_; }

    // Eval mode: running statistics, no dropout. Row-by-row, so results do not
    // depend on how rows are batched. Never mutates the model.
    std::vector<double> predict_proba(const Matrix& x) const;

    // Train mode forward pass: batch statistics and dropout (when `rng` is
    // non-null). Updates running statistics if `update_running`. Returns
    // probabilities and caches activations for backward(). Batch size must be >= 2.
    std::vector<double> forward_train(const Matrix& x, Rng* rng, bool update_running);

    // Gradients of bce_loss(forward_train output, y), written to
    // gradients(). Must follow forward_train on the same batch.
    void backward(std::span<const double> y);

    // Parameter blocks and matching gradient blocks in a fixed order.
    std::vector<std::span<double>> parameters();
    std::vector<std::span<double>> gradients();

    void save(const std::filesystem::path& path) const;
    static Mlp load(const std::filesystem::path& path);

    bool operator==(const Mlp& other) const;

private:
    struct Cache {
        Matrix input;
        Matrix xhat;
        Vector inv_std;
        Matrix bn_out;      // before PReLU
        Matrix mask;        // dropout scale per element, empty when dropout is off
        Matrix output;      // after dropout
    };
    struct Grad {
        Matrix weight;
        Vector bias, gamma, beta;
        double slope = 0;
    };

    int input_dim_ = 0;
    MlpConfig cfg_;
    std::vector<Hidden> hidden_;
    Vector head_w_;
    double head_b_ = 0;

    std::vector<Cache> cache_;
    Matrix head_in_;
    Vector head_pre_;   // head pre-activation per row
    std::vector<double> y_hat_;
    std::vector<Grad> grad_;
    Vector grad_head_w_;
    double grad_head_b_ = 0;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    double lr = 0;
};

struct FitResult {
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_loss = 0;
};

// Mini-batch Adam with plateau learning-rate decay and early stopping. On
// return `model` holds the weights from the epoch with the lowest validation loss.
FitResult fit(Mlp& model, const Matrix& x_train, std::span<const double> y_train, const Matrix& x_val,
              std::span<const double> y_val, const FitConfig& cfg);

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

} // namespace dynlink
