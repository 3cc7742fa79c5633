#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "evolt/ecm.hpp"
#include "evolt/features.hpp"

namespace evolt::nn {

// Feed-forward regressor: ReLU hidden layers, linear scalar output.
struct MlpSpec {
    std::size_t input_dim = 0;
    std::size_t hidden_layers = 0;  // 0 degenerates to a linear model
    std::size_t neurons = 0;        // per hidden layer; ignored when hidden_layers == 0
    std::size_t output_dim = 1;

    void validate() const;                // throws ConfigError
    std::vector<std::size_t> dims() const;  // [in, neurons..., out]
};

// Exact trainable parameter count including biases.
std::size_t param_count(const MlpSpec& spec);

// Parameters live in one flat vector laid out [W0 | b0 | W1 | b1 | ...] with
// each W stored out x in row-major.
struct MlpModel {
    MlpSpec spec;
    std::uint64_t seed = 0;
    std::vector<double> params;

    struct LayerView {
        const double* w;
        const double* b;
        std::size_t in, out;
    };
    struct MutLayerView {
        double* w;
        double* b;
        std::size_t in, out;
    };

    std::size_t layer_count() const { return spec.hidden_layers + 1; }
    LayerView layer(std::size_t i) const;
    MutLayerView layer_mut(std::size_t i);
};

// He-uniform initialization, deterministic in the seed. With zero_output_layer
// the final layer starts at exactly zero, so the residual head predicts the
// physics voltage untouched until training moves it.
MlpModel init_model(const MlpSpec& spec, std::uint64_t seed, bool zero_output_layer = false);

// Reusable buffers for forward/backward passes.
struct Workspace {
    std::vector<std::vector<double>> act;  // act[0] is the input copy
    std::vector<std::vector<double>> pre;  // pre-activations per hidden layer
    std::vector<double> delta_a, delta_b;
};

double forward(const MlpModel& model, std::span<const double> row, Workspace& ws);
double forward(const MlpModel& model, std::span<const double> row);

double loss_mse(std::span<const double> preds, std::span<const double> targets);

// Gradient of (1/n) sum (f(x_i) - y_i)^2 over the batch, w.r.t. the flat
// parameter vector. x is n x input_dim row-major.
std::vector<double> backward(const MlpModel& model, const double* x, const double* y,
                             std::size_t n);

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t epochs = 2000;  // 0 skips training entirely
    std::size_t batch_size = 256;
    std::uint64_t seed = 0;
    enum class Optimizer { sgd, adam } optimizer = Optimizer::adam;
    bool shuffle = true;

    // Plateau stop: quit when the monitored loss has not improved by
    // rel_improvement (relative) for `patience` epochs. patience 0 disables.
    std::size_t early_stop_patience = 100;
    double early_stop_rel_improvement = 1e-4;
    // Fraction of rows held out of the updates and monitored instead of the
    // training loss. 0 disables.
    double holdout_fraction = 0.0;

    // Adam moments
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;  // throws ConfigError
};

struct TrainResult {
    MlpModel model;
    std::vector<double> loss_history;  // one entry per epoch actually run
};

// Deterministic in (initial model, data, cfg.seed): shuffling, batching and
// optimizer state all derive from the config seed.
TrainResult train(const MlpModel& init, const double* x, const double* y,
                  std::size_t n_rows, const TrainConfig& cfg);

// Residual head: physics voltage plus learned correction, in volts.
double predict_pinn(const MlpModel& model, std::span<const double> row, double v_phy);

// Self-describing weight file (JSON): mode, spec, seed, normalizer, layers,
// and for the residual head the ECM parameters needed to rebuild v_phy.
struct ModelFile {
    features::Mode mode = features::Mode::fnn;
    MlpModel model;
    features::Normalizer normalizer;
    std::optional<ecm::EcmParams> ecm_params;
};

void save_model(const ModelFile& mf, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);  // validates param_count

}  // namespace evolt::nn
