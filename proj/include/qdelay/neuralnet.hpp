#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "qdelay/dataset.hpp"
#include "qdelay/random.hpp"

namespace qdelay {

enum class Activation { tanh, relu, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Affine map followed by an elementwise activation. Weights are row-major
/// with `rows` outputs and `cols` inputs.
struct DenseLayer {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> weights;
    std::vector<double> bias;
    Activation activation = Activation::identity;

    DenseLayer() = default;
    DenseLayer(std::size_t rows, std::size_t cols, Activation activation);

    double& w(std::size_t r, std::size_t c) { return weights[r * cols + c]; }
    double w(std::size_t r, std::size_t c) const { return weights[r * cols + c]; }
};

class Network {
public:
    Network() = default;
    explicit Network(std::vector<DenseLayer> layers);

    std::size_t input_width() const;
    std::size_t output_width() const;
    std::size_t parameter_count() const;

    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<DenseLayer>& layers() noexcept { return layers_; }

private:
    std::vector<DenseLayer> layers_;
};

/// Glorot-uniform weights, zero biases. `widths` lists every layer width from
/// the input to the output; hidden layers use `hidden`, the last `output`.
Network init_network(const std::vector<std::size_t>& widths, Activation hidden, Activation output, RandomStream& stream);

/// Per-layer inputs and pre-activations retained for backward.
struct ForwardCache {
    std::vector<std::vector<double>> inputs;  // inputs[i] feeds layer i
    std::vector<std::vector<double>> pre;     // pre[i] is layer i before activation
    std::vector<double> output;
};

/// Forward pass reusing the cache's buffers.
void forward(const Network& net, std::span<const double> x, ForwardCache& cache);
ForwardCache forward(const Network& net, std::span<const double> x);

/// Parameter-shaped gradient storage.
struct LayerGradient {
    std::vector<double> weights;
    std::vector<double> bias;
};

struct Gradients {
    std::vector<LayerGradient> layers;

    static Gradients zeros_like(const Network& net);
    void zero();
    void scale(double factor);
    double norm() const;
};

/// Reverse-mode pass. Adds d(loss)/d(parameters) into `grads` given the
/// upstream gradient d(loss)/d(output); returns d(loss)/d(input).
std::vector<double> backward(const Network& net, const ForwardCache& cache, std::span<const double> upstream,
                             Gradients& grads);

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 128;
    std::size_t max_epochs = 200;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t patience = 10;
    double validation_fraction = 0.1;
    /// Global gradient-norm clip; 0 disables.
    double clip_norm = 0.0;
    std::uint64_t seed = 1;
};

void validate(const TrainConfig& cfg);

struct AdamState {
    Gradients first;
    Gradients second;
    std::size_t step = 0;

    explicit AdamState(const Network& net);
};

void adam_step(Network& net, const Gradients& grads, AdamState& state, const TrainConfig& cfg);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainHistory {
    double initial_val_loss = 0.0;
    double best_val_loss = 0.0;
    std::size_t best_epoch = 0;
    std::vector<EpochRecord> epochs;
};

/// Loss summed over the batch indices, with gradients summed into `grads`.
using BatchObjective = std::function<double(const Network&, std::span<const std::size_t>, Gradients&)>;
/// Mean loss on held-out data.
using ValidationLoss = std::function<double(const Network&)>;

/// Minibatch Adam with per-epoch shuffling and early stopping; leaves `net`
/// holding the best-validation parameters.
TrainHistory fit(Network& net, std::size_t n_train, const BatchObjective& objective, const ValidationLoss& validation,
                 const TrainConfig& cfg);

/// Mean squared error of a single-output network on a standardized dataset.
double mse_loss(const Network& net, const Dataset& data);

struct TrainResult {
    Network net;
    TrainHistory history;
};

/// Least-squares training of a single linear output. Datasets must already be
/// standardized consistently; an empty `val` falls back to the training loss.
TrainResult train_mse(Network net, const Dataset& train, const Dataset& val, const TrainConfig& cfg);

/// Point predictor: standardizer plus a single-output network.
struct MseModel {
    std::size_t h = 0;
    Standardizer standardizer;
    Network net;

    /// Predicted wait for raw (unstandardized) features.
    double predict(std::span<const double> features) const;
};

void to_json(nlohmann::json& j, const DenseLayer& layer);
DenseLayer layer_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const MseModel& model);
MseModel mse_model_from_json(const nlohmann::json& j);

}  // namespace qdelay
