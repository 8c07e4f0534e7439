#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"

#include "qdelay/dataset.hpp"
#include "qdelay/mixture.hpp"
#include "qdelay/neuralnet.hpp"

namespace qdelay {

/// Mixture density network: a fully connected backbone whose final layer is
/// the linear head emitting 3K pre-activations laid out as
/// [a_pi(1..K), a_sigma(1..K), a_mu(1..K)]. The head maps to
///   pi    = softmax(a_pi)
///   sigma = sigma_floor + exp(a_sigma)
///   mu    = a_mu
struct MdnModel {
    std::size_t h = 0;
    std::size_t K = 3;
    double sigma_floor = 1e-3;
    Standardizer standardizer;
    Network net;  // backbone layers followed by the head

    const DenseLayer& head() const { return net.layers().back(); }
};

struct MdnArchitecture {
    std::vector<std::size_t> hidden{32, 32};
    Activation activation = Activation::tanh;
    std::size_t K = 3;
    double sigma_floor = 1e-3;
};

/// Glorot-initialized model with an identity standardizer.
MdnModel make_mdn(std::size_t h, const MdnArchitecture& arch, RandomStream& stream);

/// Spreads the mean biases over label quantiles (k+1)/(K+1), sets the sigma
/// biases to ln(label std) and zeroes the mixing biases.
void init_head_bias(MdnModel& model, const std::vector<double>& labels);

/// Mixture for a vector of 3K head outputs.
GaussianMixture head_to_mixture(std::span<const double> head_out, std::size_t K, double sigma_floor);

/// Mixture for already standardized features.
GaussianMixture mdn_forward(const MdnModel& model, std::span<const double> x);

/// Per-sample negative log-likelihood and its gradient with respect to the
/// head outputs. `responsibilities` receives gamma_k when non-null.
double nll_head(std::span<const double> head_out, double y, std::size_t K, double sigma_floor, std::span<double> grad_out,
                std::vector<double>* responsibilities = nullptr);

/// Summed NLL over the (standardized) samples.
double nll_loss(const MdnModel& model, std::span<const Sample> batch);
double nll_loss(const MdnModel& model, const Dataset& data);

struct MdnGradient {
    double loss = 0.0;
    Gradients grads;
};

/// Summed NLL and its exact parameter gradient over the batch.
MdnGradient mdn_backward(const MdnModel& model, std::span<const Sample> batch);

struct MdnTrainResult {
    MdnModel model;
    TrainHistory history;
};

/// Minibatch Adam on mean NLL with early stopping on validation NLL.
/// Datasets must already be standardized with model.standardizer.
MdnTrainResult train_mdn(MdnModel model, const Dataset& train, const Dataset& val, const TrainConfig& cfg);

/// Predicted conditional distribution for raw features.
GaussianMixture predict_distribution(const MdnModel& model, std::span<const double> features);
double predict_mmse(const MdnModel& model, std::span<const double> features);

void to_json(nlohmann::json& j, const MdnModel& model);
MdnModel mdn_model_from_json(const nlohmann::json& j);

}  // namespace qdelay
