#include "qdelay/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qdelay/error.hpp"

namespace qdelay {
namespace {

double activate(Activation a, double x) {
    switch (a) {
        case Activation::tanh: return std::tanh(x);
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::identity: return x;
    }
    return x;
}

// Derivative expressed through the pre-activation and the activated value.
double activate_grad(Activation a, double pre, double post) {
    switch (a) {
        case Activation::tanh: return 1.0 - post * post;
        case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
        case Activation::identity: return "identity";
    }
    return "identity";
}

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "relu") return Activation::relu;
    if (name == "identity" || name == "linear") return Activation::identity;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

DenseLayer::DenseLayer(std::size_t rows_, std::size_t cols_, Activation activation_)
    : rows(rows_), cols(cols_), weights(rows_ * cols_, 0.0), bias(rows_, 0.0), activation(activation_) {}

Network::Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw std::invalid_argument("Network: at least one layer is required");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (l.rows == 0 || l.cols == 0) throw std::invalid_argument("Network: layer widths must be positive");
        if (l.weights.size() != l.rows * l.cols || l.bias.size() != l.rows) {
            throw std::invalid_argument("Network: layer " + std::to_string(i) + " parameters do not match its shape");
        }
        if (i > 0 && layers_[i - 1].rows != l.cols) {
            throw std::invalid_argument("Network: layer " + std::to_string(i) + " expects " + std::to_string(l.cols) +
                                        " inputs but the previous layer emits " + std::to_string(layers_[i - 1].rows));
        }
    }
}

std::size_t Network::input_width() const { return layers_.empty() ? 0 : layers_.front().cols; }
std::size_t Network::output_width() const { return layers_.empty() ? 0 : layers_.back().rows; }

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
}

Network init_network(const std::vector<std::size_t>& widths, Activation hidden, Activation output, RandomStream& stream) {
    if (widths.size() < 2) throw std::invalid_argument("init_network: need at least input and output widths");
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool last = i + 2 == widths.size();
        DenseLayer layer(widths[i + 1], widths[i], last ? output : hidden);
        const double limit = std::sqrt(6.0 / static_cast<double>(widths[i] + widths[i + 1]));
        for (double& w : layer.weights) w = limit * (2.0 * stream.uniform() - 1.0);
        layers.push_back(std::move(layer));
    }
    return Network(std::move(layers));
}

void forward(const Network& net, std::span<const double> x, ForwardCache& cache) {
    if (x.size() != net.input_width()) {
        throw std::invalid_argument("forward: input has " + std::to_string(x.size()) + " values, network expects " +
                                    std::to_string(net.input_width()));
    }
    const auto& layers = net.layers();
    cache.inputs.resize(layers.size());
    cache.pre.resize(layers.size());
    cache.inputs[0].assign(x.begin(), x.end());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const auto& in = cache.inputs[i];
        auto& pre = cache.pre[i];
        pre.resize(l.rows);
        auto& out = (i + 1 < layers.size()) ? cache.inputs[i + 1] : cache.output;
        out.resize(l.rows);
        for (std::size_t r = 0; r < l.rows; ++r) {
            const double* row = &l.weights[r * l.cols];
            double acc = l.bias[r];
            for (std::size_t c = 0; c < l.cols; ++c) acc += row[c] * in[c];
            pre[r] = acc;
            out[r] = activate(l.activation, acc);
        }
    }
}

ForwardCache forward(const Network& net, std::span<const double> x) {
    ForwardCache cache;
    forward(net, x, cache);
    return cache;
}

Gradients Gradients::zeros_like(const Network& net) {
    Gradients g;
    for (const auto& l : net.layers()) g.layers.push_back({std::vector<double>(l.weights.size(), 0.0), std::vector<double>(l.bias.size(), 0.0)});
    return g;
}

void Gradients::zero() {
    for (auto& l : layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
}

void Gradients::scale(double factor) {
    for (auto& l : layers) {
        for (double& v : l.weights) v *= factor;
        for (double& v : l.bias) v *= factor;
    }
}

double Gradients::norm() const {
    double sq = 0.0;
    for (const auto& l : layers) {
        for (double v : l.weights) sq += v * v;
        for (double v : l.bias) sq += v * v;
    }
    return std::sqrt(sq);
}

std::vector<double> backward(const Network& net, const ForwardCache& cache, std::span<const double> upstream,
                             Gradients& grads) {
    const auto& layers = net.layers();
    if (upstream.size() != net.output_width()) throw std::invalid_argument("backward: upstream gradient width mismatch");
    if (cache.pre.size() != layers.size() || grads.layers.size() != layers.size()) {
        throw std::invalid_argument("backward: cache or gradient storage does not match the network");
    }
    std::vector<double> delta(upstream.begin(), upstream.end());
    std::vector<double> next;
    for (std::size_t i = layers.size(); i-- > 0;) {
        const auto& l = layers[i];
        const auto& in = cache.inputs[i];
        const auto& post = (i + 1 < layers.size()) ? cache.inputs[i + 1] : cache.output;
        for (std::size_t r = 0; r < l.rows; ++r) delta[r] *= activate_grad(l.activation, cache.pre[i][r], post[r]);
        auto& g = grads.layers[i];
        next.assign(l.cols, 0.0);
        for (std::size_t r = 0; r < l.rows; ++r) {
            const double d = delta[r];
            g.bias[r] += d;
            if (d == 0.0) continue;
            double* grow = &g.weights[r * l.cols];
            const double* wrow = &l.weights[r * l.cols];
            for (std::size_t c = 0; c < l.cols; ++c) {
                grow[c] += d * in[c];
                next[c] += d * wrow[c];
            }
        }
        delta.swap(next);
    }
    return delta;
}

void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");
    if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
    if (cfg.max_epochs == 0) throw std::invalid_argument("train: max_epochs must be >= 1");
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0)) throw std::invalid_argument("train: beta1 must lie in [0, 1)");
    if (!(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) throw std::invalid_argument("train: beta2 must lie in [0, 1)");
    if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("train: epsilon must be > 0");
    if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0)) {
        throw std::invalid_argument("train: validation_fraction must lie in [0, 1)");
    }
    if (!(cfg.clip_norm >= 0.0)) throw std::invalid_argument("train: clip_norm must be >= 0");
}

AdamState::AdamState(const Network& net) : first(Gradients::zeros_like(net)), second(Gradients::zeros_like(net)) {}

void adam_step(Network& net, const Gradients& grads, AdamState& state, const TrainConfig& cfg) {
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(cfg.beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.beta2, t);
    auto update = [&](std::vector<double>& params, const std::vector<double>& g, std::vector<double>& m, std::vector<double>& v) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    };
    auto& layers = net.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        update(layers[i].weights, grads.layers[i].weights, state.first.layers[i].weights, state.second.layers[i].weights);
        update(layers[i].bias, grads.layers[i].bias, state.first.layers[i].bias, state.second.layers[i].bias);
    }
}

TrainHistory fit(Network& net, std::size_t n_train, const BatchObjective& objective, const ValidationLoss& validation,
                 const TrainConfig& cfg) {
    validate(cfg);
    if (n_train == 0) throw std::invalid_argument("train: training set is empty");

    RandomStream shuffle(cfg.seed, StreamId::shuffling);
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});

    AdamState adam(net);
    Gradients grads = Gradients::zeros_like(net);

    TrainHistory history;
    history.initial_val_loss = validation(net);
    history.best_val_loss = history.initial_val_loss;
    Network best = net;
    std::size_t stale = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (std::size_t i = n_train; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, n_train - start);
            std::span<const std::size_t> batch(order.data() + start, count);
            grads.zero();
            epoch_loss += objective(net, batch, grads);
            grads.scale(1.0 / static_cast<double>(count));
            if (cfg.clip_norm > 0.0) {
                const double n = grads.norm();
                if (n > cfg.clip_norm) grads.scale(cfg.clip_norm / n);
            }
            adam_step(net, grads, adam, cfg);
        }

        EpochRecord record{epoch, epoch_loss / static_cast<double>(n_train), validation(net)};
        history.epochs.push_back(record);
        if (record.val_loss < history.best_val_loss) {
            history.best_val_loss = record.val_loss;
            history.best_epoch = epoch;
            best = net;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    net = std::move(best);
    return history;
}

double mse_loss(const Network& net, const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("mse_loss: dataset is empty");
    ForwardCache cache;
    double total = 0.0;
    for (const auto& s : data.samples()) {
        forward(net, s.features, cache);
        const double e = cache.output[0] - s.label;
        total += e * e;
    }
    return total / static_cast<double>(data.size());
}

TrainResult train_mse(Network net, const Dataset& train, const Dataset& val, const TrainConfig& cfg) {
    if (train.empty()) throw std::invalid_argument("train_mse: training set is empty");
    if (net.output_width() != 1) throw std::invalid_argument("train_mse: network must have a single output");
    if (net.input_width() != train.h()) throw std::invalid_argument("train_mse: network input width differs from h");

    ForwardCache cache;
    const auto& samples = train.samples();
    BatchObjective objective = [&](const Network& n, std::span<const std::size_t> batch, Gradients& grads) {
        double loss = 0.0;
        for (std::size_t idx : batch) {
            forward(n, samples[idx].features, cache);
            const double e = cache.output[0] - samples[idx].label;
            loss += e * e;
            const double upstream = 2.0 * e;
            backward(n, cache, std::span<const double>(&upstream, 1), grads);
        }
        return loss;
    };
    const Dataset& held_out = val.empty() ? train : val;
    ValidationLoss validation = [&](const Network& n) { return mse_loss(n, held_out); };

    TrainResult result{std::move(net), {}};
    result.history = fit(result.net, train.size(), objective, validation, cfg);
    return result;
}

double MseModel::predict(std::span<const double> features) const {
    if (features.size() != h) throw std::invalid_argument("predict: expected " + std::to_string(h) + " features");
    const auto x = standardizer.apply(features);
    ForwardCache cache;
    forward(net, x, cache);
    return cache.output[0];
}

void to_json(nlohmann::json& j, const DenseLayer& layer) {
    j = {{"rows", layer.rows},
         {"cols", layer.cols},
         {"weights", layer.weights},
         {"bias", layer.bias},
         {"activation", to_string(layer.activation)}};
}

DenseLayer layer_from_json(const nlohmann::json& j) {
    DenseLayer layer;
    layer.rows = j.at("rows").get<std::size_t>();
    layer.cols = j.at("cols").get<std::size_t>();
    layer.weights = j.at("weights").get<std::vector<double>>();
    layer.bias = j.at("bias").get<std::vector<double>>();
    layer.activation = activation_from_string(j.value("activation", std::string("identity")));
    return layer;
}

void to_json(nlohmann::json& j, const MseModel& model) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : model.net.layers()) layers.push_back(l);
    j = {{"h", model.h}, {"standardizer", model.standardizer}, {"layers", layers}, {"head", "mse"}};
}

MseModel mse_model_from_json(const nlohmann::json& j) {
    try {
        if (!j.contains("head") || !j.at("head").is_string() || j.at("head") != "mse") {
            throw FormatError("model JSON: not an MSE model (head != \"mse\")");
        }
        MseModel m;
        m.h = j.at("h").get<std::size_t>();
        m.standardizer = j.at("standardizer").get<Standardizer>();
        std::vector<DenseLayer> layers;
        for (const auto& l : j.at("layers")) layers.push_back(layer_from_json(l));
        m.net = Network(std::move(layers));
        if (m.net.input_width() != m.h || m.standardizer.width() != m.h || m.net.output_width() != 1) {
            throw FormatError("model JSON: layer shapes disagree with h");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model JSON: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("model JSON: ") + e.what());
    }
}

}  // namespace qdelay
