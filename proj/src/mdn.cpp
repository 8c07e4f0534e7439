#include "qdelay/mdn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qdelay/error.hpp"

namespace qdelay {
namespace {

constexpr double log_sqrt_two_pi = 0.91893853320467274178;

double log_sum_exp(std::span<const double> v) {
    const double top = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - top);
    return top + std::log(sum);
}

void check_width(const MdnModel& model, std::size_t width) {
    if (width != model.h) {
        throw std::invalid_argument("mdn: input has " + std::to_string(width) + " features, model expects " + std::to_string(model.h));
    }
}

}  // namespace

MdnModel make_mdn(std::size_t h, const MdnArchitecture& arch, RandomStream& stream) {
    if (h < 1) throw std::invalid_argument("make_mdn: h must be >= 1");
    if (arch.K < 1) throw std::invalid_argument("make_mdn: K must be >= 1");
    if (!(arch.sigma_floor > 0.0)) throw std::invalid_argument("make_mdn: sigma_floor must be > 0");
    std::vector<std::size_t> widths{h};
    widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
    widths.push_back(3 * arch.K);
    MdnModel model;
    model.h = h;
    model.K = arch.K;
    model.sigma_floor = arch.sigma_floor;
    model.standardizer = Standardizer::identity(h);
    model.net = init_network(widths, arch.activation, Activation::identity, stream);
    return model;
}

void init_head_bias(MdnModel& model, const std::vector<double>& labels) {
    if (labels.empty()) throw std::invalid_argument("init_head_bias: no labels");
    std::vector<double> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    double mean = 0.0;
    for (double y : sorted) mean += y;
    mean /= static_cast<double>(sorted.size());
    double var = 0.0;
    for (double y : sorted) var += (y - mean) * (y - mean);
    const double sd = std::sqrt(var / static_cast<double>(sorted.size()));

    auto& head = model.net.layers().back();
    const std::size_t K = model.K;
    for (std::size_t k = 0; k < K; ++k) {
        const double q = static_cast<double>(k + 1) / static_cast<double>(K + 1);
        const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(sorted.size() - 1)));
        head.bias[k] = 0.0;
        head.bias[K + k] = std::log(std::max(sd, model.sigma_floor));
        head.bias[2 * K + k] = sorted[idx];
    }
}

GaussianMixture head_to_mixture(std::span<const double> head_out, std::size_t K, double sigma_floor) {
    if (head_out.size() != 3 * K) throw std::invalid_argument("head_to_mixture: expected 3K head outputs");
    const auto logits = head_out.subspan(0, K);
    const double norm = log_sum_exp(logits);
    std::vector<double> weights(K), means(K), stds(K);
    for (std::size_t k = 0; k < K; ++k) {
        weights[k] = std::max(std::exp(logits[k] - norm), std::numeric_limits<double>::min());
        stds[k] = sigma_floor + std::exp(head_out[K + k]);
        means[k] = head_out[2 * K + k];
    }
    return GaussianMixture(std::move(weights), std::move(means), std::move(stds));
}

GaussianMixture mdn_forward(const MdnModel& model, std::span<const double> x) {
    check_width(model, x.size());
    ForwardCache cache;
    forward(model.net, x, cache);
    return head_to_mixture(cache.output, model.K, model.sigma_floor);
}

double nll_head(std::span<const double> head_out, double y, std::size_t K, double sigma_floor, std::span<double> grad_out,
                std::vector<double>* responsibilities) {
    const auto logits = head_out.subspan(0, K);
    const double norm = log_sum_exp(logits);
    double terms_buf[64];
    std::vector<double> terms_heap;
    double* terms = terms_buf;
    if (K > 64) {
        terms_heap.resize(K);
        terms = terms_heap.data();
    }
    for (std::size_t k = 0; k < K; ++k) {
        const double sigma = sigma_floor + std::exp(head_out[K + k]);
        const double z = (y - head_out[2 * K + k]) / sigma;
        terms[k] = (logits[k] - norm) - 0.5 * z * z - log_sqrt_two_pi - std::log(sigma);
    }
    const double log_lik = log_sum_exp(std::span<const double>(terms, K));
    if (responsibilities) responsibilities->resize(K);
    if (!grad_out.empty()) {
        for (std::size_t k = 0; k < K; ++k) {
            const double gamma = std::exp(terms[k] - log_lik);
            if (responsibilities) (*responsibilities)[k] = gamma;
            const double pi = std::exp(logits[k] - norm);
            const double sigma = sigma_floor + std::exp(head_out[K + k]);
            const double mu = head_out[2 * K + k];
            const double z = (y - mu) / sigma;
            grad_out[k] = pi - gamma;
            grad_out[K + k] = gamma * (1.0 - z * z) * (sigma - sigma_floor) / sigma;
            grad_out[2 * K + k] = gamma * (mu - y) / (sigma * sigma);
        }
    } else if (responsibilities) {
        for (std::size_t k = 0; k < K; ++k) (*responsibilities)[k] = std::exp(terms[k] - log_lik);
    }
    return -log_lik;
}

double nll_loss(const MdnModel& model, std::span<const Sample> batch) {
    if (batch.empty()) throw std::invalid_argument("nll_loss: batch is empty");
    ForwardCache cache;
    double total = 0.0;
    for (const auto& s : batch) {
        check_width(model, s.features.size());
        forward(model.net, s.features, cache);
        total += nll_head(cache.output, s.label, model.K, model.sigma_floor, {});
    }
    return total;
}

double nll_loss(const MdnModel& model, const Dataset& data) {
    return nll_loss(model, std::span<const Sample>(data.samples()));
}

MdnGradient mdn_backward(const MdnModel& model, std::span<const Sample> batch) {
    MdnGradient out{0.0, Gradients::zeros_like(model.net)};
    ForwardCache cache;
    std::vector<double> upstream(3 * model.K);
    for (const auto& s : batch) {
        check_width(model, s.features.size());
        forward(model.net, s.features, cache);
        out.loss += nll_head(cache.output, s.label, model.K, model.sigma_floor, upstream);
        backward(model.net, cache, upstream, out.grads);
    }
    return out;
}

MdnTrainResult train_mdn(MdnModel model, const Dataset& train, const Dataset& val, const TrainConfig& cfg) {
    if (train.empty()) throw std::invalid_argument("train_mdn: training set is empty");
    check_width(model, train.h());

    const auto& samples = train.samples();
    ForwardCache cache;
    std::vector<double> upstream(3 * model.K);
    const std::size_t K = model.K;
    const double floor = model.sigma_floor;
    BatchObjective objective = [&](const Network& n, std::span<const std::size_t> batch, Gradients& grads) {
        double loss = 0.0;
        for (std::size_t idx : batch) {
            forward(n, samples[idx].features, cache);
            loss += nll_head(cache.output, samples[idx].label, K, floor, upstream);
            backward(n, cache, upstream, grads);
        }
        return loss;
    };
    const Dataset& held_out = val.empty() ? train : val;
    ValidationLoss validation = [&](const Network& n) {
        ForwardCache c;
        double total = 0.0;
        for (const auto& s : held_out.samples()) {
            forward(n, s.features, c);
            total += nll_head(c.output, s.label, K, floor, {});
        }
        return total / static_cast<double>(held_out.size());
    };

    MdnTrainResult result{std::move(model), {}};
    result.history = fit(result.model.net, train.size(), objective, validation, cfg);
    return result;
}

GaussianMixture predict_distribution(const MdnModel& model, std::span<const double> features) {
    check_width(model, features.size());
    return mdn_forward(model, model.standardizer.apply(features));
}

double predict_mmse(const MdnModel& model, std::span<const double> features) {
    return predict_distribution(model, features).mean();
}

void to_json(nlohmann::json& j, const MdnModel& model) {
    nlohmann::json layers = nlohmann::json::array();
    const auto& all = model.net.layers();
    for (std::size_t i = 0; i + 1 < all.size(); ++i) layers.push_back(all[i]);
    const auto& head = model.head();
    j = {{"h", model.h},
         {"standardizer", model.standardizer},
         {"layers", layers},
         {"head",
          {{"type", "mdn"},
           {"K", model.K},
           {"sigma_floor", model.sigma_floor},
           {"rows", head.rows},
           {"cols", head.cols},
           {"weights", head.weights},
           {"bias", head.bias}}}};
}

MdnModel mdn_model_from_json(const nlohmann::json& j) {
    try {
        const auto& head = j.at("head");
        if (!head.is_object() || head.value("type", std::string()) != "mdn") {
            throw FormatError("model JSON: not an MDN model (head.type != \"mdn\")");
        }
        MdnModel m;
        m.h = j.at("h").get<std::size_t>();
        m.K = head.at("K").get<std::size_t>();
        m.sigma_floor = head.at("sigma_floor").get<double>();
        m.standardizer = j.at("standardizer").get<Standardizer>();
        std::vector<DenseLayer> layers;
        for (const auto& l : j.at("layers")) layers.push_back(layer_from_json(l));
        DenseLayer out;
        out.rows = 3 * m.K;
        out.cols = layers.empty() ? m.h : layers.back().rows;
        out.weights = head.at("weights").get<std::vector<double>>();
        out.bias = head.at("bias").get<std::vector<double>>();
        out.activation = Activation::identity;
        layers.push_back(std::move(out));
        m.net = Network(std::move(layers));
        if (m.net.input_width() != m.h || m.standardizer.width() != m.h) {
            throw FormatError("model JSON: layer shapes disagree with h");
        }
        if (!(m.sigma_floor > 0.0) || m.K < 1) throw FormatError("model JSON: need K >= 1 and sigma_floor > 0");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model JSON: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("model JSON: ") + e.what());
    }
}

}  // namespace qdelay
