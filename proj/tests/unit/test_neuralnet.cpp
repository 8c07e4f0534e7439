#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qdelay/neuralnet.hpp"

using namespace qdelay;

namespace {

// Loss L = sum_i u_i * out_i, so backward with upstream u is its exact gradient.
double linear_loss(const Network& net, const std::vector<double>& x, const std::vector<double>& u) {
    const auto out = forward(net, x).output;
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * out[i];
    return s;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4}); }

// Largest relative error between backward and central differences.
double gradient_check(Network net, const std::vector<double>& x, const std::vector<double>& u) {
    auto cache = forward(net, x);
    auto grads = Gradients::zeros_like(net);
    backward(net, cache, u, grads);
    const double step = 1e-5;
    double worst = 0.0;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        auto& layer = net.layers()[l];
        auto probe = [&](double& p, double analytic) {
            const double saved = p;
            p = saved + step;
            const double up = linear_loss(net, x, u);
            p = saved - step;
            const double down = linear_loss(net, x, u);
            p = saved;
            worst = std::max(worst, rel_err(analytic, (up - down) / (2 * step)));
        };
        for (std::size_t i = 0; i < layer.weights.size(); ++i) probe(layer.weights[i], grads.layers[l].weights[i]);
        for (std::size_t i = 0; i < layer.bias.size(); ++i) probe(layer.bias[i], grads.layers[l].bias[i]);
    }
    return worst;
}

std::vector<double> random_vec(RandomStream& rng, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = scale * rng.normal();
    return v;
}

void randomize_biases(Network& net, RandomStream& rng) {
    for (auto& layer : net.layers()) {
        for (auto& b : layer.bias) b = 0.3 * rng.normal();
    }
}

Dataset linear_dataset(std::size_t n, std::uint64_t seed) {
    RandomStream rng(seed, StreamId::user);
    Dataset d(1);
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.features = {rng.normal()};
        s.label = 3.0 * s.features[0];
        s.arrival_time = static_cast<double>(i);
        d.push_back(s);
    }
    return d;
}

}  // namespace

TEST_CASE("forward: identity and constant networks") {
    DenseLayer id(3, 3, Activation::identity);
    for (std::size_t i = 0; i < 3; ++i) id.w(i, i) = 1.0;
    const Network net({id});
    const std::vector<double> x{0.5, -2.0, 7.0};
    CHECK(forward(net, x).output == x);

    DenseLayer c(2, 3, Activation::identity);
    c.bias = {1.5, -0.25};
    const Network cnet({c});
    CHECK(forward(cnet, x).output == std::vector<double>{1.5, -0.25});
    CHECK(forward(cnet, std::vector<double>{9.0, 9.0, 9.0}).output == std::vector<double>{1.5, -0.25});
}

TEST_CASE("forward: hand-evaluated two-layer tanh network") {
    DenseLayer l1(2, 2, Activation::tanh);
    l1.weights = {0.5, -1.0, 2.0, 0.25};
    l1.bias = {0.1, -0.2};
    DenseLayer l2(1, 2, Activation::identity);
    l2.weights = {1.5, -0.5};
    l2.bias = {0.3};
    const Network net({l1, l2});
    const double h1 = std::tanh(0.5 * 1.0 + 0.1);
    const double h2 = std::tanh(2.0 * 1.0 - 0.2);
    const double expected = 1.5 * h1 - 0.5 * h2 + 0.3;
    CHECK(std::abs(forward(net, std::vector<double>{1.0, 0.0}).output[0] - expected) < 1e-12);
}

TEST_CASE("relu activation") {
    DenseLayer l(2, 1, Activation::relu);
    l.weights = {1.0, -1.0};
    const Network net({l});
    CHECK(forward(net, std::vector<double>{2.0}).output == std::vector<double>{2.0, 0.0});
    CHECK(activation_from_string("relu") == Activation::relu);
    CHECK(to_string(Activation::tanh) == "tanh");
    CHECK_THROWS(activation_from_string("sigmoid"));
}

TEST_CASE("shape checks") {
    RandomStream rng(1, StreamId::weight_init);
    const auto net = init_network({3, 4, 1}, Activation::tanh, Activation::identity, rng);
    CHECK_THROWS(forward(net, std::vector<double>{1.0, 2.0}));
    DenseLayer a(4, 3, Activation::tanh), b(1, 5, Activation::identity);
    CHECK_THROWS(Network({a, b}));
    CHECK(net.input_width() == 3);
    CHECK(net.output_width() == 1);
    CHECK(net.parameter_count() == 3 * 4 + 4 + 4 + 1);
}

TEST_CASE("glorot initialization") {
    RandomStream rng(2, StreamId::weight_init);
    const auto net = init_network({10, 30, 1}, Activation::tanh, Activation::identity, rng);
    const double bound = std::sqrt(6.0 / 40.0);
    double lo = 1.0, hi = -1.0;
    for (double w : net.layers()[0].weights) {
        lo = std::min(lo, w);
        hi = std::max(hi, w);
    }
    CHECK(lo >= -bound);
    CHECK(hi <= bound);
    CHECK(hi > 0.8 * bound);
    for (const auto& l : net.layers()) {
        for (double b : l.bias) CHECK(b == 0.0);
    }
}

TEST_CASE("backward matches finite differences on a 2x8x8x1 network") {
    RandomStream rng(3, StreamId::weight_init);
    auto net = init_network({2, 8, 8, 1}, Activation::tanh, Activation::identity, rng);
    randomize_biases(net, rng);
    for (int trial = 0; trial < 5; ++trial) {
        CHECK(gradient_check(net, random_vec(rng, 2), random_vec(rng, 1)) < 1e-5);
    }
}

TEST_CASE("backward matches finite differences on random architectures") {
    RandomStream rng(4, StreamId::weight_init);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::size_t> widths{1 + rng.below(6)};
        const std::size_t hidden = 1 + rng.below(3);
        for (std::size_t i = 0; i < hidden; ++i) widths.push_back(1 + rng.below(10));
        widths.push_back(1 + rng.below(4));
        auto net = init_network(widths, trial % 2 ? Activation::tanh : Activation::identity, Activation::identity, rng);
        randomize_biases(net, rng);
        CHECK(gradient_check(net, random_vec(rng, widths.front()), random_vec(rng, widths.back())) < 1e-5);
    }
}

TEST_CASE("backward: zero upstream and a single affine layer") {
    RandomStream rng(5, StreamId::weight_init);
    const auto net = init_network({3, 5, 2}, Activation::tanh, Activation::identity, rng);
    const auto x = random_vec(rng, 3);
    auto cache = forward(net, x);
    auto grads = Gradients::zeros_like(net);
    backward(net, cache, std::vector<double>{0.0, 0.0}, grads);
    CHECK(grads.norm() == 0.0);

    DenseLayer c(2, 3, Activation::identity);
    const Network cnet({c});
    auto cc = forward(cnet, x);
    auto g = Gradients::zeros_like(cnet);
    const std::vector<double> u{0.7, -1.3};
    const auto dx = backward(cnet, cc, u, g);
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t k = 0; k < 3; ++k) CHECK(g.layers[0].weights[r * 3 + k] == u[r] * x[k]);
        CHECK(g.layers[0].bias[r] == u[r]);
    }
    for (double v : dx) CHECK(v == 0.0);
}

TEST_CASE("train_mse fits a realizable linear target") {
    const auto train = linear_dataset(2000, 6);
    const auto val = linear_dataset(300, 7);
    RandomStream rng(6, StreamId::weight_init);
    auto net = init_network({1, 16, 16, 1}, Activation::tanh, Activation::identity, rng);
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.max_epochs = 300;
    cfg.patience = 30;
    const auto r = train_mse(net, train, val, cfg);
    CHECK(mse_loss(r.net, val) < 1e-3);
    CHECK(r.history.best_val_loss <= r.history.initial_val_loss);
    // Running minimum of validation loss never rises, and the restored
    // parameters reproduce the best value.
    double best = r.history.initial_val_loss;
    for (const auto& e : r.history.epochs) best = std::min(best, e.val_loss);
    CHECK(best == r.history.best_val_loss);
    CHECK(mse_loss(r.net, val) == doctest::Approx(r.history.best_val_loss).epsilon(1e-12));
}

TEST_CASE("initial training loss is the label variance for a near-zero output") {
    const auto d = linear_dataset(5000, 8);
    DenseLayer l(1, 1, Activation::identity);
    const Network net({l});
    double m = 0.0, v = 0.0;
    for (const auto& s : d.samples()) m += s.label;
    m /= d.size();
    for (const auto& s : d.samples()) v += (s.label - m) * (s.label - m);
    v /= d.size();
    CHECK(mse_loss(net, d) == doctest::Approx(v + m * m).epsilon(1e-12));
    CHECK(std::abs(mse_loss(net, d) - v) < 0.05 * v);
}

TEST_CASE("training is deterministic") {
    const auto train = linear_dataset(500, 9);
    const auto val = linear_dataset(100, 10);
    TrainConfig cfg;
    cfg.max_epochs = 20;
    auto once = [&] {
        RandomStream rng(11, StreamId::weight_init);
        return train_mse(init_network({1, 8, 1}, Activation::tanh, Activation::identity, rng), train, val, cfg);
    };
    const auto a = once(), b = once();
    REQUIRE(a.history.epochs.size() == b.history.epochs.size());
    for (std::size_t i = 0; i < a.history.epochs.size(); ++i) {
        CHECK(a.history.epochs[i].train_loss == b.history.epochs[i].train_loss);
        CHECK(a.history.epochs[i].val_loss == b.history.epochs[i].val_loss);
    }
    CHECK(a.net.layers()[0].weights == b.net.layers()[0].weights);
}

TEST_CASE("train config validation and empty data") {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK_THROWS(validate(cfg));
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    CHECK_THROWS(validate(cfg));
    cfg = TrainConfig{};
    cfg.beta1 = 1.0;
    CHECK_THROWS(validate(cfg));
    RandomStream rng(1, StreamId::weight_init);
    CHECK_THROWS(train_mse(init_network({1, 4, 1}, Activation::tanh, Activation::identity, rng), Dataset(1), Dataset(1),
                           TrainConfig{}));
}

TEST_CASE("adam moves a parameter against its gradient") {
    DenseLayer l(1, 1, Activation::identity);
    Network net({l});
    AdamState st(net);
    auto g = Gradients::zeros_like(net);
    g.layers[0].weights[0] = 2.0;
    g.layers[0].bias[0] = -0.5;
    TrainConfig cfg;
    adam_step(net, g, st, cfg);
    // The first bias-corrected step has magnitude lr regardless of gradient size.
    CHECK(net.layers()[0].weights[0] == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(net.layers()[0].bias[0] == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("mse model json round-trip and prediction") {
    RandomStream rng(12, StreamId::weight_init);
    MseModel m;
    m.h = 2;
    m.standardizer.mean = {1.0, 2.0};
    m.standardizer.std = {0.5, 4.0};
    m.standardizer.degenerate = {false, false};
    m.net = init_network({2, 5, 1}, Activation::tanh, Activation::identity, rng);
    nlohmann::json j;
    to_json(j, m);
    CHECK(j.at("head") == "mse");
    CHECK(j.at("layers").size() == 2);
    const auto back = mse_model_from_json(j);
    const std::vector<double> x{0.3, 9.0};
    CHECK(back.predict(x) == m.predict(x));
    CHECK(m.predict(x) == m.predict(x));
    CHECK_THROWS(m.predict(std::vector<double>{1.0}));
}
