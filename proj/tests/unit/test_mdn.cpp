#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qdelay/eval.hpp"
#include "qdelay/mdn.hpp"

using namespace qdelay;

namespace {

MdnModel random_model(std::size_t h, std::size_t K, std::vector<std::size_t> hidden, std::uint64_t seed) {
    RandomStream rng(seed, StreamId::weight_init);
    MdnArchitecture arch;
    arch.hidden = std::move(hidden);
    arch.K = K;
    auto m = make_mdn(h, arch, rng);
    for (auto& layer : m.net.layers()) {
        for (auto& b : layer.bias) b = 0.5 * rng.normal();
    }
    return m;
}

std::vector<Sample> random_batch(std::size_t h, std::size_t n, std::uint64_t seed) {
    RandomStream rng(seed, StreamId::user);
    std::vector<Sample> out(n);
    for (auto& s : out) {
        for (std::size_t k = 0; k < h; ++k) s.features.push_back(rng.normal());
        s.label = 2.0 * rng.normal();
    }
    return out;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4}); }

double mdn_gradient_check(MdnModel model, const std::vector<Sample>& batch) {
    const auto g = mdn_backward(model, batch);
    const double step = 1e-5;
    double worst = 0.0;
    for (std::size_t l = 0; l < model.net.layers().size(); ++l) {
        auto& layer = model.net.layers()[l];
        auto probe = [&](double& p, double analytic) {
            const double saved = p;
            p = saved + step;
            const double up = nll_loss(model, batch);
            p = saved - step;
            const double down = nll_loss(model, batch);
            p = saved;
            worst = std::max(worst, rel_err(analytic, (up - down) / (2 * step)));
        };
        for (std::size_t i = 0; i < layer.weights.size(); ++i) probe(layer.weights[i], g.grads.layers[l].weights[i]);
        for (std::size_t i = 0; i < layer.bias.size(); ++i) probe(layer.bias[i], g.grads.layers[l].bias[i]);
    }
    return worst;
}

Dataset synthetic(std::size_t n, std::uint64_t seed, double (*target)(double, RandomStream&)) {
    RandomStream rng(seed, StreamId::user);
    Dataset d(1);
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.features = {rng.normal()};
        s.label = target(s.features[0], rng);
        s.arrival_time = static_cast<double>(i);
        d.push_back(s);
    }
    return d;
}

double coin(double, RandomStream& rng) { return rng.uniform() < 0.5 ? -1.0 : 1.0; }
double smooth_mean(double x) { return std::sin(x) + 0.5 * x; }
double smooth(double x, RandomStream& rng) { return smooth_mean(x) + 0.2 * rng.normal(); }

}  // namespace

TEST_CASE("head activations") {
    std::vector<double> head(9, 0.0);
    head[6] = 1.0;
    head[7] = -2.0;
    head[8] = 0.5;
    const auto m = head_to_mixture(head, 3, 1e-3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(m.weights()[k] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
        CHECK(m.stds()[k] == doctest::Approx(1.001).epsilon(1e-15));
    }
    CHECK(m.means() == std::vector<double>{1.0, -2.0, 0.5});
    CHECK_THROWS(head_to_mixture(std::vector<double>(8, 0.0), 3, 1e-3));
}

TEST_CASE("random models emit valid mixtures") {
    const auto model = random_model(5, 3, {32, 32}, 1);
    for (const auto& s : random_batch(5, 50, 2)) {
        const auto m = mdn_forward(model, s.features);
        double total = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            total += m.weights()[k];
            CHECK(m.stds()[k] > model.sigma_floor);
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
    CHECK_THROWS(mdn_forward(model, std::vector<double>{1.0, 2.0}));
}

TEST_CASE("nll matches the mixture log density and is additive") {
    const auto model = random_model(3, 3, {8}, 3);
    const auto batch = random_batch(3, 10, 4);
    double sum = 0.0;
    for (const auto& s : batch) {
        const double one = nll_loss(model, std::span<const Sample>(&s, 1));
        CHECK(one == doctest::Approx(-mdn_forward(model, s.features).log_pdf(s.label)).epsilon(1e-12));
        sum += one;
    }
    CHECK(nll_loss(model, batch) == doctest::Approx(sum).epsilon(1e-13));
    CHECK_THROWS(nll_loss(model, std::span<const Sample>()));
}

TEST_CASE("K=1 with fixed sigma: nll is half the squared error over sigma^2 plus a constant") {
    auto model = random_model(2, 1, {6}, 5);
    auto& head = model.net.layers().back();
    // Zero the sigma row so sigma is constant across inputs.
    for (std::size_t c = 0; c < head.cols; ++c) head.w(1, c) = 0.0;
    head.bias[1] = std::log(0.7);
    const double sigma = model.sigma_floor + 0.7;
    const auto batch = random_batch(2, 20, 6);
    std::vector<double> diffs;
    for (const auto& s : batch) {
        const double mu = mdn_forward(model, s.features).mean();
        const double e = s.label - mu;
        diffs.push_back(nll_loss(model, std::span<const Sample>(&s, 1)) - 0.5 * e * e / (sigma * sigma));
    }
    for (double d : diffs) CHECK(d == doctest::Approx(diffs.front()).epsilon(1e-12));
}

TEST_CASE("sigma floor keeps the loss finite") {
    std::vector<double> head{0.0, -800.0, 2.0};
    std::vector<double> grad(3);
    const double loss = nll_head(head, 2.0, 1, 1e-3, grad);
    CHECK(std::isfinite(loss));
    CHECK(loss == doctest::Approx(std::log(1e-3) + 0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));
    for (double g : grad) CHECK(std::isfinite(g));
}

TEST_CASE("responsibilities normalize and K=1 pins the weight gradient at zero") {
    RandomStream rng(7, StreamId::user);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> head(9);
        for (auto& v : head) v = rng.normal();
        std::vector<double> grad(9), gamma;
        nll_head(head, 3.0 * rng.normal(), 3, 1e-3, grad, &gamma);
        double total = 0.0;
        for (double g : gamma) total += g;
        CHECK(std::abs(total - 1.0) < 1e-12);
        // d/d(a_pi) sums to zero because softmax is shift invariant.
        CHECK(std::abs(grad[0] + grad[1] + grad[2]) < 1e-12);

        std::vector<double> one{rng.normal(), rng.normal(), rng.normal()}, g1(3);
        nll_head(one, rng.normal(), 1, 1e-3, g1);
        CHECK(g1[0] == 0.0);
    }
}

TEST_CASE("mdn gradients match finite differences") {
    const auto model = random_model(5, 3, {32, 32}, 8);
    const auto batch = random_batch(5, 20, 9);
    CHECK(mdn_gradient_check(model, batch) < 1e-5);
    const auto small = random_model(2, 2, {4, 3, 5}, 10);
    CHECK(mdn_gradient_check(small, random_batch(2, 10, 11)) < 1e-5);
}

TEST_CASE("nll is invariant under relabeling components") {
    const std::size_t K = 3;
    const auto model = random_model(4, K, {10}, 12);
    const auto batch = random_batch(4, 25, 13);
    const std::vector<std::size_t> perm{2, 0, 1};
    auto permuted = model;
    auto& head = permuted.net.layers().back();
    const auto& orig = model.net.layers().back();
    for (std::size_t block = 0; block < 3; ++block) {
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t dst = block * K + k, src = block * K + perm[k];
            for (std::size_t c = 0; c < head.cols; ++c) head.w(dst, c) = orig.w(src, c);
            head.bias[dst] = orig.bias[src];
        }
    }
    CHECK(nll_loss(permuted, batch) == doctest::Approx(nll_loss(model, batch)).epsilon(1e-13));
}

TEST_CASE("head bias initialization spreads means over label quantiles") {
    auto model = random_model(1, 3, {4}, 14);
    std::vector<double> labels;
    for (int i = 0; i <= 100; ++i) labels.push_back(i);
    init_head_bias(model, labels);
    const auto& b = model.net.layers().back().bias;
    CHECK(b[6] == 25.0);
    CHECK(b[7] == 50.0);
    CHECK(b[8] == 75.0);
    CHECK(b[0] == 0.0);
    CHECK(b[3] == doctest::Approx(std::log(std::sqrt(850.0))).epsilon(1e-12));
}

TEST_CASE("training recovers a bimodal target") {
    const auto train = synthetic(3000, 15, coin);
    const auto val = synthetic(500, 16, coin);
    auto model = random_model(1, 2, {8}, 17);
    init_head_bias(model, train.labels());
    TrainConfig cfg;
    cfg.learning_rate = 5e-3;
    cfg.max_epochs = 150;
    cfg.patience = 20;
    cfg.clip_norm = 10.0;
    const auto r = train_mdn(model, train, val, cfg);
    CHECK(r.history.best_val_loss <= r.history.initial_val_loss);
    for (double x : {-1.5, -0.5, 0.0, 0.7, 1.4}) {
        const auto m = mdn_forward(r.model, std::vector<double>{x});
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(std::abs(m.means()[k]) >= 0.8);
            CHECK(std::abs(m.means()[k]) <= 1.2);
            CHECK(m.weights()[k] >= 0.4);
            CHECK(m.weights()[k] <= 0.6);
        }
        CHECK(m.means()[0] * m.means()[1] < 0.0);
    }
}

TEST_CASE("training tracks a unimodal conditional mean") {
    const auto train = synthetic(4000, 18, smooth);
    const auto val = synthetic(500, 19, smooth);
    auto model = random_model(1, 3, {16, 16}, 20);
    init_head_bias(model, train.labels());
    TrainConfig cfg;
    cfg.learning_rate = 3e-3;
    cfg.max_epochs = 150;
    cfg.patience = 15;
    cfg.clip_norm = 10.0;
    const auto r = train_mdn(model, train, val, cfg);
    for (double x = -1.5; x <= 1.5; x += 0.25) {
        const std::vector<double> in{x};
        CHECK(std::abs(predict_mmse(r.model, in) - smooth_mean(x)) < 0.1);
        CHECK(predict_mmse(r.model, in) == doctest::Approx(predict_distribution(r.model, in).mean()).epsilon(1e-12));
    }
}

TEST_CASE("K=1 with pinned large sigma behaves like least squares") {
    const auto train = synthetic(3000, 21, smooth);
    const auto val = synthetic(400, 22, smooth);
    const auto test = synthetic(1000, 23, smooth);
    TrainConfig cfg;
    cfg.max_epochs = 60;
    cfg.patience = 60;
    cfg.learning_rate = 3e-3;

    RandomStream rng(24, StreamId::weight_init);
    const auto mse = train_mse(init_network({1, 16, 16, 1}, Activation::tanh, Activation::identity, rng), train, val, cfg);

    MdnArchitecture arch;
    arch.hidden = {16, 16};
    arch.K = 1;
    RandomStream rng2(24, StreamId::weight_init);
    auto model = make_mdn(1, arch, rng2);
    auto& head = model.net.layers().back();
    for (std::size_t c = 0; c < head.cols; ++c) head.w(1, c) = 0.0;
    head.bias[1] = 0.0;  // sigma = 1 + floor, held fixed below
    const double sigma = model.sigma_floor + 1.0;

    // Drop the sigma-row gradient so Adam never moves it. The mean gradient is
    // rescaled by 2 sigma^2 to line up with the squared-error objective.
    const auto& samples = train.samples();
    ForwardCache cache;
    std::vector<double> up(3);
    BatchObjective objective = [&](const Network& n, std::span<const std::size_t> batch, Gradients& grads) {
        double loss = 0.0;
        for (std::size_t i : batch) {
            forward(n, samples[i].features, cache);
            loss += nll_head(cache.output, samples[i].label, 1, model.sigma_floor, up);
            up[1] = 0.0;
            up[2] *= 2.0 * sigma * sigma;
            backward(n, cache, up, grads);
        }
        return loss;
    };
    ValidationLoss validation = [&](const Network& n) {
        MdnModel probe = model;
        probe.net = n;
        return nll_loss(probe, val) / static_cast<double>(val.size());
    };
    fit(model.net, train.size(), objective, validation, cfg);

    std::vector<double> p_mse, p_mdn;
    for (const auto& s : test.samples()) {
        p_mse.push_back(forward(mse.net, s.features).output[0]);
        p_mdn.push_back(mdn_forward(model, s.features).mean());
        CHECK(mdn_forward(model, s.features).stds()[0] == sigma);
    }
    const auto labels = test.labels();
    const double a = ase(p_mse, labels), b = ase(p_mdn, labels);
    CHECK(std::abs(a - b) < 0.05 * a);
}

TEST_CASE("mdn json round-trip") {
    auto model = random_model(3, 3, {5, 4}, 25);
    model.standardizer.mean = {1.0, 2.0, 3.0};
    model.standardizer.std = {1.0, 0.5, 2.0};
    model.standardizer.degenerate = {false, false, false};
    nlohmann::json j;
    to_json(j, model);
    CHECK(j.at("head").at("type") == "mdn");
    CHECK(j.at("head").at("K") == 3);
    CHECK(j.at("head").contains("weights"));
    CHECK(j.at("head").contains("bias"));
    const auto back = mdn_model_from_json(j);
    const std::vector<double> x{0.1, 5.0, -2.0};
    const auto a = predict_distribution(model, x), b = predict_distribution(back, x);
    CHECK(a.weights() == b.weights());
    CHECK(a.means() == b.means());
    CHECK(a.stds() == b.stds());
}

TEST_CASE("train_mdn rejects an empty training set") {
    auto model = random_model(1, 2, {4}, 26);
    CHECK_THROWS(train_mdn(model, Dataset(1), Dataset(1), TrainConfig{}));
}
