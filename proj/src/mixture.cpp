#include "qdelay/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "qdelay/error.hpp"

namespace qdelay {
namespace {

constexpr double log_sqrt_two_pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

// Finds x in [lo, hi] with f(x) = target for nondecreasing f by bisection,
// running until the bracket can no longer shrink.
template <class F>
double bisect(F f, double target, double lo, double hi) {
    for (int iter = 0; iter < 2000; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (f(mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return std::abs(f(lo) - target) <= std::abs(f(hi) - target) ? lo : hi;
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0); }

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<double> means, std::vector<double> stds)
    : weights_(std::move(weights)), means_(std::move(means)), stds_(std::move(stds)) {
    if (weights_.empty()) throw std::invalid_argument("GaussianMixture: at least one component is required");
    if (weights_.size() != means_.size() || weights_.size() != stds_.size()) {
        throw std::invalid_argument("GaussianMixture: weights, means and stds differ in length");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        if (!(weights_[k] > 0.0 && weights_[k] <= 1.0)) throw std::invalid_argument("GaussianMixture: weights must lie in (0, 1]");
        if (!std::isfinite(means_[k])) throw std::invalid_argument("GaussianMixture: means must be finite");
        if (!(stds_[k] > 0.0) || !std::isfinite(stds_[k])) throw std::invalid_argument("GaussianMixture: stds must be > 0");
        total += weights_[k];
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("GaussianMixture: weights must sum to 1");
}

double GaussianMixture::pdf(double w) const {
    double density = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
        const double z = (w - means_[k]) / stds_[k];
        density += weights_[k] * std::exp(-0.5 * z * z - log_sqrt_two_pi) / stds_[k];
    }
    return density;
}

double GaussianMixture::log_pdf(double w) const {
    std::vector<double> terms(size());
    for (std::size_t k = 0; k < size(); ++k) {
        const double z = (w - means_[k]) / stds_[k];
        terms[k] = std::log(weights_[k]) - 0.5 * z * z - log_sqrt_two_pi - std::log(stds_[k]);
    }
    const double top = *std::max_element(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - top);
    return top + std::log(sum);
}

double GaussianMixture::cdf(double w) const {
    double p = 0.0;
    for (std::size_t k = 0; k < size(); ++k) p += weights_[k] * normal_cdf((w - means_[k]) / stds_[k]);
    return std::clamp(p, 0.0, 1.0);
}

double GaussianMixture::mean() const {
    double m = 0.0;
    for (std::size_t k = 0; k < size(); ++k) m += weights_[k] * means_[k];
    return m;
}

double GaussianMixture::variance() const {
    const double m = mean();
    // Centered form avoids cancellation when the means are large.
    double v = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
        const double d = means_[k] - m;
        v += weights_[k] * (stds_[k] * stds_[k] + d * d);
    }
    return v;
}

double GaussianMixture::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile: p must lie in (0, 1)");
    double lo = means_[0] - 10.0 * stds_[0];
    double hi = means_[0] + 10.0 * stds_[0];
    double spread = stds_[0];
    for (std::size_t k = 1; k < size(); ++k) {
        lo = std::min(lo, means_[k] - 10.0 * stds_[k]);
        hi = std::max(hi, means_[k] + 10.0 * stds_[k]);
        spread = std::max(spread, stds_[k]);
    }
    while (cdf(lo) > p) lo -= 10.0 * spread;
    while (cdf(hi) < p) hi += 10.0 * spread;
    return bisect([this](double w) { return cdf(w); }, p, lo, hi);
}

double GaussianMixture::sample(RandomStream& stream) const {
    const double u = stream.uniform();
    double acc = 0.0;
    std::size_t k = 0;
    for (; k + 1 < size(); ++k) {
        acc += weights_[k];
        if (u < acc) break;
    }
    return means_[k] + stds_[k] * stream.normal();
}

Bounds bounds(const GaussianMixture& m, double eps_ub, double eps_lb) {
    if (!(eps_ub > 0.0 && eps_ub < 1.0) || !(eps_lb > 0.0 && eps_lb < 1.0)) {
        throw std::invalid_argument("bounds: violation probabilities must lie in (0, 1)");
    }
    if (!(eps_ub + eps_lb < 1.0)) throw std::invalid_argument("bounds: eps_ub + eps_lb must be < 1");
    return {m.quantile(eps_lb), m.quantile(1.0 - eps_ub)};
}

double confidence_interval(const GaussianMixture& m, double p_cl) {
    if (!(p_cl > 0.0 && p_cl < 1.0)) throw std::invalid_argument("confidence_interval: p_cl must lie in (0, 1)");
    const double center = m.mean();
    auto coverage = [&](double x) { return m.cdf(center + x) - m.cdf(center - x); };
    double hi = 10.0 * std::sqrt(m.variance());
    while (coverage(hi) < p_cl) hi *= 2.0;
    return bisect(coverage, p_cl, 0.0, hi);
}

void to_json(nlohmann::json& j, const GaussianMixture& m) {
    j = {{"weights", m.weights()}, {"means", m.means()}, {"stds", m.stds()}};
}

GaussianMixture mixture_from_json(const nlohmann::json& j) {
    try {
        return GaussianMixture(j.at("weights").get<std::vector<double>>(), j.at("means").get<std::vector<double>>(),
                               j.at("stds").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("mixture JSON: ") + e.what());
    }
}

}  // namespace qdelay
