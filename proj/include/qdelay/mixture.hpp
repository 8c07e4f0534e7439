#pragma once

#include <cstddef>
#include <vector>

#include "json.hpp"

#include "qdelay/random.hpp"

namespace qdelay {

/// Univariate Gaussian mixture sum_k w_k N(mean_k, std_k^2).
///
/// Construction enforces the invariants: equal-length non-empty vectors,
/// weights in (0, 1] summing to 1 within 1e-12, strictly positive stds.
class GaussianMixture {
public:
    GaussianMixture(std::vector<double> weights, std::vector<double> means, std::vector<double> stds);

    static GaussianMixture normal(double mean, double std) { return GaussianMixture({1.0}, {mean}, {std}); }

    std::size_t size() const noexcept { return weights_.size(); }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<double>& means() const noexcept { return means_; }
    const std::vector<double>& stds() const noexcept { return stds_; }

    double pdf(double w) const;
    /// Log-sum-exp over components; finite far into the tails.
    double log_pdf(double w) const;
    double cdf(double w) const;

    double mean() const;
    double variance() const;

    /// The w with cdf(w) = p, for p in (0, 1).
    double quantile(double p) const;

    double sample(RandomStream& stream) const;

private:
    std::vector<double> weights_;
    std::vector<double> means_;
    std::vector<double> stds_;
};

/// Standard normal CDF.
double normal_cdf(double z);

struct Bounds {
    double lower = 0.0;
    double upper = 0.0;
};

/// Probabilistic bounds: P(W > upper) = eps_ub and P(W < lower) = eps_lb.
Bounds bounds(const GaussianMixture& m, double eps_ub, double eps_lb);

/// Half-width x with P(mean - x < W < mean + x) = p_cl.
double confidence_interval(const GaussianMixture& m, double p_cl);

void to_json(nlohmann::json& j, const GaussianMixture& m);
GaussianMixture mixture_from_json(const nlohmann::json& j);

}  // namespace qdelay
