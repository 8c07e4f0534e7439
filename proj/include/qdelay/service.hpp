#pragma once

#include <string>
#include <variant>

#include "json.hpp"

#include "qdelay/random.hpp"

namespace qdelay {

struct Exponential {
    double rate = 1.0;
};

struct Lognormal {
    double log_mean = 0.0;
    double log_std = 1.0;
};

struct Hyperexponential2 {
    double p = 0.5;
    double rate1 = 1.0;
    double rate2 = 1.0;
};

/// Service-time law. Immutable value; share freely.
using ServiceDistribution = std::variant<Exponential, Lognormal, Hyperexponential2>;

struct Moments {
    double mean = 0.0;
    double cv = 0.0;
};

/// Throws std::invalid_argument if parameters violate the law's constraints.
void validate(const ServiceDistribution& dist);

double sample_service(const ServiceDistribution& dist, RandomStream& stream);

/// Exact first two moments, reported as (mean, coefficient of variation).
Moments moments(const ServiceDistribution& dist);

/// Service rate 1 / E[S].
inline double service_rate(const ServiceDistribution& dist) { return 1.0 / moments(dist).mean; }

/// Lognormal with the requested mean and cv (both > 0).
ServiceDistribution fit_lognormal(double mean, double cv);

/// Two-branch hyperexponential with balanced means (each branch carries half
/// the load). Requires cv > 1.
ServiceDistribution fit_h2_balanced(double mean, double cv);

std::string describe(const ServiceDistribution& dist);

void to_json(nlohmann::json& j, const ServiceDistribution& dist);

}  // namespace qdelay
