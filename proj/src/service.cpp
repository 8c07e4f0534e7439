#include "qdelay/service.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace qdelay {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void validate(const ServiceDistribution& dist) {
    std::visit(overloaded{
                   [](const Exponential& d) {
                       if (!(d.rate > 0.0)) throw std::invalid_argument("exponential service: rate must be > 0");
                   },
                   [](const Lognormal& d) {
                       if (!std::isfinite(d.log_mean)) throw std::invalid_argument("lognormal service: log_mean must be finite");
                       if (!(d.log_std > 0.0)) throw std::invalid_argument("lognormal service: log_std must be > 0");
                   },
                   [](const Hyperexponential2& d) {
                       if (!(d.p > 0.0 && d.p < 1.0)) throw std::invalid_argument("h2 service: p must lie in (0, 1)");
                       if (!(d.rate1 > 0.0 && d.rate2 > 0.0)) throw std::invalid_argument("h2 service: rates must be > 0");
                   },
               },
               dist);
}

double sample_service(const ServiceDistribution& dist, RandomStream& stream) {
    return std::visit(overloaded{
                          [&](const Exponential& d) { return stream.exponential(d.rate); },
                          [&](const Lognormal& d) { return std::exp(d.log_mean + d.log_std * stream.normal()); },
                          [&](const Hyperexponential2& d) {
                              const double branch = stream.uniform();
                              return stream.exponential(branch < d.p ? d.rate1 : d.rate2);
                          },
                      },
                      dist);
}

Moments moments(const ServiceDistribution& dist) {
    return std::visit(overloaded{
                          [](const Exponential& d) { return Moments{1.0 / d.rate, 1.0}; },
                          [](const Lognormal& d) {
                              const double s2 = d.log_std * d.log_std;
                              return Moments{std::exp(d.log_mean + 0.5 * s2), std::sqrt(std::expm1(s2))};
                          },
                          [](const Hyperexponential2& d) {
                              const double mean = d.p / d.rate1 + (1.0 - d.p) / d.rate2;
                              const double second = 2.0 * d.p / (d.rate1 * d.rate1) + 2.0 * (1.0 - d.p) / (d.rate2 * d.rate2);
                              const double scv = second / (mean * mean) - 1.0;
                              return Moments{mean, std::sqrt(scv)};
                          },
                      },
                      dist);
}

ServiceDistribution fit_lognormal(double mean, double cv) {
    if (!(mean > 0.0)) throw std::invalid_argument("fit_lognormal: mean must be > 0");
    if (!(cv > 0.0)) throw std::invalid_argument("fit_lognormal: cv must be > 0");
    const double s2 = std::log1p(cv * cv);
    return Lognormal{std::log(mean) - 0.5 * s2, std::sqrt(s2)};
}

ServiceDistribution fit_h2_balanced(double mean, double cv) {
    if (!(mean > 0.0)) throw std::invalid_argument("fit_h2_balanced: mean must be > 0");
    if (!(cv > 1.0)) {
        throw std::invalid_argument("fit_h2_balanced: hyperexponential requires cv > 1 (squared cv > 1), got cv = " +
                                    std::to_string(cv));
    }
    const double c2 = cv * cv;
    const double p = 0.5 * (1.0 + std::sqrt((c2 - 1.0) / (c2 + 1.0)));
    return Hyperexponential2{p, 2.0 * p / mean, 2.0 * (1.0 - p) / mean};
}

std::string describe(const ServiceDistribution& dist) {
    std::ostringstream os;
    os.precision(6);
    std::visit(overloaded{
                   [&](const Exponential& d) { os << "Exponential(rate=" << d.rate << ")"; },
                   [&](const Lognormal& d) { os << "Lognormal(log_mean=" << d.log_mean << ", log_std=" << d.log_std << ")"; },
                   [&](const Hyperexponential2& d) {
                       os << "H2(p=" << d.p << ", rate1=" << d.rate1 << ", rate2=" << d.rate2 << ")";
                   },
               },
               dist);
    return os.str();
}

void to_json(nlohmann::json& j, const ServiceDistribution& dist) {
    std::visit(overloaded{
                   [&](const Exponential& d) { j = {{"type", "exponential"}, {"rate", d.rate}}; },
                   [&](const Lognormal& d) { j = {{"type", "lognormal"}, {"log_mean", d.log_mean}, {"log_std", d.log_std}}; },
                   [&](const Hyperexponential2& d) {
                       j = {{"type", "h2"}, {"p", d.p}, {"rate1", d.rate1}, {"rate2", d.rate2}};
                   },
               },
               dist);
}

}  // namespace qdelay
