#include "qdelay/arrivals.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace qdelay {
namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double two_pi = 2.0 * std::numbers::pi;

// Number of deterministic arrivals per ON window: offsets j / on_rate with
// j / on_rate < duty * cycle. The product is usually an integer in exact
// arithmetic, so allow for rounding on either side.
double arrivals_per_window(const DeterministicOnOff& p) {
    const double x = p.duty * p.cycle * p.on_rate;
    const double nearest = std::round(x);
    if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, x)) return nearest;
    return std::ceil(x);
}

double on_time_before(const DeterministicOnOff& p, double t) {
    const double k = std::floor(t / p.cycle);
    const double within = t - k * p.cycle;
    return k * p.duty * p.cycle + std::min(within, p.duty * p.cycle);
}

double next_deterministic_on_off(const DeterministicOnOff& p, double now) {
    const double per_window = arrivals_per_window(p);
    double k = std::floor(now / p.cycle);
    double j = std::floor((now - k * p.cycle) * p.on_rate);
    if (j < 0.0) j = 0.0;
    for (;;) {
        if (j >= per_window) {
            k += 1.0;
            j = 0.0;
        }
        const double t = k * p.cycle + j / p.on_rate;
        if (t > now) return t;
        j += 1.0;
    }
}

double next_poisson_on_off(const DeterministicOnOff& p, double now, RandomStream& gaps) {
    const double on_len = p.duty * p.cycle;
    double t = now;
    for (;;) {
        const double window_start = std::floor(t / p.cycle) * p.cycle;
        const double window_end = window_start + on_len;
        if (t >= window_end) {
            // OFF window; memorylessness lets the clock jump to the next opening.
            t = window_start + p.cycle;
            continue;
        }
        const double candidate = t + gaps.exponential(p.on_rate);
        if (candidate >= window_end) {
            t = window_end;
            continue;
        }
        if (candidate > now) return candidate;
        t = candidate;
    }
}

}  // namespace

void validate(const ArrivalProcess& proc) {
    std::visit(overloaded{
                   [](const HomogeneousPoisson& p) {
                       if (!(p.rate > 0.0)) throw std::invalid_argument("poisson arrivals: rate must be > 0");
                   },
                   [](const SinusoidalNhpp& p) {
                       if (!(p.lambda_bar > 0.0)) throw std::invalid_argument("sinusoidal arrivals: lambda_bar must be > 0");
                       if (!(p.alpha >= 0.0 && p.alpha < 1.0)) throw std::invalid_argument("sinusoidal arrivals: alpha must lie in [0, 1)");
                       if (!(p.period > 0.0)) throw std::invalid_argument("sinusoidal arrivals: period must be > 0");
                   },
                   [](const DeterministicOnOff& p) {
                       if (!(p.cycle > 0.0)) throw std::invalid_argument("on-off arrivals: cycle must be > 0");
                       if (!(p.duty > 0.0 && p.duty <= 1.0)) throw std::invalid_argument("on-off arrivals: duty must lie in (0, 1]");
                       if (!(p.on_rate > 0.0)) throw std::invalid_argument("on-off arrivals: on_rate must be > 0");
                   },
               },
               proc);
}

double rate_at(const ArrivalProcess& proc, double t) {
    return std::visit(overloaded{
                          [](const HomogeneousPoisson& p) { return p.rate; },
                          [t](const SinusoidalNhpp& p) { return p.lambda_bar * (1.0 + p.alpha * std::sin(two_pi * t / p.period)); },
                          [t](const DeterministicOnOff& p) {
                              const double within = t - std::floor(t / p.cycle) * p.cycle;
                              return within < p.duty * p.cycle ? p.on_rate : 0.0;
                          },
                      },
                      proc);
}

double mean_rate(const ArrivalProcess& proc) {
    return std::visit(overloaded{
                          [](const HomogeneousPoisson& p) { return p.rate; },
                          [](const SinusoidalNhpp& p) { return p.lambda_bar; },
                          [](const DeterministicOnOff& p) { return p.on_rate * p.duty; },
                      },
                      proc);
}

bool is_poisson_family(const ArrivalProcess& proc) {
    if (const auto* p = std::get_if<DeterministicOnOff>(&proc)) return p->pattern == OnPattern::poisson;
    return true;
}

double next_arrival(const ArrivalProcess& proc, double now, RandomStream& gaps, RandomStream& thinning) {
    if (now < 0.0) throw std::invalid_argument("next_arrival: now must be >= 0");
    return std::visit(overloaded{
                          [&](const HomogeneousPoisson& p) {
                              double t = now + gaps.exponential(p.rate);
                              // A vanishingly small gap can round back onto `now`.
                              while (!(t > now)) t = now + gaps.exponential(p.rate);
                              return t;
                          },
                          [&](const SinusoidalNhpp& p) {
                              const double envelope = p.lambda_bar * (1.0 + p.alpha);
                              double t = now;
                              for (;;) {
                                  t += gaps.exponential(envelope);
                                  const double accept = rate_at(proc, t) / envelope;
                                  if (thinning.uniform() <= accept && t > now) return t;
                              }
                          },
                          [&](const DeterministicOnOff& p) {
                              return p.pattern == OnPattern::deterministic ? next_deterministic_on_off(p, now)
                                                                          : next_poisson_on_off(p, now, gaps);
                          },
                      },
                      proc);
}

double cumulative_rate(const ArrivalProcess& proc, double t0, double t1) {
    if (t0 > t1) throw std::invalid_argument("cumulative_rate: t0 must not exceed t1");
    if (t0 == t1) return 0.0;
    return std::visit(overloaded{
                          [&](const HomogeneousPoisson& p) { return p.rate * (t1 - t0); },
                          [&](const SinusoidalNhpp& p) {
                              const double amplitude = p.lambda_bar * p.alpha * p.period / two_pi;
                              return p.lambda_bar * (t1 - t0) +
                                     amplitude * (std::cos(two_pi * t0 / p.period) - std::cos(two_pi * t1 / p.period));
                          },
                          [&](const DeterministicOnOff& p) {
                              return p.on_rate * (on_time_before(p, t1) - on_time_before(p, t0));
                          },
                      },
                      proc);
}

std::string describe(const ArrivalProcess& proc) {
    std::ostringstream os;
    os.precision(6);
    std::visit(overloaded{
                   [&](const HomogeneousPoisson& p) { os << "Poisson(rate=" << p.rate << ")"; },
                   [&](const SinusoidalNhpp& p) {
                       os << "SinusoidalNHPP(lambda_bar=" << p.lambda_bar << ", alpha=" << p.alpha << ", period=" << p.period << ")";
                   },
                   [&](const DeterministicOnOff& p) {
                       os << "OnOff(cycle=" << p.cycle << ", duty=" << p.duty << ", on_rate=" << p.on_rate << ", pattern="
                          << (p.pattern == OnPattern::deterministic ? "deterministic" : "poisson") << ")";
                   },
               },
               proc);
    return os.str();
}

void to_json(nlohmann::json& j, const ArrivalProcess& proc) {
    std::visit(overloaded{
                   [&](const HomogeneousPoisson& p) { j = {{"type", "poisson"}, {"rate", p.rate}}; },
                   [&](const SinusoidalNhpp& p) {
                       j = {{"type", "sinusoidal"}, {"lambda_bar", p.lambda_bar}, {"alpha", p.alpha}, {"period", p.period}};
                   },
                   [&](const DeterministicOnOff& p) {
                       j = {{"type", "onoff"},
                            {"cycle", p.cycle},
                            {"duty", p.duty},
                            {"on_rate", p.on_rate},
                            {"pattern", p.pattern == OnPattern::deterministic ? "deterministic" : "poisson"}};
                   },
               },
               proc);
}

}  // namespace qdelay
