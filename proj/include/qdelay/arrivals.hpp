#pragma once

#include <string>
#include <variant>

#include "json.hpp"

#include "qdelay/random.hpp"

namespace qdelay {

struct HomogeneousPoisson {
    double rate = 1.0;
};

/// Poisson arrivals with rate lambda_bar * (1 + alpha * sin(2 pi t / period)).
struct SinusoidalNhpp {
    double lambda_bar = 1.0;
    double alpha = 0.0;
    double period = 1.0;
};

enum class OnPattern { deterministic, poisson };

/// Arrivals only inside ON windows [k*cycle, k*cycle + duty*cycle).
/// Deterministic pattern: one arrival every 1/on_rate starting at the window
/// opening. Poisson pattern: Poisson arrivals at on_rate inside the window.
struct DeterministicOnOff {
    double cycle = 1.0;
    double duty = 1.0;
    double on_rate = 1.0;
    OnPattern pattern = OnPattern::deterministic;
};

using ArrivalProcess = std::variant<HomogeneousPoisson, SinusoidalNhpp, DeterministicOnOff>;

void validate(const ArrivalProcess& proc);

/// Instantaneous rate lambda(t).
double rate_at(const ArrivalProcess& proc, double t);

/// Long-run average rate.
double mean_rate(const ArrivalProcess& proc);

/// True for processes whose counts are Poisson (variance equals mean).
bool is_poisson_family(const ArrivalProcess& proc);

/// First arrival strictly after `now`. Sinusoidal arrivals are generated by
/// thinning: candidates come from `gaps`, acceptance draws from `thinning`.
double next_arrival(const ArrivalProcess& proc, double now, RandomStream& gaps, RandomStream& thinning);

/// Expected number of arrivals in [t0, t1]. Throws if t0 > t1.
double cumulative_rate(const ArrivalProcess& proc, double t0, double t1);

std::string describe(const ArrivalProcess& proc);

void to_json(nlohmann::json& j, const ArrivalProcess& proc);

}  // namespace qdelay
