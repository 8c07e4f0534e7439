#pragma once

#include "qdelay/arrivals.hpp"
#include "qdelay/mixture.hpp"

namespace qdelay {

/// Normal approximation of the wait of a customer arriving at t while the
/// head of the queue has already waited w_hol, in an M_t/GI/c system.
///
/// The delay is the time for (arrivals since the head joined) + 2 service
/// completions at rate mu * c, so
///   mean     = (Lambda + 2) / (mu c)
///   variance = (Lambda + Var[A] + 2) / (mu c)^2
/// with Lambda the expected arrivals in [t - w_hol, t]. Only Poisson-family
/// arrivals are supported for the variance, where Var[A] = Lambda.
struct HolPredictor {
    ArrivalProcess arrival;
    double mu = 1.0;
    int servers = 1;

    HolPredictor(ArrivalProcess arrival, double mu, int servers);

    double conditional_mean(double t, double w_hol) const;
    double conditional_variance(double t, double w_hol) const;
    GaussianMixture normal_approx(double t, double w_hol) const;
};

}  // namespace qdelay
