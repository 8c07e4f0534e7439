#include "qdelay/analytic.hpp"

#include <cmath>
#include <stdexcept>

namespace qdelay {
namespace {

void check_window(double t, double w_hol) {
    if (!(w_hol >= 0.0)) throw std::invalid_argument("HolPredictor: w_hol must be >= 0");
    if (!(t >= w_hol)) throw std::invalid_argument("HolPredictor: t must be >= w_hol");
}

}  // namespace

HolPredictor::HolPredictor(ArrivalProcess arrival_, double mu_, int servers_)
    : arrival(std::move(arrival_)), mu(mu_), servers(servers_) {
    validate(arrival);
    if (!(mu > 0.0)) throw std::invalid_argument("HolPredictor: mu must be > 0");
    if (servers < 1) throw std::invalid_argument("HolPredictor: servers must be >= 1");
}

double HolPredictor::conditional_mean(double t, double w_hol) const {
    check_window(t, w_hol);
    const double expected = cumulative_rate(arrival, t - w_hol, t);
    return (expected + 2.0) / (mu * servers);
}

double HolPredictor::conditional_variance(double t, double w_hol) const {
    check_window(t, w_hol);
    if (!is_poisson_family(arrival)) {
        throw std::invalid_argument("HolPredictor: conditional variance requires Poisson-family arrivals");
    }
    const double expected = cumulative_rate(arrival, t - w_hol, t);
    const double rate = mu * servers;
    return (2.0 * expected + 2.0) / (rate * rate);
}

GaussianMixture HolPredictor::normal_approx(double t, double w_hol) const {
    return GaussianMixture::normal(conditional_mean(t, w_hol), std::sqrt(conditional_variance(t, w_hol)));
}

}  // namespace qdelay
