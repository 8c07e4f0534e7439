#include "qdelay/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qdelay {
namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_engine_seed(std::uint64_t seed, std::uint32_t stream_id) {
    std::uint64_t state = seed;
    std::uint64_t a = splitmix64(state);
    state ^= (static_cast<std::uint64_t>(stream_id) << 32) | 0x5bd1e995ULL;
    std::uint64_t b = splitmix64(state);
    return a ^ (b * 0xff51afd7ed558ccdULL);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint32_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(derive_engine_seed(seed, stream_id)) {
    // Discard a short prefix; nearby mt19937_64 seeds start out correlated.
    engine_.discard(64);
}

double RandomStream::uniform() {
    // 53 random bits, offset by half an ulp so 0 is never produced.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_normal_ = radius * std::sin(angle);
    has_cached_normal_ = true;
    return radius * std::cos(angle);
}

double RandomStream::exponential(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be > 0");
    return -std::log(uniform()) / rate;
}

std::uint64_t RandomStream::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("below: n must be > 0");
    // Lemire-style rejection to avoid modulo bias.
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

}  // namespace qdelay
