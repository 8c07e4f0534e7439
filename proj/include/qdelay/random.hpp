#pragma once

#include <cstdint>
#include <random>

namespace qdelay {

/// Named stream identifiers. Each consumer of randomness draws from its own
/// stream so that changing one part of a pipeline does not perturb the others.
enum class StreamId : std::uint32_t {
    arrivals = 1,
    services = 2,
    thinning = 3,
    weight_init = 4,
    shuffling = 5,
    user = 100,
};

/// Seeded, reproducible source of variates.
///
/// The underlying engine is std::mt19937_64, whose output sequence is fixed by
/// the standard. All transforms to uniform/normal/exponential variates are done
/// here rather than through <random> distributions, whose algorithms are
/// implementation-defined, so sequences are identical across toolchains.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint32_t stream_id);
    RandomStream(std::uint64_t seed, StreamId id)
        : RandomStream(seed, static_cast<std::uint32_t>(id)) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint32_t stream_id() const noexcept { return stream_id_; }

    /// Raw 64-bit output.
    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform();

    /// Standard normal (Box-Muller, second variate cached).
    double normal();

    /// Exponential with the given rate (> 0).
    double exponential(double rate);

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::uint64_t seed_;
    std::uint32_t stream_id_;
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

}  // namespace qdelay
