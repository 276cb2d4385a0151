#pragma once

#include <cstdint>
#include <limits>

namespace rbc {

/// SplitMix64 (Steele, Lea, Flood). Cheap to seed, which matters because the
/// simulator derives an independent stream for every trial, station and node.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

/// Stream tags for the seed split scheme. Every random quantity in a run is
/// drawn from `derive_seed(parent, tag, index)` so that adding a consumer never
/// shifts the draws of another one.
enum class StreamTag : std::uint64_t {
    trial = 1,
    bob = 2,
    alice = 3,
    station = 4,
    commitment = 5,
    fuzz = 6,
};

constexpr std::uint64_t derive_seed(std::uint64_t parent, StreamTag tag, std::uint64_t index = 0) noexcept {
    const auto t = static_cast<std::uint64_t>(tag);
    return SplitMix64::mix(SplitMix64::mix(parent ^ (t * 0xd1b54a32d192ed03ULL)) + index);
}

/// Uniform integer in [0, bound) by rejection; no modulo bias.
template <class URBG>
std::uint64_t uniform_below(URBG& rng, std::uint64_t bound) {
    static_assert(URBG::min() == 0 && URBG::max() == std::numeric_limits<std::uint64_t>::max(),
                  "uniform_below expects a full 64-bit generator");
    if (bound <= 1) return 0;
    // 2^64 mod bound; draws at or above 2^64 - excess would bias the residue.
    const std::uint64_t excess = (std::numeric_limits<std::uint64_t>::max() % bound + 1) % bound;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - excess + 1;
    for (;;) {
        const std::uint64_t x = rng();
        if (excess == 0 || x < limit) return x % bound;
    }
}

template <class URBG>
double uniform01(URBG& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class URBG>
bool bernoulli(URBG& rng, double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform01(rng) < p;
}

}  // namespace rbc
