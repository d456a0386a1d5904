#pragma once

#include <cstdint>
#include <limits>

namespace sei {

/// Purposes keep streams that share a root seed from overlapping.
enum class StreamPurpose : std::uint64_t {
    Baseline = 1,
    Noise = 2,
    SubsampleStart = 3,
    Confusion = 4,
    TrainSplit = 5,
    ValSplit = 6,
    TestSplit = 7,
    TrialCase = 8,
    TrainShuffle = 9,
    Identify = 10,
    ModelInit = 11,
};

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based generator (SplitMix64 over a hashed key). A stream is fully
/// determined by (seed, purpose, index...), so draws can be evaluated in any
/// order or in parallel without shared state.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit constexpr CounterRng(std::uint64_t key) noexcept : state_(mix64(key)) {}

    static constexpr CounterRng keyed(std::uint64_t seed, StreamPurpose purpose,
                                      std::uint64_t a = 0, std::uint64_t b = 0) noexcept {
        std::uint64_t k = mix64(seed);
        k = mix64(k ^ static_cast<std::uint64_t>(purpose));
        k = mix64(k ^ a);
        k = mix64(k ^ (b + 0x632be59bd9b4e019ULL));
        return CounterRng(k);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound) by rejection; bound must be > 0.
    constexpr std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t limit = max() - max() % bound;
        std::uint64_t r = (*this)();
        while (r >= limit) r = (*this)();
        return r % bound;
    }

private:
    std::uint64_t state_;
};

}  // namespace sei
